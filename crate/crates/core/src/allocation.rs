//! IRS element allocation.
//!
//! Each user gets a share of the IRS elements inversely proportional to its
//! direct-path beamforming gain; users are then served weakest-first, each
//! greedily taking the pool elements with the strongest cascaded gain.
//! Ties always resolve to the lowest index.

use std::cmp::Ordering;

use crate::beamformer::BeamformerSet;
use crate::channel::{check_dim, ChannelSet};
use crate::error::{Error, Result};
use crate::metrics::cascaded_terms;

/// Partition of `{0..N}` into per-user sets plus the unallocated pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationMap {
    assigned: Vec<Vec<usize>>,
    pool: Vec<usize>,
}

impl AllocationMap {
    /// Every element in the pool.
    pub fn empty(users: usize, elements: usize) -> Self {
        Self {
            assigned: vec![Vec::new(); users],
            pool: (0..elements).collect(),
        }
    }

    /// All elements owned by the only user.
    pub fn single_user(elements: usize) -> Self {
        Self {
            assigned: vec![(0..elements).collect()],
            pool: Vec::new(),
        }
    }

    /// Build from explicit sets. Fails unless the sets and pool partition `{0..elements}`.
    pub fn from_sets(assigned: Vec<Vec<usize>>, pool: Vec<usize>, elements: usize) -> Result<Self> {
        let map = Self { assigned, pool };
        if !map.is_partition_of(elements) {
            return Err(Error::domain("allocation", "sets do not partition the IRS elements"));
        }
        Ok(map)
    }

    pub fn assigned(&self) -> &[Vec<usize>] {
        &self.assigned
    }

    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    pub fn users(&self) -> usize {
        self.assigned.len()
    }

    pub fn element_count(&self) -> usize {
        self.pool.len() + self.assigned.iter().map(Vec::len).sum::<usize>()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.assigned.iter().map(Vec::len).collect()
    }

    /// Owner of every element, `None` for pooled elements.
    pub fn owners(&self) -> Vec<Option<usize>> {
        let mut owners = vec![None; self.element_count()];
        for (user, set) in self.assigned.iter().enumerate() {
            for &n in set {
                if let Some(slot) = owners.get_mut(n) {
                    *slot = Some(user);
                }
            }
        }
        owners
    }

    /// Disjoint sets whose union is exactly `{0..elements}`.
    pub fn is_partition_of(&self, elements: usize) -> bool {
        let mut seen = vec![false; elements];
        for &n in self.assigned.iter().flatten().chain(&self.pool) {
            match seen.get_mut(n) {
                Some(s) if !*s => *s = true,
                _ => return false,
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Partition with an empty pool.
    pub fn is_complete(&self, elements: usize) -> bool {
        self.pool.is_empty() && self.is_partition_of(elements)
    }
}

/// Per-user element counts.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationCounts {
    /// `alpha_k = 1 / p_k`; `+inf` when `p_k = 0`.
    pub alpha: Vec<f64>,
    /// Element counts after the remainder has been handed out.
    pub counts: Vec<usize>,
    /// The weakest user, which received the remainder.
    pub remainder_recipient: usize,
    pub remainder: usize,
}

impl AllocationCounts {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Splits `elements` among users in proportion to `1 / p_k`, flooring each
/// share and giving the remainder to the weakest user.
///
/// A zero gain makes that user the unique weakest (lowest index among
/// several zeros), and it takes every element.
pub fn assignment_counts(gains: &[f64], elements: usize) -> Result<AllocationCounts> {
    if gains.is_empty() {
        return Err(Error::domain("gains", "at least one user required"));
    }
    if let Some(bad) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(Error::domain(
            "gains",
            format!("must be finite and non-negative, got {bad}"),
        ));
    }

    let alpha: Vec<f64> = gains
        .iter()
        .map(|&p| if p == 0.0 { f64::INFINITY } else { 1.0 / p })
        .collect();
    let weakest = argmax_first(&alpha);

    let mut counts = vec![0; gains.len()];
    if alpha[weakest].is_infinite() {
        counts[weakest] = elements;
        return Ok(AllocationCounts {
            alpha,
            counts,
            remainder_recipient: weakest,
            remainder: elements,
        });
    }

    let total: f64 = alpha.iter().sum();
    for (c, a) in counts.iter_mut().zip(&alpha) {
        // sum of floors <= floor(N * sum of shares) = N
        *c = ((elements as f64) * (a / total)).floor() as usize;
    }
    let remainder = elements - counts.iter().sum::<usize>();
    counts[weakest] += remainder;
    Ok(AllocationCounts {
        alpha,
        counts,
        remainder_recipient: weakest,
        remainder,
    })
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Users sorted by descending `alpha`, stable for ties.
pub fn order_users(alpha: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&a, &b| alpha[b].partial_cmp(&alpha[a]).unwrap_or(Ordering::Equal));
    order
}

/// Greedy per-element allocation.
///
/// Users are served in `order`; user `m` repeatedly moves the pool element
/// maximizing `|g_{n,m}^* h_n^H w_m|` into its set, `counts[m]` times.
pub fn allocate_elements(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    counts: &AllocationCounts,
    order: &[usize],
) -> Result<AllocationMap> {
    let dims = channels.dims();
    check_dim("allocation counts", dims.users, counts.counts.len())?;
    check_dim("user order", dims.users, order.len())?;
    if counts.total() != dims.irs_elements {
        return Err(Error::CountMismatch {
            sum: counts.total(),
            expected: dims.irs_elements,
        });
    }
    let mut seen = vec![false; dims.users];
    for &k in order {
        if k >= dims.users || std::mem::replace(&mut seen[k], true) {
            return Err(Error::domain("order", "must be a permutation of the users"));
        }
    }

    let gains = cascaded_terms(channels, beams)?.map(|z| z.norm());
    Ok(greedy_allocate(&gains, &counts.counts, order))
}

/// Greedy allocation from a precomputed `N x K` gain table.
pub(crate) fn greedy_allocate(gains: &nalgebra::DMatrix<f64>, counts: &[usize], order: &[usize]) -> AllocationMap {
    let elements = gains.nrows();
    let mut map = AllocationMap::empty(counts.len(), elements);
    let mut free = vec![true; elements];
    for &user in order {
        for _ in 0..counts[user] {
            let mut pick: Option<usize> = None;
            for n in (0..elements).filter(|&n| free[n]) {
                if pick.is_none_or(|p| gains[(n, user)] > gains[(p, user)]) {
                    pick = Some(n);
                }
            }
            let n = pick.expect("counts sum to the element count");
            free[n] = false;
            map.assigned[user].push(n);
        }
    }
    map.pool = (0..elements).filter(|&n| free[n]).collect();
    map
}
