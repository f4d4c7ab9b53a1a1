//! Max-min SINR beamforming by SINR balancing.
//!
//! Alternates between
//!
//! 1. receive directions: normalized MMSE filters of the dual uplink,
//!    `u_k ~ (I + sum_i q_i h_i h_i^H)^-1 h_k` (noise normalized to one);
//! 2. uplink powers `q` that equalize all uplink SINRs under `sum q = P`.
//!
//! The balanced uplink level is nondecreasing from one pass to the next.
//! After the last pass the downlink powers for the final directions are
//! balanced the same way, which by uplink-downlink duality reaches the same
//! SINR level.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{check_inputs, BeamformerSet, Precoder};
use crate::error::{Error, Result};

/// Max-min SINR beamformer with iteration limit and relative tolerance.
#[derive(Debug, Clone, Copy)]
pub struct MaxMinSinr {
    pub max_iters: usize,
    pub tol: f64,
}

impl Precoder for MaxMinSinr {
    fn name(&self) -> &'static str {
        "maxmin"
    }

    fn precode(&self, effective: &DMatrix<Complex64>, power: f64, noise_power: f64) -> Result<BeamformerSet> {
        maxmin_sinr(effective, power, noise_power, self.max_iters, self.tol).map(|o| o.beams)
    }
}

#[derive(Debug, Clone)]
pub struct MaxMinOutcome {
    pub beams: BeamformerSet,
    /// Smallest downlink SINR achieved by `beams`.
    pub min_sinr: f64,
    pub iterations: usize,
    /// The balanced level changed by less than `tol` (relative) in the last pass.
    pub converged: bool,
}

pub fn maxmin_sinr(
    effective: &DMatrix<Complex64>,
    power: f64,
    noise_power: f64,
    max_iters: usize,
    tol: f64,
) -> Result<MaxMinOutcome> {
    check_inputs(effective, power)?;
    if !(noise_power > 0.0 && noise_power.is_finite()) {
        return Err(Error::domain(
            "noise_power",
            format!("must be positive, got {noise_power}"),
        ));
    }
    if max_iters == 0 {
        return Err(Error::domain("max_iters", "must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("tol", format!("must be positive, got {tol}")));
    }

    // work with unit noise
    let h = effective.map(|z| z / noise_power.sqrt());
    let users = h.ncols();

    let mut uplink = vec![power / users as f64; users];
    let mut best: Option<(f64, DMatrix<Complex64>)> = None;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let directions = mmse_directions(&h, &uplink)?;
        let gains = coupling_gains(&h, &directions);
        let (level, q) = balanced_powers(&gains.transpose(), power);
        let previous = best.as_ref().map(|(l, _)| *l);
        if previous.is_none_or(|p| level >= p) {
            best = Some((level, directions));
        }
        uplink = q;
        if let Some(p) = previous {
            if (level - p).abs() <= tol * level {
                converged = true;
                break;
            }
        }
    }

    let (_, directions) = best.expect("at least one pass");
    let gains = coupling_gains(&h, &directions);
    let (_, downlink) = balanced_powers(&gains, power);
    let mut w = directions;
    for (mut col, p) in w.column_iter_mut().zip(&downlink) {
        col *= Complex64::from(p.sqrt());
    }
    let min_sinr = downlink_sinrs(&gains, &downlink)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(MaxMinOutcome {
        beams: BeamformerSet::new(w, power)?,
        min_sinr,
        iterations,
        converged,
    })
}

/// Unit-norm MMSE directions for uplink powers `q` (unit noise).
fn mmse_directions(h: &DMatrix<Complex64>, q: &[f64]) -> Result<DMatrix<Complex64>> {
    let antennas = h.nrows();
    let mut cov = DMatrix::<Complex64>::identity(antennas, antennas);
    for (col, &qi) in h.column_iter().zip(q) {
        cov += (col * col.adjoint()) * Complex64::from(qi);
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::domain("effective channel", "MMSE covariance is not positive definite"))?;
    let mut u = chol.solve(h);
    for (k, mut col) in u.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::ZeroChannel { user: k });
        }
        col /= Complex64::from(norm);
    }
    Ok(u)
}

/// `gains[(k, i)] = |h_k^H u_i|^2`: power of beam `i` at user `k`.
fn coupling_gains(h: &DMatrix<Complex64>, directions: &DMatrix<Complex64>) -> DMatrix<f64> {
    (h.adjoint() * directions).map(|z| z.norm_sqr())
}

fn downlink_sinrs(gains: &DMatrix<f64>, p: &[f64]) -> Vec<f64> {
    let users = p.len();
    (0..users)
        .map(|k| {
            let interference: f64 = (0..users).filter(|&i| i != k).map(|i| p[i] * gains[(k, i)]).sum();
            p[k] * gains[(k, k)] / (interference + 1.0)
        })
        .collect()
}

/// Powers `p >= 0` with `sum p = total` that equalize
/// `SINR_k = p_k G_kk / (sum_{i != k} p_i G_ki + 1)` across users.
///
/// Returns the common SINR level and the powers. For a target level `g` the
/// minimal powers solve `(I - g D X) p = g D 1` with `D = diag(1/G_kk)` and
/// `X` the off-diagonal part of `G`; a nonnegative solution exists exactly
/// when `g` is below the balanced optimum, so the optimum is found by
/// bisection on `g`. Leftover power is spread proportionally, which only
/// raises every SINR.
pub fn balanced_powers(gains: &DMatrix<f64>, total: f64) -> (f64, Vec<f64>) {
    let users = gains.nrows();
    let diag: Vec<f64> = (0..users).map(|k| gains[(k, k)]).collect();
    if diag.iter().any(|&g| !(g > 0.0)) {
        return (0.0, vec![total / users as f64; users]);
    }

    let solve = |level: f64| -> Option<Vec<f64>> {
        let system = DMatrix::from_fn(users, users, |k, i| {
            if k == i {
                1.0
            } else {
                -level * gains[(k, i)] / diag[k]
            }
        });
        let rhs = DVector::from_iterator(users, diag.iter().map(|g| level / g));
        let p = system.lu().solve(&rhs)?;
        let sum = p.sum();
        (p.iter().all(|&x| x >= 0.0) && sum <= total && sum.is_finite()).then(|| p.iter().copied().collect())
    };

    // single-user SNR with full power bounds the balanced level
    let mut hi = diag.iter().map(|g| g * total).fold(f64::INFINITY, f64::min);
    let mut lo = 0.0;
    let mut powers = vec![0.0; users];
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match solve(mid) {
            Some(p) => {
                lo = mid;
                powers = p;
            }
            None => hi = mid,
        }
    }

    let used: f64 = powers.iter().sum();
    if used > 0.0 {
        let scale = total / used;
        powers.iter_mut().for_each(|p| *p *= scale);
    } else {
        powers = vec![total / users as f64; users];
    }
    let level = downlink_sinrs(gains, &powers).into_iter().fold(f64::INFINITY, f64::min);
    (level, powers)
}
