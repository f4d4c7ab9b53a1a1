//! The alternating loop: element allocation, phase alignment, beamformer
//! update, repeated `V` times and finished with one final beamformer.
//! Also hosts the No-IRS / random-phase baselines and an exhaustive
//! quantized-phase search used as a test oracle.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::allocation::{allocate_elements, assignment_counts, order_users, AllocationMap};
use crate::beamformer::{BeamformerKind, BeamformerSet};
use crate::channel::{check_dim, ChannelSet};
use crate::error::{Error, Result};
use crate::metrics::{direct_gains, own_set_amplitudes, rates, NoiseModel, RateReport};
use crate::phase::{alignment_error, random_phases, update_phases, PhaseConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmConfig {
    /// Number of alternating iterations `V`.
    pub iterations: usize,
    pub intermediate: BeamformerKind,
    pub final_beamformer: BeamformerKind,
    /// Seeds the random initial phases.
    pub seed: u64,
}

impl AlgorithmConfig {
    /// `V = 5`, equal-power RZF between iterations, max-min SINR at the end.
    pub fn reference() -> Self {
        Self {
            iterations: 5,
            intermediate: BeamformerKind::Rzf { delta: None },
            final_beamformer: BeamformerKind::max_min(),
            seed: 0,
        }
    }

    pub fn with_intermediate(self, intermediate: BeamformerKind) -> Self {
        Self { intermediate, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::domain("iterations", "V must be at least 1"));
        }
        self.intermediate.validate()?;
        self.final_beamformer.validate()
    }
}

/// Diagnostics of one alternating iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub allocation_sizes: Vec<usize>,
    /// Largest angular misalignment right after the phase update.
    pub alignment_error: f64,
    /// Per user: aligned bound `|h_d^H w| + sum_{N_k} |g^* h^H w|` and the
    /// amplitude reached through the direct path plus the user's own elements,
    /// both with the beams the phases were aligned to.
    pub own_set_amplitudes: Vec<(f64, f64)>,
    /// Full received signal amplitude `|h_eff,k^H w_k|` with those same beams.
    pub signal_amplitudes: Vec<f64>,
    pub partition_ok: bool,
    pub power_ok: bool,
    /// Rates after the beamformer update that closes the iteration.
    pub rates: RateReport,
}

#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub iterations: Vec<IterationRecord>,
    pub final_rates: RateReport,
    pub final_power_ok: bool,
}

impl IterationTrace {
    /// `V` iterations plus the final beamformer stage.
    pub fn len(&self) -> usize {
        self.iterations.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Min-rate after each iteration followed by the final stage.
    pub fn min_rates(&self) -> Vec<f64> {
        self.iterations
            .iter()
            .map(|r| r.rates.min_rate)
            .chain(std::iter::once(self.final_rates.min_rate))
            .collect()
    }

    pub fn invariants_held(&self) -> bool {
        self.final_power_ok && self.iterations.iter().all(|r| r.partition_ok && r.power_ok)
    }
}

#[derive(Debug, Clone)]
pub struct AlternatingOutcome {
    pub phases: PhaseConfig,
    pub beams: BeamformerSet,
    pub rates: RateReport,
    pub trace: IterationTrace,
}

/// One allocation + phase update pass with the beams held fixed.
#[derive(Debug, Clone)]
pub struct PhaseStep {
    pub allocation: AllocationMap,
    pub phases: PhaseConfig,
}

/// Allocation counts from the direct-path gains, weakest-first ordering,
/// greedy element allocation, then phase alignment.
pub fn allocate_and_align(channels: &ChannelSet, beams: &BeamformerSet, prev: &PhaseConfig) -> Result<PhaseStep> {
    let gains = direct_gains(channels, beams)?;
    let counts = assignment_counts(&gains, channels.dims().irs_elements)?;
    let order = order_users(&counts.alpha);
    let allocation = allocate_elements(channels, beams, &counts, &order)?;
    let phases = update_phases(channels, beams, &allocation, prev)?;
    Ok(PhaseStep { allocation, phases })
}

/// Runs the algorithm from phases drawn with `cfg.seed`.
pub fn run_alternating(
    channels: &ChannelSet,
    cfg: &AlgorithmConfig,
    noise: &NoiseModel,
    power: f64,
) -> Result<AlternatingOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial = random_phases(channels.dims().irs_elements, &mut rng);
    run_alternating_from(channels, cfg, noise, power, initial)
}

/// Runs the algorithm from the given initial phases.
///
/// The initial beams are the intermediate beamformer on the initial
/// effective channel, so the first allocation sees structured beams.
pub fn run_alternating_from(
    channels: &ChannelSet,
    cfg: &AlgorithmConfig,
    noise: &NoiseModel,
    power: f64,
    initial: PhaseConfig,
) -> Result<AlternatingOutcome> {
    cfg.validate()?;
    check_dim("initial phases", channels.dims().irs_elements, initial.len())?;
    let noise_power = noise.noise_power();
    let intermediate = cfg.intermediate.build()?;
    let final_stage = cfg.final_beamformer.build()?;
    let elements = channels.dims().irs_elements;

    let mut phases = initial;
    let mut beams = intermediate.precode(&channels.effective_channels(&phases)?, power, noise_power)?;
    let mut records = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let step = allocate_and_align(channels, &beams, &phases)?;
        let partition_ok = step.allocation.is_complete(elements);
        debug_assert!(partition_ok, "allocation is not a partition");
        let alignment = alignment_error(channels, &beams, &step.allocation, &step.phases);
        let own = own_set_amplitudes(channels, &step.phases, &beams, &step.allocation)?;
        let effective = channels.effective_channels(&step.phases)?;
        let signal_amplitudes = (0..beams.users())
            .map(|k| effective.column(k).dotc(&beams.weights().column(k)).norm())
            .collect();

        phases = step.phases;
        beams = intermediate.precode(&effective, power, noise_power)?;
        let power_ok = beams.satisfies_budget();
        debug_assert!(power_ok, "beamformer exceeds the power budget");
        records.push(IterationRecord {
            allocation_sizes: step.allocation.sizes(),
            alignment_error: alignment,
            own_set_amplitudes: own,
            signal_amplitudes,
            partition_ok,
            power_ok,
            rates: rates(channels, &phases, &beams, noise)?,
        });
    }

    let beams = final_stage.precode(&channels.effective_channels(&phases)?, power, noise_power)?;
    let final_power_ok = beams.satisfies_budget();
    debug_assert!(final_power_ok, "final beamformer exceeds the power budget");
    let final_rates = rates(channels, &phases, &beams, noise)?;
    Ok(AlternatingOutcome {
        phases,
        beams,
        rates: final_rates.clone(),
        trace: IterationTrace {
            iterations: records,
            final_rates,
            final_power_ok,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// IRS removed; beamformer on the direct channels.
    NoIrs,
    /// IRS with random phases; beamformer on the resulting effective channel.
    RandomPhase,
}

/// Rates of a baseline. `RandomPhase` draws its phases from `rng`.
pub fn run_baseline<R: Rng + ?Sized>(
    channels: &ChannelSet,
    baseline: Baseline,
    noise: &NoiseModel,
    power: f64,
    final_beamformer: BeamformerKind,
    rng: &mut R,
) -> Result<RateReport> {
    match baseline {
        Baseline::NoIrs => fixed_phase_rates(
            &channels.without_irs(),
            &PhaseConfig::zeros(0),
            noise,
            power,
            final_beamformer,
        ),
        Baseline::RandomPhase => {
            let phases = random_phases(channels.dims().irs_elements, rng);
            fixed_phase_rates(channels, &phases, noise, power, final_beamformer)
        }
    }
}

/// Rates when `beamformer` is run on the effective channel of fixed `phases`.
pub fn fixed_phase_rates(
    channels: &ChannelSet,
    phases: &PhaseConfig,
    noise: &NoiseModel,
    power: f64,
    beamformer: BeamformerKind,
) -> Result<RateReport> {
    let effective = channels.effective_channels(phases)?;
    let beams = beamformer.build()?.precode(&effective, power, noise.noise_power())?;
    debug_assert!(beams.satisfies_budget());
    rates(channels, phases, &beams, noise)
}

/// Upper limit on `N log2(levels)` for [`brute_force_phase_oracle`].
pub const ORACLE_MAX_BITS: u32 = 24;

/// Exhaustive search over phases `theta_n in {2 pi l / levels}` with the
/// beams held fixed; returns the configuration maximizing the min-rate
/// (lowest enumeration index on ties) and that min-rate.
pub fn brute_force_phase_oracle(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    noise: &NoiseModel,
    levels: usize,
) -> Result<(PhaseConfig, f64)> {
    let dims = channels.dims();
    beams.check_shape(dims.antennas, dims.users)?;
    if levels < 2 {
        return Err(Error::domain("levels", "at least two quantization levels required"));
    }
    let bits = dims.irs_elements as f64 * (levels as f64).log2();
    if bits > ORACLE_MAX_BITS as f64 {
        return Err(Error::SearchSpaceTooLarge {
            levels,
            elements: dims.irs_elements,
            max_bits: ORACLE_MAX_BITS,
        });
    }
    let total = levels.pow(dims.irs_elements as u32);
    let users = dims.users;
    let noise_power = noise.noise_power();

    // amplitudes[k][i] = h_d,k^H w_i + sum_n conj(phi_n) g_nk^* h_n^H w_i
    let base: DMatrix<Complex64> = channels.direct.adjoint() * beams.weights();
    let through = channels.bs_irs.adjoint() * beams.weights();
    // per element n: K x K block of g_{n,k}^* h_n^H w_i
    let blocks: Vec<DMatrix<Complex64>> = (0..dims.irs_elements)
        .map(|n| DMatrix::from_fn(users, users, |k, i| channels.irs_user[(n, k)].conj() * through[(n, i)]))
        .collect();
    let rotations: Vec<Complex64> = (0..levels)
        .map(|l| Complex64::from_polar(1.0, TAU * l as f64 / levels as f64).conj())
        .collect();

    let evaluate = |index: usize| -> f64 {
        let mut amp = base.clone();
        let mut rest = index;
        for block in &blocks {
            let rot = rotations[rest % levels];
            rest /= levels;
            amp += block * rot;
        }
        (0..users)
            .map(|k| {
                let interference: f64 = (0..users).filter(|&i| i != k).map(|i| amp[(k, i)].norm_sqr()).sum();
                amp[(k, k)].norm_sqr() / (interference + noise_power)
            })
            .fold(f64::INFINITY, f64::min)
    };

    let (best_sinr, best_index) = (0..total).into_par_iter().map(|i| (evaluate(i), i)).reduce(
        || (f64::NEG_INFINITY, usize::MAX),
        |a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        },
    );

    let phases = quantized_phases(best_index, dims.irs_elements, levels);
    let min_rate = noise.bandwidth_hz * (1.0 + best_sinr).log2();
    Ok((phases, min_rate))
}

/// Phase configuration number `index` in the oracle's enumeration order
/// (element 0 is the least significant digit).
pub fn quantized_phases(index: usize, elements: usize, levels: usize) -> PhaseConfig {
    let mut rest = index;
    PhaseConfig::from_angles((0..elements).map(|_| {
        let l = rest % levels;
        rest /= levels;
        TAU * l as f64 / levels as f64
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channels, PathlossParams, SystemDims};

    fn instance(m: usize, n: usize, k: usize, seed: u64) -> ChannelSet {
        sample_channels(
            SystemDims::new(m, n, k).unwrap(),
            &PathlossParams::reference(),
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn no_irs_matches_baseline() {
        let cs = instance(4, 0, 2, 1);
        let noise = NoiseModel::reference();
        let out = run_alternating(&cs, &AlgorithmConfig::reference(), &noise, 1.0).unwrap();
        let base = run_baseline(
            &cs,
            Baseline::NoIrs,
            &noise,
            1.0,
            BeamformerKind::max_min(),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert!((out.rates.min_rate - base.min_rate).abs() <= 1e-9 * base.min_rate);
    }

    #[test]
    fn single_user_reaches_triangle_bound() {
        let noise = NoiseModel::reference();
        let cfg = AlgorithmConfig {
            iterations: 1,
            intermediate: BeamformerKind::Mrt,
            ..AlgorithmConfig::reference()
        };
        for seed in 0..20 {
            let cs = instance(4, 16, 1, seed);
            let out = run_alternating(&cs, &cfg, &noise, 1.0).unwrap();
            let rec = &out.trace.iterations[0];
            let (bound, own) = rec.own_set_amplitudes[0];
            assert!((rec.signal_amplitudes[0] - bound).abs() <= 1e-9 * bound);
            assert!((own - bound).abs() <= 1e-9 * bound);
        }
    }

    #[test]
    fn trace_shape_and_invariants() {
        let cs = instance(8, 30, 4, 3);
        let out = run_alternating(&cs, &AlgorithmConfig::reference(), &NoiseModel::reference(), 1.0).unwrap();
        assert_eq!(out.trace.len(), 6);
        assert!(out.trace.invariants_held());
        for rec in &out.trace.iterations {
            assert_eq!(rec.allocation_sizes.iter().sum::<usize>(), 30);
            assert!(rec.alignment_error < 1e-9);
        }
        assert_eq!(out.trace.min_rates().last().copied(), Some(out.rates.min_rate));
    }

    #[test]
    fn deterministic_given_seed() {
        let cs = instance(4, 12, 2, 5);
        let cfg = AlgorithmConfig {
            seed: 42,
            ..AlgorithmConfig::reference()
        };
        let a = run_alternating(&cs, &cfg, &NoiseModel::reference(), 0.1).unwrap();
        let b = run_alternating(&cs, &cfg, &NoiseModel::reference(), 0.1).unwrap();
        assert_eq!(a.phases, b.phases);
        assert_eq!(a.beams, b.beams);
    }

    #[test]
    fn zero_iterations_rejected() {
        let cs = instance(2, 2, 1, 0);
        let cfg = AlgorithmConfig {
            iterations: 0,
            ..AlgorithmConfig::reference()
        };
        assert!(run_alternating(&cs, &cfg, &NoiseModel::reference(), 1.0).is_err());
    }

    #[test]
    fn random_baseline_is_deterministic() {
        let cs = instance(4, 20, 2, 8);
        let noise = NoiseModel::reference();
        let run = |seed| {
            run_baseline(
                &cs,
                Baseline::RandomPhase,
                &noise,
                1.0,
                BeamformerKind::max_min(),
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
            .unwrap()
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn oracle_empty_irs() {
        let cs = instance(2, 0, 2, 2);
        let noise = NoiseModel::reference();
        let beams = crate::beamformer::mrt(&cs.direct, 1.0).unwrap();
        let (phases, min_rate) = brute_force_phase_oracle(&cs, &beams, &noise, 8).unwrap();
        assert!(phases.is_empty());
        let expected = rates(&cs, &phases, &beams, &noise).unwrap().min_rate;
        assert!((min_rate - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn oracle_single_element_rounds_closed_form() {
        let noise = NoiseModel::reference();
        for seed in 0..30 {
            let cs = instance(2, 1, 1, seed);
            let beams = crate::beamformer::mrt(&cs.direct, 1.0).unwrap();
            let (phases, _) = brute_force_phase_oracle(&cs, &beams, &noise, 4).unwrap();
            let aligned = update_phases(&cs, &beams, &AllocationMap::single_user(1), &PhaseConfig::zeros(1)).unwrap();
            let nearest = ((aligned.angles()[0] / (TAU / 4.0)).round() as usize % 4) as f64 * TAU / 4.0;
            assert!((phases.angles()[0] - nearest).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn oracle_is_permutation_invariant() {
        let noise = NoiseModel::reference();
        let cs = instance(2, 4, 2, 11);
        let beams = crate::beamformer::zf(&cs.direct, 1.0).unwrap();
        let (_, a) = brute_force_phase_oracle(&cs, &beams, &noise, 4).unwrap();
        let permuted = cs.permute_elements(&[2, 0, 3, 1]);
        let (_, b) = brute_force_phase_oracle(&permuted, &beams, &noise, 4).unwrap();
        assert!((a - b).abs() <= 1e-9 * a);
    }

    #[test]
    fn oracle_matches_direct_rate_evaluation() {
        let noise = NoiseModel::reference();
        let cs = instance(2, 3, 2, 12);
        let beams = crate::beamformer::zf(&cs.direct, 1.0).unwrap();
        let (phases, best) = brute_force_phase_oracle(&cs, &beams, &noise, 4).unwrap();
        let check = rates(&cs, &phases, &beams, &noise).unwrap().min_rate;
        assert!((best - check).abs() <= 1e-9 * check);
        for idx in 0..64 {
            let other = rates(&cs, &quantized_phases(idx, 3, 4), &beams, &noise)
                .unwrap()
                .min_rate;
            assert!(other <= best * (1.0 + 1e-12));
        }
    }

    #[test]
    fn oracle_rejects_large_search() {
        let cs = instance(2, 9, 1, 0);
        let beams = crate::beamformer::mrt(&cs.direct, 1.0).unwrap();
        assert!(matches!(
            brute_force_phase_oracle(&cs, &beams, &NoiseModel::reference(), 8),
            Err(Error::SearchSpaceTooLarge { .. })
        ));
    }
}
