//! SINR, rates and the per-element quantities used by allocation and phase update.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::allocation::AllocationMap;
use crate::beamformer::BeamformerSet;
use crate::channel::{check_dim, check_user, ChannelSet};
use crate::error::{Error, Result};
use crate::phase::PhaseConfig;

/// Thermal noise: power spectral density and bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub psd_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
}

impl NoiseModel {
    pub fn new(psd_dbm_per_hz: f64, bandwidth_hz: f64) -> Result<Self> {
        if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
            return Err(Error::domain(
                "bandwidth_hz",
                format!("must be positive, got {bandwidth_hz}"),
            ));
        }
        if !psd_dbm_per_hz.is_finite() {
            return Err(Error::domain("psd_dbm_per_hz", "must be finite"));
        }
        Ok(Self {
            psd_dbm_per_hz,
            bandwidth_hz,
        })
    }

    /// -174 dBm/Hz over 10 MHz.
    pub fn reference() -> Self {
        Self {
            psd_dbm_per_hz: -174.0,
            bandwidth_hz: 1e7,
        }
    }

    /// Noise power `sigma^2 B` in watts.
    pub fn noise_power(&self) -> f64 {
        dbm_to_watts(self.psd_dbm_per_hz) * self.bandwidth_hz
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Per-user SINR and rate (bit/s), plus the minimum rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub sinr: Vec<f64>,
    pub rate: Vec<f64>,
    pub min_rate: f64,
}

impl RateReport {
    pub fn from_sinr(sinr: Vec<f64>, bandwidth_hz: f64) -> Self {
        let rate: Vec<f64> = sinr.iter().map(|&s| bandwidth_hz * (1.0 + s).log2()).collect();
        let min_rate = rate.iter().copied().fold(f64::INFINITY, f64::min);
        Self { sinr, rate, min_rate }
    }

    pub fn min_sinr(&self) -> f64 {
        self.sinr.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `K x K` matrix of received amplitudes `h_eff,k^H w_i` (row `k`, column `i`).
pub fn response_matrix(effective: &DMatrix<Complex64>, beams: &BeamformerSet) -> Result<DMatrix<Complex64>> {
    beams.check_shape(effective.nrows(), effective.ncols())?;
    Ok(effective.adjoint() * beams.weights())
}

/// SINRs from effective channels and beams.
pub fn sinr_from_effective(
    effective: &DMatrix<Complex64>,
    beams: &BeamformerSet,
    noise_power: f64,
) -> Result<Vec<f64>> {
    let resp = response_matrix(effective, beams)?;
    let users = resp.nrows();
    Ok((0..users)
        .map(|k| {
            let signal = resp[(k, k)].norm_sqr();
            let interference: f64 = (0..users).filter(|&i| i != k).map(|i| resp[(k, i)].norm_sqr()).sum();
            signal / (interference + noise_power)
        })
        .collect())
}

/// SINR of user `k` for the given phases and beams.
pub fn sinr(
    channels: &ChannelSet,
    phases: &PhaseConfig,
    beams: &BeamformerSet,
    noise: &NoiseModel,
    user: usize,
) -> Result<f64> {
    check_user(user, channels.dims().users)?;
    let h = channels.effective_channel(phases, user)?;
    beams.check_shape(channels.dims().antennas, channels.dims().users)?;
    let w = beams.weights();
    let signal = h.dotc(&w.column(user)).norm_sqr();
    let interference: f64 = (0..w.ncols())
        .filter(|&i| i != user)
        .map(|i| h.dotc(&w.column(i)).norm_sqr())
        .sum();
    Ok(signal / (interference + noise.noise_power()))
}

/// Per-user rates and the min-rate.
pub fn rates(
    channels: &ChannelSet,
    phases: &PhaseConfig,
    beams: &BeamformerSet,
    noise: &NoiseModel,
) -> Result<RateReport> {
    let effective = channels.effective_channels(phases)?;
    let sinr = sinr_from_effective(&effective, beams, noise.noise_power())?;
    Ok(RateReport::from_sinr(sinr, noise.bandwidth_hz))
}

/// Direct-path beamforming gain `|h_{d,k}^H w_k|`.
pub fn direct_gain(channels: &ChannelSet, beams: &BeamformerSet, user: usize) -> Result<f64> {
    check_user(user, channels.dims().users)?;
    beams.check_shape(channels.dims().antennas, channels.dims().users)?;
    Ok(channels.direct.column(user).dotc(&beams.weights().column(user)).norm())
}

/// `|h_{d,k}^H w_k|` for every user.
pub fn direct_gains(channels: &ChannelSet, beams: &BeamformerSet) -> Result<Vec<f64>> {
    (0..channels.dims().users)
        .map(|k| direct_gain(channels, beams, k))
        .collect()
}

/// `N x K` table of cascaded terms `g_{n,k}^* h_n^H w_k`, phases excluded.
pub fn cascaded_terms(channels: &ChannelSet, beams: &BeamformerSet) -> Result<DMatrix<Complex64>> {
    let dims = channels.dims();
    beams.check_shape(dims.antennas, dims.users)?;
    let through = channels.bs_irs.adjoint() * beams.weights();
    Ok(through.zip_map(&channels.irs_user, |t, g| g.conj() * t))
}

/// Signal reaching user `k` through elements allocated to other users:
/// `o_k = sum_{n not in N_k} g_{n,k}^* phi_n^* h_n^H w_k`.
pub fn leakage_term(
    channels: &ChannelSet,
    phases: &PhaseConfig,
    beams: &BeamformerSet,
    alloc: &AllocationMap,
    user: usize,
) -> Result<Complex64> {
    let dims = channels.dims();
    check_user(user, dims.users)?;
    check_dim("phase configuration", dims.irs_elements, phases.len())?;
    check_dim("allocation elements", dims.irs_elements, alloc.element_count())?;
    let terms = cascaded_terms(channels, beams)?;
    let owners = alloc.owners();
    Ok((0..dims.irs_elements)
        .filter(|&n| owners[n] != Some(user))
        .map(|n| phases.coefficients()[n].conj() * terms[(n, user)])
        .sum())
}

/// Aligned numerator bound `|h_{d,k}^H w_k| + sum_{n in N_k} |g_{n,k}^* h_n^H w_k|`
/// and the achieved amplitude restricted to `N_k` (other users' elements removed),
/// for every user.
pub fn own_set_amplitudes(
    channels: &ChannelSet,
    phases: &PhaseConfig,
    beams: &BeamformerSet,
    alloc: &AllocationMap,
) -> Result<Vec<(f64, f64)>> {
    let terms = cascaded_terms(channels, beams)?;
    let w = beams.weights();
    Ok(alloc
        .assigned()
        .iter()
        .enumerate()
        .map(|(k, set)| {
            let direct = channels.direct.column(k).dotc(&w.column(k));
            let bound = direct.norm() + set.iter().map(|&n| terms[(n, k)].norm()).sum::<f64>();
            let achieved = set
                .iter()
                .fold(direct, |acc, &n| acc + phases.coefficients()[n].conj() * terms[(n, k)])
                .norm();
            (bound, achieved)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channels, PathlossParams, SystemDims};
    use crate::phase::random_phases;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_beams(m: usize, k: usize, rng: &mut ChaCha8Rng) -> BeamformerSet {
        let w = DMatrix::from_fn(m, k, |_, _| crate::channel::complex_gaussian(rng));
        let p = w.norm_squared();
        BeamformerSet::new(w, p).unwrap()
    }

    #[test]
    fn noise_power_values() {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-4 * b;
        assert!(close(NoiseModel::new(-174.0, 1e7).unwrap().noise_power(), 3.9811e-14));
        assert!(close(NoiseModel::new(-174.0, 1.0).unwrap().noise_power(), 3.9811e-21));
        assert!(close(NoiseModel::new(0.0, 10.0).unwrap().noise_power(), 1e-2));
        assert!(NoiseModel::new(-174.0, 0.0).is_err());
        assert!((watts_to_dbm(dbm_to_watts(23.0)) - 23.0).abs() < 1e-12);
    }

    #[test]
    fn rate_report_from_sinr() {
        let r = RateReport::from_sinr(vec![1.0, 3.0], 1.0);
        assert_eq!(r.rate, vec![1.0, 2.0]);
        assert_eq!(r.min_rate, 1.0);
        let z = RateReport::from_sinr(vec![0.0, 0.0], 1e7);
        assert_eq!(z.min_rate, 0.0);
    }

    #[test]
    fn single_user_sinr_without_interference() {
        let h = DMatrix::from_element(1, 1, c(1.0, 0.0));
        let w = BeamformerSet::new(DMatrix::from_element(1, 1, c(2.0, 0.0)), 4.0).unwrap();
        assert_eq!(sinr_from_effective(&h, &w, 1.0).unwrap(), vec![4.0]);
    }

    #[test]
    fn orthogonal_beam_gives_zero_sinr() {
        let cs = ChannelSet::new(
            DMatrix::zeros(2, 0),
            DMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]),
            DMatrix::zeros(0, 1),
        )
        .unwrap();
        let w = BeamformerSet::new(DMatrix::from_column_slice(2, 1, &[c(0.0, 0.0), c(1.0, 0.0)]), 1.0).unwrap();
        let s = sinr(&cs, &PhaseConfig::zeros(0), &w, &NoiseModel::reference(), 0).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(direct_gain(&cs, &w, 0).unwrap(), 0.0);
    }

    #[test]
    fn sinr_matches_expanded_per_element_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cs = sample_channels(SystemDims::new(3, 5, 2).unwrap(), &PathlossParams::unit(), &mut rng).unwrap();
        let phases = random_phases(5, &mut rng);
        let beams = random_beams(3, 2, &mut rng);
        let noise = NoiseModel::new(0.0, 1000.0).unwrap();
        let w = beams.weights();
        for k in 0..2 {
            // |h_d,k^H w_i + sum_n g_nk^* phi_n^* h_n^H w_i|^2, term by term
            let amp = |i: usize| {
                let mut acc = c(0.0, 0.0);
                for m in 0..3 {
                    acc += cs.direct[(m, k)].conj() * w[(m, i)];
                }
                for n in 0..5 {
                    let mut hw = c(0.0, 0.0);
                    for m in 0..3 {
                        hw += cs.bs_irs[(m, n)].conj() * w[(m, i)];
                    }
                    acc += cs.irs_user[(n, k)].conj() * phases.coefficients()[n].conj() * hw;
                }
                acc.norm_sqr()
            };
            let expected = amp(k) / (amp(1 - k) + noise.noise_power());
            let got = sinr(&cs, &phases, &beams, &noise, k).unwrap();
            assert!((got - expected).abs() <= 1e-10 * expected);
            let report = rates(&cs, &phases, &beams, &noise).unwrap();
            assert!((report.sinr[k] - expected).abs() <= 1e-10 * expected);
        }
    }

    #[test]
    fn sinr_ignores_common_beam_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cs = sample_channels(SystemDims::new(4, 6, 3).unwrap(), &PathlossParams::unit(), &mut rng).unwrap();
        let phases = random_phases(6, &mut rng);
        let beams = random_beams(4, 3, &mut rng);
        let noise = NoiseModel::new(0.0, 1.0).unwrap();
        let mut rotated = beams.weights().clone();
        for z in rotated.column_mut(1).iter_mut() {
            *z *= Complex64::from_polar(1.0, 0.77);
        }
        let rotated = BeamformerSet::new(rotated, beams.power_budget()).unwrap();
        let a = rates(&cs, &phases, &beams, &noise).unwrap();
        let b = rates(&cs, &phases, &rotated, &noise).unwrap();
        for (x, y) in a.sinr.iter().zip(&b.sinr) {
            assert!((x - y).abs() <= 1e-12 * x.max(1e-300));
        }
    }

    #[test]
    fn direct_gain_matches_naive_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cs = sample_channels(SystemDims::new(4, 0, 2).unwrap(), &PathlossParams::unit(), &mut rng).unwrap();
        let beams = random_beams(4, 2, &mut rng);
        for k in 0..2 {
            let mut acc = c(0.0, 0.0);
            for m in 0..4 {
                acc += cs.direct[(m, k)].conj() * beams.weights()[(m, k)];
            }
            assert!((direct_gain(&cs, &beams, k).unwrap() - acc.norm()).abs() <= 1e-12 * acc.norm());
        }
        let unit = ChannelSet::new(
            DMatrix::zeros(1, 0),
            DMatrix::from_element(1, 1, c(1.0, 0.0)),
            DMatrix::zeros(0, 1),
        )
        .unwrap();
        let w = BeamformerSet::new(DMatrix::from_element(1, 1, c(1.0, 0.0)), 1.0).unwrap();
        assert_eq!(direct_gain(&unit, &w, 0).unwrap(), 1.0);
    }

    #[test]
    fn leakage_vanishes_without_other_users_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cs = sample_channels(SystemDims::new(2, 5, 1).unwrap(), &PathlossParams::unit(), &mut rng).unwrap();
        let phases = random_phases(5, &mut rng);
        let beams = random_beams(2, 1, &mut rng);
        let o = leakage_term(&cs, &phases, &beams, &AllocationMap::single_user(5), 0).unwrap();
        assert_eq!(o, c(0.0, 0.0));

        let cs2 = sample_channels(SystemDims::new(2, 4, 2).unwrap(), &PathlossParams::unit(), &mut rng).unwrap();
        let beams2 = random_beams(2, 2, &mut rng);
        let phases2 = random_phases(4, &mut rng);
        let all_to_first = AllocationMap::from_sets(vec![vec![0, 1, 2, 3], vec![]], vec![], 4).unwrap();
        assert_eq!(
            leakage_term(&cs2, &phases2, &beams2, &all_to_first, 0).unwrap(),
            c(0.0, 0.0)
        );
        assert_ne!(
            leakage_term(&cs2, &phases2, &beams2, &all_to_first, 1).unwrap(),
            c(0.0, 0.0)
        );
    }
}
