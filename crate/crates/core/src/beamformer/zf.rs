use nalgebra::DMatrix;
use num_complex::Complex64;

use super::rzf::{filtered_directions, ChannelSvd};
use super::{check_inputs, equal_power, BeamformerSet, Precoder};
use crate::error::{Error, Result};

/// Singular value ratio below which the effective channel counts as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Equal-power zero-forcing: columns of `H (H^H H)^-1`, normalized.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zf;

impl Precoder for Zf {
    fn name(&self) -> &'static str {
        "zf"
    }

    fn precode(&self, effective: &DMatrix<Complex64>, power: f64, _noise_power: f64) -> Result<BeamformerSet> {
        zf(effective, power)
    }
}

pub fn zf(effective: &DMatrix<Complex64>, power: f64) -> Result<BeamformerSet> {
    check_inputs(effective, power)?;
    let svd = ChannelSvd::full_rank(effective)?;
    equal_power(filtered_directions(&svd, 0.0), power)
}

impl ChannelSvd {
    /// SVD of a channel with `K <= M` and full column rank.
    pub(crate) fn full_rank(effective: &DMatrix<Complex64>) -> Result<Self> {
        let (antennas, users) = effective.shape();
        let svd = ChannelSvd::new(effective);
        let ratio = svd.condition_ratio();
        if users > antennas || !(ratio > RANK_TOLERANCE) {
            return Err(Error::RankDeficient {
                users,
                antennas,
                ratio: if users > antennas { 0.0 } else { ratio },
            });
        }
        Ok(svd)
    }
}
