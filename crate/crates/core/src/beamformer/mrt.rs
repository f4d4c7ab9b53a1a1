use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{check_inputs, equal_power, BeamformerSet, Precoder};
use crate::error::Result;

/// Equal-power maximum ratio transmission: `w_k = sqrt(P/K) h_k / ||h_k||`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Mrt;

impl Precoder for Mrt {
    fn name(&self) -> &'static str {
        "mrt"
    }

    fn precode(&self, effective: &DMatrix<Complex64>, power: f64, _noise_power: f64) -> Result<BeamformerSet> {
        mrt(effective, power)
    }
}

pub fn mrt(effective: &DMatrix<Complex64>, power: f64) -> Result<BeamformerSet> {
    check_inputs(effective, power)?;
    equal_power(effective.clone(), power)
}
