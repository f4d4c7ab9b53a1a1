use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{check_inputs, equal_power, BeamformerSet, Precoder};
use crate::error::{Error, Result};

/// Equal-power regularized zero-forcing: columns of `(H H^H + delta I)^-1 H`.
///
/// Computed through the SVD `H = U S V^H` as `U diag(s / (s^2 + delta)) V^H`,
/// which is the same matrix and stays well defined when `K > M`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rzf {
    /// `None` uses [`default_regularization`].
    pub delta: Option<f64>,
}

impl Precoder for Rzf {
    fn name(&self) -> &'static str {
        "rzf"
    }

    fn precode(&self, effective: &DMatrix<Complex64>, power: f64, noise_power: f64) -> Result<BeamformerSet> {
        let delta = match self.delta {
            Some(d) => d,
            None => default_regularization(effective.ncols(), noise_power, power),
        };
        rzf(effective, power, delta)
    }
}

/// MMSE-style loading `K sigma^2 B / P`.
pub fn default_regularization(users: usize, noise_power: f64, power: f64) -> f64 {
    users as f64 * noise_power / power
}

pub fn rzf(effective: &DMatrix<Complex64>, power: f64, delta: f64) -> Result<BeamformerSet> {
    check_inputs(effective, power)?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::domain("rzf_delta", format!("must be non-negative, got {delta}")));
    }
    let svd = if delta == 0.0 {
        ChannelSvd::full_rank(effective)?
    } else {
        ChannelSvd::new(effective)
    };
    equal_power(filtered_directions(&svd, delta), power)
}

pub(crate) struct ChannelSvd {
    u: DMatrix<Complex64>,
    singular: DVector<f64>,
    v_t: DMatrix<Complex64>,
}

impl ChannelSvd {
    pub(crate) fn new(effective: &DMatrix<Complex64>) -> Self {
        let svd = effective.clone().svd(true, true);
        Self {
            u: svd.u.expect("u requested"),
            singular: svd.singular_values,
            v_t: svd.v_t.expect("v_t requested"),
        }
    }

    pub(crate) fn condition_ratio(&self) -> f64 {
        let max = self.singular.max();
        let min = self.singular.min();
        if max > 0.0 {
            min / max
        } else {
            0.0
        }
    }
}

/// `U diag(f(s)) V^H` with `f(s) = s / (s^2 + delta)`; singular values that
/// vanish map to zero.
pub(crate) fn filtered_directions(svd: &ChannelSvd, delta: f64) -> DMatrix<Complex64> {
    let mut u = svd.u.clone();
    for (mut col, &s) in u.column_iter_mut().zip(svd.singular.iter()) {
        let gain = if s > 0.0 { s / (s * s + delta) } else { 0.0 };
        col *= Complex64::from(gain);
    }
    u * &svd.v_t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamformer::{direction_angle, mrt, zf};
    use crate::channel::complex_gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_channel(m: usize, k: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, k, |_, _| complex_gaussian(&mut rng))
    }

    fn max_angle(a: &BeamformerSet, b: &BeamformerSet) -> f64 {
        (0..a.users())
            .map(|k| direction_angle(&a.weights().column(k).into_owned(), &b.weights().column(k).into_owned()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn single_user_is_mrt_for_any_delta() {
        let h = random_channel(4, 1, 1);
        let reference = mrt(&h, 1.0).unwrap();
        for delta in [0.0, 1e-6, 1.0, 1e6] {
            assert!(max_angle(&rzf(&h, 1.0, delta).unwrap(), &reference) < 1e-7);
        }
    }

    #[test]
    fn large_delta_tends_to_mrt() {
        let h = random_channel(6, 4, 2);
        let delta = 1e6 * h.norm_squared();
        assert!(max_angle(&rzf(&h, 2.0, delta).unwrap(), &mrt(&h, 2.0).unwrap()) < 1e-3);
    }

    #[test]
    fn small_delta_tends_to_zf() {
        let h = random_channel(6, 4, 3);
        assert!(max_angle(&rzf(&h, 2.0, 1e-9).unwrap(), &zf(&h, 2.0).unwrap()) < 1e-3);
    }

    #[test]
    fn matches_regularized_inverse_directly() {
        let h = random_channel(5, 3, 4);
        let delta = 0.3;
        let gram = &h * h.adjoint() + DMatrix::<Complex64>::identity(5, 5) * Complex64::from(delta);
        let reference = gram.try_inverse().unwrap() * &h;
        let w = rzf(&h, 1.0, delta).unwrap();
        for k in 0..3 {
            let a = direction_angle(&w.weights().column(k).into_owned(), &reference.column(k).into_owned());
            assert!(a < 1e-7, "{a}");
        }
    }

    #[test]
    fn interpolation_is_monotone() {
        let h = random_channel(6, 3, 5);
        let to_zf: Vec<f64> = [1e-1, 1e-3, 1e-5]
            .iter()
            .map(|&d| max_angle(&rzf(&h, 1.0, d).unwrap(), &zf(&h, 1.0).unwrap()))
            .collect();
        assert!(to_zf.windows(2).all(|w| w[1] <= w[0]));
        let to_mrt: Vec<f64> = [1e1, 1e3, 1e5]
            .iter()
            .map(|&d| max_angle(&rzf(&h, 1.0, d).unwrap(), &mrt(&h, 1.0).unwrap()))
            .collect();
        assert!(to_mrt.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_delta_rank_deficient_errors_but_positive_delta_works() {
        let mut h = random_channel(2, 3, 6);
        assert!(matches!(rzf(&h, 1.0, 0.0), Err(Error::RankDeficient { .. })));
        assert!(rzf(&h, 1.0, 0.1).is_ok());
        let col = h.column(0).into_owned();
        h.set_column(1, &col);
        assert!(rzf(&h, 1.0, 0.1).is_ok());
        assert!(rzf(&h, 1.0, -0.1).is_err());
    }

    #[test]
    fn equal_power_per_user() {
        let h = random_channel(8, 4, 7);
        let w = Rzf { delta: None }.precode(&h, 10.0, 0.5).unwrap();
        for col in w.weights().column_iter() {
            assert!((col.norm_squared() - 2.5).abs() < 1e-12);
        }
    }
}
