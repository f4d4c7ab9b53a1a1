//! IRS reflection coefficients and the closed-form per-element phase update.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;

use crate::allocation::AllocationMap;
use crate::beamformer::BeamformerSet;
use crate::channel::{check_dim, ChannelSet};
use crate::error::{Error, Result};

/// Unit-modulus reflection coefficients `phi_n = exp(j theta_n)`, `theta_n in [0, 2pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    theta: Vec<f64>,
    phi: Vec<Complex64>,
}

impl PhaseConfig {
    /// Builds a configuration from arbitrary angles, wrapping each into `[0, 2pi)`.
    pub fn from_angles(angles: impl IntoIterator<Item = f64>) -> Self {
        let theta: Vec<f64> = angles.into_iter().map(wrap_angle).collect();
        let phi = theta.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
        Self { theta, phi }
    }

    pub fn zeros(len: usize) -> Self {
        Self::from_angles(std::iter::repeat_n(0.0, len))
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.theta
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.phi
    }

    /// Reorder elements: new element `i` is old element `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        Self::from_angles(perm.iter().map(|&p| self.theta[p]))
    }
}

/// Wrap into `[0, 2pi)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2pi for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Argument with the convention `arg(0) = 0`.
pub fn safe_arg(z: Complex64) -> f64 {
    if z.norm_sqr() == 0.0 {
        0.0
    } else {
        z.arg()
    }
}

/// Absolute angular distance between `a` and `b`, in `[0, pi]`. Zero if either vanishes.
pub fn angular_error(a: Complex64, b: Complex64) -> f64 {
    if a.norm_sqr() == 0.0 || b.norm_sqr() == 0.0 {
        return 0.0;
    }
    let d = (a * b.conj()).arg();
    d.abs().min(PI)
}

/// Phase update that aligns each allocated element's cascaded path with
/// its user's direct path:
///
/// `theta_n = -arg(h_{d,k}^H w_k) - arg(g_{n,k}) + arg(h_n^H w_k)`, `n in N_k`.
///
/// The allocation must be complete. Elements outside every set keep `prev`.
pub fn update_phases(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    alloc: &AllocationMap,
    prev: &PhaseConfig,
) -> Result<PhaseConfig> {
    let dims = channels.dims();
    check_dim("previous phases", dims.irs_elements, prev.len())?;
    check_dim("allocation elements", dims.irs_elements, alloc.element_count())?;
    check_dim("allocation users", dims.users, alloc.users())?;
    if !alloc.pool().is_empty() {
        return Err(Error::PoolNotEmpty {
            remaining: alloc.pool().len(),
        });
    }
    beams.check_shape(dims.antennas, dims.users)?;

    let w = beams.weights();
    let mut theta = prev.theta.clone();
    for (user, elements) in alloc.assigned().iter().enumerate() {
        let wk = w.column(user);
        let direct_arg = safe_arg(channels.direct.column(user).dotc(&wk));
        for &n in elements {
            let through_irs = channels.bs_irs.column(n).dotc(&wk);
            theta[n] = -direct_arg - safe_arg(channels.irs_user[(n, user)]) + safe_arg(through_irs);
        }
    }
    Ok(PhaseConfig::from_angles(theta))
}

/// Largest angular mismatch between `g_{n,k}^* phi_n^* h_n^H w_k` and
/// `h_{d,k}^H w_k` over every allocated element `n in N_k`.
pub fn alignment_error(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    alloc: &AllocationMap,
    phases: &PhaseConfig,
) -> f64 {
    let w = beams.weights();
    let mut worst: f64 = 0.0;
    for (user, elements) in alloc.assigned().iter().enumerate() {
        let wk = w.column(user);
        let direct = channels.direct.column(user).dotc(&wk);
        for &n in elements {
            let term = channels.irs_user[(n, user)].conj()
                * phases.coefficients()[n].conj()
                * channels.bs_irs.column(n).dotc(&wk);
            worst = worst.max(angular_error(term, direct));
        }
    }
    worst
}

/// Phases drawn i.i.d. uniform on `[0, 2pi)`.
pub fn random_phases<R: Rng + ?Sized>(elements: usize, rng: &mut R) -> PhaseConfig {
    PhaseConfig::from_angles((0..elements).map(|_| rng.random_range(0.0..TAU)))
}
