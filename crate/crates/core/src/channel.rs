//! Channel realizations for the BS, IRS and user links.
//!
//! Every link is independent Rayleigh fading scaled by a distance-based
//! pathloss amplitude `sqrt(d^-beta)`. Entries are drawn as
//! `eps * (x + j y)` with `x, y ~ N(0, 1/2)`, so `E|entry|^2 = eps^2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::phase::PhaseConfig;

/// Antenna, IRS element and user counts. `irs_elements == 0` is the No-IRS case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemDims {
    pub antennas: usize,
    pub irs_elements: usize,
    pub users: usize,
}

impl SystemDims {
    pub fn new(antennas: usize, irs_elements: usize, users: usize) -> Result<Self> {
        if antennas == 0 {
            return Err(Error::domain("antennas", "must be at least 1"));
        }
        if users == 0 {
            return Err(Error::domain("users", "must be at least 1"));
        }
        Ok(Self {
            antennas,
            irs_elements,
            users,
        })
    }

    /// Defaults of the reference experiment: M = 8, N = 100, K = 4.
    pub fn reference() -> Self {
        Self {
            antennas: 8,
            irs_elements: 100,
            users: 4,
        }
    }

    pub fn with_irs_elements(self, irs_elements: usize) -> Self {
        Self { irs_elements, ..self }
    }
}

/// Link distances (meters) and pathloss exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathlossParams {
    pub d_bs_irs: f64,
    pub d_bs_user: f64,
    pub d_irs_user: f64,
    pub beta_bs_irs: f64,
    pub beta_bs_user: f64,
    pub beta_irs_user: f64,
}

impl PathlossParams {
    /// 100 m / 105 m / 10 m with exponents 3.6 / 4 / 4.
    pub fn reference() -> Self {
        Self {
            d_bs_irs: 100.0,
            d_bs_user: 105.0,
            d_irs_user: 10.0,
            beta_bs_irs: 3.6,
            beta_bs_user: 4.0,
            beta_irs_user: 4.0,
        }
    }

    /// Unit amplitude on every link. Handy for small test instances.
    pub fn unit() -> Self {
        Self {
            d_bs_irs: 1.0,
            d_bs_user: 1.0,
            d_irs_user: 1.0,
            beta_bs_irs: 1.0,
            beta_bs_user: 1.0,
            beta_irs_user: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        pathloss_coefficient(self.d_bs_irs, self.beta_bs_irs)?;
        pathloss_coefficient(self.d_bs_user, self.beta_bs_user)?;
        pathloss_coefficient(self.d_irs_user, self.beta_irs_user)?;
        Ok(())
    }

    /// Amplitude coefficients `(eps_bi, eps_bu, eps_iu)`.
    pub fn amplitudes(&self) -> Result<(f64, f64, f64)> {
        Ok((
            pathloss_coefficient(self.d_bs_irs, self.beta_bs_irs)?,
            pathloss_coefficient(self.d_bs_user, self.beta_bs_user)?,
            pathloss_coefficient(self.d_irs_user, self.beta_irs_user)?,
        ))
    }
}

/// Amplitude pathloss `sqrt(d^-beta)`.
pub fn pathloss_coefficient(distance: f64, exponent: f64) -> Result<f64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::domain("distance", format!("must be positive, got {distance}")));
    }
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::domain("exponent", format!("must be positive, got {exponent}")));
    }
    Ok(distance.powf(-exponent / 2.0))
}

/// One realization of every link.
///
/// * `bs_irs` is `M x N`; column `n` is `h_n`.
/// * `direct` is `M x K`; column `k` is `h_{d,k}`.
/// * `irs_user` is `N x K`; column `k` is `g_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    dims: SystemDims,
    pub bs_irs: DMatrix<Complex64>,
    pub direct: DMatrix<Complex64>,
    pub irs_user: DMatrix<Complex64>,
}

impl ChannelSet {
    pub fn new(bs_irs: DMatrix<Complex64>, direct: DMatrix<Complex64>, irs_user: DMatrix<Complex64>) -> Result<Self> {
        let dims = SystemDims::new(direct.nrows(), bs_irs.ncols(), direct.ncols())?;
        check_dim("bs_irs rows", dims.antennas, bs_irs.nrows())?;
        check_dim("irs_user rows", dims.irs_elements, irs_user.nrows())?;
        check_dim("irs_user columns", dims.users, irs_user.ncols())?;
        let finite = |m: &DMatrix<Complex64>| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !(finite(&bs_irs) && finite(&direct) && finite(&irs_user)) {
            return Err(Error::domain("channel", "entries must be finite"));
        }
        Ok(Self {
            dims,
            bs_irs,
            direct,
            irs_user,
        })
    }

    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    /// The same realization with the IRS removed.
    pub fn without_irs(&self) -> Self {
        let m = self.dims.antennas;
        let k = self.dims.users;
        Self {
            dims: self.dims.with_irs_elements(0),
            bs_irs: DMatrix::zeros(m, 0),
            direct: self.direct.clone(),
            irs_user: DMatrix::zeros(0, k),
        }
    }

    /// Reorder IRS elements: new element `i` is old element `perm[i]`.
    pub fn permute_elements(&self, perm: &[usize]) -> Self {
        let n = self.dims.irs_elements;
        assert_eq!(perm.len(), n);
        let bs_irs = DMatrix::from_fn(self.dims.antennas, n, |r, c| self.bs_irs[(r, perm[c])]);
        let irs_user = DMatrix::from_fn(n, self.dims.users, |r, c| self.irs_user[(perm[r], c)]);
        Self {
            dims: self.dims,
            bs_irs,
            direct: self.direct.clone(),
            irs_user,
        }
    }

    /// Effective channel of user `k`: `H diag(phi) g_k + h_{d,k}`.
    pub fn effective_channel(&self, phases: &PhaseConfig, user: usize) -> Result<DVector<Complex64>> {
        self.check_phases(phases)?;
        check_user(user, self.dims.users)?;
        let reflected: DVector<Complex64> = DVector::from_iterator(
            self.dims.irs_elements,
            phases
                .coefficients()
                .iter()
                .zip(self.irs_user.column(user).iter())
                .map(|(phi, g)| phi * g),
        );
        Ok(&self.bs_irs * reflected + self.direct.column(user))
    }

    /// All effective channels as the columns of an `M x K` matrix.
    pub fn effective_channels(&self, phases: &PhaseConfig) -> Result<DMatrix<Complex64>> {
        self.check_phases(phases)?;
        let mut scaled = self.irs_user.clone();
        for (mut row, phi) in scaled.row_iter_mut().zip(phases.coefficients()) {
            row *= *phi;
        }
        Ok(&self.bs_irs * scaled + &self.direct)
    }

    fn check_phases(&self, phases: &PhaseConfig) -> Result<()> {
        check_dim("phase configuration", self.dims.irs_elements, phases.len())
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

pub(crate) fn check_user(user: usize, users: usize) -> Result<()> {
    if user >= users {
        return Err(Error::domain(
            "user",
            format!("index {user} out of range for K = {users}"),
        ));
    }
    Ok(())
}

/// Draw a `CN(0, 1)` sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> DMatrix<Complex64> {
    // column-major fill order is part of the reproducibility contract
    let mut m = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = complex_gaussian(rng) * scale;
        }
    }
    m
}

/// Sample `H`, then `h_d`, then `g` from `rng`.
pub fn sample_channels<R: Rng + ?Sized>(
    dims: SystemDims,
    pathloss: &PathlossParams,
    rng: &mut R,
) -> Result<ChannelSet> {
    let dims = SystemDims::new(dims.antennas, dims.irs_elements, dims.users)?;
    let (eps_bi, eps_bu, eps_iu) = pathloss.amplitudes()?;
    let bs_irs = gaussian_matrix(dims.antennas, dims.irs_elements, eps_bi, rng);
    let direct = gaussian_matrix(dims.antennas, dims.users, eps_bu, rng);
    let irs_user = gaussian_matrix(dims.irs_elements, dims.users, eps_iu, rng);
    Ok(ChannelSet {
        dims,
        bs_irs,
        direct,
        irs_user,
    })
}
