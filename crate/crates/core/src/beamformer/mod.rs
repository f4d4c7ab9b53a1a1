//! Transmit beamformers operating on an `M x K` effective channel matrix.
//!
//! Every variant implements [`Precoder`]; [`PrecoderRegistry`] resolves them
//! by name so configuration files and the CLI can select one at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

mod maxmin;
mod mrt;
mod rzf;
mod zf;

pub use maxmin::{balanced_powers, maxmin_sinr, MaxMinOutcome, MaxMinSinr};
pub use mrt::{mrt, Mrt};
pub use rzf::{default_regularization, rzf, Rzf};
pub use zf::{zf, Zf};

/// Relative slack on the total power constraint.
pub const POWER_SLACK: f64 = 1e-9;

/// `M x K` beamforming matrix (column `k` is `w_k`) with its power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    weights: DMatrix<Complex64>,
    power_budget: f64,
}

impl BeamformerSet {
    pub fn new(weights: DMatrix<Complex64>, power_budget: f64) -> Result<Self> {
        if !(power_budget > 0.0 && power_budget.is_finite()) {
            return Err(Error::domain("power", format!("must be positive, got {power_budget}")));
        }
        let total = weights.norm_squared();
        if !total.is_finite() || total > power_budget * (1.0 + POWER_SLACK) {
            return Err(Error::domain(
                "beamformer",
                format!("total power {total:e} exceeds budget {power_budget:e}"),
            ));
        }
        Ok(Self { weights, power_budget })
    }

    pub fn weights(&self) -> &DMatrix<Complex64> {
        &self.weights
    }

    pub fn power_budget(&self) -> f64 {
        self.power_budget
    }

    /// `sum_k ||w_k||^2`.
    pub fn total_power(&self) -> f64 {
        self.weights.norm_squared()
    }

    pub fn users(&self) -> usize {
        self.weights.ncols()
    }

    pub fn satisfies_budget(&self) -> bool {
        self.total_power() <= self.power_budget * (1.0 + POWER_SLACK)
    }

    pub(crate) fn check_shape(&self, antennas: usize, users: usize) -> Result<()> {
        crate::channel::check_dim("beamformer rows", antennas, self.weights.nrows())?;
        crate::channel::check_dim("beamformer columns", users, self.weights.ncols())
    }
}

/// Scale each column of `directions` to norm `sqrt(P/K)`.
pub(crate) fn equal_power(directions: DMatrix<Complex64>, power: f64) -> Result<BeamformerSet> {
    let users = directions.ncols();
    let per_user = (power / users as f64).sqrt();
    let mut w = directions;
    for (k, mut col) in w.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::ZeroChannel { user: k });
        }
        col *= Complex64::from(per_user / norm);
    }
    BeamformerSet::new(w, power)
}

pub(crate) fn check_inputs(effective: &DMatrix<Complex64>, power: f64) -> Result<()> {
    if effective.ncols() == 0 || effective.nrows() == 0 {
        return Err(Error::domain(
            "effective channel",
            "needs at least one antenna and one user",
        ));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::domain("power", format!("must be positive, got {power}")));
    }
    for (k, col) in effective.column_iter().enumerate() {
        if col.norm_squared() == 0.0 {
            return Err(Error::ZeroChannel { user: k });
        }
    }
    Ok(())
}

/// Angle between two complex directions, `acos(|u^H v| / (|u| |v|))`.
pub fn direction_angle(u: &DVector<Complex64>, v: &DVector<Complex64>) -> f64 {
    let c = u.dotc(v).norm() / (u.norm() * v.norm());
    c.min(1.0).acos()
}

/// A transmit beamformer design.
pub trait Precoder: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Beams for the columns of `effective` under total power `power`.
    /// `noise_power` is `sigma^2 B` in the same units as `|h^H w|^2`.
    fn precode(&self, effective: &DMatrix<Complex64>, power: f64, noise_power: f64) -> Result<BeamformerSet>;
}

/// Configuration-level description of a beamformer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamformerKind {
    Mrt,
    Zf,
    /// `delta = None` selects `K sigma^2 B / P`.
    Rzf {
        delta: Option<f64>,
    },
    MaxMinSinr {
        max_iters: usize,
        tol: f64,
    },
}

impl BeamformerKind {
    pub const DEFAULT_MAX_ITERS: usize = 50;
    pub const DEFAULT_TOL: f64 = 1e-4;

    pub fn max_min() -> Self {
        BeamformerKind::MaxMinSinr {
            max_iters: Self::DEFAULT_MAX_ITERS,
            tol: Self::DEFAULT_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BeamformerKind::Rzf { delta: Some(d) } if !(d >= 0.0 && d.is_finite()) => {
                Err(Error::domain("rzf_delta", format!("must be non-negative, got {d}")))
            }
            BeamformerKind::MaxMinSinr { max_iters: 0, .. } => Err(Error::domain("max_iters", "must be at least 1")),
            BeamformerKind::MaxMinSinr { tol, .. } if !(tol > 0.0) => {
                Err(Error::domain("tol", format!("must be positive, got {tol}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BeamformerKind::Mrt => "mrt",
            BeamformerKind::Zf => "zf",
            BeamformerKind::Rzf { .. } => "rzf",
            BeamformerKind::MaxMinSinr { .. } => "maxmin",
        }
    }

    pub fn build(&self) -> Result<Box<dyn Precoder>> {
        self.validate()?;
        Ok(match *self {
            BeamformerKind::Mrt => Box::new(Mrt),
            BeamformerKind::Zf => Box::new(Zf),
            BeamformerKind::Rzf { delta } => Box::new(Rzf { delta }),
            BeamformerKind::MaxMinSinr { max_iters, tol } => Box::new(MaxMinSinr { max_iters, tol }),
        })
    }
}

impl FromStr for BeamformerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PrecoderRegistry::with_builtins().kind(s, &PrecoderOptions::default())
    }
}

/// Parameters forwarded to registry factories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecoderOptions {
    pub rzf_delta: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for PrecoderOptions {
    fn default() -> Self {
        Self {
            rzf_delta: None,
            max_iters: BeamformerKind::DEFAULT_MAX_ITERS,
            tol: BeamformerKind::DEFAULT_TOL,
        }
    }
}

type KindFactory = fn(&PrecoderOptions) -> BeamformerKind;

/// Name -> beamformer lookup.
#[derive(Clone)]
pub struct PrecoderRegistry {
    factories: BTreeMap<&'static str, KindFactory>,
}

impl fmt::Debug for PrecoderRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl PrecoderRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("mrt", |_| BeamformerKind::Mrt);
        r.register("zf", |_| BeamformerKind::Zf);
        r.register("rzf", |o| BeamformerKind::Rzf { delta: o.rzf_delta });
        r.register("maxmin", |o| BeamformerKind::MaxMinSinr {
            max_iters: o.max_iters,
            tol: o.tol,
        });
        r
    }

    pub fn register(&mut self, name: &'static str, factory: KindFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn kind(&self, name: &str, options: &PrecoderOptions) -> Result<BeamformerKind> {
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownName {
            kind: "beamformer",
            name: name.to_string(),
        })?;
        let kind = factory(options);
        kind.validate()?;
        Ok(kind)
    }

    pub fn get(&self, name: &str, options: &PrecoderOptions) -> Result<Box<dyn Precoder>> {
        self.kind(name, options)?.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_resolves_builtins() {
        let reg = PrecoderRegistry::with_builtins();
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["maxmin", "mrt", "rzf", "zf"]);
        for name in ["mrt", "zf", "rzf", "maxmin"] {
            assert_eq!(reg.get(name, &PrecoderOptions::default()).unwrap().name(), name);
        }
        assert!(matches!(
            reg.get("mmse", &PrecoderOptions::default()),
            Err(Error::UnknownName { .. })
        ));
        let opts = PrecoderOptions {
            rzf_delta: Some(-1.0),
            ..Default::default()
        };
        assert!(reg.get("rzf", &opts).is_err());
        assert_eq!("zf".parse::<BeamformerKind>().unwrap(), BeamformerKind::Zf);
    }

    #[test]
    fn kind_validation() {
        assert!(BeamformerKind::MaxMinSinr {
            max_iters: 0,
            tol: 1e-3
        }
        .validate()
        .is_err());
        assert!(BeamformerKind::MaxMinSinr { max_iters: 1, tol: 0.0 }
            .validate()
            .is_err());
        assert!(BeamformerKind::Rzf { delta: Some(0.0) }.validate().is_ok());
    }

    #[test]
    fn beamformer_set_enforces_budget() {
        let w = DMatrix::from_element(2, 1, Complex64::new(1.0, 0.0));
        assert!(BeamformerSet::new(w.clone(), 2.0).is_ok());
        assert!(BeamformerSet::new(w.clone(), 1.9).is_err());
        assert!(BeamformerSet::new(w, 0.0).is_err());
    }
}
