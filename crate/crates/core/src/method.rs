//! Named methods compared in a sweep.
//!
//! A [`Method`] turns one trial (channels, noise, power and the trial's
//! random initial phases) into a [`RateReport`]. [`MethodRegistry`] maps the
//! names used in scenario files to constructors.

use std::collections::BTreeMap;
use std::fmt;

use crate::beamformer::BeamformerKind;
use crate::channel::ChannelSet;
use crate::engine::{fixed_phase_rates, run_alternating_from, AlgorithmConfig, IterationTrace};
use crate::error::{Error, Result};
use crate::metrics::{NoiseModel, RateReport};
use crate::phase::PhaseConfig;

/// Inputs shared by every method within a trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialContext<'a> {
    pub channels: &'a ChannelSet,
    pub noise: &'a NoiseModel,
    /// Transmit power in watts.
    pub power: f64,
    /// Random phases drawn once per trial: the starting point of the
    /// proposed methods and the configuration of the random baseline.
    pub random_phases: &'a PhaseConfig,
}

#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub rates: RateReport,
    pub trace: Option<IterationTrace>,
}

pub trait Method: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn evaluate(&self, ctx: &TrialContext<'_>) -> Result<MethodOutcome>;
}

/// Alternating allocation / phase / beamformer algorithm.
#[derive(Debug, Clone)]
pub struct Proposed {
    name: String,
    config: AlgorithmConfig,
}

impl Proposed {
    pub fn new(name: impl Into<String>, config: AlgorithmConfig) -> Self {
        Self {
            name: name.into(),
            config,
        }
    }
}

impl Method for Proposed {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, ctx: &TrialContext<'_>) -> Result<MethodOutcome> {
        let out = run_alternating_from(
            ctx.channels,
            &self.config,
            ctx.noise,
            ctx.power,
            ctx.random_phases.clone(),
        )?;
        Ok(MethodOutcome {
            rates: out.rates,
            trace: Some(out.trace),
        })
    }
}

/// Final beamformer on the random-phase effective channel.
#[derive(Debug, Clone)]
pub struct RandomPhases {
    pub beamformer: BeamformerKind,
}

impl Method for RandomPhases {
    fn name(&self) -> &str {
        "random"
    }

    fn evaluate(&self, ctx: &TrialContext<'_>) -> Result<MethodOutcome> {
        let rates = fixed_phase_rates(ctx.channels, ctx.random_phases, ctx.noise, ctx.power, self.beamformer)?;
        Ok(MethodOutcome { rates, trace: None })
    }
}

/// Final beamformer on the direct channels alone.
#[derive(Debug, Clone)]
pub struct NoIrs {
    pub beamformer: BeamformerKind,
}

impl Method for NoIrs {
    fn name(&self) -> &str {
        "no-irs"
    }

    fn evaluate(&self, ctx: &TrialContext<'_>) -> Result<MethodOutcome> {
        let channels = ctx.channels.without_irs();
        let rates = fixed_phase_rates(&channels, &PhaseConfig::zeros(0), ctx.noise, ctx.power, self.beamformer)?;
        Ok(MethodOutcome { rates, trace: None })
    }
}

/// Settings every method factory draws from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSettings {
    pub iterations: usize,
    /// Intermediate beamformer of the plain `proposed` method.
    pub intermediate: BeamformerKind,
    /// Used by `proposed-rzf`; `None` is `K sigma^2 B / P`.
    pub rzf_delta: Option<f64>,
    pub final_beamformer: BeamformerKind,
}

impl Default for MethodSettings {
    fn default() -> Self {
        let reference = AlgorithmConfig::reference();
        Self {
            iterations: reference.iterations,
            intermediate: reference.intermediate,
            rzf_delta: None,
            final_beamformer: reference.final_beamformer,
        }
    }
}

impl MethodSettings {
    fn algorithm(&self, intermediate: BeamformerKind) -> AlgorithmConfig {
        AlgorithmConfig {
            iterations: self.iterations,
            intermediate,
            final_beamformer: self.final_beamformer,
            seed: 0,
        }
    }
}

type MethodFactory = fn(&MethodSettings) -> Box<dyn Method>;

/// Name -> method lookup.
#[derive(Clone)]
pub struct MethodRegistry {
    factories: BTreeMap<&'static str, MethodFactory>,
}

impl fmt::Debug for MethodRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl MethodRegistry {
    /// The five compared methods plus `proposed`, which uses the configured
    /// intermediate beamformer.
    pub const DEFAULT_METHODS: [&'static str; 5] = ["proposed-mrt", "proposed-zf", "proposed-rzf", "random", "no-irs"];

    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("proposed", |s| {
            Box::new(Proposed::new("proposed", s.algorithm(s.intermediate)))
        });
        r.register("proposed-mrt", |s| {
            Box::new(Proposed::new("proposed-mrt", s.algorithm(BeamformerKind::Mrt)))
        });
        r.register("proposed-zf", |s| {
            Box::new(Proposed::new("proposed-zf", s.algorithm(BeamformerKind::Zf)))
        });
        r.register("proposed-rzf", |s| {
            Box::new(Proposed::new(
                "proposed-rzf",
                s.algorithm(BeamformerKind::Rzf { delta: s.rzf_delta }),
            ))
        });
        r.register("random", |s| {
            Box::new(RandomPhases {
                beamformer: s.final_beamformer,
            })
        });
        r.register("no-irs", |s| {
            Box::new(NoIrs {
                beamformer: s.final_beamformer,
            })
        });
        r
    }

    pub fn register(&mut self, name: &'static str, factory: MethodFactory) {
        self.factories.insert(name, factory);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn get(&self, name: &str, settings: &MethodSettings) -> Result<Box<dyn Method>> {
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownName {
            kind: "method",
            name: name.to_string(),
        })?;
        Ok(factory(settings))
    }

    pub fn build_all<S: AsRef<str>>(&self, names: &[S], settings: &MethodSettings) -> Result<Vec<Box<dyn Method>>> {
        names.iter().map(|n| self.get(n.as_ref(), settings)).collect()
    }
}
