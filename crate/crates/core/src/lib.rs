//! Multi-user MISO downlink aided by an intelligent reflecting surface (IRS).
//!
//! The IRS elements are partitioned among the users; each element's phase
//! is then aligned for its own user in closed form, and the transmit
//! beamformer is recomputed on the resulting effective channel. The loop
//! runs a fixed number of times and ends with a max-min SINR beamformer.
//!
//! Module map:
//!
//! * [`channel`]: pathloss, Rayleigh channel sampling, effective channels
//! * [`metrics`]: noise, SINR, rates and per-element gains
//! * [`allocation`]: element counts, user ordering, greedy allocation
//! * [`phase`]: reflection coefficients and the phase update
//! * [`beamformer`]: MRT, ZF, RZF and max-min SINR behind [`beamformer::Precoder`]
//! * [`engine`]: the alternating loop, baselines and a brute-force oracle
//! * [`method`]: named methods compared in a sweep
//! * [`montecarlo`]: paired Monte-Carlo sweeps and CSV output

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod beamformer;
pub mod channel;
pub mod engine;
pub mod error;
pub mod method;
pub mod metrics;
pub mod montecarlo;
pub mod phase;

pub use allocation::{AllocationCounts, AllocationMap};
pub use beamformer::{BeamformerKind, BeamformerSet, Precoder, PrecoderRegistry};
pub use channel::{ChannelSet, PathlossParams, SystemDims};
pub use engine::{run_alternating, AlgorithmConfig, AlternatingOutcome, Baseline, IterationTrace};
pub use error::{Error, Result};
pub use method::{Method, MethodRegistry, MethodSettings};
pub use metrics::{NoiseModel, RateReport};
pub use montecarlo::{run_sweep, Scenario, SweepAxis, SweepResult, SweepSpec};
pub use phase::PhaseConfig;
