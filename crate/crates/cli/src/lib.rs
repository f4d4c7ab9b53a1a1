//! Scenario files and the `irsbeam` command line.
//!
//! A scenario is a TOML document. Every section and key is optional; an
//! empty document is the reference experiment (M = 8, N = 100, K = 4, a
//! transmit-power sweep over 0/10/20/30 dBm with 500 trials).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use irsbeam::metrics::NoiseModel;
use irsbeam::montecarlo::{render_table, run_sweep_with_threads, write_results};
use irsbeam::{
    BeamformerKind, MethodRegistry, MethodSettings, PathlossParams, Scenario, SweepAxis, SweepSpec, SystemDims,
};
use serde::Deserialize;

pub const THREADS_ENV: &str = "IRSBEAM_THREADS";

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub dims: DimsSection,
    pub pathloss: PathlossSection,
    pub noise: NoiseSection,
    pub power: PowerSection,
    pub algorithm: AlgorithmSection,
    pub sweep: SweepSection,
    pub methods: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimsSection {
    #[serde(rename = "M")]
    pub m: i64,
    #[serde(rename = "N")]
    pub n: i64,
    #[serde(rename = "K")]
    pub k: i64,
}

impl Default for DimsSection {
    fn default() -> Self {
        let d = SystemDims::reference();
        Self {
            m: d.antennas as i64,
            n: d.irs_elements as i64,
            k: d.users as i64,
        }
    }
}

/// One value per link: BS-IRS, BS-user, IRS-user.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkValues {
    pub bs_irs: f64,
    pub bs_user: f64,
    pub irs_user: f64,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathlossSection {
    pub distances: LinkValues,
    pub exponents: LinkValues,
}

impl Default for PathlossSection {
    fn default() -> Self {
        let p = PathlossParams::reference();
        Self {
            distances: LinkValues {
                bs_irs: p.d_bs_irs,
                bs_user: p.d_bs_user,
                irs_user: p.d_irs_user,
            },
            exponents: LinkValues {
                bs_irs: p.beta_bs_irs,
                bs_user: p.beta_bs_user,
                irs_user: p.beta_irs_user,
            },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub psd_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseModel::reference();
        Self {
            psd_dbm_per_hz: n.psd_dbm_per_hz,
            bandwidth_hz: n.bandwidth_hz,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    /// Axis values of a power sweep when `sweep.values` is absent.
    pub values_dbm: Vec<f64>,
    /// Transmit power of an IRS-size sweep.
    pub fixed_dbm: f64,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self {
            values_dbm: vec![0.0, 10.0, 20.0, 30.0],
            fixed_dbm: 30.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmSection {
    #[serde(rename = "V")]
    pub v: i64,
    /// Beamformer of the plain `proposed` method.
    pub intermediate: String,
    pub rzf_delta: Option<f64>,
    #[serde(rename = "final")]
    pub final_stage: FinalSection,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        Self {
            v: MethodSettings::default().iterations as i64,
            intermediate: "rzf".into(),
            rzf_delta: None,
            final_stage: FinalSection::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinalSection {
    pub max_iters: i64,
    pub tol: f64,
}

impl Default for FinalSection {
    fn default() -> Self {
        Self {
            max_iters: BeamformerKind::DEFAULT_MAX_ITERS as i64,
            tol: BeamformerKind::DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: String,
    pub values: Option<Vec<f64>>,
    pub trials: i64,
    pub master_seed: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: SweepAxis::TransmitPowerDbm.label().into(),
            values: None,
            trials: SweepSpec::DEFAULT_TRIALS as i64,
            master_seed: 0,
        }
    }
}

fn count(field: &str, value: i64, min: i64) -> Result<usize> {
    if value < min {
        bail!("{field}: must be at least {min}, got {value}");
    }
    Ok(value as usize)
}

fn positive(field: &str, value: f64) -> Result<f64> {
    if !(value > 0.0 && value.is_finite()) {
        bail!("{field}: must be positive and finite, got {value}");
    }
    Ok(value)
}

fn finite(field: &str, value: f64) -> Result<f64> {
    if !value.is_finite() {
        bail!("{field}: must be finite, got {value}");
    }
    Ok(value)
}

impl ScenarioFile {
    pub fn into_spec(self) -> Result<SweepSpec> {
        let dims = SystemDims::new(
            count("dims.M", self.dims.m, 1)?,
            count("dims.N", self.dims.n, 0)?,
            count("dims.K", self.dims.k, 1)?,
        )?;

        let (d, e) = (self.pathloss.distances, self.pathloss.exponents);
        let pathloss = PathlossParams {
            d_bs_irs: positive("pathloss.distances.bs_irs", d.bs_irs)?,
            d_bs_user: positive("pathloss.distances.bs_user", d.bs_user)?,
            d_irs_user: positive("pathloss.distances.irs_user", d.irs_user)?,
            beta_bs_irs: positive("pathloss.exponents.bs_irs", e.bs_irs)?,
            beta_bs_user: positive("pathloss.exponents.bs_user", e.bs_user)?,
            beta_irs_user: positive("pathloss.exponents.irs_user", e.irs_user)?,
        };
        let noise = NoiseModel::new(
            finite("noise.psd_dbm_per_hz", self.noise.psd_dbm_per_hz)?,
            positive("noise.bandwidth_hz", self.noise.bandwidth_hz)?,
        )?;

        let power_dbm = finite("power.fixed_dbm", self.power.fixed_dbm)?;
        for v in &self.power.values_dbm {
            finite("power.values_dbm", *v)?;
        }

        let a = self.algorithm;
        let intermediate: BeamformerKind = a
            .intermediate
            .parse()
            .with_context(|| format!("algorithm.intermediate: unknown beamformer `{}`", a.intermediate))?;
        if let Some(delta) = a.rzf_delta {
            positive("algorithm.rzf_delta", delta)?;
        }
        let intermediate = match intermediate {
            BeamformerKind::Rzf { .. } => BeamformerKind::Rzf { delta: a.rzf_delta },
            other => other,
        };
        let settings = MethodSettings {
            iterations: count("algorithm.V", a.v, 1)?,
            intermediate,
            rzf_delta: a.rzf_delta,
            final_beamformer: BeamformerKind::MaxMinSinr {
                max_iters: count("algorithm.final.max_iters", a.final_stage.max_iters, 1)?,
                tol: positive("algorithm.final.tol", a.final_stage.tol)?,
            },
        };

        let registry = MethodRegistry::with_builtins();
        let methods = match self.methods {
            Some(list) => {
                if list.is_empty() {
                    bail!("methods: at least one method required");
                }
                if let Some(bad) = list.iter().find(|m| !registry.contains(m)) {
                    let known: Vec<_> = registry.names().collect();
                    bail!("methods: unknown method `{bad}` (known: {})", known.join(", "));
                }
                list
            }
            None => MethodRegistry::DEFAULT_METHODS.iter().map(|s| s.to_string()).collect(),
        };

        let s = self.sweep;
        let axis = SweepAxis::from_label(&s.axis).with_context(|| {
            format!(
                "sweep.axis: expected `{}` or `{}`, got `{}`",
                SweepAxis::TransmitPowerDbm.label(),
                SweepAxis::IrsElements.label(),
                s.axis
            )
        })?;
        let values = match (s.values, axis) {
            (Some(v), _) => v,
            (None, SweepAxis::TransmitPowerDbm) => self.power.values_dbm,
            (None, SweepAxis::IrsElements) => bail!("sweep.values: required for the {} axis", axis.label()),
        };

        let spec = SweepSpec {
            axis,
            values,
            trials: count("sweep.trials", s.trials, 1)?,
            base: Scenario {
                dims,
                pathloss,
                noise,
                power_dbm,
                settings,
                methods,
            },
            master_seed: s.master_seed,
        };
        spec.validate(&registry)?;
        Ok(spec)
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(document: &str) -> Result<SweepSpec> {
    let file: ScenarioFile = toml::from_str(document).context("invalid scenario")?;
    file.into_spec()
}

pub fn load_scenario(path: &Path) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read scenario {}", path.display()))?;
    parse_scenario(&text).with_context(|| format!("in scenario {}", path.display()))
}

/// Worker count from `IRSBEAM_THREADS`; unset or 0 means automatic.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV}: expected a non-negative integer, got `{v}`")),
        _ => Ok(0),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "irsbeam",
    version,
    about = "Monte-Carlo sweeps for IRS-aided multi-user downlink beamforming"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the sweep described by a scenario file.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Min-rate against transmit power at M = 8, N = 100, K = 4.
    SweepPower {
        /// Base scenario; its sweep section is replaced.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Transmit powers in dBm.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 10.0, 20.0, 30.0])]
        values: Vec<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Min-rate against the number of IRS elements at a fixed transmit power.
    SweepN {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// IRS sizes.
        #[arg(long, value_delimiter = ',', default_values_t = [20, 40, 60, 80, 100])]
        values: Vec<u32>,
        /// Transmit power in dBm.
        #[arg(long, default_value_t = 30.0)]
        power_dbm: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Output directory for the CSV files.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// File name prefix; defaults to the scenario name or the sweep kind.
    #[arg(long)]
    pub name: Option<String>,
    /// Master seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trials per axis value override.
    #[arg(long)]
    pub trials: Option<usize>,
}

fn base_spec(scenario: Option<&Path>) -> Result<SweepSpec> {
    match scenario {
        Some(p) => load_scenario(p),
        None => parse_scenario(""),
    }
}

/// Resolves a command into the sweep it runs and its output prefix.
pub fn plan(command: &Command) -> Result<(SweepSpec, &CommonArgs, String)> {
    let (mut spec, common, default_name) = match command {
        Command::Run { scenario, common } => {
            let stem = scenario.file_stem().map(|s| s.to_string_lossy().into_owned());
            (load_scenario(scenario)?, common, stem.unwrap_or_else(|| "run".into()))
        }
        Command::SweepPower {
            scenario,
            values,
            common,
        } => {
            let mut spec = base_spec(scenario.as_deref())?;
            spec.axis = SweepAxis::TransmitPowerDbm;
            spec.values = values.clone();
            (spec, common, "power".into())
        }
        Command::SweepN {
            scenario,
            values,
            power_dbm,
            common,
        } => {
            let mut spec = base_spec(scenario.as_deref())?;
            spec.axis = SweepAxis::IrsElements;
            spec.values = values.iter().map(|&n| n as f64).collect();
            spec.base.power_dbm = finite("--power-dbm", *power_dbm)?;
            (spec, common, "irs_size".into())
        }
    };
    if let Some(seed) = common.seed {
        spec.master_seed = seed;
    }
    if let Some(trials) = common.trials {
        spec.trials = trials;
    }
    spec.validate(&MethodRegistry::with_builtins())?;
    let name = common.name.clone().unwrap_or(default_name);
    Ok((spec, common, name))
}

/// Runs a parsed command: sweep, write both CSVs, print the table.
pub fn execute(cli: &Cli, mut out: impl std::io::Write) -> Result<()> {
    let (spec, common, name) = plan(&cli.command)?;
    let threads = threads_from_env()?;
    eprintln!(
        "sweeping {} over {} values x {} trials x {} methods",
        spec.axis.label(),
        spec.values.len(),
        spec.trials,
        spec.base.methods.len()
    );
    let result = run_sweep_with_threads(&spec, threads)?;
    let (raw, agg) = write_results(&result, &common.out, &name)?;
    render_table(&result, &mut out)?;
    let failed = result.failures().count();
    if failed > 0 {
        eprintln!("{failed} method-trials failed and are excluded from the aggregates");
    }
    writeln!(out, "wrote {} and {}", raw.display(), agg.display())?;
    Ok(())
}
