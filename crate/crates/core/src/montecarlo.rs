//! Paired Monte-Carlo sweeps over transmit power or IRS size.
//!
//! Every `(axis value, trial)` pair gets a child seed derived from the
//! master seed alone, draws one channel realization plus one set of random
//! phases, and evaluates every configured method on that same draw. Output
//! order is canonical, so results do not depend on scheduling.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{sample_channels, PathlossParams, SystemDims};
use crate::error::{Error, Result};
use crate::method::{MethodRegistry, MethodSettings, TrialContext};
use crate::metrics::{dbm_to_watts, NoiseModel};
use crate::phase::random_phases;

pub const RAW_HEADER: [&str; 5] = ["method", "axis", "axis_value", "trial", "min_rate_bps"];
pub const AGG_HEADER: [&str; 6] = ["method", "axis_value", "mean", "median", "stderr", "trials"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    TransmitPowerDbm,
    IrsElements,
}

impl SweepAxis {
    pub fn label(&self) -> &'static str {
        match self {
            SweepAxis::TransmitPowerDbm => "transmit_power_dbm",
            SweepAxis::IrsElements => "irs_elements",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "transmit_power_dbm" => Some(SweepAxis::TransmitPowerDbm),
            "irs_elements" => Some(SweepAxis::IrsElements),
            _ => None,
        }
    }
}

/// Everything except the swept quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub dims: SystemDims,
    pub pathloss: PathlossParams,
    pub noise: NoiseModel,
    /// Transmit power when sweeping the IRS size.
    pub power_dbm: f64,
    pub settings: MethodSettings,
    pub methods: Vec<String>,
}

impl Scenario {
    /// M = 8, N = 100, K = 4, reference geometry and noise, 30 dBm, all five methods.
    pub fn reference() -> Self {
        Self {
            dims: SystemDims::reference(),
            pathloss: PathlossParams::reference(),
            noise: NoiseModel::reference(),
            power_dbm: 30.0,
            settings: MethodSettings::default(),
            methods: MethodRegistry::DEFAULT_METHODS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub base: Scenario,
    pub master_seed: u64,
}

impl SweepSpec {
    pub const DEFAULT_TRIALS: usize = 500;

    pub fn validate(&self, registry: &MethodRegistry) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::domain("sweep.values", "must not be empty"));
        }
        if self.values.iter().any(|v| !v.is_finite()) || self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("sweep.values", "must be finite and strictly increasing"));
        }
        if self.axis == SweepAxis::IrsElements && self.values.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
            return Err(Error::domain("sweep.values", "IRS sizes must be non-negative integers"));
        }
        if self.trials == 0 {
            return Err(Error::domain("sweep.trials", "must be at least 1"));
        }
        if self.base.methods.is_empty() {
            return Err(Error::domain("methods", "at least one method required"));
        }
        if let Some(unknown) = self.base.methods.iter().find(|m| !registry.contains(m)) {
            return Err(Error::UnknownName {
                kind: "method",
                name: unknown.clone(),
            });
        }
        self.base.pathloss.validate()?;
        Ok(())
    }

    /// Dimensions and transmit power (watts) at one axis value.
    pub fn point(&self, value: f64) -> (SystemDims, f64) {
        match self.axis {
            SweepAxis::TransmitPowerDbm => (self.base.dims, dbm_to_watts(value)),
            SweepAxis::IrsElements => (
                self.base.dims.with_irs_elements(value as usize),
                dbm_to_watts(self.base.power_dbm),
            ),
        }
    }
}

/// One method on one trial. `min_rate` is `None` when the method failed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub method: String,
    pub axis_value: f64,
    pub trial: usize,
    pub min_rate: Option<f64>,
    pub error: Option<String>,
    /// Partition and power checks of every iteration passed.
    pub invariants_held: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: String,
    pub axis_value: f64,
    pub mean: f64,
    pub median: f64,
    pub stderr: f64,
    /// Successful trials only.
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl SweepResult {
    pub fn aggregate(&self, method: &str, axis_value: f64) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.axis_value == axis_value)
    }

    /// Per-trial min-rates of `method` at `axis_value`, in trial order.
    pub fn trial_values(&self, method: &str, axis_value: f64) -> Vec<Option<f64>> {
        self.records
            .iter()
            .filter(|r| r.method == method && r.axis_value == axis_value)
            .map(|r| r.min_rate)
            .collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(|r| r.min_rate.is_none())
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at `axis_value`, a pure function of its inputs.
pub fn child_seed(master_seed: u64, axis_value: f64, trial: usize) -> u64 {
    mix(mix(mix(master_seed) ^ axis_value.to_bits()) ^ trial as u64)
}

/// Runs the sweep on the global thread pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with(spec, &MethodRegistry::with_builtins())
}

/// Runs the sweep on a dedicated pool of `threads` workers (0 = automatic).
pub fn run_sweep_with_threads(spec: &SweepSpec, threads: usize) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::domain("threads", e.to_string()))?;
    pool.install(|| run_sweep(spec))
}

pub fn run_sweep_with(spec: &SweepSpec, registry: &MethodRegistry) -> Result<SweepResult> {
    spec.validate(registry)?;
    let methods = registry.build_all(&spec.base.methods, &spec.base.settings)?;

    let work: Vec<(f64, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.trials).map(move |t| (v, t)))
        .collect();

    let mut records: Vec<TrialRecord> = work
        .par_iter()
        .flat_map_iter(|&(value, trial)| {
            let (dims, power) = spec.point(value);
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(spec.master_seed, value, trial));
            let drawn = sample_channels(dims, &spec.base.pathloss, &mut rng).map(|cs| {
                let phases = random_phases(dims.irs_elements, &mut rng);
                (cs, phases)
            });
            methods
                .iter()
                .map(|method| {
                    let outcome = drawn.as_ref().map_err(|e| e.to_string()).and_then(|(cs, phases)| {
                        let ctx = TrialContext {
                            channels: cs,
                            noise: &spec.base.noise,
                            power,
                            random_phases: phases,
                        };
                        method.evaluate(&ctx).map_err(|e| e.to_string())
                    });
                    match outcome {
                        Ok(out) => TrialRecord {
                            method: method.name().to_string(),
                            axis_value: value,
                            trial,
                            min_rate: Some(out.rates.min_rate),
                            error: None,
                            invariants_held: out.trace.as_ref().is_none_or(|t| t.invariants_held()),
                        },
                        Err(e) => TrialRecord {
                            method: method.name().to_string(),
                            axis_value: value,
                            trial,
                            min_rate: None,
                            error: Some(e),
                            invariants_held: true,
                        },
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();

    sort_records(&mut records);
    let aggregates = aggregate_records(&records);
    Ok(SweepResult {
        axis: spec.axis,
        records,
        aggregates,
    })
}

fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.axis_value.total_cmp(&b.axis_value))
            .then(a.trial.cmp(&b.trial))
    });
}

/// Mean, median and standard error of the mean; failed trials are skipped.
pub fn aggregate_records(records: &[TrialRecord]) -> Vec<Aggregate> {
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.method.cmp(&b.method).then(a.axis_value.total_cmp(&b.axis_value)));
    sorted
        .chunk_by(|a, b| a.method == b.method && a.axis_value == b.axis_value)
        .map(|group| {
            let values: Vec<f64> = group.iter().filter_map(|r| r.min_rate).collect();
            let stats = Summary::of(&values);
            Aggregate {
                method: group[0].method.clone(),
                axis_value: group[0].axis_value,
                mean: stats.mean,
                median: stats.median,
                stderr: stats.stderr,
                trials: values.len(),
            }
        })
        .collect()
}

/// Sample statistics of a set of values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation over `sqrt(n)`; zero below two samples.
    pub stderr: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                median: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let stderr = if n < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self { mean, median, stderr }
    }
}

/// Floats are written with 16 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.15e}")
    }
}

fn format_axis_value(axis: SweepAxis, value: f64) -> String {
    match axis {
        SweepAxis::IrsElements => format!("{}", value as u64),
        SweepAxis::TransmitPowerDbm => format_float(value),
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `<name>_raw.csv` and `<name>_agg.csv` into `dir`.
pub fn write_results(result: &SweepResult, dir: &Path, name: &str) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let raw_path = dir.join(format!("{name}_raw.csv"));
    let agg_path = dir.join(format!("{name}_agg.csv"));

    let mut raw = csv::Writer::from_path(&raw_path).map_err(csv_err(&raw_path))?;
    raw.write_record(RAW_HEADER).map_err(csv_err(&raw_path))?;
    for r in &result.records {
        raw.write_record([
            r.method.clone(),
            result.axis.label().to_string(),
            format_axis_value(result.axis, r.axis_value),
            r.trial.to_string(),
            format_float(r.min_rate.unwrap_or(f64::NAN)),
        ])
        .map_err(csv_err(&raw_path))?;
    }
    raw.flush().map_err(|source| Error::Io {
        path: raw_path.clone(),
        source,
    })?;

    let mut agg = csv::Writer::from_path(&agg_path).map_err(csv_err(&agg_path))?;
    agg.write_record(AGG_HEADER).map_err(csv_err(&agg_path))?;
    for a in &result.aggregates {
        agg.write_record([
            a.method.clone(),
            format_axis_value(result.axis, a.axis_value),
            format_float(a.mean),
            format_float(a.median),
            format_float(a.stderr),
            a.trials.to_string(),
        ])
        .map_err(csv_err(&agg_path))?;
    }
    agg.flush().map_err(|source| Error::Io {
        path: agg_path.clone(),
        source,
    })?;
    Ok((raw_path, agg_path))
}

fn parse_float(field: &str, path: &Path) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|e| Error::domain("csv field", format!("{}: cannot parse `{field}`: {e}", path.display())))
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let found = reader.headers().map_err(csv_err(path))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::domain(
            "csv header",
            format!("{}: expected {:?}, found {:?}", path.display(), header, found),
        ));
    }
    reader
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err(path))
}

/// Parses a raw CSV back into trial records (error text is not persisted).
pub fn read_raw(path: &Path) -> Result<(Option<SweepAxis>, Vec<TrialRecord>)> {
    let mut axis = None;
    let mut records = Vec::new();
    for row in read_rows(path, &RAW_HEADER)? {
        axis = SweepAxis::from_label(&row[1]);
        let rate = parse_float(&row[4], path)?;
        records.push(TrialRecord {
            method: row[0].to_string(),
            axis_value: parse_float(&row[2], path)?,
            trial: row[3]
                .parse()
                .map_err(|e| Error::domain("csv field", format!("{}: bad trial index: {e}", path.display())))?,
            min_rate: (!rate.is_nan()).then_some(rate),
            error: None,
            invariants_held: true,
        });
    }
    Ok((axis, records))
}

pub fn read_aggregates(path: &Path) -> Result<Vec<Aggregate>> {
    read_rows(path, &AGG_HEADER)?
        .into_iter()
        .map(|row| {
            Ok(Aggregate {
                method: row[0].to_string(),
                axis_value: parse_float(&row[1], path)?,
                mean: parse_float(&row[2], path)?,
                median: parse_float(&row[3], path)?,
                stderr: parse_float(&row[4], path)?,
                trials: row[5]
                    .parse()
                    .map_err(|e| Error::domain("csv field", format!("{}: bad trial count: {e}", path.display())))?,
            })
        })
        .collect()
}

/// Plain-text aggregate table.
pub fn render_table(result: &SweepResult, mut out: impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<14} {:>20} {:>16} {:>16} {:>14} {:>7}",
        "method",
        result.axis.label(),
        "mean [bit/s]",
        "median [bit/s]",
        "stderr",
        "trials"
    )?;
    for a in &result.aggregates {
        writeln!(
            out,
            "{:<14} {:>20} {:>16.6e} {:>16.6e} {:>14.4e} {:>7}",
            a.method, a.axis_value, a.mean, a.median, a.stderr, a.trials
        )?;
    }
    Ok(())
}
