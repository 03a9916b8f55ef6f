//! Experiment specifications, presets, CSV output, and the command entry
//! points used by the `flexauction` binary.
//!
//! All files are JSON. An experiment spec looks like:
//!
//! ```json
//! {
//!   "name": "fig1",
//!   "generator": { "num_buyers": 15, "delta": 0, "seed": 2025 },
//!   "mechanisms": [
//!     { "mechanism": "GMWD", "delta": 6 },
//!     { "mechanism": "TCDA" },
//!     { "mechanism": "THIMBLE", "num_virtual": 3 }
//!   ],
//!   "sweep_variable": "buyers",
//!   "sweep_values": [5, 10, 15],
//!   "replications": 10000
//! }
//! ```
//!
//! Omitted generator fields take their defaults. A series may override
//! `delta`, `buyers` or `demand_width`, except for the swept variable.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::audit::{manipulation_gain_search, ManipulationGrid, PropertyReport};
use crate::benchmark::{MechanismConfig, MechanismId, DEFAULT_NUM_VIRTUAL};
use crate::error::Error;
use crate::gmwd::{AuctionOutcome, StopPolicy};
use crate::market::Instance;
use crate::sim::{clear_replication, GeneratorConfig, GridPoint, GridRun, MetricsSummary};
use crate::{audit, sim};

/// Replication count of the built-in presets.
pub const PRESET_REPLICATIONS: u64 = 10_000;
/// Reduced replication count for quick runs.
pub const FAST_REPLICATIONS: u64 = 500;

pub const PRESET_NAMES: [&str; 4] = ["fig1", "fig2", "fig3", "fig4"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Buyers,
    Delta,
    DemandRange,
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::Buyers => "buyers",
            SweepVariable::Delta => "delta",
            SweepVariable::DemandRange => "demand_range",
        })
    }
}

/// One curve of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub mechanism: MechanismId,
    #[serde(default)]
    pub policy: StopPolicy,
    #[serde(default = "default_num_virtual")]
    pub num_virtual: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buyers: Option<usize>,
    /// Width of the demand-mean range, centred on the generator's range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand_width: Option<f64>,
}

fn default_num_virtual() -> usize {
    DEFAULT_NUM_VIRTUAL
}

impl SeriesSpec {
    pub fn new(mechanism: MechanismId) -> Self {
        SeriesSpec {
            mechanism,
            policy: StopPolicy::Break,
            num_virtual: DEFAULT_NUM_VIRTUAL,
            delta: None,
            buyers: None,
            demand_width: None,
        }
    }

    pub fn delta(self, delta: u32) -> Self {
        SeriesSpec {
            delta: Some(delta),
            ..self
        }
    }

    pub fn buyers(self, buyers: usize) -> Self {
        SeriesSpec {
            buyers: Some(buyers),
            ..self
        }
    }

    pub fn demand_width(self, width: f64) -> Self {
        SeriesSpec {
            demand_width: Some(width),
            ..self
        }
    }

    pub fn mechanism_config(&self) -> MechanismConfig {
        MechanismConfig {
            id: self.mechanism,
            policy: self.policy,
            num_virtual: self.num_virtual,
        }
    }

    /// Mechanism label plus any buyer-count or demand-width override.
    pub fn label(&self) -> String {
        let mut label = self.mechanism.label().to_string();
        if self.policy == StopPolicy::Skip {
            label.push_str("/skip");
        }
        if let Some(m) = self.buyers {
            label.push_str(&format!("[M={m}]"));
        }
        if let Some(w) = self.demand_width {
            label.push_str(&format!("[w={w}]"));
        }
        label
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub generator: GeneratorConfig,
    pub mechanisms: Vec<SeriesSpec>,
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<f64>,
    pub replications: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

fn as_count(what: &str, v: f64) -> Result<u64, Error> {
    if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(Error::Config(format!(
            "{what} must be a non-negative integer, got {v}"
        )))
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("experiment name is empty".into()));
        }
        if self.sweep_values.is_empty() {
            return Err(Error::Config(format!(
                "experiment '{}' has no sweep values",
                self.name
            )));
        }
        if self.mechanisms.is_empty() {
            return Err(Error::Config(format!(
                "experiment '{}' has no mechanisms",
                self.name
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        for s in &self.mechanisms {
            let clash = match self.sweep_variable {
                SweepVariable::Buyers => s.buyers.is_some(),
                SweepVariable::Delta => s.delta.is_some(),
                SweepVariable::DemandRange => s.demand_width.is_some(),
            };
            if clash {
                return Err(Error::Config(format!(
                    "series {} overrides the swept variable {}",
                    s.label(),
                    self.sweep_variable
                )));
            }
            if s.num_virtual == 0 {
                return Err(Error::Config("num_virtual must be at least 1".into()));
            }
        }
        self.grid().map(|_| ())
    }

    fn demand_centre(&self) -> f64 {
        let (lo, hi) = self.generator.demand_mean_range;
        (lo + hi) / 2.0
    }

    /// Expands the spec into paired grid points.
    pub fn grid(&self) -> Result<Vec<GridPoint>, Error> {
        let centre = self.demand_centre();
        self.sweep_values
            .iter()
            .map(|&value| {
                let mut base = self.generator.clone();
                match self.sweep_variable {
                    SweepVariable::Buyers => base.num_buyers = as_count("buyers", value)? as usize,
                    SweepVariable::Delta => base.delta = as_count("delta", value)? as u32,
                    SweepVariable::DemandRange => base = base.with_demand_width(centre, value),
                }
                let runs = self
                    .mechanisms
                    .iter()
                    .map(|s| {
                        let mut generator = base.clone();
                        if let Some(d) = s.delta {
                            generator.delta = d;
                        }
                        if let Some(m) = s.buyers {
                            generator.num_buyers = m;
                        }
                        if let Some(w) = s.demand_width {
                            generator = generator.with_demand_width(centre, w);
                        }
                        generator.validate()?;
                        Ok(GridRun {
                            label: s.label(),
                            generator,
                            mechanism: s.mechanism_config(),
                        })
                    })
                    .collect::<Result<Vec<_>, Error>>()?;
                Ok(GridPoint {
                    sweep_value: value,
                    runs,
                })
            })
            .collect()
    }
}

/// Built-in welfare sweeps `fig1` to `fig4`.
pub fn preset(name: &str) -> Option<ExperimentSpec> {
    use MechanismId::*;
    let generator = GeneratorConfig::default();
    let spec = match name {
        "fig1" => ExperimentSpec {
            name: name.into(),
            generator,
            mechanisms: vec![
                SeriesSpec::new(Gmwd).delta(6),
                SeriesSpec::new(Gmwd).delta(2),
                SeriesSpec::new(Tcda),
                SeriesSpec::new(Thimble),
            ],
            sweep_variable: SweepVariable::Buyers,
            sweep_values: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            replications: PRESET_REPLICATIONS,
            output_path: None,
        },
        "fig2" => ExperimentSpec {
            name: name.into(),
            generator: GeneratorConfig {
                num_buyers: 15,
                ..generator
            },
            mechanisms: vec![
                SeriesSpec::new(Gmwd).delta(2),
                SeriesSpec::new(Gmwd).delta(4),
                SeriesSpec::new(Gmwd).delta(10),
                SeriesSpec::new(Tcda),
                SeriesSpec::new(Thimble),
            ],
            sweep_variable: SweepVariable::DemandRange,
            sweep_values: (0..=11).map(|w| 2.0 * w as f64).collect(),
            replications: PRESET_REPLICATIONS,
            output_path: None,
        },
        "fig3" => ExperimentSpec {
            name: name.into(),
            generator,
            mechanisms: [5, 10, 15, 20]
                .into_iter()
                .map(|m| SeriesSpec::new(Gmwd).buyers(m))
                .collect(),
            sweep_variable: SweepVariable::Delta,
            sweep_values: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
            replications: PRESET_REPLICATIONS,
            output_path: None,
        },
        "fig4" => ExperimentSpec {
            name: name.into(),
            generator: GeneratorConfig {
                num_buyers: 15,
                ..generator
            },
            mechanisms: [4.0, 8.0, 12.0, 16.0]
                .into_iter()
                .map(|w| SeriesSpec::new(Gmwd).demand_width(w))
                .collect(),
            sweep_variable: SweepVariable::Delta,
            sweep_values: (0..=10).map(f64::from).collect(),
            replications: PRESET_REPLICATIONS,
            output_path: None,
        },
        _ => return None,
    };
    Some(spec)
}

/// Command-line overrides applied on top of a spec.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<u64>,
    pub policy: Option<StopPolicy>,
    pub mechanism: Option<MechanismId>,
    pub delta: Option<u32>,
}

impl Overrides {
    pub fn apply(&self, spec: &mut ExperimentSpec) -> Result<(), Error> {
        if let Some(seed) = self.seed {
            spec.generator.seed = seed;
        }
        if let Some(r) = self.replications {
            spec.replications = r;
        }
        if let Some(p) = self.policy {
            for s in &mut spec.mechanisms {
                s.policy = p;
            }
        }
        if let Some(m) = self.mechanism {
            spec.mechanisms.retain(|s| s.mechanism == m);
            if spec.mechanisms.is_empty() {
                return Err(Error::Config(format!(
                    "experiment '{}' has no {m} series",
                    spec.name
                )));
            }
        }
        if let Some(d) = self.delta {
            if spec.sweep_variable == SweepVariable::Delta {
                return Err(Error::Config("--delta conflicts with a delta sweep".into()));
            }
            spec.generator.delta = d;
        }
        spec.validate()
    }
}

/// One CSV row per (sweep value, series).
#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    sweep_var: String,
    sweep_value: f64,
    mechanism: &'a str,
    delta: u32,
    replications: u64,
    mean_welfare: f64,
    welfare_std: f64,
    mean_winners: f64,
    mean_revenue: f64,
    seed: u64,
}

pub const CSV_HEADER: &str = "sweep_var,sweep_value,mechanism,delta,replications,mean_welfare,welfare_std,mean_winners,mean_revenue,seed";

pub fn summaries_to_csv(sweep: SweepVariable, rows: &[MetricsSummary]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in rows {
        w.serialize(CsvRow {
            sweep_var: sweep.to_string(),
            sweep_value: s.sweep_value,
            mechanism: &s.label,
            delta: s.delta,
            replications: s.replications,
            mean_welfare: s.mean_welfare,
            welfare_std: s.welfare_std,
            mean_winners: s.mean_winner_count,
            mean_revenue: s.mean_revenue,
            seed: s.seed,
        })?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Process exit statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Validation = 1,
    Violation = 2,
    Internal = 3,
}

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("unknown preset '{0}' (available: fig1, fig2, fig3, fig4)")]
    UnknownPreset(String),
    #[error(transparent)]
    Engine(#[from] Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::UnknownPreset(_) => {
                ExitStatus::Validation
            }
            CliError::Engine(e) if e.is_validation() => ExitStatus::Validation,
            CliError::Engine(_) | CliError::Csv(_) | CliError::Internal(_) => ExitStatus::Internal,
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

pub fn load_instance(path: &Path) -> Result<Instance, CliError> {
    read_json(path)
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec, CliError> {
    let spec: ExperimentSpec = read_json(path)?;
    spec.validate()?;
    Ok(spec)
}

pub fn load_preset(name: &str) -> Result<ExperimentSpec, CliError> {
    preset(name).ok_or_else(|| CliError::UnknownPreset(name.to_owned()))
}

#[derive(Clone, Debug)]
pub struct ClearOptions {
    pub mechanism: MechanismConfig,
    /// Caps every adjustable range at `min(delta, D)` before clearing.
    pub delta: Option<u32>,
}

impl Default for ClearOptions {
    fn default() -> Self {
        ClearOptions {
            mechanism: MechanismConfig::new(MechanismId::Gmwd),
            delta: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClearReport {
    pub outcome: AuctionOutcome,
    pub individual_rationality: bool,
    pub budget_balance: bool,
}

pub fn cmd_clear(instance: &Instance, opts: &ClearOptions) -> Result<ClearReport, CliError> {
    let instance = match opts.delta {
        Some(d) => instance.with_adjust_cap(d),
        None => instance.clone(),
    };
    let outcome = opts.mechanism.clear(&instance)?;
    Ok(ClearReport {
        individual_rationality: audit::check_individual_rationality(&instance, &outcome)?,
        budget_balance: audit::check_budget_balance(&instance, &outcome)?,
        outcome,
    })
}

/// Runs the sweep and renders the CSV.
pub fn cmd_experiment(spec: &ExperimentSpec) -> Result<String, CliError> {
    spec.validate()?;
    let rows = sim::run_sweep(&spec.grid()?, spec.replications)?;
    summaries_to_csv(spec.sweep_variable, &rows)
}

#[derive(Clone, Debug)]
pub struct AuditOptions {
    /// Replications per grid point that also get a manipulation search.
    pub manipulation_instances: u64,
    pub grid: ManipulationGrid,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            manipulation_instances: 5,
            grid: ManipulationGrid::default(),
        }
    }
}

/// IR/BB audit over the spec's instance stream, with a manipulation probe on
/// a prefix of each grid point.
pub fn cmd_audit(spec: &ExperimentSpec, opts: &AuditOptions) -> Result<PropertyReport, CliError> {
    spec.validate()?;
    let mut total = PropertyReport::default();
    for point in spec.grid()? {
        let reports: Vec<PropertyReport> = (0..spec.replications)
            .into_par_iter()
            .map(|rep| audit_replication(&point, rep, opts))
            .collect::<Result<_, Error>>()?;
        for r in &reports {
            total.merge(r);
        }
    }
    Ok(total)
}

fn audit_replication(
    point: &GridPoint,
    rep: u64,
    opts: &AuditOptions,
) -> Result<PropertyReport, Error> {
    let mut report = PropertyReport::default();
    for (run, (instance, outcome)) in point.runs.iter().zip(clear_replication(point, rep)?) {
        report.record_outcome(&instance, &outcome)?;
        if rep < opts.manipulation_instances {
            for bid in instance.bids() {
                let gain = manipulation_gain_search(
                    &instance,
                    bid.buyer_id(),
                    &run.mechanism,
                    &opts.grid,
                )?;
                report.record_gain(gain);
            }
        }
    }
    Ok(report)
}

/// Audits a grid point with an arbitrary clearing rule; used to check that
/// the audit catches a broken payment rule.
pub fn audit_point_with<F>(
    point: &GridPoint,
    replications: u64,
    clear: F,
) -> Result<PropertyReport, Error>
where
    F: Fn(&MechanismConfig, &Instance) -> Result<AuctionOutcome, Error>,
{
    let mut report = PropertyReport::default();
    for rep in 0..replications {
        for run in &point.runs {
            let instance = sim::generate_instance(&run.generator, rep)?;
            let outcome = clear(&run.mechanism, &instance)?;
            report.record_outcome(&instance, &outcome)?;
        }
    }
    Ok(report)
}

pub fn audit_exit_status(report: &PropertyReport) -> ExitStatus {
    if report.has_violations() {
        ExitStatus::Violation
    } else {
        ExitStatus::Success
    }
}
