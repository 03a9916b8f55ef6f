use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flexauction::experiment::{
    self, audit_exit_status, AuditOptions, ClearOptions, CliError, ExitStatus, ExperimentSpec,
    Overrides,
};
use flexauction::{MechanismConfig, MechanismId, StopPolicy};

#[derive(Parser)]
#[command(
    name = "flexauction",
    version,
    about = "Flexible-bidding spectrum auction engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clear one market from an instance file and audit the outcome.
    Clear {
        instance: PathBuf,
        #[arg(long, default_value = "gmwd")]
        mechanism: MechanismId,
        #[arg(long, default_value = "break")]
        policy: StopPolicy,
        /// Cap every adjustable range at this many channels.
        #[arg(long)]
        delta: Option<u32>,
        #[arg(long, default_value_t = 3)]
        num_virtual: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo sweep and write CSV.
    Experiment(SpecArgs),
    /// Check individual rationality and budget balance over a sweep.
    Audit {
        #[command(flatten)]
        spec: SpecArgs,
        /// Replications per grid point that also get a manipulation search.
        #[arg(long, default_value_t = 5)]
        manipulation_instances: u64,
    },
    /// Print a built-in experiment spec as JSON.
    Preset { name: String },
}

#[derive(Args)]
struct SpecArgs {
    /// Experiment spec file.
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// Built-in experiment: fig1, fig2, fig3 or fig4.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<u64>,
    #[arg(long)]
    policy: Option<StopPolicy>,
    /// Keep only the series of this mechanism.
    #[arg(long)]
    mechanism: Option<MechanismId>,
    #[arg(long)]
    delta: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SpecArgs {
    fn load(&self) -> Result<ExperimentSpec, CliError> {
        let mut spec = match (&self.spec, &self.preset) {
            (Some(path), _) => experiment::load_spec(path)?,
            (None, Some(name)) => experiment::load_preset(name)?,
            (None, None) => unreachable!("clap enforces one of spec/preset"),
        };
        Overrides {
            seed: self.seed,
            replications: self.replications,
            policy: self.policy,
            mechanism: self.mechanism,
            delta: self.delta,
        }
        .apply(&mut spec)?;
        Ok(spec)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn run(cli: Cli) -> Result<ExitStatus, CliError> {
    match cli.command {
        Command::Clear {
            instance,
            mechanism,
            policy,
            delta,
            num_virtual,
            out,
        } => {
            let market = experiment::load_instance(&instance)?;
            let opts = ClearOptions {
                mechanism: MechanismConfig {
                    id: mechanism,
                    policy,
                    num_virtual,
                },
                delta,
            };
            let report = experiment::cmd_clear(&market, &opts)?;
            emit(out.as_deref(), &to_json(&report)?)?;
            Ok(if report.individual_rationality && report.budget_balance {
                ExitStatus::Success
            } else {
                ExitStatus::Violation
            })
        }
        Command::Experiment(args) => {
            let spec = args.load()?;
            let csv = experiment::cmd_experiment(&spec)?;
            let out = args
                .out
                .clone()
                .or_else(|| spec.output_path.as_ref().map(PathBuf::from));
            emit(out.as_deref(), &csv)?;
            Ok(ExitStatus::Success)
        }
        Command::Audit {
            spec: args,
            manipulation_instances,
        } => {
            let spec = args.load()?;
            let opts = AuditOptions {
                manipulation_instances,
                ..AuditOptions::default()
            };
            let report = experiment::cmd_audit(&spec, &opts)?;
            emit(args.out.as_deref(), &to_json(&report)?)?;
            Ok(audit_exit_status(&report))
        }
        Command::Preset { name } => {
            let spec = experiment::load_preset(&name)?;
            emit(None, &to_json(&spec)?)?;
            Ok(ExitStatus::Success)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_status() as u8)
        }
    }
}
