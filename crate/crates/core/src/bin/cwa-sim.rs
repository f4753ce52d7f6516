use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cwa_risk::coverage::{self, CoverageParams};
use cwa_risk::output::{self, Format};
use cwa_risk::scenario::{self, Scenario};
use cwa_risk::{basic, ModelVersion, RiskConfig};

/// Corona-Warn-App risk models and exposure-notification simulator.
#[derive(Parser)]
#[command(name = "cwa-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and list every problem.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate a scenario and score every device under one model.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "v2")]
        model: ModelVersion,
        #[command(flatten)]
        common: Common,
    },
    /// Per exposure day, both models side by side.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo coverage analysis.
    Coverage {
        /// Coverage parameter file; defaults to 30% adoption, 60% sharing.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        trials: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Every score the v1 model can produce.
    EnumerateScores {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Partial risk configuration overriding the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "table")]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self, base: &RiskConfig) -> cwa_risk::Result<RiskConfig> {
        match &self.config {
            Some(path) => scenario::apply_config_overrides(base, &scenario::read_file(path)?),
            None => Ok(base.clone()),
        }
    }

    fn scenario(&self, path: &Path) -> cwa_risk::Result<Scenario> {
        let mut s: Scenario = scenario::read_json_file(path)?;
        s.config = self.config(&s.config)?;
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s.validate()?;
        Ok(s)
    }

    fn emit(&self, text: &str) -> cwa_risk::Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, text).map_err(|source| cwa_risk::Error::Io {
                path: path.clone(),
                source,
            }),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn execute(command: Command) -> cwa_risk::Result<()> {
    match command {
        Command::Validate { scenario, common } => {
            let s = common.scenario(&scenario)?;
            common.emit(&format!(
                "ok: {} people, {} contacts, {} tests, {} evaluation dates\n",
                s.people.len(),
                s.contacts.len(),
                s.tests.len(),
                s.evaluation_dates.len()
            ))
        }
        Command::Run {
            scenario,
            model,
            common,
        } => {
            let s = common.scenario(&scenario)?;
            common.emit(&output::render_run(
                &scenario::run(&s, model)?,
                common.format,
            ))
        }
        Command::Compare { scenario, common } => {
            let s = common.scenario(&scenario)?;
            common.emit(&output::render_compare(
                &scenario::compare(&s)?,
                common.format,
            ))
        }
        Command::Coverage {
            params,
            trials,
            common,
        } => {
            let mut p: CoverageParams = match &params {
                Some(path) => scenario::read_json_file(path)?,
                None => CoverageParams::thirty_percent_adoption(),
            };
            p.config = common.config(&p.config)?;
            p.trials = trials.unwrap_or(p.trials);
            p.seed = common.seed.unwrap_or(p.seed);
            let report = coverage::monte_carlo_coverage(&p)?;
            common.emit(&output::render_coverage(&report, common.format))
        }
        Command::EnumerateScores { common } => {
            let config = common.config(&RiskConfig::default())?;
            common.emit(&output::render_scores(
                &basic::enumerate_possible_trs(&config),
                common.format,
            ))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "errors": e.messages() }));
            ExitCode::FAILURE
        }
    }
}
