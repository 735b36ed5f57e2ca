//! Benchmark harness for the hidden-convexity solvers: configurable runs,
//! experiment suites, trace CSV and summary JSON.

pub mod bench;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bench::{run_suite, Suite};
use crate::config::{Method, ProblemKind, Settings};
use crate::error::CliError;
use crate::output::write_run;

#[derive(Debug, Parser)]
#[command(
    name = "hcopt",
    version,
    about = "Solvers for hidden-convex constrained problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one solver pipeline on one problem.
    Solve(SolveArgs),
    /// Run an experiment suite.
    Bench(BenchArgs),
    /// Print the reference optimal value of a problem.
    Reference(ReferenceArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// TOML file with flat `key = value` settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub problem: Option<ProblemKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub eta0: Option<f64>,
    /// Cap on first-order oracle calls.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Schedule override, e.g. `--set n_outer=20`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// File stem; defaults to `<method>_<problem>`.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub suite: Suite,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReferenceArgs {
    #[arg(long)]
    pub problem: ProblemKind,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Accuracy of the reference solve.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Use grid search with this resolution instead (two-dimensional problems).
    #[arg(long)]
    pub grid: Option<f64>,
}

impl SolveArgs {
    pub fn settings(&self) -> Result<Settings, CliError> {
        let file = match &self.config {
            Some(p) => Settings::from_toml_file(p)?,
            None => Settings::default(),
        };
        let mut flags = Settings {
            method: self.method,
            problem: self.problem,
            seed: self.seed,
            eps: self.eps,
            tau: self.tau,
            lambda: self.lambda,
            eta0: self.eta0,
            budget: self.budget,
            ..Settings::default()
        };
        for s in &self.set {
            flags.set_assignment(s)?;
        }
        Ok(file.merge(flags))
    }
}

/// Exit status: 0 on success, 1 when a run misses its tolerance against a
/// reference value, 2 on configuration errors, 3 on solver errors.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hcopt: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = args.settings()?.into_run_config()?;
            let outcome = pipeline::run(&cfg)?;
            let stem = args
                .name
                .clone()
                .unwrap_or_else(|| format!("{}_{}", cfg.method, cfg.problem));
            let (_, summary) = write_run(&args.out, &stem, &outcome)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            Ok(if outcome.within_tolerance() == Some(false) {
                1
            } else {
                0
            })
        }
        Command::Bench(args) => {
            let (path, summary) = run_suite(args.suite, args.seed, &args.out)?;
            for r in &summary.runs {
                println!(
                    "{:<11} {:<9} f1 {:<12.6} f2 {:<12.3e} gap {:<12} calls {}",
                    r.method,
                    r.problem,
                    r.f1_final,
                    r.f2_final,
                    r.gap.map_or("-".into(), |g| format!("{g:.3e}")),
                    r.oracle_calls_total
                );
            }
            println!("summary: {}", path.display());
            Ok(0)
        }
        Command::Reference(args) => {
            let mut settings = Settings {
                method: Some(if args.grid.is_some() {
                    Method::Grid
                } else {
                    Method::RefConvex
                }),
                problem: Some(args.problem),
                seed: Some(args.seed),
                ..Settings::default()
            };
            if let Some(eps) = args.eps {
                settings.overrides.insert("ref_eps".into(), eps);
            }
            if let Some(res) = args.grid {
                settings.overrides.insert("res".into(), res);
            }
            let outcome = pipeline::run(&settings.into_run_config()?)?;
            println!("{}", outcome.report.f1);
            Ok(0)
        }
    }
}
