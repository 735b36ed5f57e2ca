//! Experiment suites: the CNLS run, the CGP-2D comparison and the
//! high-dimensional random instance.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Method, ProblemKind, RunConfig};
use crate::error::CliError;
use crate::output::{write_json, write_run, Summary};
use crate::pipeline::run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Fig4,
    Fig5,
    Highdim,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Fig4 => "fig4",
            Suite::Fig5 => "fig5",
            Suite::Highdim => "highdim",
        }
    }

    pub fn runs(self, seed: u64) -> Vec<RunConfig> {
        let (problem, methods): (ProblemKind, &[Method]) = match self {
            Suite::Fig4 => (ProblemKind::Cnls, &[Method::IppmSwsg]),
            Suite::Fig5 => (
                ProblemKind::Cgp2d,
                &[Method::IppmAcgd, Method::SStarBl, Method::SBlAdaLs],
            ),
            Suite::Highdim => (
                ProblemKind::CgpRand,
                &[
                    Method::IppmSwsg,
                    Method::IppmAcgd,
                    Method::SStarBl,
                    Method::SBlAdaLs,
                ],
            ),
        };
        methods
            .iter()
            .map(|&m| RunConfig {
                seed,
                ..RunConfig::new(m, problem)
            })
            .collect()
    }
}

#[derive(Debug, Serialize)]
pub struct SuiteSummary {
    pub suite: Suite,
    pub seed: u64,
    pub runs: Vec<Summary>,
}

/// Worker count from `HC_SOLVERS_THREADS`, or rayon's default when unset.
pub fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("HC_SOLVERS_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            CliError::Config(format!(
                "HC_SOLVERS_THREADS must be a positive integer, got `{v}`"
            ))
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))
}

/// Runs every method of the suite, writing `<method>.csv`/`.json` per run and
/// `summary.json` into `dir/<suite>`.
pub fn run_suite(suite: Suite, seed: u64, dir: &Path) -> Result<(PathBuf, SuiteSummary), CliError> {
    let dir = dir.join(suite.name());
    let pool = thread_pool()?;
    let outcomes: Vec<_> = pool.install(|| suite.runs(seed).par_iter().map(run).collect());
    let mut runs = Vec::new();
    for outcome in outcomes {
        let outcome = outcome?;
        let (_, summary) = write_run(&dir, &outcome.config.method.to_string(), &outcome)?;
        runs.push(summary);
    }
    let summary = SuiteSummary { suite, seed, runs };
    let path = dir.join("summary.json");
    write_json(&path, &summary)?;
    Ok((path, summary))
}
