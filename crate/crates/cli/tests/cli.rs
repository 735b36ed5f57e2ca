use std::path::Path;
use std::process::Command;

use hcopt_cli::bench::{run_suite, Suite};
use hcopt_cli::config::{Method, ProblemKind, RunConfig, Settings};
use hcopt_cli::output::{strip_stamp, CSV_COLUMNS, CSV_STAMP_PREFIX};
use hcopt_cli::pipeline;

fn hcopt(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hcopt"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn hcopt_plain(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hcopt"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Rows of a trace file as `(oracle_calls, f1, f2, penalty, eta, iter_kind)`.
fn rows(csv: &str) -> Vec<Vec<String>> {
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with(CSV_STAMP_PREFIX));
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS);
    lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn assert_calls_increase(rows: &[Vec<String>]) {
    let calls: Vec<u64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(calls.windows(2).all(|w| w[0] < w[1]), "{calls:?}");
}

#[test]
fn solve_star_bundle_on_cgp2d() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = hcopt(
        &[
            "solve",
            "--method",
            "s-starbl",
            "--problem",
            "cgp2d",
            "--eps",
            "1e-2",
        ],
        dir.path(),
    );
    assert_eq!(code, 0, "{stderr}");
    let summary: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!((summary["f1_final"].as_f64().unwrap() - 5.0).abs() <= 1e-2);
    let keys: Vec<&str> = summary
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    for k in [
        "method",
        "problem",
        "seed",
        "f1_final",
        "f2_final",
        "f1_star_ref",
        "gap",
        "oracle_calls_total",
        "wall_ms",
    ] {
        assert!(keys.contains(&k), "missing {k}");
    }
    assert_eq!(summary["params"]["alpha"], 0.3);
    let csv = std::fs::read_to_string(dir.path().join("s-starbl_cgp2d.csv")).unwrap();
    let rows = rows(&csv);
    assert_eq!(rows[0].len(), 6);
    assert_calls_increase(&rows);
    let on_disk: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("s-starbl_cgp2d.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(on_disk["f1_final"], summary["f1_final"]);
}

#[test]
fn solve_grid_on_cnls() {
    let cfg = RunConfig::new(Method::Grid, ProblemKind::Cnls);
    let out = pipeline::run(&cfg).unwrap();
    let band = 2.0 * 1e-3 * 10f64.sqrt();
    assert!((out.report.f1 - 0.15).abs() <= band, "{}", out.report.f1);
}

#[test]
fn solve_respects_the_oracle_budget() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = hcopt(
        &[
            "solve",
            "--method",
            "ippm-swsg",
            "--problem",
            "cgp-rand",
            "--seed",
            "7",
            "--budget",
            "1210",
        ],
        dir.path(),
    );
    assert!(code == 0 || code == 1, "{stderr}");
    let summary: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(summary["oracle_calls_total"].as_u64().unwrap() <= 1210);
    let csv = std::fs::read_to_string(dir.path().join("ippm-swsg_cgp-rand.csv")).unwrap();
    let rows = rows(&csv);
    assert_calls_increase(&rows);
    assert!(rows.iter().all(|r| r[0].parse::<u64>().unwrap() <= 1210));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Bundle methods need a smooth problem.
    assert_eq!(
        hcopt(&["solve", "--method", "s-starbl", "--problem", "cnls"], d).0,
        2
    );
    assert_eq!(
        hcopt(
            &[
                "solve",
                "--method",
                "s-starbl",
                "--problem",
                "cgp2d",
                "--set",
                "nope=1"
            ],
            d
        )
        .0,
        2
    );
    assert_eq!(
        hcopt(
            &[
                "solve",
                "--method",
                "s-starbl",
                "--problem",
                "cgp2d",
                "--set",
                "n_outer=3"
            ],
            d
        )
        .0,
        2
    );
    assert_eq!(hcopt(&["solve", "--problem", "cgp2d"], d).0, 2);
    // ρ̂ below the weak-convexity constant is rejected by the solver.
    let (code, _, stderr) = hcopt(
        &[
            "solve",
            "--method",
            "ippm-acgd",
            "--problem",
            "cgp2d",
            "--set",
            "rho_hat=0.5",
        ],
        d,
    );
    assert_eq!(code, 3);
    assert!(stderr.contains("rho_hat"), "{stderr}");
    // Too few steps to reach the tolerance.
    assert_eq!(
        hcopt(
            &[
                "solve",
                "--method",
                "s-starbl",
                "--problem",
                "cgp2d",
                "--set",
                "t_steps=3"
            ],
            d
        )
        .0,
        1
    );
}

#[test]
fn config_file_then_flags_then_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(
        &path,
        "method = \"s-bl-adals\"\nproblem = \"cgp2d\"\neps = 0.05\nn_epochs = 4\nt_steps = 50\n",
    )
    .unwrap();
    let file = Settings::from_toml_file(&path).unwrap();
    let mut flags = Settings {
        eps: Some(0.02),
        ..Settings::default()
    };
    flags.set_assignment("t_steps=80").unwrap();
    let cfg = file.merge(flags).into_run_config().unwrap();
    assert_eq!(cfg.method, Method::SBlAdaLs);
    assert_eq!(cfg.eps, Some(0.02));
    assert_eq!(cfg.overrides["t_steps"], 80.0);
    assert_eq!(cfg.overrides["n_epochs"], 4.0);
    let out = pipeline::run(&cfg).unwrap();
    assert_eq!(out.report.params["t_steps"], 80.0);
    assert_eq!(out.report.params["n_epochs"], 4.0);
    assert_eq!(out.report.params["eps"], 0.02);

    assert!(Settings::from_toml_str("method = 3").is_err());
    assert!(Settings::from_toml_str("method = \"newton\"").is_err());
    assert!(Settings::from_toml_str("alpha = \"big\"").is_err());
    assert!(Settings::from_toml_str("seed = 1.5").is_err());
    assert!(Settings::from_toml_str("not toml [").is_err());
}

#[test]
fn meta_overrides_reach_the_schedule() {
    let mut cfg = RunConfig::new(Method::IppmAcgd, ProblemKind::Cgp2d);
    cfg.overrides.insert("meta.l_smooth".into(), 50.0);
    cfg.overrides.insert("n_outer".into(), 2.0);
    let out = pipeline::run(&cfg).unwrap();
    assert_eq!(out.report.params["meta.l_smooth"], 50.0);
    assert_eq!(out.report.params["n_outer"], 2.0);
    // (L + ρ̂)(1 + λ̄)/(ρ̂ − ρ) with ρ̂ = 2, ρ = 1, λ̄ = 1.
    assert!((out.report.params["acgd_kappa"] - 104.0).abs() < 1e-9);
}

#[test]
fn reference_command() {
    let (code, stdout, _) = hcopt_plain(&["reference", "--problem", "cgp2d", "--eps", "1e-6"]);
    assert_eq!(code, 0);
    assert!((stdout.trim().parse::<f64>().unwrap() - 5.0).abs() <= 1e-6);
    let (code, stdout, _) = hcopt_plain(&["reference", "--problem", "cnls"]);
    assert_eq!(code, 0);
    assert!((stdout.trim().parse::<f64>().unwrap() - 0.15).abs() <= 1e-4);
}

#[test]
fn fig5_suite_is_reproducible_and_feasible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (_, sa) = run_suite(Suite::Fig5, 42, a.path()).unwrap();
    run_suite(Suite::Fig5, 42, b.path()).unwrap();
    assert_eq!(sa.runs.len(), 3);
    for run in &sa.runs {
        assert!(run.f2_final <= 1e-2, "{}: {}", run.method, run.f2_final);
        let file = run.trace_file.as_ref().unwrap();
        let ta = std::fs::read_to_string(a.path().join("fig5").join(file)).unwrap();
        let tb = std::fs::read_to_string(b.path().join("fig5").join(file)).unwrap();
        assert_eq!(strip_stamp(&ta), strip_stamp(&tb));
        assert_calls_increase(&rows(&ta));
    }
}

#[test]
fn fig4_best_penalty_bookkeeping() {
    let dir = tempfile::tempdir().unwrap();
    let (_, s) = run_suite(Suite::Fig4, 42, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("fig4/ippm-swsg.csv")).unwrap();
    let pen: Vec<f64> = rows(&csv).iter().map(|r| r[3].parse().unwrap()).collect();
    let best: Vec<f64> = pen
        .iter()
        .scan(f64::INFINITY, |b, p| {
            *b = b.min(*p);
            Some(*b)
        })
        .collect();
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
    // The reported point is the last outer iterate, which the trace ends on.
    let last = rows(&csv).pop().unwrap();
    assert_eq!(last[1].parse::<f64>().unwrap(), s.runs[0].f1_final);
}

#[test]
fn worker_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hcopt"))
        .args(["bench", "fig4", "--out"])
        .arg(dir.path())
        .env("HC_SOLVERS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
