//! Run configuration: a flat TOML file, command-line flags and `--set`
//! overrides, applied in that order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum, Serialize)]
pub enum Method {
    #[value(name = "ippm-swsg")]
    #[serde(rename = "ippm-swsg")]
    IppmSwsg,
    #[value(name = "ippm-acgd")]
    #[serde(rename = "ippm-acgd")]
    IppmAcgd,
    #[value(name = "s-starbl")]
    #[serde(rename = "s-starbl")]
    SStarBl,
    #[value(name = "s-bl-adals")]
    #[serde(rename = "s-bl-adals")]
    SBlAdaLs,
    #[value(name = "ref-convex")]
    #[serde(rename = "ref-convex")]
    RefConvex,
    #[value(name = "grid")]
    #[serde(rename = "grid")]
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum, Serialize)]
pub enum ProblemKind {
    #[value(name = "cnls")]
    #[serde(rename = "cnls")]
    Cnls,
    #[value(name = "cgp2d")]
    #[serde(rename = "cgp2d")]
    Cgp2d,
    #[value(name = "cgp-rand")]
    #[serde(rename = "cgp-rand")]
    CgpRand,
}

fn tag<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

fn parse_tag<T: ValueEnum>(s: &str, what: &str) -> Result<T, CliError> {
    T::from_str(s, false).map_err(|_| {
        let names: Vec<String> = T::value_variants().iter().map(tag).collect();
        CliError::Config(format!(
            "unknown {what} `{s}`; expected one of {}",
            names.join(", ")
        ))
    })
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&tag(self))
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&tag(self))
    }
}

impl FromStr for Method {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        parse_tag(s, "method")
    }
}

impl FromStr for ProblemKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        parse_tag(s, "problem")
    }
}

impl Method {
    pub fn needs_smooth(self) -> bool {
        matches!(self, Method::IppmAcgd | Method::SStarBl | Method::SBlAdaLs)
    }
}

/// Schedule keys a pipeline may read from the overrides.
pub const OVERRIDE_KEYS: &[&str] = &[
    "alpha",
    "beta",
    "dim",
    "eps_in",
    "f1_star",
    "init_steps",
    "k1",
    "k2",
    "kappa",
    "lambda_bar",
    "meta.d_u",
    "meta.g_bound",
    "meta.l_smooth",
    "meta.mu_c",
    "meta.rho",
    "n_epochs",
    "n_outer",
    "ref_eps",
    "res",
    "rho_hat",
    "shift_b",
    "step_harmonic",
    "step_mu",
    "t_inner",
    "t_steps",
    "theory",
    "tol_f2",
    "tol_gap",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub method: Method,
    pub problem: ProblemKind,
    pub seed: u64,
    /// Target accuracy; problem default when absent.
    pub eps: Option<f64>,
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
    pub eta0: Option<f64>,
    /// Cap on first-order oracle calls.
    pub budget: Option<u64>,
    pub overrides: BTreeMap<String, f64>,
}

impl RunConfig {
    pub fn new(method: Method, problem: ProblemKind) -> Self {
        Self {
            method,
            problem,
            seed: 42,
            eps: None,
            tau: None,
            lambda: None,
            eta0: None,
            budget: None,
            overrides: BTreeMap::new(),
        }
    }

    /// Rejects unknown override keys and method/problem pairs that cannot run.
    pub fn validate(&self) -> Result<(), CliError> {
        for key in self.overrides.keys() {
            if !OVERRIDE_KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!("unknown override `{key}`")));
            }
        }
        if self.method.needs_smooth() && self.problem == ProblemKind::Cnls {
            return Err(CliError::Config(format!(
                "{} needs a smooth problem; cnls is non-smooth",
                self.method
            )));
        }
        if self.method == Method::Grid && self.problem == ProblemKind::CgpRand && self.dim() > 2 {
            return Err(CliError::Config(
                "grid search is limited to two dimensions".into(),
            ));
        }
        for (name, v) in [
            ("eps", self.eps),
            ("tau", self.tau),
            ("lambda", self.lambda),
        ] {
            if let Some(v) = v {
                if v.is_nan() || v < 0.0 || (name == "eps" && v == 0.0) {
                    return Err(CliError::Config(format!(
                        "{name} must be positive, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.overrides.get("dim").map_or(100, |d| *d as usize)
    }
}

/// Partial settings read from a file or the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub method: Option<Method>,
    pub problem: Option<ProblemKind>,
    pub seed: Option<u64>,
    pub eps: Option<f64>,
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
    pub eta0: Option<f64>,
    pub budget: Option<u64>,
    pub overrides: BTreeMap<String, f64>,
}

impl Settings {
    /// Later settings win.
    pub fn merge(mut self, other: Settings) -> Settings {
        self.method = other.method.or(self.method);
        self.problem = other.problem.or(self.problem);
        self.seed = other.seed.or(self.seed);
        self.eps = other.eps.or(self.eps);
        self.tau = other.tau.or(self.tau);
        self.lambda = other.lambda.or(self.lambda);
        self.eta0 = other.eta0.or(self.eta0);
        self.budget = other.budget.or(self.budget);
        self.overrides.extend(other.overrides);
        self
    }

    pub fn from_toml_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Settings::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Settings, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("invalid TOML: {e}")))?;
        let mut s = Settings::default();
        for (key, value) in table {
            s.set_value(&key, &value)?;
        }
        Ok(s)
    }

    /// Applies one `key=value` assignment.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got `{assignment}`")))?;
        let (key, raw) = (key.trim(), raw.trim());
        let value = match raw.parse::<f64>() {
            Ok(v) => toml::Value::Float(v),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        self.set_value(key, &value)
    }

    fn set_value(&mut self, key: &str, value: &toml::Value) -> Result<(), CliError> {
        let number = || -> Result<f64, CliError> {
            match value {
                toml::Value::Integer(i) => Ok(*i as f64),
                toml::Value::Float(f) => Ok(*f),
                toml::Value::Boolean(b) => Ok(f64::from(u8::from(*b))),
                _ => Err(CliError::Config(format!("`{key}` must be a number"))),
            }
        };
        let string = || -> Result<&str, CliError> {
            value
                .as_str()
                .ok_or_else(|| CliError::Config(format!("`{key}` must be a string")))
        };
        let count = || -> Result<u64, CliError> {
            let v = number()?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(CliError::Config(format!(
                    "`{key}` must be a non-negative integer, got {v}"
                )));
            }
            Ok(v as u64)
        };
        match key {
            "method" => self.method = Some(string()?.parse()?),
            "problem" => self.problem = Some(string()?.parse()?),
            "seed" => self.seed = Some(count()?),
            "eps" => self.eps = Some(number()?),
            "tau" => self.tau = Some(number()?),
            "lambda" => self.lambda = Some(number()?),
            "eta0" => self.eta0 = Some(number()?),
            "budget" => self.budget = Some(count()?),
            _ => {
                if !OVERRIDE_KEYS.contains(&key) {
                    return Err(CliError::Config(format!("unknown key `{key}`")));
                }
                self.overrides.insert(key.to_string(), number()?);
            }
        }
        Ok(())
    }

    pub fn into_run_config(self) -> Result<RunConfig, CliError> {
        let method = self
            .method
            .ok_or_else(|| CliError::Config("no method given".into()))?;
        let problem = self
            .problem
            .ok_or_else(|| CliError::Config("no problem given".into()))?;
        let cfg = RunConfig {
            method,
            problem,
            seed: self.seed.unwrap_or(42),
            eps: self.eps,
            tau: self.tau,
            lambda: self.lambda,
            eta0: self.eta0,
            budget: self.budget,
            overrides: self.overrides,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads overrides and remembers which ones a pipeline consulted.
pub struct Overrides<'a> {
    map: &'a BTreeMap<String, f64>,
    used: BTreeSet<&'static str>,
}

impl<'a> Overrides<'a> {
    pub fn new(map: &'a BTreeMap<String, f64>) -> Self {
        Self {
            map,
            used: BTreeSet::new(),
        }
    }

    pub fn get(&mut self, key: &'static str) -> Option<f64> {
        self.used.insert(key);
        self.map.get(key).copied()
    }

    pub fn or(&mut self, key: &'static str, default: f64) -> f64 {
        self.get(key).unwrap_or(default)
    }

    pub fn count_or(&mut self, key: &'static str, default: usize) -> usize {
        self.get(key).map_or(default, |v| v.max(0.0) as usize)
    }

    pub fn flag(&mut self, key: &'static str) -> bool {
        self.get(key).is_some_and(|v| v != 0.0)
    }

    /// Keys that were given but never read.
    pub fn unused(&self) -> Vec<String> {
        self.map
            .keys()
            .filter(|k| !self.used.contains(k.as_str()))
            .cloned()
            .collect()
    }
}
