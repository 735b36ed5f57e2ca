//! Projected sub-gradient method and the switching sub-gradient inner solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoxSet;
use crate::linalg::axpy;
use crate::model::Oracle;

/// Result of an inner (prox-subproblem) solve.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub point: Vec<f64>,
    pub phi1_gap_estimate: Option<f64>,
    /// `φ2(point) ≤ τ` as evaluated.
    pub feasible: bool,
    pub steps_used: usize,
    /// The averaged output violated `φ2 ≤ τ` and was replaced by the best
    /// feasible iterate.
    pub fell_back: bool,
}

/// Stepsize rules for sub-gradient type methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    /// `2 / (μ(t+2) + 144μ/(t+1))` for μ-strongly convex subproblems.
    StronglyConvex {
        mu: f64,
    },
    /// `scale / (t+1)`.
    Harmonic {
        scale: f64,
    },
    /// `scale / sqrt(t+1)`.
    InvSqrt {
        scale: f64,
    },
    Constant {
        step: f64,
    },
}

impl StepRule {
    pub fn at(&self, t: usize) -> f64 {
        let tf = t as f64;
        match *self {
            StepRule::StronglyConvex { mu } => swsg_stepsize_unchecked(t, mu),
            StepRule::Harmonic { scale } => scale / (tf + 1.0),
            StepRule::InvSqrt { scale } => scale / (tf + 1.0).sqrt(),
            StepRule::Constant { step } => step,
        }
    }
}

/// `2 / (μ(t+2) + 144μ/(t+1))`.
pub fn swsg_stepsize(t: i64, mu_strong: f64) -> Result<f64> {
    if t < 0 {
        return Err(Error::InvalidArgument(format!(
            "stepsize index must be >= 0, got {t}"
        )));
    }
    if !(mu_strong > 0.0) {
        return Err(Error::InvalidArgument(
            "strong convexity modulus must be positive".into(),
        ));
    }
    Ok(swsg_stepsize_unchecked(t as usize, mu_strong))
}

fn swsg_stepsize_unchecked(t: usize, mu: f64) -> f64 {
    let tf = t as f64;
    2.0 / (mu * (tf + 2.0) + 144.0 * mu / (tf + 1.0))
}

/// Outcome of [`projected_subgradient_until`].
#[derive(Debug, Clone, PartialEq)]
pub struct SmOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    /// First-order calls spent.
    pub steps: usize,
}

/// `z_{t+1} = Π(z_t − η_t g_t)`; returns the best-value iterate.
pub fn projected_subgradient<O: Oracle + ?Sized>(
    oracle: &O,
    set: &BoxSet,
    x0: &[f64],
    steps: usize,
    stepsize: impl Fn(usize) -> f64,
) -> Vec<f64> {
    projected_subgradient_until(oracle, set, x0, steps, stepsize, None).point
}

/// As [`projected_subgradient`], stopping as soon as an iterate reaches
/// `target` or the oracle budget runs out.
pub fn projected_subgradient_until<O: Oracle + ?Sized>(
    oracle: &O,
    set: &BoxSet,
    x0: &[f64],
    steps: usize,
    stepsize: impl Fn(usize) -> f64,
    target: Option<f64>,
) -> SmOutcome {
    let reached = |v: f64| target.is_some_and(|t| v <= t);
    let mut z = x0.to_vec();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut used = 0;
    let mut moved = false;
    for t in 0..steps {
        if !oracle.can_afford(1) {
            break;
        }
        let (f, g) = oracle.first_order(&z);
        used += 1;
        moved = false;
        if best.as_ref().map_or(true, |(b, _)| f < *b) {
            best = Some((f, z.clone()));
        }
        if reached(f) {
            break;
        }
        axpy(-stepsize(t), &g, &mut z);
        set.project_in_place(&mut z);
        moved = true;
    }
    if moved || best.is_none() {
        let f = oracle.value(&z);
        if best.as_ref().map_or(true, |(b, _)| f < *b) {
            best = Some((f, z));
        }
    }
    let (value, point) = best.expect("at least one evaluation");
    SmOutcome {
        point,
        value,
        steps: used,
    }
}

/// Parameters of one switching sub-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwsgConfig {
    /// Iterations run are `t = 1, ..., t_in − 1`.
    pub t_in: usize,
    pub tau: f64,
    pub alpha: f64,
    pub eps_in: f64,
    pub step: StepRule,
}

/// Switching sub-gradient method on `min φ1 s.t. φ2 ≤ τ`.
///
/// The switching test uses the shifted constraint `φ2 − τ + ατ/3 ≤ ε_in`.
/// The `(t+1)`-weighted average of the objective steps is returned when it
/// satisfies `φ2 ≤ τ`; otherwise the best feasible iterate seen (or `x_k`
/// itself) is returned and `fell_back` is set, so the output is always
/// feasible provided `φ2(x_k) ≤ τ`.
pub fn swsg<O1, O2>(
    phi1: &O1,
    phi2: &O2,
    x_k: &[f64],
    set: &BoxSet,
    cfg: &SwsgConfig,
) -> Result<InnerResult>
where
    O1: Oracle + ?Sized,
    O2: Oracle + ?Sized,
{
    let shift = -cfg.tau + cfg.alpha * cfg.tau / 3.0;
    let d = x_k.len();
    let mut z = x_k.to_vec();
    let mut avg = vec![0.0; d];
    let mut weight = 0.0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut steps = 0;

    for t in 1..cfg.t_in {
        if !phi1.can_afford(1) {
            break;
        }
        let c = phi2.value(&z);
        let eta = cfg.step.at(t);
        if c + shift <= cfg.eps_in {
            let (f, g) = phi1.first_order(&z);
            let w = (t + 1) as f64;
            axpy(w, &z, &mut avg);
            weight += w;
            if c <= cfg.tau && best.as_ref().map_or(true, |(b, _)| f < *b) {
                best = Some((f, z.clone()));
            }
            axpy(-eta, &g, &mut z);
        } else {
            let (_, g) = phi2.first_order(&z);
            axpy(-eta, &g, &mut z);
        }
        set.project_in_place(&mut z);
        steps += 1;
    }

    if weight == 0.0 {
        return Err(Error::EmptyFeasibleSet { steps });
    }
    for v in avg.iter_mut() {
        *v /= weight;
    }
    set.project_in_place(&mut avg);
    if phi2.value(&avg) <= cfg.tau {
        return Ok(InnerResult {
            point: avg,
            phi1_gap_estimate: None,
            feasible: true,
            steps_used: steps,
            fell_back: false,
        });
    }
    let point = match best {
        Some((_, p)) => p,
        None => x_k.to_vec(),
    };
    let feasible = phi2.value(&point) <= cfg.tau;
    Ok(InnerResult {
        point,
        phi1_gap_estimate: None,
        feasible,
        steps_used: steps,
        fell_back: true,
    })
}
