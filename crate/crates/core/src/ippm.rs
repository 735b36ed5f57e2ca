//! Inexact proximal point method with shifted subproblems, its parameter
//! schedules and feasibility initialization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::acgd::{acgd, choose_shift, AcgdConfig, AcgdSchedule};
use crate::error::{Error, Result};
use crate::geometry::DEFAULT_QP_TOL;
use crate::linalg::dist_sq;
use crate::model::{
    ConstrainedProblem, CountedFunction, HiddenConvexMeta, IterKind, Oracle, SolveReport, Trace,
};
use crate::subgrad::{projected_subgradient_until, swsg, InnerResult, StepRule, SwsgConfig};

/// `φ(x) = F(x) + (ρ̂/2)‖x − x_k‖²`, charged to the base problem's counter.
#[derive(Clone, Copy)]
pub struct ProxOracle<'a> {
    base: CountedFunction<'a>,
    center: &'a [f64],
    rho_hat: f64,
}

impl Oracle for ProxOracle<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.base.value(x) + 0.5 * self.rho_hat * dist_sq(x, self.center)
    }

    fn first_order(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (f, mut g) = self.base.first_order(x);
        for ((gi, xi), ci) in g.iter_mut().zip(x).zip(self.center) {
            *gi += self.rho_hat * (xi - ci);
        }
        (f + 0.5 * self.rho_hat * dist_sq(x, self.center), g)
    }

    fn can_afford(&self, calls: u64) -> bool {
        self.base.can_afford(calls)
    }
}

/// The regularized pair `(φ1, φ2)` around `x_k`; the subproblem constraint
/// is `φ2 ≤ τ`.
pub struct ProxSubproblem<'a> {
    center: Vec<f64>,
    rho_hat: f64,
    tau: f64,
    f1: CountedFunction<'a>,
    f2: CountedFunction<'a>,
}

impl<'a> ProxSubproblem<'a> {
    pub fn phi1(&self) -> ProxOracle<'_> {
        ProxOracle {
            base: self.f1,
            center: &self.center,
            rho_hat: self.rho_hat,
        }
    }

    pub fn phi2(&self) -> ProxOracle<'_> {
        ProxOracle {
            base: self.f2,
            center: &self.center,
            rho_hat: self.rho_hat,
        }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn rho_hat(&self) -> f64 {
        self.rho_hat
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

pub fn build_prox_subproblem<'a>(
    problem: &'a ConstrainedProblem,
    x_k: &[f64],
    rho_hat: f64,
    tau: f64,
) -> ProxSubproblem<'a> {
    ProxSubproblem {
        center: x_k.to_vec(),
        rho_hat,
        tau,
        f1: problem.objective(),
        f2: problem.constraint(),
    }
}

/// Inner solver used for each prox-subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerSolver {
    Swsg {
        step: StepRule,
    },
    Acgd {
        schedule: AcgdSchedule,
        shift_b: f64,
    },
    /// Projected sub-gradient on `φ1` alone; the constraint is ignored.
    /// Intended for unconstrained problems.
    Sm {
        step: StepRule,
    },
}

impl InnerSolver {
    pub fn name(&self) -> &'static str {
        match self {
            InnerSolver::Swsg { .. } => "swsg",
            InnerSolver::Acgd { .. } => "acgd",
            InnerSolver::Sm { .. } => "sm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IppmConfig {
    pub rho_hat: f64,
    pub tau: f64,
    pub eps: f64,
    pub eps_in: f64,
    pub n_outer: usize,
    pub t_inner: usize,
    pub alpha: f64,
    pub inner: InnerSolver,
    /// Multiplier used for the penalty column of the trace.
    pub trace_lambda: f64,
    /// Surrogates and warnings produced while deriving the schedule.
    pub notes: Vec<String>,
}

impl IppmConfig {
    /// Every numeric parameter, flattened.
    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        p.insert("rho_hat".into(), self.rho_hat);
        p.insert("tau".into(), self.tau);
        p.insert("eps".into(), self.eps);
        p.insert("eps_in".into(), self.eps_in);
        p.insert("n_outer".into(), self.n_outer as f64);
        p.insert("t_inner".into(), self.t_inner as f64);
        p.insert("alpha".into(), self.alpha);
        p.insert("trace_lambda".into(), self.trace_lambda);
        match self.inner {
            InnerSolver::Swsg { step } | InnerSolver::Sm { step } => insert_step(&mut p, step),
            InnerSolver::Acgd { schedule, shift_b } => {
                p.insert("shift_b".into(), shift_b);
                p.insert("acgd_kappa".into(), schedule.kappa);
                p.insert("acgd_theta".into(), schedule.theta);
                p.insert("acgd_eta".into(), schedule.eta);
                p.insert("acgd_tau_t".into(), schedule.tau_t);
                p.insert("acgd_omega_ratio".into(), schedule.omega_ratio);
            }
        }
        p
    }
}

fn insert_step(p: &mut BTreeMap<String, f64>, step: StepRule) {
    let (code, v) = match step {
        StepRule::StronglyConvex { mu } => (0.0, mu),
        StepRule::Harmonic { scale } => (1.0, scale),
        StepRule::InvSqrt { scale } => (2.0, scale),
        StepRule::Constant { step } => (3.0, step),
    };
    p.insert("step_rule".into(), code);
    p.insert("step_param".into(), v);
}

/// What an observer sees after each outer iteration.
pub struct OuterEvent<'a> {
    pub k: usize,
    pub x_k: &'a [f64],
    pub x_next: &'a [f64],
    pub inner: &'a InnerResult,
}

/// Runs the inexact proximal point method from a τ-feasible `x0`.
pub fn ippm_run(
    problem: &ConstrainedProblem,
    meta: &HiddenConvexMeta,
    x0: &[f64],
    cfg: &IppmConfig,
) -> Result<SolveReport> {
    ippm_run_with(problem, meta, x0, cfg, |_| {})
}

/// [`ippm_run`] with a callback after every outer iteration.
pub fn ippm_run_with(
    problem: &ConstrainedProblem,
    meta: &HiddenConvexMeta,
    x0: &[f64],
    cfg: &IppmConfig,
    mut observer: impl FnMut(&OuterEvent<'_>),
) -> Result<SolveReport> {
    if !(cfg.rho_hat > meta.rho) {
        return Err(Error::PreconditionViolated(format!(
            "rho_hat = {} must exceed rho = {}",
            cfg.rho_hat, meta.rho
        )));
    }
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x0.len(),
        });
    }
    let enforce_feasibility = !matches!(cfg.inner, InnerSolver::Sm { .. });
    let f2_0 = problem.f2_value(x0);
    if enforce_feasibility && f2_0 > cfg.tau {
        return Err(Error::InfeasibleStart {
            f2: f2_0,
            tau: cfg.tau,
        });
    }

    let set = problem.domain();
    let mut notes = cfg.notes.clone();
    let mut trace = Trace::new(cfg.trace_lambda);
    let mut x = x0.to_vec();
    trace.record(problem, &x, None, IterKind::Outer);
    let mut fallbacks = 0usize;

    for k in 0..cfg.n_outer {
        if !problem.counter().can_afford(1) {
            notes.push(format!(
                "oracle budget exhausted after {k} outer iterations"
            ));
            break;
        }
        let sub = build_prox_subproblem(problem, &x, cfg.rho_hat, cfg.tau);
        let res = match cfg.inner {
            InnerSolver::Swsg { step } => {
                let scfg = SwsgConfig {
                    t_in: cfg.t_inner,
                    tau: cfg.tau,
                    alpha: cfg.alpha,
                    eps_in: cfg.eps_in,
                    step,
                };
                swsg(&sub.phi1(), &sub.phi2(), &x, set, &scfg)
            }
            InnerSolver::Acgd { schedule, shift_b } => {
                let acfg = AcgdConfig {
                    t_in: cfg.t_inner,
                    shift_b,
                    tau: cfg.tau,
                    schedule,
                    qp_tol: DEFAULT_QP_TOL,
                };
                acgd(&sub.phi1(), &sub.phi2(), &x, set, &acfg)
            }
            InnerSolver::Sm { step } => {
                let out = projected_subgradient_until(
                    &sub.phi1(),
                    set,
                    &x,
                    cfg.t_inner,
                    |t| step.at(t),
                    None,
                );
                Ok(InnerResult {
                    point: out.point,
                    phi1_gap_estimate: None,
                    feasible: true,
                    steps_used: out.steps,
                    fell_back: false,
                })
            }
        }
        .map_err(|e| e.at_outer(k))?;

        if enforce_feasibility && !res.feasible {
            return Err(Error::PreconditionViolated(format!(
                "inner solver returned a point with phi2 > tau at outer iteration {k}"
            ))
            .at_outer(k));
        }
        if res.fell_back {
            fallbacks += 1;
        }
        observer(&OuterEvent {
            k,
            x_k: &x,
            x_next: &res.point,
            inner: &res,
        });
        x = res.point;
        trace.record(problem, &x, None, IterKind::Outer);
    }
    if fallbacks > 0 {
        notes.push(format!(
            "{fallbacks} inner solves returned the best feasible iterate instead of the average"
        ));
    }
    let method = format!("ippm-{}", cfg.inner.name());
    Ok(SolveReport::finish(
        &method,
        problem,
        x,
        trace,
        cfg.params(),
        notes,
    ))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn count(v: f64) -> usize {
    if v.is_nan() {
        0
    } else {
        v.max(0.0).ceil().min(usize::MAX as f64) as usize
    }
}

/// `Δ0` surrogate: `f1_upper − f1_lower` when both are known, else `G·D_X`.
fn delta0(meta: &HiddenConvexMeta, notes: &mut Vec<String>) -> f64 {
    match (meta.f1_upper, meta.f1_lower) {
        (Some(u), Some(l)) => {
            notes.push(format!("Delta0 taken as f1_upper - f1_lower = {}", u - l));
            u - l
        }
        _ => {
            let d = meta.g_bound * meta.d_x;
            notes.push(format!("Delta0 taken as G * D_X = {d}"));
            d
        }
    }
}

/// Outer constants shared by the constrained schedules.
struct Outer {
    rho_hat: f64,
    alpha: f64,
    eps_in: f64,
    n_outer: usize,
}

fn outer_schedule(
    meta: &HiddenConvexMeta,
    eps: f64,
    tau: f64,
    notes: &mut Vec<String>,
) -> Result<Outer> {
    meta.validate()?;
    positive("eps", eps)?;
    positive("tau", tau)?;
    if !(meta.rho > 0.0) {
        return Err(Error::PreconditionViolated(
            "rho must be positive to set rho_hat = 2 rho".into(),
        ));
    }
    let rho_hat = 2.0 * meta.rho;
    let du2 = meta.d_u * meta.d_u;
    let mc2 = meta.mu_c * meta.mu_c;
    let eps_cap = 3.0 * rho_hat * du2 / (2.0 * mc2);
    if eps > eps_cap {
        return Err(Error::PreconditionViolated(format!(
            "eps <= 3 rho_hat D_U^2 / (2 mu_c^2) = {eps_cap}"
        )));
    }
    let tau_cap = rho_hat * du2 / (2.0 * mc2);
    if tau > tau_cap {
        return Err(Error::PreconditionViolated(format!(
            "tau <= rho_hat D_U^2 / (2 mu_c^2) = {tau_cap}"
        )));
    }
    let alpha = (2.0 * mc2 * eps / (3.0 * rho_hat * du2)).min(mc2 * tau / (rho_hat * du2));
    let eps_in = alpha / 3.0 * eps.min(tau);
    let d0 = delta0(meta, notes);
    let rate = (3.0 * meta.rho * du2 / (mc2 * eps)).max(2.0 * meta.rho * du2 / (mc2 * tau));
    let n_outer = count(rate * (3.0 * d0 / eps).ln().max(1.0));
    Ok(Outer {
        rho_hat,
        alpha,
        eps_in,
        n_outer,
    })
}

/// Switching sub-gradient budget for a target inner accuracy `eps_in`:
/// `max{48(3G² − 4ρF̲2)/(ρ̂ε_in), 51ρD_XD_U/(μ_c m)}` with
/// `m = sqrt(9ρ̂D_U²ε_in/(2μ_c²))`. With `ε_in = (α/3)min{ε,τ}` this is the
/// non-smooth corollary's inner bound.
pub fn swsg_inner_budget(meta: &HiddenConvexMeta, rho_hat: f64, eps_in: f64) -> usize {
    let f2_low = meta.f2_lower.unwrap_or(0.0).min(0.0);
    let g2 = meta.g_bound * meta.g_bound;
    let t1 = 48.0 * (3.0 * g2 - 4.0 * meta.rho * f2_low) / (rho_hat * eps_in);
    let m = (9.0 * rho_hat * meta.d_u * meta.d_u * eps_in / (2.0 * meta.mu_c * meta.mu_c)).sqrt();
    let t2 = 51.0 * meta.rho * meta.d_x * meta.d_u / (meta.mu_c * m);
    count(t1.max(t2))
}

/// Non-smooth schedule: `ρ̂ = 2ρ`, switching sub-gradient inner solver.
pub fn schedule_nonsmooth(meta: &HiddenConvexMeta, eps: f64, tau: f64) -> Result<IppmConfig> {
    let mut notes = Vec::new();
    let o = outer_schedule(meta, eps, tau, &mut notes)?;
    if meta.f2_lower.is_none() {
        notes.push("f2_lower unknown; inner budget uses F2_lower = 0".into());
    }
    let mc2 = meta.mu_c * meta.mu_c;
    let du2 = meta.d_u * meta.d_u;
    let m = eps.min(tau);
    let g2 = meta.g_bound * meta.g_bound;
    let f2_low = meta.f2_lower.unwrap_or(0.0).min(0.0);
    let t1 = 216.0 * (3.0 * g2 - 4.0 * meta.rho * f2_low) * du2 / (mc2 * m * m);
    let t2 = 51.0 * meta.rho * meta.d_x * meta.d_u / (meta.mu_c * m);
    Ok(IppmConfig {
        rho_hat: o.rho_hat,
        tau,
        eps,
        eps_in: o.eps_in,
        n_outer: o.n_outer,
        t_inner: count(t1.max(t2)),
        alpha: o.alpha,
        inner: InnerSolver::Swsg {
            step: StepRule::StronglyConvex {
                mu: o.rho_hat - meta.rho,
            },
        },
        trace_lambda: 1.0,
        notes,
    })
}

/// `[√(L(Λ)/ρ) + 1]·log[√(L(Λ)L)·D_X²/ε_in + 1] + 4` with
/// `L(Λ) = L(2 + λ̄)` for a multiplier bound `λ̄`.
pub fn acgd_inner_budget(meta: &HiddenConvexMeta, l: f64, lambda_bar: f64, eps_in: f64) -> usize {
    let l_lag = l * (2.0 + lambda_bar);
    let t = ((l_lag / meta.rho).sqrt() + 1.0)
        * ((l_lag * l).sqrt() * meta.d_x * meta.d_x / eps_in + 1.0).ln()
        + 4.0;
    count(t)
}

fn f1_range(meta: &HiddenConvexMeta, notes: &mut Vec<String>) -> f64 {
    match (meta.f1_upper, meta.f1_lower) {
        (Some(u), Some(l)) => u - l,
        _ => {
            let r = meta.g_bound * meta.d_x;
            notes.push(format!("F1 range unknown; using G * D_X = {r}"));
            r
        }
    }
}

/// Multiplier bound under a θ-Slater point: `(F̄1 − F̲1 + θ)/(βθ/6)` with
/// `β = min{1, μ_c²θ/(ρ̂D_U²)}`.
pub fn slater_multiplier_bound(meta: &HiddenConvexMeta, rho_hat: f64, theta: f64) -> f64 {
    let beta = (meta.geometry_ratio() * theta / rho_hat).min(1.0);
    (f1_range(meta, &mut Vec::new()) + theta) / (beta * theta / 6.0)
}

/// Smooth schedule with the accelerated inner solver, no constraint
/// qualification.
pub fn schedule_smooth(meta: &HiddenConvexMeta, eps: f64, tau: f64) -> Result<IppmConfig> {
    let l = meta.require_smooth()?;
    let mut notes = Vec::new();
    let o = outer_schedule(meta, eps, tau, &mut notes)?;
    let lambda_bar = (f1_range(meta, &mut notes) + eps) / (o.alpha * tau / 6.0);
    notes.push(format!("multiplier bound lambda_bar = {lambda_bar}"));
    let schedule = AcgdSchedule::strongly_convex_lagrangian(l, o.rho_hat, meta.rho, lambda_bar)?;
    Ok(IppmConfig {
        rho_hat: o.rho_hat,
        tau,
        eps,
        eps_in: o.eps_in,
        n_outer: o.n_outer,
        t_inner: acgd_inner_budget(meta, l, lambda_bar, o.eps_in),
        alpha: o.alpha,
        inner: InnerSolver::Acgd {
            schedule,
            shift_b: choose_shift(meta, o.rho_hat, tau, eps, None),
        },
        trace_lambda: 1.0,
        notes,
    })
}

/// Smooth schedule when the problem has a θ-Slater point.
pub fn schedule_smooth_slater(meta: &HiddenConvexMeta, eps: f64, tau: f64) -> Result<IppmConfig> {
    let l = meta.require_smooth()?;
    let theta = meta.theta_slater.ok_or_else(|| {
        Error::PreconditionViolated("theta_slater is required for the Slater schedule".into())
    })?;
    positive("theta_slater", theta)?;
    let mut notes = Vec::new();
    let o = outer_schedule(meta, eps, tau, &mut notes)?;
    let ratio = meta.geometry_ratio() * theta / o.rho_hat;
    if ratio > 1.0 {
        notes.push(format!(
            "mu_c^2 theta / (rho_hat D_U^2) = {ratio} > 1; beta capped at 1"
        ));
    }
    let beta = ratio.min(1.0);
    let lambda_bar = (f1_range(meta, &mut notes) + theta) / (beta * theta / 6.0);
    notes.push(format!("multiplier bound lambda_bar = {lambda_bar}"));
    let schedule = AcgdSchedule::strongly_convex_lagrangian(l, o.rho_hat, meta.rho, lambda_bar)?;
    Ok(IppmConfig {
        rho_hat: o.rho_hat,
        tau,
        eps,
        eps_in: o.eps_in,
        n_outer: o.n_outer,
        t_inner: acgd_inner_budget(meta, l, lambda_bar, o.eps_in),
        alpha: o.alpha,
        inner: InnerSolver::Acgd {
            schedule,
            shift_b: choose_shift(meta, o.rho_hat, tau, eps, Some(theta)),
        },
        trace_lambda: 1.0,
        notes,
    })
}

/// Hidden strongly convex schedule: `α = μ_c²μ_H/(ρ̂ + μ_c²μ_H)`,
/// `ε_in = αε/2`, `N = ((ρ̂ + μ_c²μ_H)/(μ_c²μ_H))·log(2Δ0/ε)`.
pub fn schedule_hsc(meta: &HiddenConvexMeta, eps: f64, tau: f64) -> Result<IppmConfig> {
    meta.validate()?;
    positive("eps", eps)?;
    positive("tau", tau)?;
    let mu_h = match meta.mu_h {
        Some(m) if m >= 1e-12 => m,
        _ => return Err(Error::MissingMuH),
    };
    if !(meta.rho > 0.0) {
        return Err(Error::PreconditionViolated("rho must be positive".into()));
    }
    let mut notes = Vec::new();
    let rho_hat = 2.0 * meta.rho;
    let s = meta.mu_c * meta.mu_c * mu_h;
    let alpha = s / (rho_hat + s);
    let eps_in = alpha * eps / 2.0;
    let d0 = delta0(meta, &mut notes);
    let n_outer = count((rho_hat + s) / s * (2.0 * d0 / eps).ln().max(1.0));
    Ok(IppmConfig {
        rho_hat,
        tau,
        eps,
        eps_in,
        n_outer,
        t_inner: swsg_inner_budget(meta, rho_hat, eps_in),
        alpha,
        inner: InnerSolver::Swsg {
            step: StepRule::StronglyConvex {
                mu: rho_hat - meta.rho,
            },
        },
        trace_lambda: 1.0,
        notes,
    })
}

/// Unconstrained schedule (`F2 ≡ 0`) with the sub-gradient method inside:
/// `N = ((4μ_c² + 2D_U²ρ)/(2μ_c²ε))·log(Δ0(4μ_c² + 2D_U²ρ)/(2μ_c²ε))` and
/// `T_in = G²/(ρε²)`.
pub fn schedule_unconstrained(meta: &HiddenConvexMeta, eps: f64) -> Result<IppmConfig> {
    meta.validate()?;
    positive("eps", eps)?;
    if !(meta.rho > 0.0) {
        return Err(Error::PreconditionViolated("rho must be positive".into()));
    }
    let mut notes = Vec::new();
    let rho_hat = 2.0 * meta.rho;
    let mc2 = meta.mu_c * meta.mu_c;
    let du2 = meta.d_u * meta.d_u;
    let k = (4.0 * mc2 + 2.0 * du2 * meta.rho) / (2.0 * mc2 * eps);
    let d0 = delta0(meta, &mut notes);
    let n_outer = count(k * (d0 * k).ln().max(1.0));
    let t_inner = count(meta.g_bound * meta.g_bound / (meta.rho * eps * eps));
    Ok(IppmConfig {
        rho_hat,
        tau: f64::INFINITY,
        eps,
        eps_in: eps * eps,
        n_outer,
        t_inner,
        alpha: 2.0 * mc2 * eps / (4.0 * mc2 + du2 * rho_hat),
        inner: InnerSolver::Sm {
            step: StepRule::Harmonic {
                scale: 2.0 / (rho_hat - meta.rho),
            },
        },
        trace_lambda: 0.0,
        notes,
    })
}

/// Finds `x` with `F2(x) ≤ τ` by projected (sub-)gradient descent on `F2`.
///
/// Smooth problems with a known `L` use the constant step `1/L`; otherwise
/// `η_t = D_X/(G√(t+1))`.
pub fn init_feasible(
    problem: &ConstrainedProblem,
    meta: &HiddenConvexMeta,
    x_any: &[f64],
    tau: f64,
    max_steps: usize,
) -> Result<Vec<f64>> {
    let x0 = problem.domain().project(x_any)?;
    let con = problem.constraint();
    let step: Box<dyn Fn(usize) -> f64> = match (problem.is_smooth(), meta.l_smooth) {
        (true, Some(l)) => Box::new(move |_| 1.0 / l),
        _ => {
            let s = meta.d_x / meta.g_bound;
            Box::new(move |t| s / ((t + 1) as f64).sqrt())
        }
    };
    let out = projected_subgradient_until(&con, problem.domain(), &x0, max_steps, step, Some(tau));
    if out.value <= tau {
        Ok(out.point)
    } else {
        Err(Error::FeasibilityNotReached {
            best_f2: out.value,
            target: tau,
        })
    }
}
