//! Shifted bundle-level methods: the star variant for a known optimal value,
//! the shifted bundle-level epoch, and the adaptive line search over the
//! level `η`. Also the unshifted star variant kept as a failure demo.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_box_halfspaces, BoxSet, Halfspace, DEFAULT_QP_TOL};
use crate::linalg::{dot, pos};
use crate::model::{ConstrainedProblem, HiddenConvexMeta, IterKind, Oracle, SolveReport, Trace};
use crate::subgrad::projected_subgradient_until;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BundleConfig {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    /// Minorant violation budget.
    pub tau: f64,
    pub eta0: f64,
    /// Steps per epoch.
    pub t_steps: usize,
    pub n_epochs: usize,
}

impl BundleConfig {
    pub fn params(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("alpha".to_string(), self.alpha),
            ("beta".to_string(), self.beta),
            ("lambda".to_string(), self.lambda),
            ("tau".to_string(), self.tau),
            ("eta0".to_string(), self.eta0),
            ("t_steps".to_string(), self.t_steps as f64),
            ("n_epochs".to_string(), self.n_epochs as f64),
        ])
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidArgument(
                "alpha and beta must lie in [0, 1]".into(),
            ));
        }
        if !(self.lambda >= 0.0) || !(self.tau >= 0.0) {
            return Err(Error::InvalidArgument(
                "lambda and tau must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Level estimates of the line search, with the penalty of each epoch output.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EtaState {
    pub eta_k: f64,
    pub history: Vec<(f64, f64)>,
}

impl EtaState {
    pub fn new(eta0: f64) -> Self {
        Self {
            eta_k: eta0,
            history: Vec::new(),
        }
    }

    /// `η ← (1−β)(η + penalty) − (1−2β)η`.
    pub fn update(&mut self, penalty: f64, beta: f64) -> f64 {
        self.history.push((self.eta_k, penalty));
        self.eta_k = (1.0 - beta) * (self.eta_k + penalty) - (1.0 - 2.0 * beta) * self.eta_k;
        self.eta_k
    }
}

/// Halfspace `ℓ_F(x, y) ≤ rhs` with `ℓ_F(x, y) = F(y) + ⟨∇F(y), x − y⟩`.
pub fn linear_minorant(f_value: f64, f_grad: &[f64], y: &[f64], rhs: f64) -> Halfspace {
    Halfspace::new(f_grad.to_vec(), rhs - f_value + dot(f_grad, y))
}

/// First-order information of both functions at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub f1: f64,
    pub g1: Vec<f64>,
    pub f2: f64,
    pub g2: Vec<f64>,
}

/// Two first-order calls.
pub fn linearize(problem: &ConstrainedProblem, x: &[f64]) -> Linearization {
    let (f1, g1) = problem.objective().first_order(x);
    let (f2, g2) = problem.constraint().first_order(x);
    Linearization { f1, g1, f2, g2 }
}

/// The two shifted cuts of one bundle-level step:
///
/// `ℓ_F1(x, x_t) ≤ (1−αβ)F1 + αβη + (1−β)αλ[F2]₊ + τ`,
/// `ℓ_F2(x, x_t) ≤ (1−α)F2 + τ`.
pub fn sbl_cuts(lin: &Linearization, x_t: &[f64], eta: f64, cfg: &BundleConfig) -> [Halfspace; 2] {
    let (a, b) = (cfg.alpha, cfg.beta);
    let r1 =
        (1.0 - a * b) * lin.f1 + a * b * eta + (1.0 - b) * a * cfg.lambda * pos(lin.f2) + cfg.tau;
    let r2 = (1.0 - a) * lin.f2 + cfg.tau;
    [
        linear_minorant(lin.f1, &lin.g1, x_t, r1),
        linear_minorant(lin.f2, &lin.g2, x_t, r2),
    ]
}

/// Projection of `x_t` onto the box cut by the shifted minorants.
pub fn sbl_project(
    set: &BoxSet,
    lin: &Linearization,
    x_t: &[f64],
    eta: f64,
    cfg: &BundleConfig,
    qp_tol: f64,
) -> Result<Vec<f64>> {
    project_box_halfspaces(set, x_t, &sbl_cuts(lin, x_t, eta, cfg), qp_tol)
}

/// One shifted bundle-level step (two first-order calls).
pub fn sbl_step(
    problem: &ConstrainedProblem,
    x_t: &[f64],
    eta: f64,
    cfg: &BundleConfig,
    qp_tol: f64,
) -> Result<Vec<f64>> {
    if !problem.is_smooth() {
        return Err(Error::NonSmoothProblem);
    }
    let lin = linearize(problem, x_t);
    sbl_project(problem.domain(), &lin, x_t, eta, cfg, qp_tol)
}

/// What an observer sees after each bundle step.
pub struct StepEvent<'a> {
    pub t: usize,
    pub x_t: &'a [f64],
    pub x_next: &'a [f64],
    pub lin: &'a Linearization,
}

/// Known-optimum schedule: `α = εμ_c²/((ρ+L)D_U²)`, `τ = ρα²D_U²/(2μ_c²)`,
/// `T = ((ρ+L)D_U²/(μ_c²ε))·log(2v0/ε)` with `v0 = v(x0, F1*)`.
pub fn schedule_star_bl(meta: &HiddenConvexMeta, eps: f64, v0: f64) -> Result<BundleConfig> {
    let l = meta.require_smooth()?;
    meta.validate()?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let r = meta.geometry_ratio();
    let alpha = (eps * r / (meta.rho + l)).min(1.0);
    let tau = meta.rho * alpha * alpha / (2.0 * r);
    let t = (meta.rho + l) / (r * eps) * (2.0 * v0 / eps).ln().max(1.0);
    Ok(BundleConfig {
        alpha,
        beta: 1.0,
        lambda: 0.0,
        tau,
        eta0: f64::NAN,
        t_steps: t.ceil() as usize,
        n_epochs: 1,
    })
}

/// Shifted star bundle-level with the schedule derived from `meta`.
pub fn s_star_bl(
    problem: &ConstrainedProblem,
    meta: &HiddenConvexMeta,
    x0: &[f64],
    f1_star: f64,
    eps: f64,
) -> Result<SolveReport> {
    let (f1, f2) = (problem.f1_value(x0), problem.f2_value(x0));
    let v0 = (f1 - f1_star).max(f2);
    let cfg = schedule_star_bl(meta, eps, v0)?;
    s_star_bl_with(problem, x0, f1_star, &cfg, |_| {})
}

/// Runs `cfg.t_steps` shifted star steps with `η = F1*`, `β = 1` and
/// returns the last iterate.
pub fn s_star_bl_with(
    problem: &ConstrainedProblem,
    x0: &[f64],
    f1_star: f64,
    cfg: &BundleConfig,
    mut observer: impl FnMut(&StepEvent<'_>),
) -> Result<SolveReport> {
    if !problem.is_smooth() {
        return Err(Error::NonSmoothProblem);
    }
    let cfg = BundleConfig {
        beta: 1.0,
        eta0: f1_star,
        n_epochs: 1,
        ..*cfg
    };
    cfg.check()?;
    let mut notes = Vec::new();
    let mut trace = Trace::new(cfg.lambda);
    let mut x = x0.to_vec();
    trace.record(problem, &x, Some(f1_star), IterKind::Inner);
    for t in 0..cfg.t_steps {
        if !problem.counter().can_afford(2) {
            notes.push(format!("oracle budget exhausted after {t} steps"));
            break;
        }
        let lin = linearize(problem, &x);
        let next = sbl_project(problem.domain(), &lin, &x, f1_star, &cfg, DEFAULT_QP_TOL)
            .map_err(|e| e.at_outer(t))?;
        observer(&StepEvent {
            t,
            x_t: &x,
            x_next: &next,
            lin: &lin,
        });
        x = next;
        trace.record(problem, &x, Some(f1_star), IterKind::Inner);
    }
    let mut params = cfg.params();
    params.insert("f1_star".into(), f1_star);
    Ok(SolveReport::finish(
        "s-starbl", problem, x, trace, params, notes,
    ))
}

/// Result of one shifted bundle-level epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct SblOutcome {
    /// Iterate with the smallest exact penalty.
    pub point: Vec<f64>,
    pub f1: f64,
    pub f2: f64,
    pub penalty: f64,
    /// Penalty of every scored iterate, `x_0` first.
    pub penalties: Vec<f64>,
    pub best_index: usize,
    /// The subproblem became infeasible and the epoch was cut short.
    pub truncated: bool,
}

/// One epoch of the shifted bundle-level method at level `eta`.
///
/// An infeasible subproblem ends the epoch early; the iterates produced so
/// far are still scored. Steps are recorded in `trace` when given.
pub fn s_bl(
    problem: &ConstrainedProblem,
    x0: &[f64],
    eta: f64,
    cfg: &BundleConfig,
    trace: Option<&mut Trace>,
) -> Result<SblOutcome> {
    if !problem.is_smooth() {
        return Err(Error::NonSmoothProblem);
    }
    cfg.check()?;
    let mut trace = trace;
    let lam = cfg.lambda;
    let mut x = x0.to_vec();
    let mut scored: Vec<(f64, f64)> = Vec::new();
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut truncated = false;
    let mut last_evaluated = false;

    for _ in 0..cfg.t_steps {
        if !problem.counter().can_afford(2) {
            break;
        }
        let lin = linearize(problem, &x);
        scored.push((lin.f1, lin.f2));
        points.push(x.clone());
        last_evaluated = true;
        match sbl_project(problem.domain(), &lin, &x, eta, cfg, DEFAULT_QP_TOL) {
            Ok(next) => {
                x = next;
                last_evaluated = false;
                if let Some(tr) = trace.as_deref_mut() {
                    tr.record(problem, &x, Some(eta), IterKind::Inner);
                }
            }
            Err(Error::Infeasible { .. }) => {
                truncated = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if !last_evaluated {
        // Final iterate scored with value-only calls.
        scored.push((problem.f1_value(&x), problem.f2_value(&x)));
        points.push(x);
    }

    let penalties: Vec<f64> = scored.iter().map(|(f1, f2)| f1 + lam * pos(*f2)).collect();
    let best_index = argmin(&penalties);
    let (f1, f2) = scored[best_index];
    Ok(SblOutcome {
        point: points.swap_remove(best_index),
        f1,
        f2,
        penalty: penalties[best_index],
        penalties,
        best_index,
        truncated,
    })
}

/// First index of the smallest value.
fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Line-search schedule: `A = (ρ+L)D_U²/(2μ_c²)`,
/// `α = min{ε/(16A), ε/(8λA·log(8(F1(x0)−η0)/ε))}`,
/// `T = (2/α)·log(8(F1(x0)−η0)/ε)`, `N = ⌈log2((F̄ − η0)/ε)⌉` where `F̄` is
/// an upper surrogate of `F1*`, and `τ = ρα²D_U²/(2μ_c²)`, `β = 1/2`.
pub fn schedule_ada_ls(
    meta: &HiddenConvexMeta,
    eps: f64,
    lambda: f64,
    f1_x0: f64,
    eta0: f64,
    f1_star_surrogate: f64,
) -> Result<BundleConfig> {
    let l = meta.require_smooth()?;
    meta.validate()?;
    if !(eps > 0.0) || !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(
            "eps must be positive and lambda non-negative".into(),
        ));
    }
    let r = meta.geometry_ratio();
    let a = (meta.rho + l) / (2.0 * r);
    let lg = (8.0 * (f1_x0 - eta0) / eps).ln().max(1.0);
    let mut alpha = eps / (16.0 * a);
    if lambda > 0.0 {
        alpha = alpha.min(eps / (8.0 * lambda * a * lg));
    }
    let alpha = alpha.min(1.0);
    let t_steps = (2.0 / alpha * lg).ceil() as usize;
    let n_epochs = ((f1_star_surrogate - eta0) / eps).log2().ceil().max(1.0) as usize;
    Ok(BundleConfig {
        alpha,
        beta: 0.5,
        lambda,
        tau: meta.rho * alpha * alpha / (2.0 * r),
        eta0,
        t_steps,
        n_epochs,
    })
}

/// Adaptive line search with the schedule derived from `meta`. `F1*` is
/// surrogated by `meta.f1_upper` (or `F1(x0)`) when sizing the epoch count.
pub fn ada_ls(
    problem: &ConstrainedProblem,
    meta: &HiddenConvexMeta,
    x0: &[f64],
    eta0: f64,
    eps: f64,
    lambda: f64,
) -> Result<SolveReport> {
    let (f1, f2) = (problem.f1_value(x0), problem.f2_value(x0));
    if lambda > 0.0 && pos(f2) > eps / (2.0 * lambda) {
        return Err(Error::PreconditionViolated(format!(
            "[F2(x0)]+ = {} exceeds eps / (2 lambda) = {}",
            pos(f2),
            eps / (2.0 * lambda)
        )));
    }
    if eta0 > f1 {
        return Err(Error::PreconditionViolated(format!(
            "eta0 = {eta0} exceeds F1(x0) = {f1}; it cannot be a lower bound of F1*"
        )));
    }
    let surrogate = meta.f1_upper.unwrap_or(f1);
    let cfg = schedule_ada_ls(meta, eps, lambda, f1, eta0, surrogate)?;
    let mut report = ada_ls_with(problem, x0, &cfg)?;
    report
        .notes
        .push(format!("F1* surrogate for the epoch count: {surrogate}"));
    Ok(report)
}

/// Runs `cfg.n_epochs` epochs of [`s_bl`] from `x0`, updating the level after
/// each, and returns the epoch output with the smallest penalty.
pub fn ada_ls_with(
    problem: &ConstrainedProblem,
    x0: &[f64],
    cfg: &BundleConfig,
) -> Result<SolveReport> {
    ada_ls_run(problem, x0, cfg).map(|(r, _)| r)
}

/// [`ada_ls_with`] that also returns the level history.
pub fn ada_ls_run(
    problem: &ConstrainedProblem,
    x0: &[f64],
    cfg: &BundleConfig,
) -> Result<(SolveReport, EtaState)> {
    cfg.check()?;
    let mut trace = Trace::new(cfg.lambda);
    trace.record(problem, x0, Some(cfg.eta0), IterKind::Outer);
    let mut state = EtaState::new(cfg.eta0);
    let mut best: Option<SblOutcome> = None;
    let mut notes = Vec::new();
    let mut truncations = 0;
    for k in 0..cfg.n_epochs {
        if !problem.counter().can_afford(2) {
            notes.push(format!("oracle budget exhausted after {k} epochs"));
            break;
        }
        let eta = state.eta_k;
        let out = s_bl(problem, x0, eta, cfg, Some(&mut trace))?;
        if out.truncated {
            truncations += 1;
        }
        state.update(out.penalty, cfg.beta);
        if best.as_ref().map_or(true, |b| out.penalty < b.penalty) {
            best = Some(out);
        }
    }
    if truncations > 0 {
        notes.push(format!(
            "{truncations} epochs ended early on an infeasible subproblem"
        ));
    }
    let x = best.map(|b| b.point).unwrap_or_else(|| x0.to_vec());
    let mut params = cfg.params();
    params.insert("eta_final".into(), state.eta_k);
    Ok((
        SolveReport::finish("s-bl-adals", problem, x, trace, params, notes),
        state,
    ))
}

/// Lower bound of `F1*` from projected gradient descent on `F1` alone.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBound {
    pub eta0: f64,
    /// Set when the unconstrained minimizer is already `ε`-feasible.
    pub early_exit: Option<Vec<f64>>,
    pub steps: usize,
}

/// Runs `min(max_steps, ⌈(ρ+L)D_U²/(μ_c²ε)⌉)` steps of projected gradient
/// descent with step `1/L` on `F1` from `x0`. Returns the point if it is
/// `ε`-feasible, otherwise `η0 = F1(z) − ε`.
pub fn init_lower_bound(
    problem: &ConstrainedProblem,
    meta: &HiddenConvexMeta,
    x0: &[f64],
    eps: f64,
    max_steps: usize,
) -> Result<LowerBound> {
    let l = meta.require_smooth()?;
    if !problem.is_smooth() {
        return Err(Error::NonSmoothProblem);
    }
    let n_init = ((meta.rho + l) / (meta.geometry_ratio() * eps)).ceil();
    let steps = (n_init.min(max_steps as f64)) as usize;
    let out = projected_subgradient_until(
        &problem.objective(),
        problem.domain(),
        x0,
        steps,
        |_| 1.0 / l,
        None,
    );
    if problem.f2_value(&out.point) <= eps {
        Ok(LowerBound {
            eta0: out.value - eps,
            early_exit: Some(out.point),
            steps: out.steps,
        })
    } else {
        Ok(LowerBound {
            eta0: out.value - eps,
            early_exit: None,
            steps: out.steps,
        })
    }
}

/// Iterates of the unshifted star bundle-level method
/// `ℓ_F1(x, x_t) ≤ F1*`, `ℓ_F2(x, x_t) ≤ 0`.
///
/// When the cuts miss the box the step falls back to the projection onto
/// the cuts alone, clamped to the box, which is how the method is driven to
/// the boundary on negatively curved objectives.
pub fn star_bl_unshifted_demo(
    problem: &ConstrainedProblem,
    x0: &[f64],
    f1_star: f64,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let set = problem.domain();
    let free = BoxSet::unbounded(problem.dim());
    let mut xs = vec![x0.to_vec()];
    let mut x = x0.to_vec();
    for _ in 0..steps {
        let lin = linearize(problem, &x);
        let cuts = [
            linear_minorant(lin.f1, &lin.g1, &x, f1_star),
            linear_minorant(lin.f2, &lin.g2, &x, 0.0),
        ];
        x = match project_box_halfspaces(set, &x, &cuts, DEFAULT_QP_TOL) {
            Ok(next) => next,
            Err(Error::Infeasible { .. }) => {
                let y = project_box_halfspaces(&free, &x, &cuts, DEFAULT_QP_TOL)?;
                set.project(&y)?
            }
            Err(e) => return Err(e),
        };
        xs.push(x.clone());
    }
    Ok(xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::model::FnFunction;

    #[test]
    fn minorant_examples() {
        // F(x) = x^2 at y = 1: 1 + 2(x − 1) ≤ 0  ⇔  2x ≤ 1.
        let h = linear_minorant(1.0, &[2.0], &[1.0], 0.0);
        assert_eq!(h.normal, vec![2.0]);
        assert_eq!(h.offset, 1.0);
        // At x = y the minorant equals F(y): violation = F(y) − rhs.
        let h = linear_minorant(3.0, &[1.0, -2.0], &[0.5, 0.25], 1.0);
        assert!((h.violation(&[0.5, 0.25]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn eta_update_fixed_point() {
        let mut s = EtaState::new(5.0);
        assert_eq!(s.update(5.0, 0.5), 5.0);
        // Average with the penalty for β = 1/2.
        assert_eq!(s.update(7.0, 0.5), 6.0);
        assert_eq!(s.history, vec![(5.0, 5.0), (5.0, 7.0)]);
    }

    fn flat() -> ConstrainedProblem {
        ConstrainedProblem::new(
            "flat",
            Arc::new(FnFunction::new(
                2,
                |_: &[f64]| 1.0,
                |_: &[f64]| vec![0.0, 0.0],
            )),
            Arc::new(FnFunction::new(
                2,
                |_: &[f64]| -1.0,
                |_: &[f64]| vec![0.0, 0.0],
            )),
            BoxSet::cube(2, 0.0, 1.0),
            true,
        )
        .unwrap()
    }

    #[test]
    fn zero_gradients_stay_put() {
        let p = flat();
        let cfg = BundleConfig {
            alpha: 0.5,
            beta: 1.0,
            lambda: 1.0,
            tau: 0.1,
            eta0: 1.0,
            t_steps: 3,
            n_epochs: 1,
        };
        let x = sbl_step(&p, &[0.3, 0.7], 1.0, &cfg, 1e-12).unwrap();
        assert_eq!(x, vec![0.3, 0.7]);
    }

    #[test]
    fn zero_steps_return_start() {
        let p = flat();
        let cfg = BundleConfig {
            alpha: 0.5,
            beta: 0.5,
            lambda: 0.0,
            tau: 0.1,
            eta0: 0.0,
            t_steps: 0,
            n_epochs: 1,
        };
        let out = s_bl(&p, &[0.2, 0.2], 0.0, &cfg, None).unwrap();
        assert_eq!(out.point, vec![0.2, 0.2]);
        assert_eq!(out.best_index, 0);
        assert_eq!(p.counter().first_order_calls(), 0);
    }

    #[test]
    fn argmin_takes_first_minimum() {
        assert_eq!(argmin(&[3.0, 1.0, 1.0, 2.0]), 1);
    }
}
