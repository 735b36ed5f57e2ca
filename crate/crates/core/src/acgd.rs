//! Accelerated constrained gradient descent for smooth, strongly convex
//! prox-subproblems, and the constraint shift selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{solve_acgd_qp, BoxSet, DEFAULT_QP_TOL};
use crate::model::{HiddenConvexMeta, Oracle};
use crate::subgrad::InnerResult;

/// Smallest condition number used by [`AcgdSchedule::strongly_convex`].
/// Keeps `τ_t = 1/(√κ − 1)` finite.
pub const MIN_KAPPA: f64 = 4.0;

/// Constant-parameter schedule: `θ_t = theta`, `η_t = eta`, `τ_t = tau_t`,
/// and weights `ω_t = omega_ratio^t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcgdSchedule {
    pub kappa: f64,
    pub theta: f64,
    pub eta: f64,
    pub tau_t: f64,
    pub omega_ratio: f64,
}

impl AcgdSchedule {
    /// Schedule for a `(ρ̂ − ρ)`-strongly convex, `(L + ρ̂)`-smooth subproblem:
    /// `κ = (L + ρ̂)/(ρ̂ − ρ)`, `θ = (√κ − 1)/(√κ + 1)`, `τ_t = 1/(√κ − 1)`,
    /// `η = (L + ρ̂)/√κ`, `ω_t = (1 − 1/√κ)^{−t}`.
    pub fn strongly_convex(l_smooth: f64, rho_hat: f64, rho: f64) -> Result<Self> {
        Self::strongly_convex_lagrangian(l_smooth, rho_hat, rho, 0.0)
    }

    /// As [`strongly_convex`](Self::strongly_convex) with the smoothness of
    /// the Lagrangian `φ1 + λφ2` for `λ ≤ lambda_bar`, i.e. `(L + ρ̂)(1 + λ̄)`
    /// in place of `L + ρ̂`. Without it the linearized constraint can drive
    /// the iterates into a cycle when the subproblem multiplier is large.
    pub fn strongly_convex_lagrangian(
        l_smooth: f64,
        rho_hat: f64,
        rho: f64,
        lambda_bar: f64,
    ) -> Result<Self> {
        if !(rho_hat > rho) {
            return Err(Error::PreconditionViolated(format!(
                "rho_hat = {rho_hat} must exceed rho = {rho}"
            )));
        }
        if !(lambda_bar >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda_bar must be >= 0, got {lambda_bar}"
            )));
        }
        let smooth = (l_smooth + rho_hat) * (1.0 + lambda_bar);
        Self::with_condition(smooth, smooth / (rho_hat - rho))
    }

    /// Schedule for an `smooth`-smooth subproblem with an assumed condition
    /// number `kappa`, clamped to at least [`MIN_KAPPA`].
    pub fn with_condition(smooth: f64, kappa: f64) -> Result<Self> {
        if !(smooth > 0.0) || !(kappa > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "smoothness and condition number must be positive, got {smooth} and {kappa}"
            )));
        }
        let kappa = kappa.max(MIN_KAPPA);
        let sk = kappa.sqrt();
        Ok(Self {
            kappa,
            theta: (sk - 1.0) / (sk + 1.0),
            eta: smooth / sk,
            tau_t: 1.0 / (sk - 1.0),
            omega_ratio: 1.0 / (1.0 - 1.0 / sk),
        })
    }

    /// No momentum, uniform weights: plain linearized-constraint gradient steps.
    pub fn plain(eta: f64) -> Self {
        Self {
            kappa: 1.0,
            theta: 0.0,
            eta,
            tau_t: 0.0,
            omega_ratio: 1.0,
        }
    }

    /// Normalized weights `ω_t / Σ ω`, `t = 1..=n`, computed without overflow.
    pub fn weights(&self, n: usize) -> Vec<f64> {
        // ω_t / ω_n = ratio^{t−n}.
        let inv = 1.0 / self.omega_ratio;
        let mut w: Vec<f64> = (1..=n).map(|t| inv.powi((n - t) as i32)).collect();
        let s: f64 = w.iter().sum();
        for v in &mut w {
            *v /= s;
        }
        w
    }
}

/// Parameters of one ACGD solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcgdConfig {
    pub t_in: usize,
    /// The shifted constraint is `φ2 + shift_b ≤ 0`.
    pub shift_b: f64,
    /// Outer budget used for the output feasibility check `φ2 ≤ τ`.
    pub tau: f64,
    pub schedule: AcgdSchedule,
    pub qp_tol: f64,
}

impl AcgdConfig {
    pub fn new(t_in: usize, shift_b: f64, tau: f64, schedule: AcgdSchedule) -> Self {
        Self {
            t_in,
            shift_b,
            tau,
            schedule,
            qp_tol: DEFAULT_QP_TOL,
        }
    }
}

/// Runs ACGD on `min φ1 s.t. φ2 + b ≤ 0` from `x_k`.
///
/// The extrapolated point `z̄_t` is clamped to the box before the oracles are
/// queried, since the problem functions need not be defined outside it.
/// The ω-weighted average is returned when it satisfies `φ2 ≤ τ`; otherwise
/// the best feasible query point (or `x_k`) is returned with `fell_back` set.
/// Each iteration costs two first-order calls.
pub fn acgd<O1, O2>(
    phi1: &O1,
    phi2: &O2,
    x_k: &[f64],
    set: &BoxSet,
    cfg: &AcgdConfig,
) -> Result<InnerResult>
where
    O1: Oracle + ?Sized,
    O2: Oracle + ?Sized,
{
    let s = cfg.schedule;
    let mut z_prev2 = x_k.to_vec();
    let mut z_prev = x_k.to_vec();
    let mut z_bar = x_k.to_vec();
    let mut iterates: Vec<Vec<f64>> = Vec::with_capacity(cfg.t_in);
    let mut best: Option<(f64, Vec<f64>)> = None;

    for _ in 1..=cfg.t_in {
        if !phi1.can_afford(2) {
            break;
        }
        for i in 0..x_k.len() {
            let tilde = z_prev[i] + s.theta * (z_prev[i] - z_prev2[i]);
            z_bar[i] = (s.tau_t * z_bar[i] + tilde) / (1.0 + s.tau_t);
        }
        set.project_in_place(&mut z_bar);
        let (f1, pi) = phi1.first_order(&z_bar);
        let (f2, nu) = phi2.first_order(&z_bar);
        if f2 <= cfg.tau && best.as_ref().map_or(true, |(b, _)| f1 < *b) {
            best = Some((f1, z_bar.clone()));
        }
        let z = solve_acgd_qp(
            &pi,
            &z_prev,
            s.eta,
            &nu,
            &z_bar,
            f2 + cfg.shift_b,
            set,
            cfg.qp_tol,
        )?;
        z_prev2 = std::mem::replace(&mut z_prev, z.clone());
        iterates.push(z);
    }

    let steps = iterates.len();
    if steps == 0 {
        let feasible = phi2.value(x_k) <= cfg.tau;
        return Ok(InnerResult {
            point: x_k.to_vec(),
            phi1_gap_estimate: None,
            feasible,
            steps_used: 0,
            fell_back: false,
        });
    }
    let w = s.weights(steps);
    let mut avg = vec![0.0; x_k.len()];
    for (wt, z) in w.iter().zip(&iterates) {
        for (a, v) in avg.iter_mut().zip(z) {
            *a += wt * v;
        }
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
    let point = best.map(|(_, p)| p).unwrap_or_else(|| x_k.to_vec());
    let feasible = phi2.value(&point) <= cfg.tau;
    Ok(InnerResult {
        point,
        phi1_gap_estimate: None,
        feasible,
        steps_used: steps,
        fell_back: true,
    })
}

/// Constraint shift `b` for the ACGD subproblem.
///
/// With a θ-Slater point: `β = min{1, μ_c²θ/(ρ̂D_U²)}` and `b = −τ + βθ/3`.
/// Otherwise `α = min{2μ_c²ε/(3ρ̂D_U²), μ_c²τ/(ρ̂D_U²), 1}` and `b = −τ + ατ/3`.
pub fn choose_shift(
    meta: &HiddenConvexMeta,
    rho_hat: f64,
    tau: f64,
    eps: f64,
    slater_theta: Option<f64>,
) -> f64 {
    let r = meta.geometry_ratio() / rho_hat;
    match slater_theta {
        Some(theta) => {
            let beta = (r * theta).min(1.0);
            -tau + beta * theta / 3.0
        }
        None => {
            let alpha = (2.0 * r * eps / 3.0).min(r * tau).min(1.0);
            -tau + alpha * tau / 3.0
        }
    }
}
