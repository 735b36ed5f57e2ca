//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use hcopt::acgd::{acgd, choose_shift, AcgdConfig, AcgdSchedule};
use hcopt::ippm::{
    acgd_inner_budget, build_prox_subproblem, slater_multiplier_bound, swsg_inner_budget,
};
use hcopt::problems::{grid_minimize_refined, GridPoint, Instance, SplitMix64};
use hcopt::subgrad::{swsg, StepRule, SwsgConfig};
use hcopt::{BoxSet, Halfspace, Oracle};

/// A random projection instance: box, point and up to two cuts.
pub struct QpInstance {
    pub set: BoxSet,
    pub y: Vec<f64>,
    pub cons: Vec<Halfspace>,
}

fn normal(rng: &mut SplitMix64, d: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        if g.iter().map(|v| v * v).sum::<f64>() > 1e-4 {
            return g;
        }
    }
}

/// Cuts are built to keep a random anchor point of the box feasible with a
/// positive margin, so the feasible set has nonempty interior.
pub fn random_feasible_instance(rng: &mut SplitMix64, d: usize) -> QpInstance {
    let lower: Vec<f64> = (0..d).map(|_| rng.uniform_in(-1.5, -0.2)).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + rng.uniform_in(0.5, 2.5)).collect();
    let set = BoxSet::new(lower.clone(), upper.clone()).unwrap();
    let anchor: Vec<f64> = lower
        .iter()
        .zip(&upper)
        .map(|(l, u)| rng.uniform_in(*l, *u))
        .collect();
    let y: Vec<f64> = (0..d).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
    let m = (rng.next_u64() % 3) as usize;
    let cons = (0..m)
        .map(|_| {
            let g = normal(rng, d);
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let b = dot(&g, &anchor) + rng.uniform_in(0.02, 0.5) * gn;
            Halfspace::new(g, b)
        })
        .collect();
    QpInstance { set, y, cons }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Solves `min ½‖x − y‖²` over box and cuts with the Goldfarb–Idnani dual
/// active-set method. `None` when infeasible.
pub fn quadprog_projection(set: &BoxSet, y: &[f64], cons: &[Halfspace]) -> Option<Vec<f64>> {
    let d = y.len();
    let mut q = vec![0.0; d * d];
    for i in 0..d {
        q[i * d + i] = 1.0;
    }
    let c: Vec<f64> = y.iter().map(|v| -v).collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for h in cons {
        a.extend_from_slice(&h.normal);
        b.push(h.offset);
    }
    for i in 0..d {
        let mut row = vec![0.0; d];
        if set.upper()[i].is_finite() {
            row[i] = 1.0;
            a.extend_from_slice(&row);
            b.push(set.upper()[i]);
        }
        if set.lower()[i].is_finite() {
            row[i] = -1.0;
            a.extend_from_slice(&row);
            b.push(-set.lower()[i]);
        }
    }
    quadprog::solve_qp(&mut q, &c, &a, &b, 0, false)
        .ok()
        .map(|s| s.sol)
}

/// Projection onto the affine set `{x : x_i = v_i (i ∈ fixed), ⟨g_j, x⟩ = b_j}`
/// by solving the normal equations of the free coordinates directly.
fn affine_projection(y: &[f64], fixed: &[Option<f64>], eqs: &[&Halfspace]) -> Option<Vec<f64>> {
    let mut x: Vec<f64> = y
        .iter()
        .zip(fixed)
        .map(|(yi, f)| f.unwrap_or(*yi))
        .collect();
    if eqs.is_empty() {
        return Some(x);
    }
    // x_free = y_free − Σ μ_j g_j,free with the Gram system G μ = r.
    let free: Vec<usize> = (0..y.len()).filter(|i| fixed[*i].is_none()).collect();
    let m = eqs.len();
    let mut gram = vec![vec![0.0; m]; m];
    let mut r = vec![0.0; m];
    for j in 0..m {
        let fixed_part: f64 = (0..y.len())
            .filter(|i| fixed[*i].is_some())
            .map(|i| eqs[j].normal[i] * x[i])
            .sum();
        let free_part: f64 = free.iter().map(|&i| eqs[j].normal[i] * y[i]).sum();
        r[j] = fixed_part + free_part - eqs[j].offset;
        for k in 0..m {
            gram[j][k] = free
                .iter()
                .map(|&i| eqs[j].normal[i] * eqs[k].normal[i])
                .sum();
        }
    }
    let mu = match m {
        1 => {
            if gram[0][0].abs() < 1e-14 {
                return (r[0].abs() < 1e-12).then_some(x);
            }
            vec![r[0] / gram[0][0]]
        }
        _ => {
            let det = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0];
            if det.abs() < 1e-12 {
                return None;
            }
            vec![
                (r[0] * gram[1][1] - gram[0][1] * r[1]) / det,
                (gram[0][0] * r[1] - gram[1][0] * r[0]) / det,
            ]
        }
    };
    for &i in &free {
        x[i] = y[i] - (0..m).map(|j| mu[j] * eqs[j].normal[i]).sum::<f64>();
    }
    Some(x)
}

/// Exhaustive active-set enumeration for boxes of dimension at most two:
/// every coordinate is at its lower bound, upper bound or free, and every
/// cut is active or not. Each pattern's affine projection is kept when it is
/// feasible; the closest one is the projection. `None` when no pattern is
/// feasible.
pub fn enumerate_projection(set: &BoxSet, y: &[f64], cons: &[Halfspace]) -> Option<Vec<f64>> {
    let d = y.len();
    assert!(d <= 2, "enumeration is exhaustive only in small dimension");
    let tol = 1e-10;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(d as u32) {
        let mut fixed = vec![None; d];
        let mut c = code;
        for (i, f) in fixed.iter_mut().enumerate() {
            *f = match c % 3 {
                0 => None,
                1 => Some(set.lower()[i]),
                _ => Some(set.upper()[i]),
            };
            c /= 3;
            if f.is_some_and(|v: f64| !v.is_finite()) {
                *f = Some(f64::NAN);
            }
        }
        if fixed.iter().any(|f| f.is_some_and(|v| v.is_nan())) {
            continue;
        }
        for mask in 0..(1usize << cons.len()) {
            let eqs: Vec<&Halfspace> = (0..cons.len())
                .filter(|j| mask >> j & 1 == 1)
                .map(|j| &cons[j])
                .collect();
            let Some(x) = affine_projection(y, &fixed, &eqs) else {
                continue;
            };
            let in_box = x
                .iter()
                .enumerate()
                .all(|(i, v)| *v >= set.lower()[i] - tol && *v <= set.upper()[i] + tol);
            let in_cuts = cons
                .iter()
                .all(|h| dot(&h.normal, &x) - h.offset <= tol * (1.0 + h.offset.abs()));
            if in_box && in_cuts {
                let dd = dist(&x, y);
                if best.as_ref().map_or(true, |(b, _)| dd < *b) {
                    best = Some((dd, x));
                }
            }
        }
    }
    best.map(|(_, x)| x)
}

const CENTERS: usize = 50;
const GRID_RES: f64 = 1e-2;
const GRID_LEVELS: usize = 3;

/// Uniform centers in the box with `F2 ≤ τ`.
fn centers(inst: &Instance, tau: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = SplitMix64::new(seed);
    let set = inst.problem.domain();
    let mut out = Vec::new();
    while out.len() < CENTERS {
        let x: Vec<f64> = set
            .lower()
            .iter()
            .zip(set.upper())
            .map(|(l, u)| rng.uniform_in(*l, *u))
            .collect();
        if inst.problem.inspect(&x).1 <= tau {
            out.push(x);
        }
    }
    out
}

/// `min φ1 s.t. φ2 ≤ level` on a refined grid (two-dimensional problems).
fn grid_prox(inst: &Instance, x_k: &[f64], rho_hat: f64, level: f64) -> GridPoint {
    let (f1, f2) = (inst.problem.raw_objective(), inst.problem.raw_constraint());
    let reg = |x: &[f64]| 0.5 * rho_hat * ((x[0] - x_k[0]).powi(2) + (x[1] - x_k[1]).powi(2));
    grid_minimize_refined(
        inst.problem.domain(),
        GRID_RES,
        GRID_LEVELS,
        0.0,
        |x| f1.value(x) + reg(x),
        |x| f2.value(x) + reg(x) - level,
    )
    .unwrap()
}

/// Lipschitz bound of `φ1` on the box times the final grid spacing.
fn grid_error(inst: &Instance, rho_hat: f64) -> f64 {
    let lip = inst.meta.g_bound + rho_hat * inst.meta.d_x;
    lip * GRID_RES / 20f64.powi(GRID_LEVELS as i32) * 2f64.sqrt()
}

/// One randomly centered prox-subproblem and the inner solver's answer.
pub struct ContractCase {
    pub center: Vec<f64>,
    pub output: Vec<f64>,
    pub grid: GridPoint,
    /// `φ1(output) − grid optimum − grid error`.
    pub gap: f64,
    pub phi2: f64,
    pub tau: f64,
}

/// SwSG at its scheduled budget with `ε_in = ατ/3` and `ρ̂ = 2ρ`, compared
/// against the grid under its own shifted constraint `φ2 ≤ τ − ατ/3`.
pub fn swsg_contract(inst: &Instance, tau: f64, alpha: f64, seed: u64) -> (Vec<ContractCase>, f64) {
    let rho_hat = 2.0 * inst.meta.rho;
    let eps_in = alpha * tau / 3.0;
    let cfg = SwsgConfig {
        t_in: swsg_inner_budget(&inst.meta, rho_hat, eps_in),
        tau,
        alpha,
        eps_in,
        step: StepRule::StronglyConvex {
            mu: rho_hat - inst.meta.rho,
        },
    };
    let err = grid_error(inst, rho_hat);
    let cases = centers(inst, tau, seed)
        .into_iter()
        .map(|x_k| {
            let sub = build_prox_subproblem(&inst.problem, &x_k, rho_hat, tau);
            let res = swsg(&sub.phi1(), &sub.phi2(), &x_k, inst.problem.domain(), &cfg).unwrap();
            let grid = grid_prox(inst, &x_k, rho_hat, tau - alpha * tau / 3.0);
            ContractCase {
                gap: sub.phi1().value(&res.point) - grid.f - err,
                phi2: sub.phi2().value(&res.point),
                center: x_k,
                output: res.point,
                grid,
                tau,
            }
        })
        .collect();
    (cases, eps_in)
}

/// ACGD with the θ-Slater shift, the multiplier bound `λ̄` and its
/// scheduled budget, compared against the grid under `φ2 + b ≤ 0`.
pub fn acgd_contract(inst: &Instance, tau: f64, alpha: f64, seed: u64) -> (Vec<ContractCase>, f64) {
    let rho_hat = 2.0 * inst.meta.rho;
    let eps_in = alpha * tau / 3.0;
    let l = inst.meta.l_smooth.unwrap();
    let theta = inst.meta.theta_slater.unwrap();
    let lambda_bar = slater_multiplier_bound(&inst.meta, rho_hat, theta);
    let shift_b = choose_shift(&inst.meta, rho_hat, tau, tau, Some(theta));
    let cfg = AcgdConfig::new(
        acgd_inner_budget(&inst.meta, l, lambda_bar, eps_in),
        shift_b,
        tau,
        AcgdSchedule::strongly_convex_lagrangian(l, rho_hat, inst.meta.rho, lambda_bar).unwrap(),
    );
    let err = grid_error(inst, rho_hat);
    let cases = centers(inst, tau, seed)
        .into_iter()
        .map(|x_k| {
            let sub = build_prox_subproblem(&inst.problem, &x_k, rho_hat, tau);
            let res = acgd(&sub.phi1(), &sub.phi2(), &x_k, inst.problem.domain(), &cfg).unwrap();
            let grid = grid_prox(inst, &x_k, rho_hat, -shift_b);
            ContractCase {
                gap: sub.phi1().value(&res.point) - grid.f - err,
                phi2: sub.phi2().value(&res.point),
                center: x_k,
                output: res.point,
                grid,
                tau,
            }
        })
        .collect();
    (cases, eps_in)
}
