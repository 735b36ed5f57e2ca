//! Independent reference oracles: exhaustive grid search for problems of
//! dimension at most two, and a solve of the convex reformulation in `u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoxSet;
use crate::linalg::{axpy, dot, lerp, norm_sq};
use crate::model::{ConstrainedProblem, Function};

use super::hidden::HiddenMap;
use super::Instance;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub x: Vec<f64>,
    pub f: f64,
}

fn axis(lo: f64, hi: f64, res: f64) -> Vec<f64> {
    let n = ((hi - lo) / res).ceil().max(0.0) as usize;
    (0..=n).map(|i| (lo + i as f64 * res).min(hi)).collect()
}

/// Minimizes `f` over the grid of spacing `res` on a box of dimension one or
/// two, keeping points with `g ≤ slack`. Scans in lexicographic index order
/// and only replaces the incumbent on strict improvement.
pub fn grid_minimize(
    set: &BoxSet,
    res: f64,
    slack: f64,
    f: impl Fn(&[f64]) -> f64,
    g: impl Fn(&[f64]) -> f64,
) -> Result<GridPoint> {
    if !(res > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be positive, got {res}"
        )));
    }
    let d = set.dim();
    if d == 0 || d > 2 || !set.diameter().is_finite() {
        return Err(Error::InvalidArgument(format!(
            "grid search needs a bounded box of dimension 1 or 2, got {d}"
        )));
    }
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|i| axis(set.lower()[i], set.upper()[i], res))
        .collect();
    let second = if d == 2 {
        axes[1].clone()
    } else {
        vec![f64::NAN]
    };
    let mut best: Option<GridPoint> = None;
    let mut x = vec![0.0; d];
    for &a in &axes[0] {
        x[0] = a;
        for &b in &second {
            if d == 2 {
                x[1] = b;
            }
            if g(&x) > slack {
                continue;
            }
            let v = f(&x);
            if best.as_ref().map_or(true, |p| v < p.f) {
                best = Some(GridPoint { x: x.clone(), f: v });
            }
        }
    }
    best.ok_or(Error::NoFeasibleGridPoint)
}

/// [`grid_minimize`] followed by `levels` zoom steps, each re-gridding the
/// window `best ± 2·res` at a twentieth of the spacing.
pub fn grid_minimize_refined(
    set: &BoxSet,
    res: f64,
    levels: usize,
    slack: f64,
    f: impl Fn(&[f64]) -> f64,
    g: impl Fn(&[f64]) -> f64,
) -> Result<GridPoint> {
    let mut best = grid_minimize(set, res, slack, &f, &g)?;
    let mut r = res;
    for _ in 0..levels {
        let lower: Vec<f64> = best
            .x
            .iter()
            .zip(set.lower())
            .map(|(x, l)| (x - 2.0 * r).max(*l))
            .collect();
        let upper: Vec<f64> = best
            .x
            .iter()
            .zip(set.upper())
            .map(|(x, u)| (x + 2.0 * r).min(*u))
            .collect();
        r /= 20.0;
        let window = BoxSet::new(lower, upper)?;
        let cand = grid_minimize(&window, r, slack, &f, &g)?;
        if cand.f < best.f {
            best = cand;
        }
    }
    Ok(best)
}

/// Best objective value on the problem's grid subject to `F2 ≤ slack`.
/// Evaluates the raw oracles, so the problem's counter is untouched.
pub fn grid_oracle(problem: &ConstrainedProblem, res: f64, slack: f64) -> Result<GridPoint> {
    let (f1, f2) = (problem.raw_objective(), problem.raw_constraint());
    grid_minimize(
        problem.domain(),
        res,
        slack,
        |x| f1.value(x),
        |x| f2.value(x),
    )
}

/// Solution of `min H1(u) s.t. H2(u) ≤ 0, u ∈ U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    /// `H1(u_star)`, an upper bound on the optimum since `H2(u_star) ≤ 0`.
    pub f1_star_ref: f64,
    pub u_star: Vec<f64>,
    pub x_star: Vec<f64>,
    /// Certified lower bound on the optimum, when available.
    pub lower_bound: Option<f64>,
    /// Smallest multiplier tried whose Lagrangian minimizer was feasible.
    pub lambda: Option<f64>,
}

impl ReferenceSolution {
    pub fn gap(&self) -> Option<f64> {
        self.lower_bound.map(|lb| self.f1_star_ref - lb)
    }
}

/// Solves the convex reformulation of an instance with a hidden map.
///
/// Smooth instances use bisection on the scalar dual. Each Lagrangian
/// `H1 + λH2` is minimized over `U` by accelerated projected gradient, and
/// its Frank–Wolfe gap turns the dual value into a certified lower bound.
/// Upper bounds come from feasible primal points, including the point where
/// the segment between the last infeasible and feasible minimizers crosses
/// `H2 = 0`. Non-smooth instances use a restarted switching sub-gradient
/// method with halving steps and report no lower bound.
pub fn reference_convex(instance: &Instance, eps: f64) -> Result<ReferenceSolution> {
    let map = instance
        .map
        .as_ref()
        .ok_or_else(|| Error::PreconditionViolated("reference_convex needs a hidden map".into()))?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if instance.problem.is_smooth() {
        dual_bisection(map, eps)
    } else {
        restarted_switching(map, instance.meta.g_bound, eps)
    }
}

struct Lagrangian<'a> {
    h1: &'a dyn Function,
    h2: &'a dyn Function,
    lambda: f64,
}

impl Lagrangian<'_> {
    fn eval(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let (a, mut g) = self.h1.value_and_subgradient(u);
        if self.lambda == 0.0 {
            return (a, g);
        }
        let (b, g2) = self.h2.value_and_subgradient(u);
        axpy(self.lambda, &g2, &mut g);
        (a + self.lambda * b, g)
    }
}

/// `max_{v ∈ U} ⟨g, u − v⟩`.
fn frank_wolfe_gap(set: &BoxSet, u: &[f64], g: &[f64]) -> f64 {
    u.iter()
        .zip(g)
        .zip(set.lower().iter().zip(set.upper()))
        .map(|((ui, gi), (l, h))| gi * (ui - if *gi > 0.0 { *l } else { *h }))
        .sum()
}

/// FISTA with backtracking and gradient restarts. Returns the final point,
/// its Lagrangian value and Frank–Wolfe gap.
fn minimize_lagrangian(
    lag: &Lagrangian<'_>,
    set: &BoxSet,
    u0: &[f64],
    tol: f64,
) -> (Vec<f64>, f64, f64) {
    const MAX_ITERS: usize = 200_000;
    let mut x = set.project(u0).expect("dimension checked");
    let (mut fx, mut gx) = lag.eval(&x);
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    let mut lip = 1.0;
    let mut gap = frank_wolfe_gap(set, &x, &gx);
    for _ in 0..MAX_ITERS {
        if gap <= tol {
            break;
        }
        let (fy, gy) = lag.eval(&y);
        let (x_new, f_new) = loop {
            let mut z = y.clone();
            axpy(-1.0 / lip, &gy, &mut z);
            set.project_in_place(&mut z);
            let d: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
            let fz = lag.eval(&z).0;
            if fz <= fy + dot(&gy, &d) + 0.5 * lip * norm_sq(&d) + 1e-15 * fy.abs() || lip > 1e15 {
                break (z, fz);
            }
            lip *= 2.0;
        };
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let step: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        if f_new > fx {
            // Restart momentum when the objective goes up.
            y = x.clone();
            t = 1.0;
            continue;
        }
        y = x_new
            .iter()
            .zip(&step)
            .map(|(a, s)| a + (t - 1.0) / t_new * s)
            .collect();
        t = t_new;
        x = x_new;
        (fx, gx) = lag.eval(&x);
        gap = frank_wolfe_gap(set, &x, &gx);
        lip *= 0.9;
    }
    (x, fx, gap)
}

fn dual_bisection(map: &HiddenMap, eps: f64) -> Result<ReferenceSolution> {
    let (h1, h2, set) = (map.h1().as_ref(), map.h2().as_ref(), map.u_box());
    let tol = eps * 1e-2;
    let mut lower = f64::NEG_INFINITY;
    let mut upper: Option<(f64, Vec<f64>)> = None;
    let consider = |u: &[f64], upper: &mut Option<(f64, Vec<f64>)>| {
        if h2.value(u) <= 0.0 {
            let v = h1.value(u);
            if upper.as_ref().map_or(true, |(b, _)| v < *b) {
                *upper = Some((v, u.to_vec()));
            }
        }
    };

    let mut u = set.center();
    let solve = |lambda: f64, u: &mut Vec<f64>, lower: &mut f64| -> f64 {
        let (x, val, gap) = minimize_lagrangian(&Lagrangian { h1, h2, lambda }, set, u, tol);
        *lower = lower.max(val - gap);
        *u = x;
        h2.value(u)
    };

    if solve(0.0, &mut u, &mut lower) <= 0.0 {
        consider(&u, &mut upper);
        let (f, u_star) = upper.expect("feasible minimizer recorded");
        return Ok(ReferenceSolution {
            f1_star_ref: f,
            x_star: map.inverse(&u_star),
            u_star,
            lower_bound: Some(lower),
            lambda: Some(0.0),
        });
    }
    let mut u_lo = u.clone();
    let (mut lam_lo, mut lam_hi) = (0.0, 1.0);
    let mut u_hi = u.clone();
    loop {
        if solve(lam_hi, &mut u_hi, &mut lower) <= 0.0 {
            break;
        }
        u_lo = u_hi.clone();
        lam_lo = lam_hi;
        lam_hi *= 2.0;
        if lam_hi > 1e12 {
            return Err(Error::Infeasible {
                violation: h2.value(&u_hi),
            });
        }
    }
    consider(&u_hi, &mut upper);
    for _ in 0..200 {
        // Crossing of H2 = 0 on the segment from the feasible to the
        // infeasible minimizer; H2 is convex along it.
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if h2.value(&lerp(&u_hi, &u_lo, m)) <= 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        consider(&lerp(&u_hi, &u_lo, a), &mut upper);
        if upper.as_ref().is_some_and(|(f, _)| f - lower <= eps)
            || lam_hi - lam_lo <= 1e-14 * lam_hi
        {
            break;
        }
        let mid = 0.5 * (lam_lo + lam_hi);
        let mut um = u_hi.clone();
        if solve(mid, &mut um, &mut lower) <= 0.0 {
            consider(&um, &mut upper);
            u_hi = um;
            lam_hi = mid;
        } else {
            u_lo = um;
            lam_lo = mid;
        }
    }
    let (f, u_star) = upper.expect("feasible point recorded");
    Ok(ReferenceSolution {
        f1_star_ref: f,
        x_star: map.inverse(&u_star),
        u_star,
        lower_bound: Some(lower),
        lambda: Some(lam_hi),
    })
}

fn restarted_switching(map: &HiddenMap, g_bound: f64, eps: f64) -> Result<ReferenceSolution> {
    const EPOCH: usize = 4_000;
    let (h1, h2, set) = (map.h1().as_ref(), map.h2().as_ref(), map.u_box());
    let mut step = set.diameter() / (g_bound * 10.0);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut u = set.center();
    while step * g_bound > eps * 1e-3 {
        for _ in 0..EPOCH {
            let (c, gc) = h2.value_and_subgradient(&u);
            if c <= 0.0 {
                let (f, gf) = h1.value_and_subgradient(&u);
                if best.as_ref().map_or(true, |(b, _)| f < *b) {
                    best = Some((f, u.clone()));
                }
                axpy(-step, &gf, &mut u);
            } else {
                // Polyak step towards the constraint's zero level.
                let n2 = norm_sq(&gc);
                if n2 == 0.0 {
                    return Err(Error::Infeasible { violation: c });
                }
                axpy(-(c / n2 + step / n2.sqrt()), &gc, &mut u);
            }
            set.project_in_place(&mut u);
        }
        if let Some((_, b)) = &best {
            u = b.clone();
        }
        step *= 0.5;
    }
    let (f, u_star) = best.ok_or(Error::EmptyFeasibleSet { steps: 0 })?;
    Ok(ReferenceSolution {
        f1_star_ref: f,
        x_star: map.inverse(&u_star),
        u_star,
        lower_bound: None,
        lambda: None,
    })
}
