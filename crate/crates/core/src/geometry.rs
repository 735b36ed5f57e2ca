//! Box projections and the exact "closest point in a box subject to at most
//! two halfspaces" solver used by the accelerated inner solver and the
//! bundle-level methods.
//!
//! For `min ½‖x − y‖²  s.t.  x ∈ B, ⟨g_i, x⟩ ≤ b_i` the minimizer of the
//! Lagrangian over the box is `x(λ) = Π_B(y − Σ λ_i g_i)`, and the dual
//! `d(λ)` is concave with gradient `⟨g_i, x(λ)⟩ − b_i`. With one cut the dual
//! is maximized by bisection on its monotone derivative. With two cuts the
//! second multiplier is eliminated by an inner bisection; the reduced dual
//! is still concave in the first multiplier, so its derivative is again
//! monotone and an outer bisection finishes the job.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Default relative tolerance of the halfspace projection.
pub const DEFAULT_QP_TOL: f64 = 1e-9;

/// Multipliers above this certify that the cuts do not meet the box.
pub const DUAL_CAP: f64 = 1e12;

const MAX_BISECTIONS: usize = 200;

/// Axis-aligned box; bounds may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument(
                "box bounds must satisfy lower <= upper".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![lo; dim], vec![hi; dim]).expect("cube bounds must be ordered")
    }

    pub fn unbounded(dim: usize) -> Self {
        Self::cube(dim, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    /// Euclidean diameter (infinite if any side is unbounded).
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y)?;
        Ok(self.clamp(y))
    }

    pub fn project_in_place(&self, y: &mut [f64]) {
        debug_assert_eq!(y.len(), self.dim());
        for ((v, l), u) in y.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    fn clamp(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect()
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        Ok(())
    }

    /// `min_{x ∈ B} ⟨g, x⟩`, lowest-index vertex on ties.
    fn min_linear(&self, g: &[f64]) -> f64 {
        g.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(gi, (l, u))| match gi.partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => gi * l,
                Some(std::cmp::Ordering::Less) => gi * u,
                _ => 0.0,
            })
            .sum()
    }
}

/// Componentwise clamp of `y` onto `set`.
pub fn project_box(set: &BoxSet, y: &[f64]) -> Result<Vec<f64>> {
    set.project(y)
}

/// `⟨normal, x⟩ ≤ offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    /// `⟨normal, x⟩ − offset`; positive means violated.
    pub fn violation(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }
}

/// Solution of the halfspace projection together with the multipliers of
/// `½‖x − y‖²`, i.e. `x = Π_B(y − Σ λ_i g_i)` in the order the cuts were given.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub multipliers: Vec<f64>,
}

/// Projects `y` onto `set ∩ {⟨g_i, x⟩ ≤ b_i}` for at most two cuts.
///
/// `tol` is relative to `1 + ‖y‖`. Cuts with a zero normal are dropped when
/// `b ≥ 0` and reported infeasible otherwise.
pub fn project_box_halfspaces(
    set: &BoxSet,
    y: &[f64],
    cons: &[Halfspace],
    tol: f64,
) -> Result<Vec<f64>> {
    solve_box_halfspaces(set, y, cons, tol).map(|s| s.x)
}

/// Same as [`project_box_halfspaces`] but also returns multipliers.
pub fn solve_box_halfspaces(
    set: &BoxSet,
    y: &[f64],
    cons: &[Halfspace],
    tol: f64,
) -> Result<QpSolution> {
    set.check_dim(y)?;
    if cons.len() > 2 {
        return Err(Error::InvalidArgument(format!(
            "at most two halfspaces supported, got {}",
            cons.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let abs_tol = tol * (1.0 + norm(y));

    // Keep the original index so multipliers come back in caller order.
    let mut active: Vec<(usize, &Halfspace)> = Vec::with_capacity(2);
    for (i, h) in cons.iter().enumerate() {
        set.check_dim(&h.normal)?;
        if norm(&h.normal) == 0.0 {
            if h.offset < 0.0 {
                return Err(Error::Infeasible {
                    violation: -h.offset,
                });
            }
            continue;
        }
        // Cheap emptiness check against the box alone.
        let lowest = set.min_linear(&h.normal);
        if lowest - h.offset > abs_tol * norm(&h.normal) {
            return Err(Error::Infeasible {
                violation: lowest - h.offset,
            });
        }
        active.push((i, h));
    }

    let mut multipliers = vec![0.0; cons.len()];
    let x = match active.as_slice() {
        [] => set.clamp(y),
        [(i, h)] => {
            let lam =
                single_cut_multiplier(set, y, &h.normal, h.offset).ok_or(Error::Infeasible {
                    violation: f64::INFINITY,
                })?;
            multipliers[*i] = lam;
            shifted_projection(set, y, &[(lam, &h.normal)])
        }
        [(i, h1), (j, h2)] => {
            let (l1, l2) = two_cut_multipliers(set, y, h1, h2)?;
            multipliers[*i] = l1;
            multipliers[*j] = l2;
            shifted_projection(set, y, &[(l1, &h1.normal), (l2, &h2.normal)])
        }
        _ => unreachable!(),
    };

    let violation = cons
        .iter()
        .map(|h| h.violation(&x) / norm(&h.normal).max(1.0))
        .fold(0.0_f64, f64::max);
    if violation > abs_tol {
        return Err(Error::Infeasible { violation });
    }
    Ok(QpSolution { x, multipliers })
}

/// `Π_B(y − Σ λ_i g_i)`.
fn shifted_projection(set: &BoxSet, y: &[f64], terms: &[(f64, &Vec<f64>)]) -> Vec<f64> {
    let mut w = y.to_vec();
    for (lam, g) in terms {
        if *lam != 0.0 {
            for (wi, gi) in w.iter_mut().zip(g.iter()) {
                *wi -= lam * gi;
            }
        }
    }
    set.project_in_place(&mut w);
    w
}

/// `⟨g, Π_B(w − λ g)⟩ − b`, non-increasing in `λ`.
fn cut_slope(set: &BoxSet, w: &[f64], g: &[f64], b: f64, lam: f64) -> f64 {
    let mut s = 0.0;
    for (((wi, gi), l), u) in w.iter().zip(g).zip(&set.lower).zip(&set.upper) {
        s += gi * (wi - lam * gi).clamp(*l, *u);
    }
    s - b
}

/// Smallest root of a non-increasing `h` on `[0, DUAL_CAP]`; `None` when `h`
/// stays positive up to the cap.
fn bisect_nonincreasing(mut h: impl FnMut(f64) -> f64) -> Option<f64> {
    if h(0.0) <= 0.0 {
        return Some(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while h(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > DUAL_CAP {
            return None;
        }
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // `hi` keeps the cut satisfied.
    Some(hi)
}

fn single_cut_multiplier(set: &BoxSet, w: &[f64], g: &[f64], b: f64) -> Option<f64> {
    bisect_nonincreasing(|lam| cut_slope(set, w, g, b, lam))
}

fn two_cut_multipliers(
    set: &BoxSet,
    y: &[f64],
    h1: &Halfspace,
    h2: &Halfspace,
) -> Result<(f64, f64)> {
    let mut w = vec![0.0; y.len()];
    let mut inner = |l1: f64| -> Option<(f64, f64)> {
        for ((wi, yi), gi) in w.iter_mut().zip(y).zip(&h1.normal) {
            *wi = yi - l1 * gi;
        }
        let l2 = single_cut_multiplier(set, &w, &h2.normal, h2.offset)?;
        Some((l2, cut_slope(set, &w, &h2.normal, 0.0, l2)))
    };

    // Reduced-dual derivative in the first multiplier.
    let mut last_l2 = 0.0;
    let mut infeasible = false;
    let l1 = bisect_nonincreasing(|l1| match inner(l1) {
        Some((l2, _)) => {
            let x = shifted_projection(set, y, &[(l1, &h1.normal), (l2, &h2.normal)]);
            h1.violation(&x)
        }
        None => {
            infeasible = true;
            f64::INFINITY
        }
    });
    if infeasible {
        return Err(Error::Infeasible {
            violation: f64::INFINITY,
        });
    }
    let l1 = l1.ok_or(Error::Infeasible {
        violation: f64::INFINITY,
    })?;
    if let Some((l2, _)) = inner(l1) {
        last_l2 = l2;
    }
    Ok((l1, last_l2))
}

/// One step of the accelerated constrained gradient method:
///
/// `argmin_{x ∈ B} ⟨π, x⟩ + (η/2)‖x − z_prev‖²  s.t.  ⟨ν, x − z̄⟩ + c0 ≤ 0`,
///
/// rewritten as the projection of `z_prev − π/η` onto the box cut by one
/// halfspace.
#[allow(clippy::too_many_arguments)]
pub fn solve_acgd_qp(
    pi: &[f64],
    z_prev: &[f64],
    eta_step: f64,
    nu: &[f64],
    z_bar: &[f64],
    c0: f64,
    set: &BoxSet,
    tol: f64,
) -> Result<Vec<f64>> {
    if !(eta_step > 0.0) {
        return Err(Error::InvalidArgument("eta_step must be positive".into()));
    }
    let target: Vec<f64> = z_prev
        .iter()
        .zip(pi)
        .map(|(z, p)| z - p / eta_step)
        .collect();
    let cut = Halfspace::new(nu.to_vec(), dot(nu, z_bar) - c0);
    project_box_halfspaces(set, &target, std::slice::from_ref(&cut), tol)
}

/// Largest KKT residual of a claimed solution: box membership, primal
/// violation, dual sign, complementarity and the stationarity condition
/// `x = Π_B(y − Σ λ_i g_i)`.
pub fn kkt_residual(set: &BoxSet, y: &[f64], cons: &[Halfspace], sol: &QpSolution) -> f64 {
    let mut r = 0.0_f64;
    for (v, (l, u)) in sol.x.iter().zip(set.lower.iter().zip(&set.upper)) {
        r = r.max(l - v).max(v - u);
    }
    let mut terms = Vec::new();
    for (h, lam) in cons.iter().zip(&sol.multipliers) {
        let viol = h.violation(&sol.x);
        r = r.max(viol).max(-lam);
        r = r.max((lam * viol).abs() / (1.0 + h.offset.abs()));
        terms.push((*lam, &h.normal));
    }
    let fixed = shifted_projection(set, y, &terms);
    r.max(
        fixed
            .iter()
            .zip(&sol.x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dist;

    #[test]
    fn clamp_examples() {
        let b = BoxSet::cube(2, 0.5, 2.0);
        assert_eq!(project_box(&b, &[0.0, 3.0]).unwrap(), vec![0.5, 2.0]);
        assert_eq!(project_box(&b, &[1.0, 1.5]).unwrap(), vec![1.0, 1.5]);
        let c = BoxSet::cube(2, -1.0, 2.5);
        assert_eq!(project_box(&c, &[3.0, -2.0]).unwrap(), vec![2.5, -1.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let b = BoxSet::cube(2, 0.0, 1.0);
        assert!(matches!(
            project_box(&b, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let h = Halfspace::new(vec![1.0], 0.0);
        assert!(project_box_halfspaces(&b, &[0.0, 0.0], &[h], 1e-9).is_err());
        assert!(BoxSet::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn feasible_point_is_fixed() {
        let b = BoxSet::cube(3, -1.0, 1.0);
        let y = [0.2, -0.3, 0.1];
        let cons = [
            Halfspace::new(vec![1.0, 1.0, 1.0], 1.0),
            Halfspace::new(vec![0.0, 1.0, 0.0], 0.5),
        ];
        assert_eq!(
            project_box_halfspaces(&b, &y, &cons, 1e-9).unwrap(),
            y.to_vec()
        );
    }

    #[test]
    fn single_halfspace_closed_form() {
        let b = BoxSet::unbounded(3);
        let g = vec![1.0, -2.0, 0.5];
        let y = [3.0, -1.0, 2.0];
        let off = 0.5;
        let viol = dot(&g, &y) - off;
        let expected: Vec<f64> = y
            .iter()
            .zip(&g)
            .map(|(yi, gi)| yi - viol / dot(&g, &g) * gi)
            .collect();
        let x = project_box_halfspaces(&b, &y, &[Halfspace::new(g, off)], 1e-12).unwrap();
        assert!(dist(&x, &expected) < 1e-10, "{x:?} vs {expected:?}");
    }

    #[test]
    fn symmetric_corner() {
        let b = BoxSet::cube(2, 0.0, 1.0);
        let x = project_box_halfspaces(
            &b,
            &[1.0, 1.0],
            &[Halfspace::new(vec![1.0, 1.0], 1.0)],
            1e-12,
        )
        .unwrap();
        assert!(dist(&x, &[0.5, 0.5]) < 1e-10);
    }

    #[test]
    fn two_cuts_meeting_at_a_vertex() {
        // x1 <= 0.2, x2 <= 0.3 from (1, 1) inside [0,1]^2.
        let b = BoxSet::cube(2, 0.0, 1.0);
        let cons = [
            Halfspace::new(vec![1.0, 0.0], 0.2),
            Halfspace::new(vec![0.0, 1.0], 0.3),
        ];
        let s = solve_box_halfspaces(&b, &[1.0, 1.0], &cons, 1e-12).unwrap();
        assert!(dist(&s.x, &[0.2, 0.3]) < 1e-10);
        assert!((s.multipliers[0] - 0.8).abs() < 1e-9);
        assert!((s.multipliers[1] - 0.7).abs() < 1e-9);
        assert!(kkt_residual(&b, &[1.0, 1.0], &cons, &s) < 1e-9);
    }

    #[test]
    fn infeasible_cuts_detected() {
        let b = BoxSet::cube(2, 0.0, 1.0);
        // Each cut alone meets the box, together they do not.
        let cons = [
            Halfspace::new(vec![1.0, 0.0], 0.2),
            Halfspace::new(vec![-1.0, 0.0], -0.5),
        ];
        assert!(matches!(
            project_box_halfspaces(&b, &[0.5, 0.5], &cons, 1e-9),
            Err(Error::Infeasible { .. })
        ));
        // Cut alone misses the box.
        let far = [Halfspace::new(vec![1.0, 1.0], -1.0)];
        assert!(matches!(
            project_box_halfspaces(&b, &[0.5, 0.5], &far, 1e-9),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn zero_normal_handling() {
        let b = BoxSet::cube(2, 0.0, 1.0);
        let vacuous = [Halfspace::new(vec![0.0, 0.0], 0.0)];
        assert_eq!(
            project_box_halfspaces(&b, &[2.0, 0.5], &vacuous, 1e-9).unwrap(),
            vec![1.0, 0.5]
        );
        let impossible = [Halfspace::new(vec![0.0, 0.0], -1.0)];
        assert!(project_box_halfspaces(&b, &[0.5, 0.5], &impossible, 1e-9).is_err());
    }

    #[test]
    fn acgd_qp_examples() {
        let b = BoxSet::cube(2, -5.0, 5.0);
        // pi = 0 and slack constraint: stays at z_prev.
        let z = [1.0, -1.0];
        let x = solve_acgd_qp(&[0.0, 0.0], &z, 2.0, &[1.0, 0.0], &z, -1.0, &b, 1e-12).unwrap();
        assert_eq!(x, z.to_vec());

        // 1D: pull toward 1 but x <= 0.5 is active.
        let b1 = BoxSet::cube(1, 0.0, 1.0);
        let eta = 3.0;
        let x = solve_acgd_qp(&[-eta], &[0.0], eta, &[1.0], &[0.5], 0.0, &b1, 1e-12).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_arguments() {
        let b = BoxSet::cube(1, 0.0, 1.0);
        assert!(solve_acgd_qp(&[0.0], &[0.0], 0.0, &[1.0], &[0.0], 0.0, &b, 1e-9).is_err());
        let h = Halfspace::new(vec![1.0], 1.0);
        assert!(project_box_halfspaces(&b, &[0.0], &[h.clone(), h.clone(), h], 1e-9).is_err());
    }
}
