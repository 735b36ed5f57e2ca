//! Benchmark instances.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoxSet;
use crate::model::{ConstrainedProblem, FnFunction, Function, HiddenConvexMeta};

use super::hidden::HiddenMap;
use super::posynomial::{LogPosynomialFunction, Posynomial, PosynomialFunction};
use super::rng::SplitMix64;
use super::{Instance, KnownOptimum};

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Norm {
    /// `‖v − b‖_∞`; sub-gradient `sgn(v_i − b_i) e_i` at the lowest index
    /// attaining the max.
    Inf,
    /// `‖v − b‖_1`; sub-gradient `sgn(v − b)`.
    One,
}

impl Norm {
    fn eval(self, v: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
        let r: Vec<f64> = v.iter().zip(b).map(|(a, c)| a - c).collect();
        match self {
            Norm::Inf => {
                let mut i_max = 0;
                for i in 1..r.len() {
                    if r[i].abs() > r[i_max].abs() {
                        i_max = i;
                    }
                }
                let mut s = vec![0.0; r.len()];
                s[i_max] = sgn(r[i_max]);
                (r[i_max].abs(), s)
            }
            Norm::One => (
                r.iter().map(|v| v.abs()).sum(),
                r.iter().map(|v| sgn(*v)).collect(),
            ),
        }
    }
}

fn cnls_map(x: &[f64]) -> Vec<f64> {
    vec![x[0] - 1.0, 2.0 * x[0].abs() - x[1] - 1.0]
}

fn cnls_inverse(u: &[f64]) -> Vec<f64> {
    let x1 = u[0] + 1.0;
    vec![x1, 2.0 * x1.abs() - u[1] - 1.0]
}

/// `‖c(x) − b‖ − offset` for the CNLS map, with the chain rule through the
/// Clarke Jacobian `[[1, 0], [2 sgn(x1), −1]]`.
struct CnlsTerm {
    norm: Norm,
    b: [f64; 2],
    offset: f64,
}

impl Function for CnlsTerm {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.norm.eval(&cnls_map(x), &self.b).0 - self.offset
    }
    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        self.value_and_subgradient(x).1
    }
    fn value_and_subgradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (v, s) = self.norm.eval(&cnls_map(x), &self.b);
        (v - self.offset, vec![s[0] + 2.0 * sgn(x[0]) * s[1], -s[1]])
    }
}

/// The same norm in `u`-space.
struct NormTerm {
    norm: Norm,
    b: Vec<f64>,
    offset: f64,
}

impl Function for NormTerm {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn value(&self, u: &[f64]) -> f64 {
        self.norm.eval(u, &self.b).0 - self.offset
    }
    fn subgradient(&self, u: &[f64]) -> Vec<f64> {
        self.norm.eval(u, &self.b).1
    }
    fn value_and_subgradient(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let (v, s) = self.norm.eval(u, &self.b);
        (v - self.offset, s)
    }
}

const CNLS_B1: [f64; 2] = [0.0, 0.0];
const CNLS_B2: [f64; 2] = [-0.5, -0.6];

/// Non-smooth non-linear least squares on `[−1, 2.5]²`:
/// `F1 = ‖c(x)‖_∞`, `F2 = ‖c(x) − (−0.5, −0.6)‖_1 − 0.8` with
/// `c(x) = (x1 − 1, 2|x1| − x2 − 1)`.
///
/// Constants: `c⁻¹(u) = (u1 + 1, 2|u1 + 1| − u2 − 1)` has Clarke Jacobians
/// with spectral norm `1 + √2`, so `μ_c = √2 − 1`. Sub-gradients are
/// `Jᵀs` with `s ∈ {±1}²`, so `G = √10`. The image of the box lies in
/// `[−2, 1.5] × [−3.5, 5]`.
pub fn make_cnls() -> Instance {
    let f1 = Arc::new(CnlsTerm {
        norm: Norm::Inf,
        b: CNLS_B1,
        offset: 0.0,
    });
    let f2 = Arc::new(CnlsTerm {
        norm: Norm::One,
        b: CNLS_B2,
        offset: 0.8,
    });
    let domain = BoxSet::cube(2, -1.0, 2.5);
    let problem =
        ConstrainedProblem::new("cnls", f1, f2, domain.clone(), false).expect("dims agree");
    let u_box = BoxSet::new(vec![-2.0, -3.5], vec![1.5, 5.0]).expect("ordered");
    let map = HiddenMap::new(
        Arc::new(cnls_map),
        Arc::new(cnls_inverse),
        Arc::new(NormTerm {
            norm: Norm::Inf,
            b: CNLS_B1.to_vec(),
            offset: 0.0,
        }),
        Arc::new(NormTerm {
            norm: Norm::One,
            b: CNLS_B2.to_vec(),
            offset: 0.8,
        }),
        u_box.clone(),
    )
    .expect("dims agree");
    let meta = HiddenConvexMeta {
        mu_c: std::f64::consts::SQRT_2 - 1.0,
        d_u: u_box.diameter(),
        d_x: domain.diameter(),
        rho: 2.0,
        g_bound: 10f64.sqrt(),
        l_smooth: None,
        // F2 reaches −0.8 at c(x) = b2, i.e. x = (0.5, 0.6).
        theta_slater: Some(0.8),
        mu_h: None,
        f1_lower: Some(0.0),
        f1_upper: Some(5.0),
        f2_lower: Some(-0.8),
    };
    Instance {
        problem,
        meta,
        map: Some(map),
        x0: vec![2.4, -0.9],
        known: Some(KnownOptimum {
            x_star: vec![0.85, 0.85],
            f1_star: 0.15,
            lambda_star: Some(0.5),
        }),
    }
}

/// Problem constants as stated for CNLS in the literature
/// (`μ_c = 4`, `ρ = 2`, `G = 2`). `μ_c = 4` is inconsistent with the map,
/// which [`make_cnls`] corrects; this record is kept for schedule
/// comparisons only.
pub fn cnls_stated_meta() -> HiddenConvexMeta {
    HiddenConvexMeta {
        mu_c: 4.0,
        rho: 2.0,
        g_bound: 2.0,
        ..make_cnls().meta
    }
}

/// Spectral-norm bound of the CGP-2D Hessians over `[0.4, 3]²`.
///
/// The objective Hessian `[[8/x1³, 1], [1, 2/x2³]]` has its largest
/// eigenvalue at the vertex `(0.4, 0.4)`.
pub const CGP2D_L: f64 = 125.0107;

/// Geometric program on `[0.4, 3]²`: `F1 = x1x2 + 4/x1 + 1/x2`,
/// `F2 = x1x2 − 1`, hidden convex under `c(x) = log x`.
pub fn make_cgp2d() -> Instance {
    let obj = Posynomial::new(
        2,
        vec![
            (1.0, vec![1.0, 1.0]),
            (4.0, vec![-1.0, 0.0]),
            (1.0, vec![0.0, -1.0]),
        ],
    )
    .expect("valid posynomial");
    let con = Posynomial::new(2, vec![(1.0, vec![1.0, 1.0])]).expect("valid posynomial");
    let (lo, hi) = (0.4, 3.0);
    let domain = BoxSet::cube(2, lo, hi);
    let meta = HiddenConvexMeta {
        mu_c: 1.0 / hi,
        d_u: 2f64.sqrt() * (hi / lo).ln(),
        d_x: domain.diameter(),
        rho: 1.0,
        // ‖∇F1(0.4, 0.4)‖.
        g_bound: 25.286,
        l_smooth: Some(CGP2D_L),
        theta_slater: Some(1.0 - lo * lo),
        mu_h: None,
        // AM–GM on the three terms: F1 ≥ 3·4^{1/3}.
        f1_lower: Some(3.0 * 4f64.cbrt()),
        f1_upper: Some(lo * lo + 4.0 / lo + 1.0 / lo),
        f2_lower: Some(lo * lo - 1.0),
    };
    let mut inst = log_instance("cgp2d", obj, con, 1.0, domain, meta, vec![3.0, 3.0]);
    inst.known = Some(KnownOptimum {
        x_star: vec![2.0, 0.5],
        f1_star: 5.0,
        lambda_star: Some(1.0),
    });
    inst
}

/// Posynomial program `min P1 s.t. P2 − rhs ≤ 0` with the log map.
fn log_instance(
    name: &str,
    obj: Posynomial,
    con: Posynomial,
    rhs: f64,
    domain: BoxSet,
    meta: HiddenConvexMeta,
    x0: Vec<f64>,
) -> Instance {
    let f1 = Arc::new(PosynomialFunction {
        poly: obj.clone(),
        offset: 0.0,
    });
    let f2 = Arc::new(PosynomialFunction {
        poly: con.clone(),
        offset: rhs,
    });
    let problem = ConstrainedProblem::new(name, f1, f2, domain.clone(), true).expect("dims agree");
    let u_box = BoxSet::new(
        domain.lower().iter().map(|v| v.ln()).collect(),
        domain.upper().iter().map(|v| v.ln()).collect(),
    )
    .expect("ordered");
    let map = HiddenMap::new(
        Arc::new(|x: &[f64]| x.iter().map(|v| v.ln()).collect()),
        Arc::new(|u: &[f64]| u.iter().map(|v| v.exp()).collect()),
        Arc::new(LogPosynomialFunction {
            poly: obj,
            offset: 0.0,
        }),
        Arc::new(LogPosynomialFunction {
            poly: con,
            offset: rhs,
        }),
        u_box,
    )
    .expect("dims agree");
    Instance {
        problem,
        meta,
        map: Some(map),
        x0,
        known: None,
    }
}

/// Random posynomial program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomCgpSpec {
    pub seed: u64,
    pub dim: usize,
    pub k1: usize,
    pub k2: usize,
    /// Exponents are uniform on this interval.
    pub exponent_range: (f64, f64),
    /// `X = [lo, hi]^dim`, `0 < lo < 1 < hi`.
    pub x_box: (f64, f64),
    /// Coefficients are `exp(σZ)`, `Z` standard normal.
    pub sigma: f64,
}

impl RandomCgpSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

impl Default for RandomCgpSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            dim: 100,
            k1: 10,
            k2: 8,
            exponent_range: (-0.5, 0.5),
            x_box: (0.5, 2.0),
            sigma: 0.5,
        }
    }
}

/// Draws the objective terms and then the constraint terms. Each term takes
/// `dim` exponents followed by one coefficient from a single SplitMix64
/// stream seeded with `spec.seed`. Constraint coefficients are then divided
/// by their sum, so `F2(1) = 0`.
pub fn random_cgp_terms(spec: &RandomCgpSpec) -> Result<(Posynomial, Posynomial)> {
    let (elo, ehi) = spec.exponent_range;
    let (xlo, xhi) = spec.x_box;
    if spec.dim == 0 || spec.k1 == 0 || spec.k2 == 0 || !(elo <= ehi) || !(0.0 < xlo && xlo < xhi) {
        return Err(Error::InvalidArgument(format!(
            "invalid random CGP spec {spec:?}"
        )));
    }
    let mut rng = SplitMix64::new(spec.seed);
    let mut draw = |k: usize| -> Vec<(f64, Vec<f64>)> {
        (0..k)
            .map(|_| {
                let a: Vec<f64> = (0..spec.dim).map(|_| rng.uniform_in(elo, ehi)).collect();
                (rng.lognormal(spec.sigma), a)
            })
            .collect()
    };
    let obj = draw(spec.k1);
    let mut con = draw(spec.k2);
    let total: f64 = con.iter().map(|(b, _)| b).sum();
    for (b, _) in &mut con {
        *b /= total;
    }
    Ok((
        Posynomial::new(spec.dim, obj)?,
        Posynomial::new(spec.dim, con)?,
    ))
}

struct CurvatureBounds {
    g: f64,
    l: f64,
    rho: f64,
}

/// Bounds over `[lo, hi]^d` with `lo ≤ 1 ≤ hi`, term by term. For a
/// monomial `m` with exponents `a`: `|∇m| ≤ M|a|/lo` and
/// `∇²m = m (aaᵀ − diag a)/(x xᵀ)`, so `‖∇²m‖ ≤ M(|a|² + |a|_∞)/lo²` and its
/// negative curvature is at most `M|a|_∞/lo²`, where `M` is the monomial's
/// maximum over the box.
fn curvature_bounds(p: &Posynomial, lo: f64, hi: f64) -> CurvatureBounds {
    let maxima = p.monomial_maxima(lo, hi);
    let mut out = CurvatureBounds {
        g: 0.0,
        l: 0.0,
        rho: 0.0,
    };
    for (m, (_, a)) in maxima.iter().zip(p.terms()) {
        let n2: f64 = a.iter().map(|v| v * v).sum();
        let amax = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        out.g += m * n2.sqrt() / lo;
        out.l += m * (n2 + amax) / (lo * lo);
        out.rho += m * amax / (lo * lo);
    }
    out
}

/// Seeded high-dimensional posynomial program started from `x0 = 1`.
pub fn make_random_cgp(spec: &RandomCgpSpec) -> Result<Instance> {
    let (obj, con) = random_cgp_terms(spec)?;
    let (lo, hi) = spec.x_box;
    let domain = BoxSet::cube(spec.dim, lo, hi);
    let (b1, b2) = (
        curvature_bounds(&obj, lo, hi),
        curvature_bounds(&con, lo, hi),
    );
    let sum = |v: Vec<f64>| v.iter().sum::<f64>();
    let meta = HiddenConvexMeta {
        mu_c: 1.0 / hi,
        d_u: (spec.dim as f64).sqrt() * (hi / lo).ln(),
        d_x: domain.diameter(),
        rho: b1.rho.max(b2.rho),
        g_bound: b1.g.max(b2.g),
        l_smooth: Some(b1.l.max(b2.l)),
        theta_slater: None,
        mu_h: None,
        f1_lower: Some(sum(obj.monomial_minima(lo, hi))),
        f1_upper: Some(sum(obj.monomial_maxima(lo, hi))),
        f2_lower: Some(sum(con.monomial_minima(lo, hi)) - 1.0),
    };
    let name = format!("cgp-rand-{}", spec.seed);
    Ok(log_instance(
        &name,
        obj,
        con,
        1.0,
        domain,
        meta,
        vec![1.0; spec.dim],
    ))
}

/// `F1(x) = 1 − cos(πx)` on `[−0.95, 0.95]` with `F2 ≡ 0`: hidden convex
/// under `c(x) = sin(πx/2)` with `H1(u) = 2u²`. Used to show that
/// unshifted level steps overshoot on non-convex objectives.
pub fn make_cosine_demo() -> Instance {
    let r = 0.95;
    let f1 = Arc::new(FnFunction::new(
        1,
        |x: &[f64]| 1.0 - (PI * x[0]).cos(),
        |x: &[f64]| vec![PI * (PI * x[0]).sin()],
    ));
    let f2 = Arc::new(FnFunction::new(1, |_: &[f64]| 0.0, |_: &[f64]| vec![0.0]));
    let domain = BoxSet::cube(1, -r, r);
    let problem =
        ConstrainedProblem::new("cosine", f1, f2, domain.clone(), true).expect("dims agree");
    let s = (PI * r / 2.0).sin();
    let map = HiddenMap::new(
        Arc::new(|x: &[f64]| vec![(PI * x[0] / 2.0).sin()]),
        Arc::new(|u: &[f64]| vec![2.0 * u[0].asin() / PI]),
        Arc::new(FnFunction::new(
            1,
            |u: &[f64]| 2.0 * u[0] * u[0],
            |u: &[f64]| vec![4.0 * u[0]],
        )),
        Arc::new(FnFunction::new(1, |_: &[f64]| 0.0, |_: &[f64]| vec![0.0])),
        BoxSet::cube(1, -s, s),
    )
    .expect("dims agree");
    let meta = HiddenConvexMeta {
        mu_c: PI / 2.0 * (PI * r / 2.0).cos(),
        d_u: 2.0 * s,
        d_x: 2.0 * r,
        rho: PI * PI,
        g_bound: PI,
        l_smooth: Some(PI * PI),
        theta_slater: None,
        mu_h: Some(4.0),
        f1_lower: Some(0.0),
        f1_upper: Some(1.0 - (PI * r).cos()),
        f2_lower: Some(0.0),
    };
    Instance {
        problem,
        meta,
        map: Some(map),
        x0: vec![0.891],
        known: Some(KnownOptimum {
            x_star: vec![0.0],
            f1_star: 0.0,
            lambda_star: Some(0.0),
        }),
    }
}

/// `max_i max{F_i, −F_i}` for equality constraints `F_i = 0`.
///
/// Branch `2i` is `+F_i` and branch `2i + 1` is `−F_i`; the sub-gradient is
/// taken from the lowest-index branch attaining the max.
pub struct EqualityConstraint {
    components: Vec<Arc<dyn Function>>,
}

impl EqualityConstraint {
    fn eval(&self, x: &[f64]) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, c) in self.components.iter().enumerate() {
            let v = c.value(x);
            for (k, bv) in [(2 * i, v), (2 * i + 1, -v)] {
                if bv > best.0 {
                    best = (bv, k);
                }
            }
        }
        best
    }
}

impl Function for EqualityConstraint {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).0
    }
    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        self.value_and_subgradient(x).1
    }
    fn value_and_subgradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (v, branch) = self.eval(x);
        let mut g = self.components[branch / 2].subgradient(x);
        if branch % 2 == 1 {
            g.iter_mut().for_each(|gi| *gi = -*gi);
        }
        (v, g)
    }
}

pub fn equality_to_inequality(components: Vec<Arc<dyn Function>>) -> Result<EqualityConstraint> {
    let Some(first) = components.first() else {
        return Err(Error::InvalidArgument(
            "at least one equality component is required".into(),
        ));
    };
    let d = first.dim();
    if let Some(c) = components.iter().find(|c| c.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: c.dim(),
        });
    }
    Ok(EqualityConstraint { components })
}
