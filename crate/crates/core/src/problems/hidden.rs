//! Hidden change of variables `u = c(x)` with the convex pair `(H1, H2)`, and
//! sampling checks of the properties it implies for `F_i = H_i ∘ c`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::BoxSet;
use crate::linalg::{dist, lerp, norm};
use crate::model::{ConstrainedProblem, Function};

use super::rng::SplitMix64;

pub type VectorMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub struct HiddenMap {
    forward: VectorMap,
    inverse: VectorMap,
    h1: Arc<dyn Function>,
    h2: Arc<dyn Function>,
    u_box: BoxSet,
}

impl fmt::Debug for HiddenMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HiddenMap")
            .field("u_box", &self.u_box)
            .finish_non_exhaustive()
    }
}

impl HiddenMap {
    pub fn new(
        forward: VectorMap,
        inverse: VectorMap,
        h1: Arc<dyn Function>,
        h2: Arc<dyn Function>,
        u_box: BoxSet,
    ) -> Result<Self> {
        let d = u_box.dim();
        for got in [h1.dim(), h2.dim()] {
            if got != d {
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
        Ok(Self {
            forward,
            inverse,
            h1,
            h2,
            u_box,
        })
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (self.forward)(x)
    }

    pub fn inverse(&self, u: &[f64]) -> Vec<f64> {
        (self.inverse)(u)
    }

    pub fn h1(&self) -> &Arc<dyn Function> {
        &self.h1
    }

    pub fn h2(&self) -> &Arc<dyn Function> {
        &self.h2
    }

    pub fn u_box(&self) -> &BoxSet {
        &self.u_box
    }

    /// `x_α = c⁻¹((1 − α)c(x) + αc(y))`.
    pub fn interpolate(&self, x: &[f64], y: &[f64], alpha: f64) -> Vec<f64> {
        self.inverse(&lerp(&self.forward(x), &self.forward(y), alpha))
    }
}

/// Worst observed violations; every field should be at most the tolerance.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct HiddenConvexityReport {
    pub samples: usize,
    /// `max F_i(x_α) − (1 − α)F_i(x) − αF_i(y)` for `i = 1, 2`.
    pub functional: [f64; 2],
    /// `max ‖x_α − x‖ − (α/μ_c)‖c(x) − c(y)‖`.
    pub norm: f64,
    /// `max μ_c‖x − y‖ − ‖c(x) − c(y)‖`.
    pub lower_lipschitz: f64,
    /// `max ‖c⁻¹(c(x)) − x‖`.
    pub round_trip: f64,
    /// `max |F_i(x) − H_i(c(x))|`.
    pub composition: f64,
}

impl HiddenConvexityReport {
    pub fn worst(&self) -> f64 {
        [
            self.functional[0],
            self.functional[1],
            self.norm,
            self.lower_lipschitz,
        ]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn passes(&self, tol: f64, round_trip_tol: f64) -> bool {
        self.worst() <= tol
            && self.round_trip <= round_trip_tol
            && self.composition <= round_trip_tol
    }
}

fn sample_box(rng: &mut SplitMix64, set: &BoxSet) -> Vec<f64> {
    set.lower()
        .iter()
        .zip(set.upper())
        .map(|(l, u)| rng.uniform_in(*l, *u))
        .collect()
}

/// Samples `(x, y, α)` uniformly from `X × X × [0, 1]` and records the worst
/// violation of each hidden-convexity inequality. Uses the raw, uncounted
/// problem functions.
pub fn check_hidden_convexity(
    problem: &ConstrainedProblem,
    map: &HiddenMap,
    mu_c: f64,
    samples: usize,
    seed: u64,
) -> HiddenConvexityReport {
    let mut rng = SplitMix64::new(seed);
    let set = problem.domain();
    let fs = [problem.raw_objective(), problem.raw_constraint()];
    let hs = [map.h1(), map.h2()];
    let mut rep = HiddenConvexityReport {
        samples,
        functional: [f64::NEG_INFINITY; 2],
        norm: f64::NEG_INFINITY,
        lower_lipschitz: f64::NEG_INFINITY,
        round_trip: 0.0,
        composition: 0.0,
    };
    for _ in 0..samples {
        let x = sample_box(&mut rng, set);
        let y = sample_box(&mut rng, set);
        let alpha = rng.uniform();
        let (cx, cy) = (map.forward(&x), map.forward(&y));
        let xa = map.inverse(&lerp(&cx, &cy, alpha));
        for i in 0..2 {
            let (fx, fy, fa) = (fs[i].value(&x), fs[i].value(&y), fs[i].value(&xa));
            rep.functional[i] = rep.functional[i].max(fa - (1.0 - alpha) * fx - alpha * fy);
            rep.composition = rep.composition.max((fx - hs[i].value(&cx)).abs());
        }
        let du = dist(&cx, &cy);
        rep.norm = rep.norm.max(dist(&xa, &x) - alpha / mu_c * du);
        rep.lower_lipschitz = rep.lower_lipschitz.max(mu_c * dist(&x, &y) - du);
        rep.round_trip = rep.round_trip.max(dist(&map.inverse(&cx), &x));
    }
    rep
}

/// Largest `|⟨∇f(x), e⟩ − (f(x + he) − f(x − he))/2h| / max(1, |⟨∇f(x), e⟩|)`
/// over `points` random interior points and unit directions.
pub fn finite_difference_error(
    f: &dyn Function,
    set: &BoxSet,
    points: usize,
    h: f64,
    seed: u64,
) -> f64 {
    let mut rng = SplitMix64::new(seed);
    let margin = 10.0 * h;
    let inner = BoxSet::new(
        set.lower().iter().map(|l| l + margin).collect(),
        set.upper().iter().map(|u| u - margin).collect(),
    )
    .expect("box wider than the finite-difference margin");
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let x = sample_box(&mut rng, &inner);
        let mut e: Vec<f64> = (0..x.len()).map(|_| rng.standard_normal()).collect();
        let n = norm(&e);
        e.iter_mut().for_each(|v| *v /= n);
        let g = f.subgradient(&x);
        let analytic: f64 = g.iter().zip(&e).map(|(a, b)| a * b).sum();
        let xp: Vec<f64> = x.iter().zip(&e).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&e).map(|(a, b)| a - h * b).collect();
        let numeric = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(1.0));
    }
    worst
}
