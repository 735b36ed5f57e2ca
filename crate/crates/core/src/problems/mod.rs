//! Benchmark problems, their hidden maps and reference oracles.

pub mod hidden;
pub mod oracles;
pub mod posynomial;
pub mod rng;
pub mod zoo;

use serde::{Deserialize, Serialize};

use crate::model::{ConstrainedProblem, HiddenConvexMeta};

pub use hidden::{
    check_hidden_convexity, finite_difference_error, HiddenConvexityReport, HiddenMap,
};
pub use oracles::{
    grid_minimize, grid_minimize_refined, grid_oracle, reference_convex, GridPoint,
    ReferenceSolution,
};
pub use posynomial::Posynomial;
pub use rng::SplitMix64;
pub use zoo::{
    cnls_stated_meta, equality_to_inequality, make_cgp2d, make_cnls, make_cosine_demo,
    make_random_cgp, random_cgp_terms, EqualityConstraint, RandomCgpSpec, CGP2D_L,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownOptimum {
    pub x_star: Vec<f64>,
    pub f1_star: f64,
    pub lambda_star: Option<f64>,
}

/// A problem with its constants, hidden map and default starting point.
#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: ConstrainedProblem,
    pub meta: HiddenConvexMeta,
    pub map: Option<HiddenMap>,
    pub x0: Vec<f64>,
    pub known: Option<KnownOptimum>,
}

/// A frozen reference value for a seeded random instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFixture {
    pub seed: u64,
    pub dim: usize,
    pub f1_star_ref: f64,
    pub tolerance: f64,
}

impl ReferenceFixture {
    pub fn from_json(text: &str) -> crate::Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| crate::Error::InvalidArgument(format!("bad fixture: {e}")))
    }

    /// Fixtures shipped with the crate.
    pub fn builtin() -> Vec<Self> {
        [include_str!("../../fixtures/cgp_rand_seed42.json")]
            .into_iter()
            .map(|t| Self::from_json(t).expect("builtin fixture parses"))
            .collect()
    }

    pub fn find(seed: u64, dim: usize) -> Option<Self> {
        Self::builtin()
            .into_iter()
            .find(|f| f.seed == seed && f.dim == dim)
    }
}

impl Instance {
    pub fn f1_star(&self) -> Option<f64> {
        self.known.as_ref().map(|k| k.f1_star)
    }
}
