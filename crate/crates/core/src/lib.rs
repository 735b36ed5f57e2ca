//! First-order methods for constrained problems that are convex after a
//! hidden change of variables `u = c(x)`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acgd;
pub mod bundle;
pub mod error;
pub mod geometry;
pub mod ippm;
pub mod linalg;
pub mod model;
pub mod problems;
pub mod subgrad;

pub use error::{Error, Result};
pub use geometry::{BoxSet, Halfspace};
pub use model::*;
