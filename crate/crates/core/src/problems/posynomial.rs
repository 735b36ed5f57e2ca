//! Posynomials `Σ_k b_k Π_i x_i^{a_ik}` on the positive orthant and their
//! log-domain counterparts `Σ_k b_k exp(⟨a_k, u⟩)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Function;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posynomial {
    dim: usize,
    coefs: Vec<f64>,
    exponents: Vec<Vec<f64>>,
}

impl Posynomial {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let mut coefs = Vec::with_capacity(terms.len());
        let mut exponents = Vec::with_capacity(terms.len());
        for (b, a) in terms {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "posynomial coefficient {b} is not positive"
                )));
            }
            if a.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.len(),
                });
            }
            coefs.push(b);
            exponents.push(a);
        }
        Ok(Self {
            dim,
            coefs,
            exponents,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.coefs
            .iter()
            .copied()
            .zip(self.exponents.iter().map(|a| a.as_slice()))
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefs
    }

    /// Monomial values `b_k exp(⟨a_k, u⟩)` at `u = log x`.
    fn monomials_log(&self, u: &[f64]) -> Vec<f64> {
        self.coefs
            .iter()
            .zip(&self.exponents)
            .map(|(b, a)| b * a.iter().zip(u).map(|(ai, ui)| ai * ui).sum::<f64>().exp())
            .collect()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let u: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        self.monomials_log(&u).iter().sum()
    }

    pub fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let u: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let (val, mut g) = self.log_value_and_gradient(&u);
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi /= xi;
        }
        (val, g)
    }

    pub fn log_value(&self, u: &[f64]) -> f64 {
        self.monomials_log(u).iter().sum()
    }

    /// Value and gradient of `u ↦ Σ b_k exp(⟨a_k, u⟩)`.
    pub fn log_value_and_gradient(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let m = self.monomials_log(u);
        let mut g = vec![0.0; self.dim];
        for (mk, a) in m.iter().zip(&self.exponents) {
            for (gi, ai) in g.iter_mut().zip(a) {
                *gi += mk * ai;
            }
        }
        (m.iter().sum(), g)
    }

    /// Largest value of each monomial over `[lo, hi]^d` (`0 < lo ≤ hi`).
    pub fn monomial_maxima(&self, lo: f64, hi: f64) -> Vec<f64> {
        let (l, h) = (lo.ln(), hi.ln());
        self.terms()
            .map(|(b, a)| b * a.iter().map(|ai| (ai * l).max(ai * h)).sum::<f64>().exp())
            .collect()
    }

    /// Smallest value of each monomial over `[lo, hi]^d`.
    pub fn monomial_minima(&self, lo: f64, hi: f64) -> Vec<f64> {
        let (l, h) = (lo.ln(), hi.ln());
        self.terms()
            .map(|(b, a)| b * a.iter().map(|ai| (ai * l).min(ai * h)).sum::<f64>().exp())
            .collect()
    }
}

/// `x ↦ P(x) − offset`.
#[derive(Debug, Clone)]
pub struct PosynomialFunction {
    pub poly: Posynomial,
    pub offset: f64,
}

impl Function for PosynomialFunction {
    fn dim(&self) -> usize {
        self.poly.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.poly.value(x) - self.offset
    }
    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        self.poly.value_and_gradient(x).1
    }
    fn value_and_subgradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (v, g) = self.poly.value_and_gradient(x);
        (v - self.offset, g)
    }
}

/// `u ↦ Σ b_k exp(⟨a_k, u⟩) − offset`, convex.
#[derive(Debug, Clone)]
pub struct LogPosynomialFunction {
    pub poly: Posynomial,
    pub offset: f64,
}

impl Function for LogPosynomialFunction {
    fn dim(&self) -> usize {
        self.poly.dim()
    }
    fn value(&self, u: &[f64]) -> f64 {
        self.poly.log_value(u) - self.offset
    }
    fn subgradient(&self, u: &[f64]) -> Vec<f64> {
        self.poly.log_value_and_gradient(u).1
    }
    fn value_and_subgradient(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let (v, g) = self.poly.log_value_and_gradient(u);
        (v - self.offset, g)
    }
}
