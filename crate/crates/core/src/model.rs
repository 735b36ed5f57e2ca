//! Problem model shared by every solver: oracles, call accounting, problem
//! constants, penalty/value functions and run traces.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::BoxSet;
use crate::linalg::pos;

/// A real function on `R^dim` with a (sub-)gradient oracle.
///
/// At non-differentiable points implementations return one fixed element of
/// the Clarke sub-differential, choosing the lowest-index active piece on ties.
pub trait Function: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn subgradient(&self, x: &[f64]) -> Vec<f64>;

    fn value_and_subgradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.value(x), self.subgradient(x))
    }
}

/// A [`Function`] built from two closures.
pub struct FnFunction<V, G> {
    dim: usize,
    value: V,
    grad: G,
}

impl<V, G> FnFunction<V, G>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(dim: usize, value: V, grad: G) -> Self {
        Self { dim, value, grad }
    }
}

impl<V, G> Function for FnFunction<V, G>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        (self.grad)(x)
    }
}

/// Solver-facing oracle. `first_order` returns the value together with a
/// sub-gradient and is the unit charged against an oracle budget.
pub trait Oracle {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn first_order(&self, x: &[f64]) -> (f64, Vec<f64>);

    /// Whether `calls` more first-order calls fit in the remaining budget.
    fn can_afford(&self, _calls: u64) -> bool {
        true
    }
}

impl<F: Function + ?Sized> Oracle for F {
    fn dim(&self) -> usize {
        Function::dim(self)
    }
    fn value(&self, x: &[f64]) -> f64 {
        Function::value(self, x)
    }
    fn first_order(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.value_and_subgradient(x)
    }
}

/// Oracle call accounting.
///
/// One first-order call is one `(value, sub-gradient)` query of F1 or F2.
/// Value-only queries are tallied separately and are not charged against
/// the budget. QP solves are never counted.
#[derive(Debug)]
pub struct OracleCounter {
    value_calls: AtomicU64,
    first_order_calls: AtomicU64,
    budget: AtomicU64,
}

impl Default for OracleCounter {
    fn default() -> Self {
        Self {
            value_calls: AtomicU64::new(0),
            first_order_calls: AtomicU64::new(0),
            budget: AtomicU64::new(u64::MAX),
        }
    }
}

impl OracleCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value_calls(&self) -> u64 {
        self.value_calls.load(Ordering::Relaxed)
    }

    pub fn first_order_calls(&self) -> u64 {
        self.first_order_calls.load(Ordering::Relaxed)
    }

    pub fn budget(&self) -> Option<u64> {
        match self.budget.load(Ordering::Relaxed) {
            u64::MAX => None,
            b => Some(b),
        }
    }

    pub fn set_budget(&self, budget: Option<u64>) {
        self.budget
            .store(budget.unwrap_or(u64::MAX), Ordering::Relaxed);
    }

    pub fn remaining(&self) -> u64 {
        self.budget
            .load(Ordering::Relaxed)
            .saturating_sub(self.first_order_calls())
    }

    pub fn can_afford(&self, calls: u64) -> bool {
        self.remaining() >= calls
    }

    pub fn reset(&self) {
        self.value_calls.store(0, Ordering::Relaxed);
        self.first_order_calls.store(0, Ordering::Relaxed);
    }

    fn charge_value(&self) {
        self.value_calls.fetch_add(1, Ordering::Relaxed);
    }

    fn charge_first_order(&self) {
        self.first_order_calls.fetch_add(1, Ordering::Relaxed);
    }
}

/// A function routed through a problem's counter.
#[derive(Clone, Copy)]
pub struct CountedFunction<'a> {
    f: &'a dyn Function,
    counter: &'a OracleCounter,
}

impl Oracle for CountedFunction<'_> {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.counter.charge_value();
        self.f.value(x)
    }
    fn first_order(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.counter.charge_first_order();
        self.f.value_and_subgradient(x)
    }
    fn can_afford(&self, calls: u64) -> bool {
        self.counter.can_afford(calls)
    }
}

/// `min F1(x) s.t. F2(x) <= 0, x in domain`.
#[derive(Clone)]
pub struct ConstrainedProblem {
    name: String,
    objective: Arc<dyn Function>,
    constraint: Arc<dyn Function>,
    domain: BoxSet,
    smooth: bool,
    counter: Arc<OracleCounter>,
}

impl fmt::Debug for ConstrainedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstrainedProblem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("smooth", &self.smooth)
            .field("counter", &self.counter)
            .finish()
    }
}

impl ConstrainedProblem {
    pub fn new(
        name: impl Into<String>,
        objective: Arc<dyn Function>,
        constraint: Arc<dyn Function>,
        domain: BoxSet,
        smooth: bool,
    ) -> Result<Self> {
        let dim = domain.dim();
        for got in [objective.dim(), constraint.dim()] {
            if got != dim {
                return Err(Error::DimensionMismatch { expected: dim, got });
            }
        }
        Ok(Self {
            name: name.into(),
            objective,
            constraint,
            domain,
            smooth,
            counter: Arc::new(OracleCounter::new()),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxSet {
        &self.domain
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn counter(&self) -> &OracleCounter {
        &self.counter
    }

    /// A copy sharing the oracles but with its own zeroed counter.
    pub fn with_fresh_counter(&self) -> Self {
        Self {
            counter: Arc::new(OracleCounter::new()),
            ..self.clone()
        }
    }

    pub fn objective(&self) -> CountedFunction<'_> {
        CountedFunction {
            f: self.objective.as_ref(),
            counter: &self.counter,
        }
    }

    pub fn constraint(&self) -> CountedFunction<'_> {
        CountedFunction {
            f: self.constraint.as_ref(),
            counter: &self.counter,
        }
    }

    pub fn raw_objective(&self) -> &Arc<dyn Function> {
        &self.objective
    }

    pub fn raw_constraint(&self) -> &Arc<dyn Function> {
        &self.constraint
    }

    pub fn f1_value(&self, x: &[f64]) -> f64 {
        self.objective().value(x)
    }

    pub fn f2_value(&self, x: &[f64]) -> f64 {
        self.constraint().value(x)
    }

    /// `(F1(x), F2(x))` without touching the counter. Used for traces and
    /// reporting only; solvers must go through the counted oracles.
    pub fn inspect(&self, x: &[f64]) -> (f64, f64) {
        (self.objective.value(x), self.constraint.value(x))
    }
}

/// `F1(x) + lambda * max{F2(x), 0}`; charges two value calls.
pub fn exact_penalty(problem: &ConstrainedProblem, x: &[f64], lambda: f64) -> f64 {
    let f1 = problem.f1_value(x);
    let f2 = problem.f2_value(x);
    f1 + lambda * pos(f2)
}

/// `max{F1(x) - eta, F2(x)}`; charges two value calls.
pub fn value_function(problem: &ConstrainedProblem, x: &[f64], eta: f64) -> f64 {
    let f1 = problem.f1_value(x);
    let f2 = problem.f2_value(x);
    (f1 - eta).max(f2)
}

/// Problem constants feeding the parameter schedules.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HiddenConvexMeta {
    /// Lower Lipschitz constant of the hidden map, `|c(x) - c(y)| >= mu_c |x - y|`.
    pub mu_c: f64,
    /// Diameter of the image domain U.
    pub d_u: f64,
    /// Diameter of X.
    pub d_x: f64,
    /// Weak convexity modulus.
    pub rho: f64,
    /// Sub-gradient norm bound.
    pub g_bound: f64,
    /// Gradient Lipschitz constant, smooth problems only.
    pub l_smooth: Option<f64>,
    pub theta_slater: Option<f64>,
    pub mu_h: Option<f64>,
    pub f1_lower: Option<f64>,
    pub f1_upper: Option<f64>,
    pub f2_lower: Option<f64>,
}

impl HiddenConvexMeta {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_c > 0.0) || !(self.d_u > 0.0) {
            return Err(Error::InvalidArgument(
                "mu_c and d_u must be positive".into(),
            ));
        }
        if !(self.rho >= 0.0) || !(self.g_bound > 0.0) {
            return Err(Error::InvalidArgument(
                "rho must be >= 0 and g_bound > 0".into(),
            ));
        }
        if let (Some(lo), Some(hi)) = (self.f1_lower, self.f1_upper) {
            if lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "f1_lower {lo} > f1_upper {hi}"
                )));
            }
        }
        Ok(())
    }

    pub fn require_smooth(&self) -> Result<f64> {
        self.l_smooth
            .filter(|l| *l > 0.0)
            .ok_or(Error::NonSmoothProblem)
    }

    /// `mu_c^2 / D_U^2`, the ratio every schedule is built from.
    pub fn geometry_ratio(&self) -> f64 {
        self.mu_c * self.mu_c / (self.d_u * self.d_u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IterKind {
    Outer,
    Inner,
}

impl fmt::Display for IterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IterKind::Outer => "outer",
            IterKind::Inner => "inner",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub oracle_calls: u64,
    pub f1: f64,
    pub f2: f64,
    pub penalty: f64,
    pub eta: Option<f64>,
    pub iter_kind: IterKind,
}

/// Per-iterate history of a run; `oracle_calls` is strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    lambda: f64,
    records: Vec<TraceRecord>,
}

impl Trace {
    /// `lambda` weights the penalty column.
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            records: Vec::new(),
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record `x` at the problem's current call count. A record taken
    /// without any new oracle calls replaces the previous one.
    pub fn record(
        &mut self,
        problem: &ConstrainedProblem,
        x: &[f64],
        eta: Option<f64>,
        iter_kind: IterKind,
    ) {
        let (f1, f2) = problem.inspect(x);
        let rec = TraceRecord {
            oracle_calls: problem.counter().first_order_calls(),
            f1,
            f2,
            penalty: f1 + self.lambda * pos(f2),
            eta,
            iter_kind,
        };
        match self.records.last_mut() {
            Some(last) if last.oracle_calls >= rec.oracle_calls => *last = rec,
            _ => self.records.push(rec),
        }
    }

    /// First call count at which `f1 - f1_star <= tol_gap` and `f2 <= tol_f2`.
    pub fn calls_to_tolerance(&self, f1_star: f64, tol_gap: f64, tol_f2: f64) -> Option<u64> {
        self.records
            .iter()
            .find(|r| r.f1 - f1_star <= tol_gap && r.f2 <= tol_f2)
            .map(|r| r.oracle_calls)
    }
}

/// Outcome of a full solver pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub method: String,
    pub x: Vec<f64>,
    pub f1: f64,
    pub f2: f64,
    pub first_order_calls: u64,
    pub value_calls: u64,
    pub trace: Trace,
    /// Every effective parameter, including derived schedule values.
    pub params: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl SolveReport {
    pub(crate) fn finish(
        method: &str,
        problem: &ConstrainedProblem,
        x: Vec<f64>,
        trace: Trace,
        params: BTreeMap<String, f64>,
        notes: Vec<String>,
    ) -> Self {
        let (f1, f2) = problem.inspect(&x);
        Self {
            method: method.to_string(),
            x,
            f1,
            f2,
            first_order_calls: problem.counter().first_order_calls(),
            value_calls: problem.counter().value_calls(),
            trace,
            params,
            notes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_problem() -> ConstrainedProblem {
        let f1 = Arc::new(FnFunction::new(
            2,
            |x: &[f64]| x[0] * x[0] + x[1] * x[1],
            |x: &[f64]| vec![2.0 * x[0], 2.0 * x[1]],
        ));
        let f2 = Arc::new(FnFunction::new(
            2,
            |x: &[f64]| x[0] - 1.0,
            |_: &[f64]| vec![1.0, 0.0],
        ));
        ConstrainedProblem::new("quad", f1, f2, BoxSet::cube(2, -2.0, 2.0), true).unwrap()
    }

    #[test]
    fn penalty_with_zero_lambda_is_objective() {
        let p = quadratic_problem();
        assert_eq!(exact_penalty(&p, &[1.5, 0.0], 0.0), 2.25);
        assert_eq!(p.counter().value_calls(), 2);
        assert_eq!(p.counter().first_order_calls(), 0);
    }

    #[test]
    fn penalty_adds_positive_part_only() {
        let p = quadratic_problem();
        assert_eq!(exact_penalty(&p, &[1.5, 0.0], 2.0), 2.25 + 1.0);
        assert_eq!(exact_penalty(&p, &[0.5, 0.0], 2.0), 0.25);
    }

    #[test]
    fn value_function_takes_max() {
        let p = quadratic_problem();
        assert_eq!(value_function(&p, &[1.0, 0.0], 1.0), 0.0);
        assert_eq!(value_function(&p, &[1.0, 0.0], -1e6), 1.0 + 1e6);
    }

    #[test]
    fn budget_accounting() {
        let p = quadratic_problem();
        p.counter().set_budget(Some(3));
        let f = p.objective();
        assert!(f.can_afford(3));
        f.first_order(&[0.0, 0.0]);
        f.value(&[0.0, 0.0]);
        assert_eq!(p.counter().remaining(), 2);
        assert!(!f.can_afford(3));
        let q = p.with_fresh_counter();
        assert_eq!(q.counter().first_order_calls(), 0);
        assert_eq!(q.counter().budget(), None);
    }

    #[test]
    fn trace_keeps_calls_strictly_increasing() {
        let p = quadratic_problem();
        let mut t = Trace::new(1.0);
        t.record(&p, &[0.0, 0.0], None, IterKind::Outer);
        t.record(&p, &[1.0, 0.0], None, IterKind::Outer);
        assert_eq!(t.len(), 1);
        assert_eq!(t.last().unwrap().f1, 1.0);
        p.objective().first_order(&[0.0, 0.0]);
        t.record(&p, &[2.0, 0.0], Some(0.5), IterKind::Inner);
        assert_eq!(t.len(), 2);
        assert_eq!(t.last().unwrap().penalty, 4.0 + 1.0);
        assert_eq!(t.calls_to_tolerance(0.0, 1.5, 0.0), Some(0));
    }

    #[test]
    fn meta_validation() {
        let mut m = HiddenConvexMeta {
            mu_c: 1.0,
            d_u: 1.0,
            d_x: 1.0,
            rho: 1.0,
            g_bound: 1.0,
            l_smooth: None,
            theta_slater: None,
            mu_h: None,
            f1_lower: Some(1.0),
            f1_upper: Some(0.0),
            f2_lower: None,
        };
        assert!(m.validate().is_err());
        m.f1_upper = Some(2.0);
        assert!(m.validate().is_ok());
        assert_eq!(m.require_smooth(), Err(Error::NonSmoothProblem));
    }
}
