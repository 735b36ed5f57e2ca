//! Method pipelines with the practical settings used for each problem, or
//! the theory schedules with `theory = 1`.

use std::collections::BTreeMap;
use std::time::Instant;

use hcopt::acgd::{choose_shift, AcgdSchedule};
use hcopt::bundle::{ada_ls_run, s_star_bl_with, schedule_ada_ls, schedule_star_bl, BundleConfig};
use hcopt::ippm::{
    init_feasible, ippm_run, schedule_nonsmooth, schedule_smooth, schedule_smooth_slater,
    InnerSolver, IppmConfig,
};
use hcopt::problems::{
    grid_oracle, make_cgp2d, make_cnls, make_random_cgp, reference_convex, Instance, RandomCgpSpec,
};
use hcopt::subgrad::StepRule;
use hcopt::{IterKind, SolveReport, Trace};

use crate::config::{Method, Overrides, ProblemKind, RunConfig};
use crate::error::CliError;

/// Oracle-call budget of the high-dimensional experiment.
pub const HIGHDIM_BUDGET: u64 = 1210;
/// Curvature and smoothness used by the proximal methods on random CGP
/// instances. The worst-case box constants are many orders of magnitude
/// larger and would make `ρ̂ = 0.02` inadmissible.
pub const HIGHDIM_RHO: f64 = 0.01;
pub const HIGHDIM_L: f64 = 1.0;
/// Condition number assumed by the accelerated inner solver there;
/// `(L + ρ̂)/(ρ̂ − ρ) ≈ 100` makes every inner solve fall back to its center.
pub const HIGHDIM_KAPPA: f64 = 16.0;

/// Outcome of one run with everything needed for the summary.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub problem_name: String,
    pub report: SolveReport,
    pub f1_star_ref: Option<f64>,
    pub tol_gap: f64,
    pub tol_f2: f64,
    pub wall_ms: u64,
}

impl RunOutcome {
    pub fn gap(&self) -> Option<f64> {
        self.f1_star_ref.map(|f| self.report.f1 - f)
    }

    /// `None` without a reference value.
    pub fn within_tolerance(&self) -> Option<bool> {
        self.gap()
            .map(|g| g <= self.tol_gap && self.report.f2 <= self.tol_f2)
    }
}

/// Reference value computed on first use.
#[derive(Debug, Clone)]
pub struct LazyReference {
    inst: Instance,
    eps: f64,
    value: Option<f64>,
}

impl LazyReference {
    pub fn get(&mut self) -> Result<f64, CliError> {
        if let Some(v) = self.value {
            return Ok(v);
        }
        let v = reference_convex(&self.inst, self.eps)?.f1_star_ref;
        self.value = Some(v);
        Ok(v)
    }
}

/// The solver configuration a run resolves to.
#[derive(Debug, Clone)]
pub enum Plan {
    /// `init` is `(τ, max steps)` for the feasibility phase.
    Ippm {
        init: Option<(f64, usize)>,
        cfg: IppmConfig,
    },
    StarBl {
        f1_star: f64,
        cfg: BundleConfig,
    },
    AdaLs {
        cfg: BundleConfig,
    },
    Reference {
        eps: f64,
    },
    Grid {
        res: f64,
    },
}

pub fn build_instance(cfg: &RunConfig, o: &mut Overrides<'_>) -> Result<Instance, CliError> {
    Ok(match cfg.problem {
        ProblemKind::Cnls => make_cnls(),
        ProblemKind::Cgp2d => make_cgp2d(),
        ProblemKind::CgpRand => {
            let base = RandomCgpSpec::with_seed(cfg.seed);
            let spec = RandomCgpSpec {
                dim: o.count_or("dim", base.dim),
                k1: o.count_or("k1", base.k1),
                k2: o.count_or("k2", base.k2),
                ..base
            };
            make_random_cgp(&spec)?
        }
    })
}

fn default_eps(problem: ProblemKind) -> f64 {
    match problem {
        ProblemKind::Cnls => 0.05,
        ProblemKind::Cgp2d | ProblemKind::CgpRand => 1e-2,
    }
}

fn swsg_step(o: &mut Overrides<'_>, default: StepRule) -> StepRule {
    if let Some(scale) = o.get("step_harmonic") {
        StepRule::Harmonic { scale }
    } else if let Some(mu) = o.get("step_mu") {
        StepRule::StronglyConvex { mu }
    } else {
        default
    }
}

fn apply_ippm_overrides(o: &mut Overrides<'_>, mut c: IppmConfig) -> IppmConfig {
    c.rho_hat = o.or("rho_hat", c.rho_hat);
    c.alpha = o.or("alpha", c.alpha);
    c.eps_in = o.or("eps_in", c.eps_in);
    c.n_outer = o.count_or("n_outer", c.n_outer);
    c.t_inner = o.count_or("t_inner", c.t_inner);
    c
}

fn apply_bundle_overrides(
    o: &mut Overrides<'_>,
    run: &RunConfig,
    mut c: BundleConfig,
) -> BundleConfig {
    c.alpha = o.or("alpha", c.alpha);
    c.beta = o.or("beta", c.beta);
    c.t_steps = o.count_or("t_steps", c.t_steps);
    c.n_epochs = o.count_or("n_epochs", c.n_epochs);
    c.tau = run.tau.unwrap_or(c.tau);
    c.lambda = run.lambda.unwrap_or(c.lambda);
    c.eta0 = run.eta0.unwrap_or(c.eta0);
    c
}

fn plan(
    run: &RunConfig,
    inst: &mut Instance,
    o: &mut Overrides<'_>,
    eps: f64,
    reference: &mut LazyReference,
) -> Result<Plan, CliError> {
    let theory = o.flag("theory");
    let rand = run.problem == ProblemKind::CgpRand;
    let is_ippm = matches!(run.method, Method::IppmSwsg | Method::IppmAcgd);
    if rand && is_ippm && !theory {
        inst.meta.rho = HIGHDIM_RHO;
        inst.meta.l_smooth = Some(HIGHDIM_L);
    }
    let m = &mut inst.meta;
    m.rho = o.or("meta.rho", m.rho);
    m.mu_c = o.or("meta.mu_c", m.mu_c);
    m.d_u = o.or("meta.d_u", m.d_u);
    m.g_bound = o.or("meta.g_bound", m.g_bound);
    if let Some(l) = o.get("meta.l_smooth") {
        m.l_smooth = Some(l);
    }
    m.validate()?;
    let meta = inst.meta.clone();
    let x0 = inst.x0.clone();
    let init_steps = o.count_or("init_steps", 5000);

    Ok(match run.method {
        Method::IppmSwsg => {
            let tau = run.tau.unwrap_or(if rand { 1e-3 } else { eps });
            let base = if theory {
                schedule_nonsmooth(&meta, eps, tau)?
            } else {
                let (rho_hat, n_outer, t_inner, eps_in, step) = match run.problem {
                    ProblemKind::Cnls => (2.0 * meta.rho, 100, 2000, 1e-3, None),
                    ProblemKind::Cgp2d => (2.0 * meta.rho, 50, 1000, 1e-4, None),
                    ProblemKind::CgpRand => (
                        0.02,
                        10,
                        122,
                        1e-4,
                        Some(StepRule::Harmonic { scale: 0.05 }),
                    ),
                };
                let step = step.unwrap_or(StepRule::StronglyConvex {
                    mu: rho_hat - meta.rho,
                });
                IppmConfig {
                    rho_hat,
                    tau,
                    eps,
                    eps_in,
                    n_outer,
                    t_inner,
                    alpha: 0.1,
                    inner: InnerSolver::Swsg { step },
                    trace_lambda: 1.0,
                    notes: vec![],
                }
            };
            let mut cfg = apply_ippm_overrides(o, base);
            if let InnerSolver::Swsg { step } = cfg.inner {
                cfg.inner = InnerSolver::Swsg {
                    step: swsg_step(o, step),
                };
            }
            cfg.trace_lambda = run.lambda.unwrap_or(cfg.trace_lambda);
            Plan::Ippm {
                init: Some((tau, init_steps)),
                cfg,
            }
        }
        Method::IppmAcgd => {
            let l = meta.require_smooth()?;
            let tau = run.tau.unwrap_or(if rand { 1e-3 } else { eps });
            let mut cfg = if theory {
                let c = if meta.theta_slater.is_some() {
                    schedule_smooth_slater(&meta, eps, tau)?
                } else {
                    schedule_smooth(&meta, eps, tau)?
                };
                apply_ippm_overrides(o, c)
            } else {
                let (rho_hat, n_outer, t_inner) = if rand {
                    (0.02, 10, 60)
                } else {
                    (2.0 * meta.rho, 30, 100)
                };
                let c = IppmConfig {
                    rho_hat,
                    tau,
                    eps,
                    eps_in: 1e-4,
                    n_outer,
                    t_inner,
                    alpha: 0.1,
                    inner: InnerSolver::Acgd {
                        schedule: AcgdSchedule::plain(1.0),
                        shift_b: 0.0,
                    },
                    trace_lambda: 1.0,
                    notes: vec![],
                };
                let c = apply_ippm_overrides(o, c);
                // The random instances run without an extra constraint shift.
                let shift_b = if rand {
                    -tau
                } else {
                    choose_shift(&meta, c.rho_hat, tau, eps, meta.theta_slater)
                };
                let lambda_bar = if rand { 0.0 } else { run.lambda.unwrap_or(1.0) };
                let lambda_bar = o.or("lambda_bar", lambda_bar);
                let mut schedule =
                    AcgdSchedule::strongly_convex_lagrangian(l, c.rho_hat, meta.rho, lambda_bar)?;
                let kappa = o
                    .get("kappa")
                    .or(if rand { Some(HIGHDIM_KAPPA) } else { None });
                if let Some(kappa) = kappa {
                    schedule =
                        AcgdSchedule::with_condition((l + c.rho_hat) * (1.0 + lambda_bar), kappa)?;
                }
                let mut c = IppmConfig {
                    inner: InnerSolver::Acgd { schedule, shift_b },
                    ..c
                };
                c.notes
                    .push(format!("multiplier bound lambda_bar = {lambda_bar}"));
                c
            };
            if let InnerSolver::Acgd { schedule, shift_b } = cfg.inner {
                cfg.inner = InnerSolver::Acgd {
                    schedule,
                    shift_b: o.or("shift_b", shift_b),
                };
            }
            Plan::Ippm {
                init: Some((tau, init_steps)),
                cfg,
            }
        }
        Method::SStarBl => {
            let f1_star = match o.get("f1_star") {
                Some(v) => v,
                None => reference.get()?,
            };
            let base = if theory {
                let (f1, f2) = inst.problem.inspect(&x0);
                schedule_star_bl(&meta, eps, (f1 - f1_star).max(f2))?
            } else {
                BundleConfig {
                    alpha: 0.3,
                    beta: 1.0,
                    lambda: 1.0,
                    tau: 1e-4,
                    eta0: f1_star,
                    t_steps: 605,
                    n_epochs: 1,
                }
            };
            Plan::StarBl {
                f1_star,
                cfg: apply_bundle_overrides(o, run, base),
            }
        }
        Method::SBlAdaLs => {
            let base = if theory {
                let lambda = run.lambda.unwrap_or(1.0);
                let eta0 = run.eta0.unwrap_or(0.0);
                let f1 = inst.problem.f1_value(&x0);
                schedule_ada_ls(&meta, eps, lambda, f1, eta0, meta.f1_upper.unwrap_or(f1))?
            } else if rand {
                let eta0 = match (run.eta0, o.get("f1_star")) {
                    (Some(e), _) => e,
                    (None, Some(f)) => 0.5 * f,
                    (None, None) => 0.5 * reference.get()?,
                };
                BundleConfig {
                    alpha: 0.3,
                    beta: 0.5,
                    lambda: 0.25,
                    tau: 1e-4,
                    eta0,
                    t_steps: 121,
                    n_epochs: 5,
                }
            } else {
                BundleConfig {
                    alpha: 0.3,
                    beta: 0.5,
                    lambda: 1.0,
                    tau: 1e-4,
                    eta0: 0.0,
                    t_steps: 121,
                    n_epochs: 10,
                }
            };
            Plan::AdaLs {
                cfg: apply_bundle_overrides(o, run, base),
            }
        }
        Method::RefConvex => Plan::Reference {
            eps: o.or("ref_eps", default_ref_eps(run.problem)),
        },
        Method::Grid => Plan::Grid {
            res: o.or("res", 1e-3),
        },
    })
}

fn default_ref_eps(problem: ProblemKind) -> f64 {
    match problem {
        ProblemKind::Cnls => 1e-4,
        ProblemKind::Cgp2d | ProblemKind::CgpRand => 1e-7,
    }
}

fn single_point_report(method: &str, inst: &Instance, x: Vec<f64>, lambda: f64) -> SolveReport {
    let mut trace = Trace::new(lambda);
    trace.record(&inst.problem, &x, None, IterKind::Outer);
    let (f1, f2) = inst.problem.inspect(&x);
    SolveReport {
        method: method.to_string(),
        x,
        f1,
        f2,
        first_order_calls: inst.problem.counter().first_order_calls(),
        value_calls: inst.problem.counter().value_calls(),
        trace,
        params: BTreeMap::new(),
        notes: vec![],
    }
}

/// A run with its instance and solver configuration resolved, before any
/// oracle call.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub instance: Instance,
    pub plan: Plan,
    pub eps: f64,
    pub budget: Option<u64>,
    pub reference: LazyReference,
    tol_gap: Option<f64>,
    tol_f2: f64,
}

impl Prepared {
    /// The τ-feasible start of a proximal point run; spends oracle calls on
    /// the instance's counter when the default start is infeasible.
    pub fn ippm_start(&self) -> Result<Option<(Vec<f64>, IppmConfig)>, CliError> {
        let Plan::Ippm { init, cfg } = &self.plan else {
            return Ok(None);
        };
        let inst = &self.instance;
        let mut x0 = inst.x0.clone();
        if let Some((tau, steps)) = *init {
            if inst.problem.f2_value(&x0) > tau {
                x0 = init_feasible(&inst.problem, &inst.meta, &x0, tau, steps)?;
            }
        }
        Ok(Some((x0, cfg.clone())))
    }
}

/// Resolves defaults and overrides; rejects overrides the method never reads.
pub fn prepare(run: &RunConfig) -> Result<Prepared, CliError> {
    run.validate()?;
    let mut o = Overrides::new(&run.overrides);
    let mut inst = build_instance(run, &mut o)?;
    let eps = run.eps.unwrap_or_else(|| default_eps(run.problem));
    let ref_eps = o.or("ref_eps", default_ref_eps(run.problem));
    let user_f1_star = o.get("f1_star");

    let mut reference = LazyReference {
        inst: inst.clone(),
        eps: ref_eps,
        value: user_f1_star,
    };
    let plan = plan(run, &mut inst, &mut o, eps, &mut reference)?;
    let tol_gap = o.get("tol_gap");
    let tol_f2 = o.or("tol_f2", eps);
    let unused = o.unused();
    if !unused.is_empty() {
        return Err(CliError::Config(format!(
            "overrides not used by {}: {}",
            run.method,
            unused.join(", ")
        )));
    }
    let budget = run.budget.or(match (run.problem, run.method) {
        (
            ProblemKind::CgpRand,
            Method::IppmSwsg | Method::IppmAcgd | Method::SStarBl | Method::SBlAdaLs,
        ) => Some(HIGHDIM_BUDGET),
        _ => None,
    });
    inst.problem.counter().set_budget(budget);
    Ok(Prepared {
        instance: inst,
        plan,
        eps,
        budget,
        reference,
        tol_gap,
        tol_f2,
    })
}

/// Runs one configured pipeline.
pub fn run(run: &RunConfig) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let prepared = prepare(run)?;
    let x_start = prepared.ippm_start()?;
    let Prepared {
        instance: inst,
        plan,
        eps,
        budget,
        mut reference,
        tol_gap: tol_gap_override,
        tol_f2,
    } = prepared;
    let problem = &inst.problem;
    log::info!(
        "{} on {} (eps = {eps}, budget = {budget:?})",
        run.method,
        problem.name()
    );

    let mut extra = BTreeMap::from([
        ("eps".to_string(), eps),
        ("seed".to_string(), run.seed as f64),
    ]);
    let mut report = match plan {
        Plan::Ippm { init, cfg } => {
            let (x0, _) = x_start.expect("proximal plan has a start");
            if x0 != inst.x0 {
                extra.insert("init_steps".into(), init.map_or(0, |i| i.1) as f64);
            }
            ippm_run(problem, &inst.meta, &x0, &cfg)?
        }
        Plan::StarBl { f1_star, cfg } => s_star_bl_with(problem, &inst.x0, f1_star, &cfg, |_| {})?,
        Plan::AdaLs { cfg } => ada_ls_run(problem, &inst.x0, &cfg)?.0,
        Plan::Reference { eps } => {
            let r = reference_convex(&inst, eps)?;
            reference.value = Some(r.f1_star_ref);
            let mut rep = single_point_report("ref-convex", &inst, r.x_star.clone(), 1.0);
            rep.params.insert("ref_eps".into(), eps);
            if let Some(lb) = r.lower_bound {
                rep.params.insert("lower_bound".into(), lb);
            }
            if let Some(l) = r.lambda {
                rep.params.insert("lambda_ref".into(), l);
            }
            rep
        }
        Plan::Grid { res } => {
            let g = grid_oracle(problem, res, 0.0)?;
            let mut rep = single_point_report("grid", &inst, g.x, 1.0);
            rep.params.insert("res".into(), res);
            rep
        }
    };
    if let Some(b) = budget {
        extra.insert("budget".into(), b as f64);
    }
    let m = &inst.meta;
    extra.insert("meta.rho".into(), m.rho);
    extra.insert("meta.mu_c".into(), m.mu_c);
    extra.insert("meta.d_u".into(), m.d_u);
    extra.insert("meta.g_bound".into(), m.g_bound);
    if let Some(l) = m.l_smooth {
        extra.insert("meta.l_smooth".into(), l);
    }
    for (k, v) in extra {
        report.params.entry(k).or_insert(v);
    }

    let f1_star_ref = Some(reference.get()?);
    let tol_gap = tol_gap_override.unwrap_or(match run.problem {
        ProblemKind::CgpRand => eps * f1_star_ref.map_or(1.0, f64::abs),
        _ => eps,
    });
    Ok(RunOutcome {
        config: run.clone(),
        problem_name: inst.problem.name().to_string(),
        report,
        f1_star_ref,
        tol_gap,
        tol_f2,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}
