use hcopt::problems::{
    check_hidden_convexity, finite_difference_error, grid_minimize_refined, grid_oracle,
    make_cgp2d, make_cnls, make_random_cgp, reference_convex, Instance, RandomCgpSpec,
    ReferenceFixture,
};

fn suites() -> Vec<Instance> {
    vec![
        make_cnls(),
        make_cgp2d(),
        make_random_cgp(&RandomCgpSpec::default()).unwrap(),
    ]
}

#[test]
fn hidden_convexity_sampling_suites() {
    for inst in suites() {
        let map = inst.map.as_ref().unwrap();
        let rep = check_hidden_convexity(&inst.problem, map, inst.meta.mu_c, 1000, 17);
        assert_eq!(rep.samples, 1000);
        assert!(rep.passes(1e-9, 1e-9), "{}: {rep:?}", inst.problem.name());
    }
}

#[test]
fn hidden_convexity_fails_with_an_overstated_modulus() {
    // The literature's μ_c = 4 for CNLS is not a valid lower Lipschitz constant.
    let inst = make_cnls();
    let rep = check_hidden_convexity(&inst.problem, inst.map.as_ref().unwrap(), 4.0, 1000, 17);
    assert!(rep.lower_lipschitz > 1e-3);
}

#[test]
fn gradients_match_finite_differences() {
    for inst in suites().into_iter().skip(1) {
        let set = inst.problem.domain();
        for f in [inst.problem.raw_objective(), inst.problem.raw_constraint()] {
            let err = finite_difference_error(f.as_ref(), set, 50, 1e-6, 5);
            assert!(err <= 1e-5, "{}: {err:e}", inst.problem.name());
        }
    }
}

#[test]
fn grid_oracle_recovers_known_optima() {
    let cnls = make_cnls();
    let g = grid_oracle(&cnls.problem, 1e-3, 0.0).unwrap();
    assert!(
        (g.f - 0.15).abs() <= 2.0 * 1e-3 * cnls.meta.g_bound,
        "{}",
        g.f
    );

    let cgp = make_cgp2d();
    let g = grid_oracle(&cgp.problem, 1e-3, 0.0).unwrap();
    assert!(
        g.f >= 5.0 && g.f - 5.0 <= 2.0 * 1e-3 * cgp.meta.g_bound,
        "{}",
        g.f
    );
}

#[test]
fn grid_oracle_halving_never_much_worse() {
    for inst in [make_cnls(), make_cgp2d()] {
        for res in [0.04, 0.02, 0.01] {
            let coarse = grid_oracle(&inst.problem, res, 0.0).unwrap();
            let fine = grid_oracle(&inst.problem, res / 2.0, 0.0).unwrap();
            assert!(fine.f <= coarse.f + res * inst.meta.g_bound);
        }
    }
}

#[test]
fn refined_grid_tightens_cgp_value() {
    let cgp = make_cgp2d();
    let (f1, f2) = (cgp.problem.raw_objective(), cgp.problem.raw_constraint());
    let g = grid_minimize_refined(
        cgp.problem.domain(),
        1e-2,
        3,
        0.0,
        |x| f1.value(x),
        |x| f2.value(x),
    )
    .unwrap();
    assert!(g.f >= 5.0 - 1e-12 && g.f - 5.0 < 1e-6, "{}", g.f);
}

#[test]
fn reference_oracle_on_small_problems() {
    let eps = 1e-4;
    let r = reference_convex(&make_cgp2d(), eps).unwrap();
    assert!((r.f1_star_ref - 5.0).abs() <= eps, "{r:?}");
    assert!(r.gap().unwrap() <= eps);
    assert!((r.x_star[0] - 2.0).abs() < 1e-2 && (r.x_star[1] - 0.5).abs() < 1e-2);

    let r = reference_convex(&make_cnls(), eps).unwrap();
    assert!((r.f1_star_ref - 0.15).abs() <= eps, "{r:?}");
}

#[test]
fn reference_oracle_reproduces_frozen_fixture() {
    let fx = ReferenceFixture::find(42, 100).expect("fixture shipped");
    let inst = make_random_cgp(&RandomCgpSpec::default()).unwrap();
    let r = reference_convex(&inst, 1e-7).unwrap();
    assert!(
        (r.f1_star_ref - fx.f1_star_ref).abs() <= fx.tolerance,
        "{r:?}"
    );
    let (f1, f2) = inst.problem.inspect(&r.x_star);
    assert!(f2 <= 1e-9 && (f1 - r.f1_star_ref).abs() < 1e-9);
    assert!(r.gap().unwrap() <= 1e-6);
}

#[test]
fn reference_oracle_agrees_with_grid_on_two_dimensional_random_instance() {
    let spec = RandomCgpSpec {
        dim: 2,
        k1: 4,
        k2: 3,
        ..RandomCgpSpec::with_seed(8)
    };
    let inst = make_random_cgp(&spec).unwrap();
    let r = reference_convex(&inst, 1e-6).unwrap();
    let (f1, f2) = (inst.problem.raw_objective(), inst.problem.raw_constraint());
    let g = grid_minimize_refined(
        inst.problem.domain(),
        1e-2,
        3,
        0.0,
        |x| f1.value(x),
        |x| f2.value(x),
    )
    .unwrap();
    assert!(
        (g.f - r.f1_star_ref).abs() <= 1e-5,
        "grid {} ref {}",
        g.f,
        r.f1_star_ref
    );
}
