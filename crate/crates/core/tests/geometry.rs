mod support;

use hcopt::geometry::{kkt_residual, project_box_halfspaces, solve_acgd_qp, solve_box_halfspaces};
use hcopt::problems::{grid_minimize, SplitMix64};
use hcopt::{BoxSet, Error, Halfspace};
use proptest::prelude::*;
use support::{dist, dot, enumerate_projection, quadprog_projection, random_feasible_instance};

const TOL: f64 = 1e-9;

#[test]
fn agrees_with_active_set_oracles_on_1000_instances() {
    let mut rng = SplitMix64::new(2024);
    let mut worst_qp: f64 = 0.0;
    let mut worst_enum: f64 = 0.0;
    for k in 0..1000 {
        let d = [1, 2, 5, 20][k % 4];
        let inst = random_feasible_instance(&mut rng, d);
        let x = project_box_halfspaces(&inst.set, &inst.y, &inst.cons, TOL).unwrap();
        let ours = dist(&x, &inst.y);
        let qp =
            quadprog_projection(&inst.set, &inst.y, &inst.cons).expect("feasible by construction");
        worst_qp = worst_qp.max((ours - dist(&qp, &inst.y)).abs());
        if d <= 2 {
            let en = enumerate_projection(&inst.set, &inst.y, &inst.cons)
                .expect("feasible by construction");
            worst_enum = worst_enum.max((ours - dist(&en, &inst.y)).abs());
        }
    }
    assert!(worst_qp <= 1e-6, "quadprog disagreement {worst_qp:e}");
    assert!(
        worst_enum <= 1e-6,
        "enumeration disagreement {worst_enum:e}"
    );
}

#[test]
fn kkt_certificate_holds() {
    let mut rng = SplitMix64::new(7);
    for k in 0..400 {
        let inst = random_feasible_instance(&mut rng, [1, 2, 5, 20][k % 4]);
        let sol = solve_box_halfspaces(&inst.set, &inst.y, &inst.cons, TOL).unwrap();
        let scale = 1.0 + inst.y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(kkt_residual(&inst.set, &inst.y, &inst.cons, &sol) <= 10.0 * TOL * scale);
    }
}

#[test]
fn disjoint_cuts_are_infeasible_for_both_oracles() {
    let mut rng = SplitMix64::new(11);
    for _ in 0..50 {
        let d = 3;
        let g: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let cons = [Halfspace::new(g, -0.5), Halfspace::new(neg, -0.5)];
        let set = BoxSet::unbounded(d);
        let y = vec![0.0; d];
        assert!(matches!(
            project_box_halfspaces(&set, &y, &cons, TOL),
            Err(Error::Infeasible { .. })
        ));
        assert!(quadprog_projection(&BoxSet::cube(d, -10.0, 10.0), &y, &cons).is_none());
    }
}

// The grid argmin is ill-conditioned along an active cut (moving `s` along
// the boundary costs only `s²/2d`), so agreement is measured in objective
// value: the grid value must lie in `[exact, exact + 2e-3·Lip]`.
#[test]
fn two_dimensional_projection_matches_grid_search() {
    let mut rng = SplitMix64::new(99);
    let mut checked = 0;
    while checked < 40 {
        let inst = random_feasible_instance(&mut rng, 2);
        if inst.cons.is_empty() {
            continue;
        }
        let x = project_box_halfspaces(&inst.set, &inst.y, &inst.cons, TOL).unwrap();
        let grid = grid_minimize(
            &inst.set,
            1e-3,
            0.0,
            |z| dist(z, &inst.y),
            |z| {
                inst.cons
                    .iter()
                    .map(|h| h.violation(z))
                    .fold(f64::NEG_INFINITY, f64::max)
            },
        )
        .unwrap();
        let exact = dist(&x, &inst.y);
        assert!(
            grid.f >= exact - 1e-9 && grid.f - exact <= 2e-3,
            "grid {} vs exact {exact}",
            grid.f
        );
        checked += 1;
    }
}

#[test]
fn acgd_subproblem_matches_grid_search() {
    let mut rng = SplitMix64::new(5);
    let set = BoxSet::cube(2, -1.0, 1.0);
    let mut checked = 0;
    while checked < 20 {
        let pi: Vec<f64> = (0..2).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        let z_prev: Vec<f64> = (0..2).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let z_bar: Vec<f64> = (0..2).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let nu: Vec<f64> = (0..2).map(|_| rng.standard_normal()).collect();
        let eta = rng.uniform_in(0.5, 4.0);
        // c0 < 0 keeps z̄ strictly inside the cut.
        let c0 = rng.uniform_in(-0.5, -0.05);
        let x = solve_acgd_qp(&pi, &z_prev, eta, &nu, &z_bar, c0, &set, TOL).unwrap();
        let obj = |z: &[f64]| dot(&pi, z) + 0.5 * eta * dist(z, &z_prev).powi(2);
        let con = |z: &[f64]| nu[0] * (z[0] - z_bar[0]) + nu[1] * (z[1] - z_bar[1]) + c0;
        let grid = grid_minimize(&set, 1e-3, 0.0, obj, con).unwrap();
        // Gradient norm bound of the objective on the box.
        let lip = dot(&pi, &pi).sqrt() + eta * 2.0 * 2f64.sqrt();
        let exact = obj(&x);
        assert!(con(&x) <= 1e-9);
        assert!(
            grid.f >= exact - 1e-9 && grid.f - exact <= 2e-3 * lip,
            "grid {} vs exact {exact}",
            grid.f
        );
        checked += 1;
    }
}

#[test]
fn projection_is_idempotent() {
    let mut rng = SplitMix64::new(3);
    for k in 0..200 {
        let inst = random_feasible_instance(&mut rng, [1, 2, 5, 20][k % 4]);
        let p = project_box_halfspaces(&inst.set, &inst.y, &inst.cons, TOL).unwrap();
        let pp = project_box_halfspaces(&inst.set, &p, &inst.cons, TOL).unwrap();
        assert_eq!(p, pp);
        let b = inst.set.project(&inst.y).unwrap();
        assert_eq!(inst.set.project(&b).unwrap(), b);
    }
}

fn pair_strategy() -> impl Strategy<Value = (u64, Vec<f64>, Vec<f64>)> {
    (
        any::<u64>(),
        prop::collection::vec(-4.0..4.0f64, 5),
        prop::collection::vec(-4.0..4.0f64, 5),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn box_projection_is_non_expansive((seed, y1, y2) in pair_strategy()) {
        let mut rng = SplitMix64::new(seed);
        let inst = random_feasible_instance(&mut rng, 5);
        let (p1, p2) = (inst.set.project(&y1).unwrap(), inst.set.project(&y2).unwrap());
        prop_assert!(dist(&p1, &p2) <= dist(&y1, &y2) + 1e-12);
    }

    #[test]
    fn halfspace_projection_is_non_expansive((seed, y1, y2) in pair_strategy()) {
        let mut rng = SplitMix64::new(seed);
        let inst = random_feasible_instance(&mut rng, 5);
        let p1 = project_box_halfspaces(&inst.set, &y1, &inst.cons, 1e-12).unwrap();
        let p2 = project_box_halfspaces(&inst.set, &y2, &inst.cons, 1e-12).unwrap();
        prop_assert!(dist(&p1, &p2) <= dist(&y1, &y2) + 1e-12);
    }
}
