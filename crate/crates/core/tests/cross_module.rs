//! Agreement between independent routes through transform, quadrature,
//! ODE solvers and the finite-difference oracle.

use blowup_core::criteria::{existence_criterion, klk_identity_residual};
use blowup_core::odesolver::{solve_dirichlet_bvp, OdeControl, OdeSolution};
use blowup_core::pde_oracle::{
    compare_with_radial, solve_annulus, AnnulusGrid, BoundaryData, Init, OracleControl,
};
use blowup_core::transform::{build_transform, lift_to_radial, ProblemSpec, TransformedField};

#[test]
fn integral_identity_holds_for_finite_criteria() {
    let cases = [
        (3, "0", "r^(-3)*s^3"),
        (3, "0", "r^(-4)*s^3 + r^(-5)*s^2"),
        (3, "0.5*log(r)", "r^(-3)*s^3"),
        (4, "0", "r^(-5)*exp(s)"),
        (2, "2*log(r)", "r^(-3)*s^3"),
    ];
    for (n, h, f) in cases {
        let spec = ProblemSpec::new(n, h, f, None, 1.0, 0.5).unwrap();
        let map = build_transform(&spec, 1.0).unwrap();
        let t0 = map.eval_p(1.0).unwrap();
        let crit = existence_criterion(&map, &spec, &[1.0], t0).unwrap();
        assert!(crit[0].finite_value().is_some(), "{f}");
        for (r, s) in [(1.0, 1.0), (2.0, 3.0), (5.0, 0.75)] {
            let res = klk_identity_residual(&spec, &map, r, s).unwrap();
            assert!(
                res < 1e-5,
                "n = {n}, h = {h}, f = {f}, R = {r}, s = {s}: {res:e}"
            );
        }
    }
}

#[test]
fn lifted_exact_solution_is_linear_in_r() {
    let spec = ProblemSpec::new(3, "0", "r^(-3)*s^3", None, 1.0, 0.5).unwrap();
    let map = build_transform(&spec, 1.0).unwrap();
    let t: Vec<f64> = (0..200).map(|k| -1.0 + 0.99 * k as f64 / 199.0).collect();
    let z: Vec<f64> = t.iter().map(|t| std::f64::consts::SQRT_2 / -t).collect();
    let zp: Vec<f64> = t
        .iter()
        .map(|t| std::f64::consts::SQRT_2 / (t * t))
        .collect();
    let profile =
        lift_to_radial(&map, &OdeSolution::from_samples(t.clone(), z.clone(), zp)).unwrap();
    for r in [1.0, 1.5, 3.0, 10.0, 90.0] {
        let u = profile.sample(r).unwrap();
        assert!(
            (u - std::f64::consts::SQRT_2 * r).abs() < 1e-6 * r,
            "r = {r}: {u}"
        );
    }
    // sampling the lift at p^{-1}(t_j) returns z_j
    for (tj, zj) in t.iter().zip(&z).step_by(17) {
        let r = map.eval_p_inverse(*tj).unwrap();
        assert!((profile.sample(r).unwrap() - zj).abs() < 1e-9 * zj);
    }
}

fn oracle_deviation(nr: usize) -> f64 {
    let spec = ProblemSpec::new(3, "0", "r^(-3)*s^3 + 1", None, 1.0, 0.5).unwrap();
    let map = build_transform(&spec, 1.0).unwrap();
    let field = TransformedField::new(&map, &spec);
    let (t0, t1) = (map.eval_p(1.0).unwrap(), map.eval_p(2.0).unwrap());
    let ctrl = OdeControl {
        bvp_nodes: 4097,
        ..Default::default()
    };
    let bvp = solve_dirichlet_bvp(&field, t0, t1, 2.0, &ctrl).unwrap();
    let profile = lift_to_radial(&map, &bvp).unwrap();
    let grid = AnnulusGrid::new(1.0, 2.0, nr, 1).unwrap();
    let two = BoundaryData::Value(2.0);
    let sol = solve_annulus(
        &spec,
        &grid,
        &two,
        &two,
        Init::Radial,
        None,
        &OracleControl::default(),
    )
    .unwrap();
    compare_with_radial(&sol, &profile).unwrap()
}

#[test]
fn radial_oracle_matches_transformed_bvp() {
    let coarse = oracle_deviation(128);
    let fine = oracle_deviation(256);
    assert!(fine < 1e-4, "{fine:e}");
    assert!(fine < coarse, "{coarse:e} -> {fine:e}");
}
