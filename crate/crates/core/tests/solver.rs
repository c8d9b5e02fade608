use num_complex::Complex64;

use wstring::grid::{Field2D, Grid2D};
use wstring::radial::{solve_w1_formula, solve_w2, RadialFunction, RadialGrid};
use wstring::solver::{
    assemble_residual, check_grid, grown_grid, initial_guess_regularized, newton_solve, regularize, solve, unregularize,
    LinearSolver, NewtonConfig, STRING_SENTINEL,
};
use wstring::Params;

fn c(x: f64, y: f64) -> Complex64 {
    Complex64::new(x, y)
}

fn radial(p: &Params) -> (RadialFunction, RadialFunction) {
    let w1 = solve_w1_formula(p, &RadialGrid::standard()).unwrap();
    let w2 = solve_w2(p, &w1).unwrap();
    (w1, w2)
}

#[test]
fn regularization_round_trip_off_strings() {
    let p = Params::unit(vec![c(0.5, 0.0), c(-0.5, 0.0)]);
    let grid = Grid2D::new(4.0, 65).unwrap();
    let u = Field2D::from_fn(grid, |z| (z.re * 0.3).sin() - z.im * z.im);
    let back = unregularize(&regularize(&u, &p), &p);
    for j in 0..65 {
        for i in 0..65 {
            if back.get(i, j) == STRING_SENTINEL {
                assert!(p.strings.iter().any(|&s| (grid.z(i, j) - s).norm() < 1e-12));
            } else {
                assert!((back.get(i, j) - u.get(i, j)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn grid_must_clear_the_strings() {
    let p = Params::unit(vec![c(3.5, 0.0)]);
    assert!(check_grid(&p, &Grid2D::new(4.0, 65).unwrap()).is_err());
    assert!(check_grid(&p, &Grid2D::new(8.0, 65).unwrap()).is_ok());
}

#[test]
fn grown_grid_keeps_the_spacing() {
    let g = Grid2D::new(8.0, 129).unwrap();
    let big = grown_grid(&g).unwrap();
    assert_eq!(big.half_width(), 10.0);
    assert!((big.h() - g.h()).abs() < 1e-15);
    assert!(grown_grid(&Grid2D::new(8.0, 131).unwrap()).is_none());
}

#[test]
fn small_two_string_solve_converges_and_conserves_flux() {
    let p = Params::unit(vec![c(0.5, 0.0), c(-0.5, 0.0)]).with_epsilon(0.3).unwrap();
    let (w1, w2) = radial(&p);
    let out = solve(&p, Grid2D::new(8.0, 129).unwrap(), &w1, &w2, &NewtonConfig::default()).unwrap();
    let rep = &out.report;
    assert!(rep.converged && rep.final_residual() < 1e-9);
    assert!(rep.flux_u < 1e-3 && rep.flux_eta < 1e-3);
    assert!(rep.reflection_asymmetry.unwrap() < 1e-10);
    let (r1, r2) = assemble_residual(&out.u_reg, &out.eta, &p).unwrap();
    assert!(r1.max_abs().max(r2.max_abs()) < 1e-9);
    let b = rep.boundary.unwrap();
    assert!(b.exponent_u < -2.1 && b.exponent_eta < -2.1);
    assert!(b.total_u() > 0.0 && b.total_u().is_finite());
}

#[test]
fn direct_and_iterative_linear_solves_agree() {
    let p = Params::new([1.0, 2.0, 1.5, 3.0], 1.0, vec![c(0.4, 0.2), c(-0.3, -0.1)]).unwrap().with_epsilon(0.4).unwrap();
    let (w1, w2) = radial(&p);
    let grid = Grid2D::new(6.0, 65).unwrap();
    let (u0, e0) = initial_guess_regularized(&p, &w1, &w2, grid).unwrap();
    let direct = NewtonConfig { linear_solver: LinearSolver::Direct, ..NewtonConfig::default() };
    let iterative = NewtonConfig { linear_solver: LinearSolver::Iterative, ..NewtonConfig::default() };
    let (ud, ed, rd) = newton_solve(&u0, &e0, &p, &direct).unwrap();
    let (ui, ei, ri) = newton_solve(&u0, &e0, &p, &iterative).unwrap();
    assert!(rd.converged && ri.converged);
    let du = ud.zip_map(&ui, |a, b| a - b).unwrap().max_abs();
    let de = ed.zip_map(&ei, |a, b| a - b).unwrap().max_abs();
    assert!(du < 1e-8 && de < 1e-8, "{du} {de}");
}

#[test]
fn radially_symmetric_solve_converges_at_second_order() {
    let p = Params::unit(vec![]).with_epsilon(0.3).unwrap();
    let (w1, w2) = radial(&p);
    let mut centre = Vec::new();
    for n in [65, 129, 257] {
        let grid = Grid2D::new(8.0, n).unwrap();
        let out = solve(&p, grid, &w1, &w2, &NewtonConfig::default()).unwrap();
        assert!(out.report.converged);
        assert!(out.report.angular_variation.unwrap() < 1e-3);
        centre.push(out.u.get(n / 2, n / 2));
    }
    let q = (centre[0] - centre[1]) / (centre[1] - centre[2]);
    assert!((q / 4.0 - 1.0).abs() < 0.2, "Richardson ratio {q}");
}

#[test]
fn iteration_cap_is_reported_as_non_convergence() {
    let p = Params::unit(vec![c(0.5, 0.0), c(-0.5, 0.0)]).with_epsilon(0.4).unwrap();
    let (w1, w2) = radial(&p);
    let cfg = NewtonConfig { tol_residual: 1e-14, max_iter: 1, ..NewtonConfig::default() };
    let out = solve(&p, Grid2D::new(8.0, 65).unwrap(), &w1, &w2, &cfg).unwrap();
    assert!(!out.report.converged);
    assert_eq!(out.report.iterations.len(), 2);
    assert!(out.report.boundary.is_none());
}
