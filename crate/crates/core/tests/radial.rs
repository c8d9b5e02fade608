use std::io::BufReader;

use num_complex::Complex64;

use wstring::analysis::growth_rates;
use wstring::profiles::phi0;
use wstring::radial::{
    fit_decay, max_abs_in, residual_w1, residual_w2, solve_w1_formula, solve_w1_ode, solve_w1_ode_from, solve_w2,
    solve_w2_direct, w2_origin_value, RadialFunction, RadialGrid,
};
use wstring::{Error, Params};

fn c(x: f64, y: f64) -> Complex64 {
    Complex64::new(x, y)
}

#[test]
fn zero_source_gives_identically_zero_w1() {
    let p = Params::new([0.0, 1.0, 0.0, 1.0], 1.0, vec![c(0.0, 0.0)]).unwrap();
    let w1 = solve_w1_formula(&p, &RadialGrid::standard()).unwrap();
    assert!(w1.values().iter().all(|&v| v == 0.0));
}

#[test]
fn formula_and_ode_routes_agree() {
    let grid = RadialGrid::graded(1500, 10.0, 500, 200.0).unwrap();
    for p in [
        Params::unit(vec![c(0.5, 0.0), c(-0.5, 0.0)]),
        Params::new([1.0, 1.0, 2.0, 1.0], 1.0, vec![]).unwrap(),
        Params::new([2.0, 3.0, 1.0, 2.0], 0.6, vec![c(0.1, 0.2)]).unwrap(),
    ] {
        let w1 = solve_w1_formula(&p, &grid).unwrap();
        let w1_ode = solve_w1_ode(&p, &grid).unwrap();
        assert!(w1.max_abs_diff(&w1_ode, 0.0, 50.0).unwrap() < 1e-6);
        let w2 = solve_w2(&p, &w1).unwrap();
        let w2_ode = solve_w2_direct(&p, &w1, w2_origin_value(&p, 0.0).unwrap()).unwrap();
        assert!(w2.max_abs_diff(&w2_ode, 0.0, 50.0).unwrap() < 1e-6);
    }
}

#[test]
fn homogeneous_ode_solution_is_phi0() {
    // with λ₁ = 0 the regular solution through v0 is v0·φ₀
    let p = Params::new([0.0, 1.0, 0.0, 1.0], 1.0, vec![c(0.3, 0.0)]).unwrap();
    let grid = RadialGrid::graded(500, 5.0, 200, 100.0).unwrap();
    let w = solve_w1_ode_from(&p, &grid, 2.0).unwrap();
    for (&r, &v) in w.nodes().iter().zip(w.values()) {
        assert!((v - 2.0 * phi0(r, 1)).abs() < 1e-7, "r = {r}");
    }
}

#[test]
fn tail_slopes_match_growth_rates() {
    let grid = RadialGrid::standard();
    for p in [
        Params::unit(vec![c(0.5, 0.0), c(-0.5, 0.0)]),
        Params::new([1.0, 2.0, 1.5, 3.0], 1.0, vec![c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0)]).unwrap(),
        Params::new([1.0, 1.0, 2.0, 1.0], 1.0, vec![]).unwrap(),
        Params::new([2.0, 3.0, 1.0, 2.0], 0.6, vec![c(0.1, 0.2)]).unwrap(),
    ] {
        let g = growth_rates(&p).unwrap();
        let w1 = solve_w1_formula(&p, &grid).unwrap();
        let w2 = solve_w2(&p, &w1).unwrap();
        let f1 = fit_decay(&w1, (1e3, 1e5)).unwrap();
        let f2 = fit_decay(&w2, (1e3, 1e5)).unwrap();
        assert!((f1.slope - g.w1).abs() <= 1e-6 + 1e-4 * g.w1.abs(), "{} vs {}", f1.slope, g.w1);
        assert!((f2.slope - g.w2).abs() <= 1e-6 + 1e-4 * g.w2.abs(), "{} vs {}", f2.slope, g.w2);
    }
}

#[test]
fn defining_equation_residuals_converge_at_second_order() {
    let p = Params::new([1.0, 2.0, 1.5, 3.0], 1.0, vec![c(0.5, 0.0)]).unwrap();
    let mut prev: Option<(f64, f64)> = None;
    for n in [500, 1000, 2000] {
        let grid = RadialGrid::graded(n, 10.0, n, 1e4).unwrap();
        let w1 = solve_w1_formula(&p, &grid).unwrap();
        let w2 = solve_w2(&p, &w1).unwrap();
        let r1 = max_abs_in(&residual_w1(&p, &w1).unwrap(), 1e-2, 1e4);
        let r2 = max_abs_in(&residual_w2(&p, &w1, &w2).unwrap(), 1e-2, 1e4);
        if let Some((a, b)) = prev {
            assert!((a / r1 / 4.0 - 1.0).abs() < 0.2, "w1 ratio {}", a / r1);
            assert!((b / r2 / 4.0 - 1.0).abs() < 0.2, "w2 ratio {}", b / r2);
        }
        prev = Some((r1, r2));
    }
}

#[test]
fn fit_window_must_lie_in_the_far_field_and_on_the_grid() {
    let grid = RadialGrid::graded(100, 10.0, 100, 1e4).unwrap();
    let w = RadialFunction::from_fn(&grid, |r| 3.0 * r.ln() - 1.0).unwrap();
    let fit = fit_decay(&w, (1e2, 1e4)).unwrap();
    assert!((fit.slope - 3.0).abs() < 1e-12 && (fit.intercept + 1.0).abs() < 1e-10);
    assert!(matches!(fit_decay(&w, (10.0, 1e4)), Err(Error::Range(_))));
    assert!(matches!(fit_decay(&w, (1e3, 1e5)), Err(Error::Range(_))));
}

#[test]
fn radial_function_csv_round_trip() {
    let grid = RadialGrid::graded(50, 1.0, 50, 100.0).unwrap();
    let w = RadialFunction::from_fn(&grid, |r| r.sin() / (1.0 + r)).unwrap();
    let mut file = tempfile::tempfile().unwrap();
    w.write_csv(&mut file).unwrap();
    use std::io::Seek;
    file.rewind().unwrap();
    let back = RadialFunction::read_csv(BufReader::new(file)).unwrap();
    assert_eq!(back, w);
}

#[test]
fn invalid_grids_are_rejected() {
    assert!(RadialGrid::graded(0, 10.0, 10, 100.0).is_err());
    assert!(RadialGrid::graded(10, 10.0, 10, 5.0).is_err());
    assert!(RadialGrid::from_nodes(vec![0.01, 0.02, 0.03, 0.04]).is_err());
    assert!(RadialFunction::new(vec![1.0, 0.5, 2.0, 3.0], vec![0.0; 4]).is_err());
}
