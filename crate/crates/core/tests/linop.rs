use std::collections::HashMap;

use num_complex::Complex64;

use wstring::grid::{Field2D, Grid2D};
use wstring::linop::{
    angular_pairing, apply_a, apply_l, apply_l_radial, kernel_convergence, l_identity_input, l_identity_output,
    planar_convergence, planar_convergence_with_coefficient, ConvergenceTable, DiscreteOperator,
};
use wstring::profiles::{liouville_potential, phi0, rho1, Kernel};
use wstring::radial::{solve_w1_formula, RadialFunction, RadialGrid};
use wstring::Params;

fn c(x: f64, y: f64) -> Complex64 {
    Complex64::new(x, y)
}

#[test]
fn stencil_is_exact_on_quadratics() {
    let p = Params::unit(vec![c(0.2, 0.1)]);
    let grid = Grid2D::new(3.0, 65).unwrap();
    let op = DiscreteOperator::planar_l(&p, grid);
    let v = Field2D::from_fn(grid, |z| 2.0 * z.re * z.re - z.im * z.im + 3.0 * z.re * z.im);
    let lv = apply_l(&op, &v).unwrap();
    for j in 1..64 {
        for i in 1..64 {
            let z = grid.z(i, j);
            let expect = 2.0 + liouville_potential(z.norm(), 1) * v.get(i, j);
            assert!((lv.get(i, j) - expect).abs() < 1e-10);
        }
    }
    assert_eq!(lv.get(0, 5), 0.0);
}

#[test]
fn triplets_reproduce_the_stencil() {
    let p = Params::unit(vec![c(0.0, 0.0), c(0.4, -0.2)]);
    let grid = Grid2D::new(2.0, 65).unwrap();
    let op = DiscreteOperator::planar_l(&p, grid);
    let v: Vec<f64> = (0..grid.len()).map(|k| ((k * 37) % 11) as f64 - 5.0).collect();
    let mut by_row: HashMap<usize, f64> = HashMap::new();
    for (r, col, val) in op.triplets() {
        *by_row.entry(r).or_default() += val * v[col];
    }
    let direct = op.apply(&v).unwrap();
    for (k, d) in direct.iter().enumerate() {
        assert!((by_row.get(&k).copied().unwrap_or(0.0) - d).abs() < 1e-9);
    }
}

#[test]
fn radial_operator_annihilates_phi0_at_second_order() {
    let p = Params::unit(vec![c(0.1, 0.0); 2]);
    let mut errs = Vec::new();
    for m in [200, 400, 800] {
        let grid = RadialGrid::graded(m, 4.0, 1, 5.0).unwrap();
        let op = DiscreteOperator::radial_l(&p, grid.nodes()).unwrap();
        let v = RadialFunction::from_fn(&grid, |r| phi0(r, 2)).unwrap();
        let lv = apply_l_radial(&op, &v).unwrap();
        let err = grid
            .nodes()
            .iter()
            .zip(&lv)
            .filter(|(r, _)| **r > 0.1 && **r < 3.0)
            .map(|(_, e)| e.abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    for w in errs.windows(2) {
        assert!((w[0] / w[1] / 4.0 - 1.0).abs() < 0.2, "{errs:?}");
    }
}

#[test]
fn planar_kernel_refinement() {
    let p = Params::unit(vec![c(0.5, 0.0)]);
    for which in [Kernel::Plus, Kernel::Minus, Kernel::Zero] {
        let t = kernel_convergence(&p, which, 10.0, &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], 5.0).unwrap();
        assert!(t.is_second_order(0.2), "{which:?}: {:?}", t.ratios());
    }
    let t = planar_convergence(&p, 10.0, &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], 5.0, |z| l_identity_input(z, 1), |z| {
        l_identity_output(z, 1)
    })
    .unwrap();
    assert!(t.is_second_order(0.2), "{:?}", t.ratios());
}

#[test]
fn wrong_potential_coefficient_is_detected() {
    let p = Params::unit(vec![c(0.5, 0.0), c(-0.5, 0.0)]);
    let n = p.n();
    let t = planar_convergence_with_coefficient(
        &p,
        10.0,
        &[1.0 / 8.0, 1.0 / 16.0],
        5.0,
        |z| wstring::linop::kernel_value(z, Kernel::Plus, n),
        |_| 0.0,
        7.0,
    )
    .unwrap();
    assert!(!t.is_second_order(0.2), "{:?}", t.ratios());
}

#[test]
fn angular_moments() {
    for n in 0..3 {
        for r in [0.5, 1.0, 3.0] {
            assert!(angular_pairing(r, n, Kernel::Plus, Some(Kernel::Minus), 128).abs() < 1e-12);
            assert!(angular_pairing(r, n, Kernel::Plus, None, 128).abs() < 1e-12);
            let q = wstring::profiles::phi_pm_radial(r, n);
            let sq = angular_pairing(r, n, Kernel::Plus, Some(Kernel::Plus), 128);
            assert!((sq - std::f64::consts::PI * q * q).abs() < 1e-12);
        }
    }
}

#[test]
fn coupled_operator_translation_column() {
    // with ν = 0 the operator reduces to −4(λ₂w₁ρ₁ + λ₁ρ₂)φ₊ and −4(λ₄w₁ρ₁ + λ₃ρ₂)φ₊
    let p = Params::new([1.0, 2.0, 1.5, 3.0], 1.0, vec![c(0.3, 0.0)]).unwrap();
    let w1 = solve_w1_formula(&p, &RadialGrid::graded(400, 10.0, 200, 1e3).unwrap()).unwrap();
    let grid = Grid2D::new(4.0, 65).unwrap();
    let zero = Field2D::zeros(grid);
    let (a1, a2) = apply_a(&zero, &zero, (1.0, 0.0), &p, &w1).unwrap();
    for (i, j) in [(5, 7), (16, 16), (40, 60)] {
        let z = grid.z(i, j);
        let r = z.norm();
        let phi = wstring::linop::kernel_value(z, Kernel::Plus, 1);
        let r2 = wstring::profiles::rho2(r, &p);
        let e1 = -4.0 * (2.0 * w1.value_at(r) * rho1(r, &p) + r2) * phi;
        let e2 = -4.0 * (3.0 * w1.value_at(r) * rho1(r, &p) + 1.5 * r2) * phi;
        assert!((a1.get(i, j) - e1).abs() < 1e-12 * (1.0 + e1.abs()));
        assert!((a2.get(i, j) - e2).abs() < 1e-12 * (1.0 + e2.abs()));
    }
}

#[test]
fn convergence_table_csv() {
    let mut t = ConvergenceTable::default();
    t.push(0.1, 4e-2);
    t.push(0.05, 1e-2);
    assert_eq!(t.ratios(), vec![4.0]);
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h,norm,ratio"));
    assert!(lines.next().unwrap().ends_with(','));
}
