use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

use wstring::analysis::{
    beta_fn, beta_integral, check_l_identity, const_c1, const_c2, growth_rates, integral_i, integral_i_closed,
    integral_ipm, pairing_closed, pairing_reduced, pairing_reduced_self_adjoint, rho1_mass, rho2_mass,
};
use wstring::radial::{solve_w1_formula, RadialGrid};
use wstring::{Error, Params};

fn beta(x: f64, y: f64) -> f64 {
    (ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)).exp()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn ring(n: usize) -> Vec<Complex64> {
    (0..n).map(|k| Complex64::from_polar(0.5, 1.0 + 2.0 * PI * k as f64 / n as f64)).collect()
}

fn sets() -> Vec<Params> {
    vec![
        Params::unit(ring(1)),
        Params::unit(ring(2)),
        Params::new([1.0, 2.0, 1.5, 3.0], 1.0, ring(3)).unwrap(),
        Params::new([2.0, 3.0, 1.0, 2.0], 0.6, ring(1)).unwrap(),
        Params::new([1.0, 2.0, 1.0, 3.0], 1.3, ring(2)).unwrap(),
        Params::new([0.5, 1.0, 0.0, 0.7], 2.0, vec![]).unwrap(),
    ]
}

#[test]
fn beta_function_paths_agree() {
    for (x, y) in [(0.5, 0.5), (1.0 / 3.0, 2.0), (0.25, 5.75), (2.0, 3.0), (0.2, 0.1)] {
        let g = beta_fn(x, y).unwrap();
        assert!(rel(g, beta(x, y)) < 1e-12);
        assert!(rel(g, beta_integral(x, y).unwrap().value) < 1e-10);
    }
    assert!(rel(beta_fn(0.5, 0.5).unwrap(), PI) < 1e-14);
}

#[test]
fn source_flux_integral_matches_its_closed_form() {
    for p in sets() {
        let np1 = p.n() as f64 + 1.0;
        let mu = 1.0 / np1;
        let k = p.kappa();
        let oracle = p.lambda1 * p.c0 / (2.0 * np1) * beta(mu, 1.0 + k - mu) * (k - 2.0 * mu) / (k - mu);
        let q = integral_i(&p).unwrap().value;
        assert!(rel(q, oracle) < 1e-9, "N={} quadrature {q} vs {oracle}", p.n());
        assert!(rel(integral_i_closed(&p).unwrap(), oracle) < 1e-12);
    }
}

#[test]
fn source_flux_vanishes_when_kappa_is_twice_mu() {
    // N = 0 with λ₂ = λ₄: κ = 2 = 2μ
    let p = Params::unit(vec![]);
    assert!(integral_i(&p).unwrap().value.abs() < 1e-14);
    assert_eq!(integral_i_closed(&p).unwrap(), 0.0);
}

#[test]
fn decay_constant_formulas() {
    let p = Params::unit(ring(2));
    assert!(rel(const_c1(&p), 1.0 / 36.0) < 1e-15);
    let dc = const_c2(&p).unwrap();
    assert_eq!(dc.beta_term, 0.0);
    assert!(rel(dc.c2, dc.c1) < 1e-15);

    let q = Params::new([1.0, 2.0, 1.5, 3.0], 1.0, ring(3)).unwrap();
    let dq = const_c2(&q).unwrap();
    assert!(rel(dq.c2, dq.c1 * 3.0 / 2.0) < 1e-14);

    let np = Params::new([1.0, 1.0, 2.0, 1.0], 1.0, vec![]).unwrap();
    assert!(rel(const_c2(&np).unwrap().c2, 7.0 / 12.0) < 1e-12);
}

#[test]
fn growth_rates_use_source_flux_and_potential_mass() {
    for p in sets() {
        let np1 = p.n() as f64 + 1.0;
        let mu = 1.0 / np1;
        let k = p.kappa();
        let s1 = p.lambda1 * p.c0 / (2.0 * np1) * beta(mu, 1.0 + k - mu) * (k - 2.0 * mu) / (k - mu);
        let mass = PI * p.c0 / np1 * beta(mu, k - mu);
        let s2 = p.lambda4 / p.lambda2 * s1 + (p.lambda1 * p.lambda4 - p.lambda2 * p.lambda3) * mass / (2.0 * PI * p.lambda2);
        let g = growth_rates(&p).unwrap();
        assert!((g.w1 - s1).abs() < 1e-12 * s1.abs().max(1.0));
        assert!((g.w2 - s2).abs() < 1e-12 * s2.abs().max(1.0));
    }
}

#[test]
fn masses() {
    for n in 0..6 {
        let p = Params::new([1.0, 3.0, 1.0, 3.0], 1.0, ring(n)).unwrap();
        assert!(rel(rho1_mass(&p).unwrap().value, 8.0 * PI * (n as f64 + 1.0)) < 1e-10);
        let np1 = n as f64 + 1.0;
        let oracle = PI / np1 * beta(1.0 / np1, 2.0 - 1.0 / np1);
        assert!(rel(rho2_mass(&p).unwrap().value, oracle) < 1e-10);
    }
}

#[test]
fn divergent_second_mass_is_inadmissible() {
    let p = Params::new([5.0, 5.0, 1.0, 1.0], 1.0, vec![]).unwrap();
    assert!(matches!(rho2_mass(&p), Err(Error::Admissibility(_))));
    assert!(matches!(integral_i(&p), Err(Error::Admissibility(_))));
    assert!(matches!(
        Params::new([1.0, 4.0, 1.0, 1.0], 1.0, vec![Complex64::new(0.5, 0.0)]),
        Err(Error::Admissibility(_))
    ));
}

#[test]
fn pairing_paths() {
    let grid = RadialGrid::standard();
    for p in sets() {
        let w1 = solve_w1_formula(&p, &grid).unwrap();
        let ipm = integral_ipm(&p, &w1).unwrap();
        let sa = pairing_reduced_self_adjoint(&p).unwrap().value;
        let np1 = p.n() as f64 + 1.0;
        let mu = 1.0 / np1;
        let k = p.kappa();
        let oracle = PI * p.lambda1 * p.c0 / (4.0 * np1) * beta(mu, 2.0 + k - mu) * (3.0 * mu - 1.0 - k) / (1.0 + k - mu);
        assert!(rel(ipm.direct.value, sa) < 1e-6, "N={}: direct {} vs {sa}", p.n(), ipm.direct.value);
        assert!(rel(sa, oracle) < 1e-9);
        assert!(rel(pairing_closed(&p).unwrap(), oracle) < 1e-12);
        // negative exactly when κ > 3μ − 1
        assert_eq!(ipm.direct.value < 0.0, k > 3.0 * mu - 1.0, "N={} kappa={k}", p.n());
    }
}

#[test]
fn plain_reduction_for_unit_coefficients_without_strings() {
    // (π/4)∫(t − 1)/(1 + t)⁴ dt = (π/4)(1/2 − 2/3)
    let p = Params::unit(vec![]);
    assert!(rel(pairing_reduced(&p).unwrap().value, -PI / 24.0) < 1e-10);
    let w1 = solve_w1_formula(&p, &RadialGrid::standard()).unwrap();
    assert!(integral_ipm(&p, &w1).unwrap().direct.value.abs() < 1e-9);
}

#[test]
fn l_identity_holds_pointwise() {
    let r: Vec<f64> = (1..=300).map(|k| k as f64 * 0.02).collect();
    for n in 0..5 {
        assert!(check_l_identity(&r, n) < 1e-8);
    }
}
