//! Closed-form decay constants, the beta function, and the one-dimensional
//! integrals attached to the radial problem, each paired with an
//! independent evaluation wherever one exists.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::params::Params;
use crate::profiles::{liouville_potential, phi0, phi_pm_radial, rho1, rho2};
use crate::quadrature::{integrate, integrate_breaks, integrate_to_infinity_breaks, QuadratureResult, Tolerance};
use crate::radial::RadialFunction;

/// `B(x, y) = Γ(x)Γ(y)/Γ(x+y)` through log-gamma.
pub fn beta_fn(x: f64, y: f64) -> Result<f64> {
    check_beta_args(x, y)?;
    Ok((ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)).exp())
}

fn check_beta_args(x: f64, y: f64) -> Result<()> {
    if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
        return Err(Error::Domain(format!("beta function needs x, y > 0; got ({x}, {y})")));
    }
    Ok(())
}

/// `B(x, y)` from its defining integral `∫₀¹ t^{x−1}(1−t)^{y−1} dt`.
///
/// The integral is split at `1/2` and each half is desingularised with
/// `t = s^{1/x}` (resp. `1 − t = s^{1/y}`), which turns the algebraic endpoint
/// behaviour into a bounded integrand.
pub fn beta_integral(x: f64, y: f64) -> Result<QuadratureResult> {
    check_beta_args(x, y)?;
    let tol = Tolerance { abs: 1e-15, rel: 1e-13, max_evaluations: 1_000_000 };
    let half = |p: f64, q: f64| -> Result<QuadratureResult> {
        // ∫₀^{1/2} t^{p−1}(1−t)^{q−1} dt = (1/p)∫₀^{2^{-p}} (1 − s^{1/p})^{q−1} ds
        let upper = 0.5f64.powf(p);
        let r = integrate(|s: f64| (1.0 - s.powf(1.0 / p)).powf(q - 1.0), 0.0, upper, tol)?;
        Ok(r.scaled(1.0 / p))
    };
    Ok(half(x, y)? + half(y, x)?)
}

/// Decay constants `C₁`, `C₂` and the beta-function term of `C₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayConstants {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    /// `((λ₁λ₄ − λ₂λ₃)c₀/(2(N+1)λ₂))·B(1/(N+1), 2λ₄/λ₂ − 1/(N+1))`; exactly
    /// zero in the proportional case.
    pub beta_term: f64,
}

/// `C₁ = c₀λ₁λ₂λ₄ / (2(N+1)(λ₂+λ₄)(λ₂+2λ₄))`.
pub fn const_c1(params: &Params) -> f64 {
    let (l1, l2, l4) = (params.lambda1, params.lambda2, params.lambda4);
    let np1 = params.n() as f64 + 1.0;
    params.c0 * l1 * l2 * l4 / (2.0 * np1 * (l2 + l4) * (l2 + 2.0 * l4))
}

/// `C₂ = C₁λ₄/λ₂ − beta_term`.
pub fn const_c2(params: &Params) -> Result<DecayConstants> {
    let c1 = const_c1(params);
    let beta_term = if params.is_proportional() {
        0.0
    } else {
        if !params.second_mass_finite() {
            return Err(Error::Admissibility(format!(
                "2 lambda4/lambda2 = {} must exceed 1/(N+1) = {}",
                params.kappa(),
                1.0 / (params.n() as f64 + 1.0)
            )));
        }
        let np1 = params.n() as f64 + 1.0;
        let mu = 1.0 / np1;
        params.coupling_defect() * params.c0 / (2.0 * np1 * params.lambda2) * beta_fn(mu, params.kappa() - mu)?
    };
    Ok(DecayConstants { c1, c2: c1 * params.lambda4 / params.lambda2 - beta_term, beta_term })
}

fn tol() -> Tolerance {
    Tolerance::default()
}

fn require_finite_second_mass(params: &Params, what: &str) -> Result<()> {
    if params.second_mass_finite() {
        Ok(())
    } else {
        Err(Error::Admissibility(format!(
            "{what} diverges: 2 lambda4/lambda2 = {} <= 1/(N+1) = {}",
            params.kappa(),
            1.0 / (params.n() as f64 + 1.0)
        )))
    }
}

/// `λ₁ ∫₀^∞ φ₀(r) ρ₂(r) r dr` by compactified adaptive quadrature.
pub fn integral_i(params: &Params) -> Result<QuadratureResult> {
    require_finite_second_mass(params, "the source flux integral")?;
    let n = params.n();
    let r = integrate_to_infinity_breaks(|r| phi0(r, n) * rho2(r, params) * r, 0.0, &[1.0], tol())?;
    Ok(r.scaled(params.lambda1))
}

/// Closed form of `λ₁ ∫₀^∞ φ₀ ρ₂ r dr`:
/// `(λ₁c₀/(2(N+1)))·B(μ, 1+κ−μ)·(κ − 2μ)/(κ − μ)` with `μ = 1/(N+1)`,
/// `κ = 2λ₄/λ₂`.
pub fn integral_i_closed(params: &Params) -> Result<f64> {
    require_finite_second_mass(params, "the source flux integral")?;
    let np1 = params.n() as f64 + 1.0;
    let mu = 1.0 / np1;
    let k = params.kappa();
    Ok(params.lambda1 * params.c0 / (2.0 * np1) * beta_fn(mu, 1.0 + k - mu)? * (k - 2.0 * mu) / (k - mu))
}

/// `∫_{ℝ²} ρ₂(|y|) dy = 2π ∫₀^∞ ρ₂ r dr` by quadrature.
pub fn rho2_mass(params: &Params) -> Result<QuadratureResult> {
    require_finite_second_mass(params, "the mass of rho2")?;
    let r = integrate_to_infinity_breaks(|r| rho2(r, params) * r, 0.0, &[1.0], tol())?;
    Ok(r.scaled(2.0 * PI))
}

/// `(πc₀/(N+1))·B(1/(N+1), 2λ₄/λ₂ − 1/(N+1))`.
pub fn rho2_mass_closed(params: &Params) -> Result<f64> {
    require_finite_second_mass(params, "the mass of rho2")?;
    let np1 = params.n() as f64 + 1.0;
    let mu = 1.0 / np1;
    Ok(PI * params.c0 / np1 * beta_fn(mu, params.kappa() - mu)?)
}

/// `λ₂ · 2π ∫₀^∞ ρ₁ r dr`, which equals `8π(N+1)`.
pub fn rho1_mass(params: &Params) -> Result<QuadratureResult> {
    let r = integrate_to_infinity_breaks(|r| rho1(r, params) * r, 0.0, &[1.0], tol())?;
    Ok(r.scaled(2.0 * PI * params.lambda2))
}

/// The two evaluations of the pairing integral
/// `I± = ∫(λ₂w₁ρ₁ + λ₁ρ₂) φ±² dx`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairingIntegrals {
    /// Direct quadrature against the numerically solved `w₁`, with the
    /// angular factor `∫cos²((N+1)θ)dθ = π` applied.
    pub direct: QuadratureResult,
    /// `(πλ₁c₀/4) ∫₀^∞ (t^{N+1} − 1)/(1 + t^{N+1})^{2+κ} dt`.
    pub reduced: QuadratureResult,
}

/// Evaluates `I±` both ways. `I₊ = I₋` since the angular factors agree.
pub fn integral_ipm(params: &Params, w1: &RadialFunction) -> Result<PairingIntegrals> {
    Ok(PairingIntegrals { direct: pairing_direct(params, w1)?, reduced: pairing_reduced(params)? })
}

/// `π ∫₀^∞ (λ₂w₁ρ₁ + λ₁ρ₂)·r^{2N+2}/(1+r^{2N+2})²·r dr` with `w₁` taken from
/// a solved radial profile. The part beyond the last node is bounded using
/// `|w₁| ≤ (C + 1) ln r` and folded into the error estimate.
pub fn pairing_direct(params: &Params, w1: &RadialFunction) -> Result<QuadratureResult> {
    let n = params.n();
    let nodes = w1.nodes();
    let r_max = w1.r_max();
    let integrand = |r: f64| {
        let q = phi_pm_radial(r, n);
        (liouville_potential(r, n) * w1.value_at(r) + params.lambda1 * rho2(r, params)) * q * q * r
    };
    let mut breaks = Vec::with_capacity(nodes.len() + 1);
    breaks.push(0.0);
    breaks.extend_from_slice(nodes);
    let body = integrate_breaks(integrand, &breaks, Tolerance { abs: 1e-13, rel: 1e-11, max_evaluations: 4_000_000 })?;

    let growth = const_c1(params).max(integral_i_closed(params).map(f64::abs).unwrap_or(0.0)) + 1.0;
    let tail = integrate_to_infinity_breaks(
        |r| {
            let q = phi_pm_radial(r, n);
            (liouville_potential(r, n) * growth * r.ln().abs() + params.lambda1 * rho2(r, params)) * q * q * r
        },
        r_max,
        &[],
        tol(),
    )?;
    let tail_bound = PI * tail.value.abs();
    let value = PI * body.value;
    if tail_bound > 1e-9 + 1e-7 * value.abs() {
        return Err(Error::Range(format!(
            "w1 grid ends at r = {r_max}; neglected tail may contribute up to {tail_bound:e}"
        )));
    }
    Ok(QuadratureResult {
        value,
        abs_error_estimate: PI * body.abs_error_estimate + tail_bound,
        evaluations: body.evaluations + tail.evaluations,
    })
}

/// `(πλ₁c₀/4) ∫₀^∞ (t^{N+1} − 1)/(1 + t^{N+1})^{2+κ} dt`.
pub fn pairing_reduced(params: &Params) -> Result<QuadratureResult> {
    pairing_reduction(params, 1.0)
}

/// `(πλ₁c₀/4) ∫₀^∞ (2t^{N+1} − 1)/(1 + t^{N+1})^{2+κ} dt`, the reduction
/// obtained by moving `L` onto `w₁` and using `Lw₁ = −λ₁ρ₂`. This is the
/// value the direct quadrature reproduces.
pub fn pairing_reduced_self_adjoint(params: &Params) -> Result<QuadratureResult> {
    pairing_reduction(params, 2.0)
}

fn pairing_reduction(params: &Params, lead: f64) -> Result<QuadratureResult> {
    let np1 = params.n() as f64 + 1.0;
    let p = 2.0 + params.kappa();
    let r = integrate_to_infinity_breaks(
        |t: f64| {
            let s = t.powf(np1);
            (lead * s - 1.0) / (1.0 + s).powf(p)
        },
        0.0,
        &[1.0],
        tol(),
    )?;
    Ok(r.scaled(PI * params.lambda1 * params.c0 / 4.0))
}

/// Closed form of [`pairing_reduced_self_adjoint`]:
/// `(πλ₁c₀/(4(N+1)))·B(μ, 2+κ−μ)·(3μ − 1 − κ)/(1 + κ − μ)`, `μ = 1/(N+1)`.
pub fn pairing_closed(params: &Params) -> Result<f64> {
    let np1 = params.n() as f64 + 1.0;
    let mu = 1.0 / np1;
    let k = params.kappa();
    Ok(PI * params.lambda1 * params.c0 / (4.0 * np1) * beta_fn(mu, 2.0 + k - mu)? * (3.0 * mu - 1.0 - k)
        / (1.0 + k - mu))
}

/// Logarithmic growth rates of the radial corrections implied by their
/// defining equations: `w_k(r) = s_k ln r + O(1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthRates {
    pub w1: f64,
    pub w2: f64,
}

/// `s₁ = λ₁∫φ₀ρ₂ r dr` and `s₂ = (λ₄/λ₂)s₁ + (λ₁λ₄ − λ₂λ₃)·M/(2πλ₂)`
/// with `M = ∫ρ₂ dx`, all in closed form.
pub fn growth_rates(params: &Params) -> Result<GrowthRates> {
    let s1 = integral_i_closed(params)?;
    let defect = params.coupling_defect();
    let extra = if defect == 0.0 { 0.0 } else { defect * rho2_mass_closed(params)? / (2.0 * PI * params.lambda2) };
    Ok(GrowthRates { w1: s1, w2: params.lambda4 / params.lambda2 * s1 + extra })
}

/// Max over `r_samples` of `|L[g] − (N+1)² r^{4N+2}/(1+r^{2N+2})⁴|` for
/// `g = 1/(16(1+r^{2N+2})²)`, with `L = ∂²_r + r⁻¹∂_r + ρ` applied through
/// closed-form derivatives.
pub fn check_l_identity(r_samples: &[f64], n: usize) -> f64 {
    let m = 2.0 * n as f64 + 2.0;
    let np1 = n as f64 + 1.0;
    r_samples
        .iter()
        .map(|&r| {
            let big_r = r.powf(m);
            let q = 1.0 + big_r;
            let g = 1.0 / (16.0 * q * q);
            let dg = -(m / 8.0) * r.powf(m - 1.0) / q.powi(3);
            let d2g = -(m / 8.0) * ((m - 1.0) * r.powf(m - 2.0) / q.powi(3) - 3.0 * m * r.powf(2.0 * m - 2.0) / q.powi(4));
            let lhs = d2g + dg / r + liouville_potential(r, n) * g;
            let rhs = np1 * np1 * r.powf(4.0 * n as f64 + 2.0) / q.powi(4);
            (lhs - rhs).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn strings(n: usize) -> Vec<Complex64> {
        (0..n).map(|k| Complex64::from_polar(0.5, k as f64)).collect()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn beta_examples() {
        assert!((beta_fn(1.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((beta_fn(2.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        assert!((beta_fn(0.5, 0.5).unwrap() - PI).abs() < 1e-13);
        assert!(matches!(beta_fn(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(beta_integral(1.0, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn beta_paths_agree() {
        let grid = [0.25, 0.5, 1.0, 2.0, 5.0];
        for &x in &grid {
            for &y in &grid {
                let g = beta_fn(x, y).unwrap();
                let q = beta_integral(x, y).unwrap();
                assert!(rel(q.value, g) < 1e-10, "B({x},{y}): {} vs {g}", q.value);
            }
        }
    }

    #[test]
    fn c1_examples() {
        let p = Params::unit(vec![]);
        assert!((const_c1(&p) - 1.0 / 12.0).abs() < 1e-15);
        let p2 = p.with_c0(2.0).unwrap();
        assert!((const_c1(&p2) - 2.0 / 12.0).abs() < 1e-15);
        let p3 = Params::unit(strings(3));
        assert!((const_c1(&p3) - const_c1(&p) / 4.0).abs() < 1e-15);
        let p4 = Params::new([1.0, 2.0, 1.5, 3.0], 1.0, strings(2)).unwrap();
        assert!((const_c1(&p4) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn c2_examples() {
        let d = const_c2(&Params::unit(vec![])).unwrap();
        assert_eq!(d.beta_term, 0.0);
        assert_eq!(d.c2, d.c1);
        let np = Params::new([1.0, 1.0, 2.0, 1.0], 1.0, vec![]).unwrap();
        let d = const_c2(&np).unwrap();
        assert!((d.c2 - 7.0 / 12.0).abs() < 1e-14, "{}", d.c2);
        assert!((d.beta_term + 0.5).abs() < 1e-14);
    }

    #[test]
    fn integral_i_matches_its_closed_form() {
        let sets = [
            Params::unit(vec![]),
            Params::new([1.0, 2.0, 1.5, 3.0], 1.0, strings(2)).unwrap(),
            Params::unit(strings(1)),
            Params::new([2.0, 1.0, 0.5, 1.0], 0.7, strings(3)).unwrap(),
            Params::new([1.0, 1.0, 2.0, 1.0], 1.0, vec![]).unwrap(),
        ];
        for p in &sets {
            let q = integral_i(p).unwrap();
            let c = integral_i_closed(p).unwrap();
            assert!((q.value - c).abs() <= 1e-10 * c.abs().max(1e-3), "{:?}: {} vs {c}", p.lambdas(), q.value);
        }
        // N = 0, κ = 2: ∫(1−t)/(1+t)³ dt = 1/2 − B(2,1) = 0
        assert!(integral_i(&sets[0]).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn integral_i_sign_changes_at_one() {
        let p = Params::unit(strings(1));
        let f = |r: f64| phi0(r, 1) * rho2(r, &p) * r;
        assert!(f(0.5) > 0.0 && f(2.0) < 0.0 && f(1.0) == 0.0);
    }

    #[test]
    fn rho2_mass_examples() {
        let p = Params::unit(vec![]);
        let m = rho2_mass(&p).unwrap();
        assert!(rel(m.value, PI) < 1e-10);
        assert!(rel(rho2_mass_closed(&p).unwrap(), PI) < 1e-14);
        let m2 = rho2_mass(&p.with_c0(2.0).unwrap()).unwrap();
        assert!(rel(m2.value, 2.0 * PI) < 1e-10);
        // N = 1, κ = 1
        let p = Params::new([1.0, 2.0, 2.0, 1.0], 1.0, strings(1)).unwrap();
        assert!(rel(rho2_mass(&p).unwrap().value, PI * PI / 2.0) < 1e-9);
        assert!(rel(rho2_mass_closed(&p).unwrap(), PI * PI / 2.0) < 1e-13);
    }

    #[test]
    fn rho2_mass_divergent_is_rejected() {
        // proportional, κ = 0.4 < 1/(N+1) = 1
        let p = Params::new([5.0, 5.0, 1.0, 1.0], 1.0, vec![]).unwrap();
        assert!(matches!(rho2_mass(&p), Err(Error::Admissibility(_))));
        assert!(matches!(rho2_mass_closed(&p), Err(Error::Admissibility(_))));
    }

    #[test]
    fn rho1_mass_examples() {
        for n in [0usize, 3] {
            for l2 in [1.0, 3.5] {
                let p = Params::new([1.0, l2, 1.0 / l2, 1.0], 1.0, strings(n)).unwrap();
                let m = rho1_mass(&p).unwrap();
                assert!(rel(m.value, 8.0 * PI * (n as f64 + 1.0)) < 1e-10);
            }
        }
    }

    #[test]
    fn pairing_reduction_values() {
        let p = Params::unit(vec![]);
        assert!((pairing_reduced(&p).unwrap().value + PI / 24.0).abs() < 1e-12);
        // (2t−1)/(1+t)⁴ integrates to 2/6 − 1/3 = 0 for N = 0, κ = 2
        assert!(pairing_reduced_self_adjoint(&p).unwrap().value.abs() < 1e-12);
        for p in [Params::unit(strings(1)), Params::new([1.0, 2.0, 1.5, 3.0], 1.0, strings(2)).unwrap()] {
            let q = pairing_reduced_self_adjoint(&p).unwrap().value;
            assert!(rel(q, pairing_closed(&p).unwrap()) < 1e-10);
            assert!(pairing_reduced(&p).unwrap().value < 0.0);
        }
        // linear in λ₁c₀
        let a = Params::new([2.0, 1.0, 2.0, 1.0], 3.0, strings(1)).unwrap();
        let b = Params::unit(strings(1));
        let ra = pairing_reduced(&a).unwrap().value;
        let rb = pairing_reduced(&b).unwrap().value;
        assert!(rel(ra, 6.0 * rb) < 1e-12);
    }

    #[test]
    fn growth_rates_proportional_and_not() {
        let p = Params::unit(strings(1));
        let g = growth_rates(&p).unwrap();
        assert!(rel(g.w1, integral_i(&p).unwrap().value) < 1e-10);
        assert_eq!(g.w2, g.w1);
        let np = Params::new([1.0, 1.0, 2.0, 1.0], 1.0, vec![]).unwrap();
        let g = growth_rates(&np).unwrap();
        assert!(g.w1.abs() < 1e-15);
        assert!((g.w2 + 0.5).abs() < 1e-13);
    }

    #[test]
    fn l_identity() {
        // N = 0, r = 1: right-hand side is 1/16
        let m = check_l_identity(&[1.0], 0);
        assert!(m < 1e-14);
        assert!(check_l_identity(&[0.5, 1.0, 2.0, 10.0], 2) < 1e-8);
        for n in 0..6 {
            assert!(check_l_identity(&[0.1, 0.3, 0.9, 1.1, 3.0, 50.0], n) < 1e-8, "N={n}");
        }
    }
}
