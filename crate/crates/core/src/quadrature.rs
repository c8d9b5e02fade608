//! Adaptive Gauss–Kronrod (10/21-point) quadrature with global error
//! control, plus a compactified driver for `[a, ∞)`.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};

// Abscissae and weights of the 21-point Kronrod rule and its embedded
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208334573170,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Outcome of a quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

impl QuadratureResult {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            abs_error_estimate: self.abs_error_estimate * factor.abs(),
            evaluations: self.evaluations,
        }
    }
}

/// Sum of two integrals over adjoining ranges; error estimates add.
impl std::ops::Add for QuadratureResult {
    type Output = Self;

    fn add(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            abs_error_estimate: self.abs_error_estimate + other.abs_error_estimate,
            evaluations: self.evaluations + other.evaluations,
        }
    }
}

/// Tolerances for adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_evaluations: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-12, rel: 1e-10, max_evaluations: 1_000_000 }
    }
}

/// Single 21-point Kronrod panel: (integral, error estimate).
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for k in 0..10 {
        let dx = half * XGK[k];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    // QUADPACK-style floor at roundoff level
    let floor = 50.0 * f64::EPSILON * value.abs();
    (value, err.max(floor))
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive integration of `f` over `[a, b]`, always bisecting the panel
/// with the largest error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<QuadratureResult> {
    integrate_breaks(f, &[a, b], tol)
}

/// Like [`integrate`], seeded with the panels delimited by `breaks`.
pub fn integrate_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: Tolerance) -> Result<QuadratureResult> {
    if breaks.len() < 2 {
        return Err(Error::Quadrature("need at least two break points".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0usize;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == b {
            continue;
        }
        let (value, err) = gk21(&f, a, b);
        evaluations += 21;
        if !value.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
        }
        total += value;
        total_err += err;
        heap.push(Panel { a, b, value, err });
    }
    loop {
        let target = tol.abs.max(tol.rel * total.abs());
        if total_err <= target {
            break;
        }
        if evaluations + 42 > tol.max_evaluations {
            return Err(Error::Quadrature(format!(
                "no convergence after {evaluations} evaluations: value {total:e}, error estimate {total_err:e}, target {target:e}"
            )));
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot split further; keep its contribution and stop refining it
            return Err(Error::Quadrature(format!(
                "panel [{}, {}] cannot be bisected further; error estimate {total_err:e}",
                worst.a, worst.b
            )));
        }
        let (v1, e1) = gk21(&f, worst.a, mid);
        let (v2, e2) = gk21(&f, mid, worst.b);
        evaluations += 42;
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::Quadrature(format!("non-finite integrand on [{}, {}]", worst.a, worst.b)));
        }
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2 });
    }
    // re-sum to shed the drift accumulated by incremental updates
    let (value, err) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.err));
    Ok(QuadratureResult { value, abs_error_estimate: err, evaluations })
}

/// `∫_a^∞ f(r) dr` through `r = a + s/(1 − s)`, `s ∈ [0, 1)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tolerance) -> Result<QuadratureResult> {
    integrate_to_infinity_breaks(f, a, &[], tol)
}

/// Compactified half-line integral with extra break points given in the
/// original variable `r > a`.
pub fn integrate_to_infinity_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    r_breaks: &[f64],
    tol: Tolerance,
) -> Result<QuadratureResult> {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - s;
        let r = a + s / one_minus;
        let v = f(r);
        if v == 0.0 {
            0.0
        } else {
            v / (one_minus * one_minus)
        }
    };
    let mut breaks = vec![0.0];
    for &r in r_breaks {
        if r > a && r.is_finite() {
            let t = r - a;
            breaks.push(t / (1.0 + t));
        }
    }
    breaks.push(1.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    integrate_breaks(g, &breaks, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn kronrod_exact_for_polynomials() {
        for k in 0..=31 {
            let (v, _) = gk21(&|x: f64| x.powi(k), -1.0, 1.0);
            let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert!((v - exact).abs() < 1e-14, "degree {k}");
        }
    }

    #[test]
    fn smooth_integral() {
        let r = integrate(|x: f64| x.sin(), 0.0, PI, Tolerance::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
        assert!(r.evaluations > 0);
        assert!(r.abs_error_estimate >= 0.0);
    }

    #[test]
    fn half_line_integrals() {
        let t = Tolerance::default();
        // ∫ 1/(1+r²) = π/2
        let r = integrate_to_infinity(|r: f64| 1.0 / (1.0 + r * r), 0.0, t).unwrap();
        assert!((r.value - PI / 2.0).abs() < 1e-12);
        // ∫ r/(1+r²)² = 1/2
        let r = integrate_to_infinity(|r: f64| r / (1.0 + r * r).powi(2), 0.0, t).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
        // ∫_2^∞ e^{-r} = e^{-2}
        let r = integrate_to_infinity(|r: f64| (-r).exp(), 2.0, t).unwrap();
        assert!((r.value - (-2.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        // ∫₀¹ t^{-1/2} = 2
        let r = integrate(|t: f64| t.powf(-0.5), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let tol = Tolerance { abs: 1e-15, rel: 1e-15, max_evaluations: 100 };
        let err = integrate(|t: f64| t.powf(-0.9), 0.0, 1.0, tol).unwrap_err();
        assert!(matches!(err, Error::Quadrature(_)));
    }
}
