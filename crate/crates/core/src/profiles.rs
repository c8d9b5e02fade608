//! Closed-form profiles: the string polynomial `f` and its antiderivative
//! `F`, the Liouville profiles `ρ^I`, `ρ^II`, their rescalings, the limiting
//! radial profiles `ρ₁`, `ρ₂`, and the kernel functions `φ±`, `φ₀`.
//!
//! Everything that can overflow for large `|z|` is evaluated in log space.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::Params;

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(1 + |w|²)` without forming `|w|²` when it would overflow.
fn ln_1p_abs2(w: Complex64) -> f64 {
    let m = w.norm();
    if m > 1e150 {
        2.0 * m.ln() + (m * m).recip().ln_1p()
    } else {
        (m * m).ln_1p()
    }
}

/// Monomial coefficients of `f(z) = (N+1)∏(z − z_j)` and of `F(z) = ∫₀^z f`,
/// lowest degree first.
#[derive(Clone, Debug)]
pub struct StringPolynomial {
    pub f_coeffs: Vec<Complex64>,
    pub big_f_coeffs: Vec<Complex64>,
    roots: Vec<Complex64>,
}

impl StringPolynomial {
    pub fn new(strings: &[Complex64]) -> Self {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &zj in strings {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= zj * ck;
            }
            c = next;
        }
        let scale = strings.len() as f64 + 1.0;
        let f_coeffs: Vec<_> = c.into_iter().map(|v| v * scale).collect();
        let mut big_f_coeffs = vec![Complex64::new(0.0, 0.0); f_coeffs.len() + 1];
        for (k, &ck) in f_coeffs.iter().enumerate() {
            big_f_coeffs[k + 1] = ck / (k as f64 + 1.0);
        }
        Self { f_coeffs, big_f_coeffs, roots: strings.to_vec() }
    }

    /// Product form, so that `f` vanishes exactly on string points.
    pub fn f(&self, z: Complex64) -> Complex64 {
        let scale = self.f_coeffs.len() as f64;
        self.roots.iter().fold(Complex64::new(scale, 0.0), |acc, &zj| acc * (z - zj))
    }

    pub fn big_f(&self, z: Complex64) -> Complex64 {
        horner(&self.big_f_coeffs, z)
    }
}

/// Coefficients `t_k` with `p(z + δ) = Σ t_k δ^k`, by repeated synthetic
/// division.
fn taylor_coefficients(c: &[Complex64], z: Complex64) -> Vec<Complex64> {
    let mut work = c.to_vec();
    let n = work.len();
    for k in 0..n {
        for j in (k..n - 1).rev() {
            let next = work[j + 1];
            work[j] += z * next;
        }
    }
    work
}

fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &ck| acc * z + ck)
}

/// Cached evaluator for all profiles of one parameter set.
#[derive(Clone, Debug)]
pub struct Profiles {
    params: Params,
    poly: StringPolynomial,
    /// `ln(8(N+1)²/λ₂) + (2N+2) ln ε`, the constant part of `ln ρ^I` once the
    /// string factors are split off.
    ln_rho_i_const: f64,
    eps_pow: f64,
}

impl Profiles {
    pub fn new(params: &Params) -> Self {
        let n = params.n() as f64;
        let ln_rho_i_const =
            (8.0 * (n + 1.0).powi(2) / params.lambda2).ln() + (2.0 * n + 2.0) * params.epsilon.ln();
        Self {
            params: params.clone(),
            poly: StringPolynomial::new(&params.strings),
            ln_rho_i_const,
            eps_pow: params.epsilon.powf(n + 1.0),
        }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn polynomial(&self) -> &StringPolynomial {
        &self.poly
    }

    pub fn f(&self, z: Complex64) -> Complex64 {
        self.poly.f(z)
    }

    pub fn big_f(&self, z: Complex64) -> Complex64 {
        self.poly.big_f(z)
    }

    /// `ε^{N+1} F(z) + a`, so that `ε^{2N+2}|F + a/ε^{N+1}|² = |G|²`.
    fn shifted(&self, z: Complex64) -> Complex64 {
        self.poly.big_f(z) * self.eps_pow + self.params.a
    }

    /// `Σ_j ln|z − z_j|²`; `-∞` on a string point.
    pub fn ln_string_factor(&self, z: Complex64) -> f64 {
        self.params.strings.iter().map(|&zj| (z - zj).norm_sqr().ln()).sum()
    }

    /// `ln ρ^I − Σ ln|z − z_j|²`, smooth everywhere.
    pub fn ln_rho_i_regular(&self, z: Complex64) -> f64 {
        self.ln_rho_i_const - 2.0 * ln_1p_abs2(self.shifted(z))
    }

    pub fn ln_rho_i(&self, z: Complex64) -> f64 {
        self.ln_rho_i_regular(z) + self.ln_string_factor(z)
    }

    pub fn rho_i(&self, z: Complex64) -> f64 {
        self.ln_rho_i(z).exp()
    }

    pub fn ln_rho_ii(&self, z: Complex64) -> f64 {
        let p = &self.params;
        p.c0.ln() + 4.0 * p.epsilon.ln() - p.kappa() * ln_1p_abs2(self.shifted(z))
    }

    pub fn rho_ii(&self, z: Complex64) -> f64 {
        self.ln_rho_ii(z).exp()
    }

    /// `(g^I, g^II) = (ε⁻² ρ^I(z/ε), ε⁻⁴ ρ^II(z/ε))`.
    pub fn g_scaled(&self, z: Complex64) -> (f64, f64) {
        let eps = self.params.epsilon;
        let w = z / eps;
        let le = eps.ln();
        ((self.ln_rho_i(w) - 2.0 * le).exp(), (self.ln_rho_ii(w) - 4.0 * le).exp())
    }

    /// Five-point stencil residual of `Δ ln ρ^I + λ₂ ρ^I` (or of
    /// `Δ ln ρ^II + λ₄ ρ^I` for the companion identity) at `z`.
    pub fn liouville_residual(&self, z: Complex64, h: f64, identity: LiouvilleIdentity) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::Domain(format!("stencil step must be positive, got {h}")));
        }
        if let Some(zj) = self.params.strings.iter().find(|&&zj| (z - zj).norm() <= 10.0 * h) {
            return Err(Error::Domain(format!(
                "probe {z} lies within 10h = {} of string point {zj}",
                10.0 * h
            )));
        }
        // Increments are formed from Taylor coefficients at z so that the
        // stencil never subtracts two nearly equal logarithms.
        let taylor = taylor_coefficients(&self.poly.big_f_coeffs, z);
        let g = self.shifted(z);
        let denom = 1.0 + g.norm_sqr();
        let increment = |dz: Complex64| {
            let df = taylor[1..].iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &t| acc * dz + t) * dz;
            let dg = df * self.eps_pow;
            let d_abs2 = (dg * (g + g + dg).conj()).re;
            let d_ln_den = (d_abs2 / denom).ln_1p();
            match identity {
                LiouvilleIdentity::Primary => {
                    let strings: f64 = self
                        .params
                        .strings
                        .iter()
                        .map(|&zj| {
                            let a = z - zj;
                            ((2.0 * (dz * a.conj()).re + dz.norm_sqr()) / a.norm_sqr()).ln_1p()
                        })
                        .sum();
                    strings - 2.0 * d_ln_den
                }
                LiouvilleIdentity::Companion => -self.params.kappa() * d_ln_den,
            }
        };
        let lap = (increment(Complex64::new(h, 0.0))
            + increment(Complex64::new(-h, 0.0))
            + increment(Complex64::new(0.0, h))
            + increment(Complex64::new(0.0, -h)))
            / (h * h);
        let coeff = match identity {
            LiouvilleIdentity::Primary => self.params.lambda2,
            LiouvilleIdentity::Companion => self.params.lambda4,
        };
        Ok(lap + coeff * self.rho_i(z))
    }
}

/// Which Liouville-type identity a stencil check targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiouvilleIdentity {
    /// `Δ ln ρ^I = −λ₂ ρ^I` away from the strings.
    Primary,
    /// `Δ ln ρ^II = −λ₄ ρ^I`.
    Companion,
}

pub fn eval_f(z: Complex64, params: &Params) -> Complex64 {
    StringPolynomial::new(&params.strings).f(z)
}

pub fn eval_big_f(z: Complex64, params: &Params) -> Complex64 {
    StringPolynomial::new(&params.strings).big_f(z)
}

pub fn rho_i(z: Complex64, params: &Params) -> f64 {
    Profiles::new(params).rho_i(z)
}

pub fn rho_ii(z: Complex64, params: &Params) -> f64 {
    Profiles::new(params).rho_ii(z)
}

pub fn g_scaled(z: Complex64, params: &Params) -> (f64, f64) {
    Profiles::new(params).g_scaled(z)
}

pub fn liouville_residual(z: Complex64, params: &Params, h: f64) -> Result<f64> {
    Profiles::new(params).liouville_residual(z, h, LiouvilleIdentity::Primary)
}

/// `m ln r` with `m = 2N + 2`; `-∞` at the origin.
fn log_big_r(r: f64, n: usize) -> f64 {
    (2.0 * n as f64 + 2.0) * r.ln()
}

/// `ln ρ₁(r)`, with `ρ₁(r) = 8(N+1)² r^{2N} / (λ₂(1 + r^{2N+2})²)`.
pub fn ln_rho1(r: f64, params: &Params) -> f64 {
    let n = params.n();
    let np1 = n as f64 + 1.0;
    let base = (8.0 * np1 * np1 / params.lambda2).ln();
    if r == 0.0 {
        return if n == 0 { base } else { f64::NEG_INFINITY };
    }
    base + 2.0 * n as f64 * r.ln() - 2.0 * softplus(log_big_r(r, n))
}

pub fn rho1(r: f64, params: &Params) -> f64 {
    ln_rho1(r, params).exp()
}

/// `ρ₂(r) = c₀ / (1 + r^{2N+2})^{2λ₄/λ₂}`.
pub fn rho2(r: f64, params: &Params) -> f64 {
    if r == 0.0 {
        return params.c0;
    }
    params.c0 * (-params.kappa() * softplus(log_big_r(r, params.n()))).exp()
}

/// `ρ(r) = λ₂ ρ₁(r) = 8(N+1)² r^{2N}/(1 + r^{2N+2})²`, the potential of `L`.
pub fn liouville_potential(r: f64, n: usize) -> f64 {
    let np1 = n as f64 + 1.0;
    if r == 0.0 {
        return if n == 0 { 8.0 } else { 0.0 };
    }
    let lr = r.ln();
    ((8.0 * np1 * np1).ln() + 2.0 * n as f64 * lr - 2.0 * softplus(2.0 * np1 * lr)).exp()
}

/// Kernel functions of `L = Δ + ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Plus,
    Minus,
    Zero,
}

/// `φ₊ = r^{N+1}cos((N+1)θ)/(1+r^{2N+2})`, `φ₋` with `sin`, and
/// `φ₀ = (1 − r^{2N+2})/(1 + r^{2N+2})`.
pub fn phi_kernel(r: f64, theta: f64, which: Kernel, n: usize) -> f64 {
    let np1 = n as f64 + 1.0;
    // t = r^{N+1}; t/(1+t²) = 1/(2 cosh ln t) and (1−t²)/(1+t²) = −tanh ln t
    let lt = np1 * r.ln();
    match which {
        Kernel::Plus => (np1 * theta).cos() / (2.0 * lt.cosh()),
        Kernel::Minus => (np1 * theta).sin() / (2.0 * lt.cosh()),
        Kernel::Zero => -lt.tanh(),
    }
}

pub fn phi0(r: f64, n: usize) -> f64 {
    phi_kernel(r, 0.0, Kernel::Zero, n)
}

/// Radial factor `r^{N+1}/(1 + r^{2N+2})` shared by `φ±`.
pub fn phi_pm_radial(r: f64, n: usize) -> f64 {
    1.0 / (2.0 * ((n as f64 + 1.0) * r.ln()).cosh())
}
