//! Coefficient tuple, string configuration and the physical W-boson preset.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used to decide whether `λ₁λ₄ = λ₂λ₃`.
pub const PROPORTIONAL_RTOL: f64 = 1e-12;

/// Which admissibility condition the coefficients satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `λ₁λ₄ − λ₂λ₃ = 0`.
    Proportional,
    /// `λ₁λ₄ ≠ λ₂λ₃` together with `λ₂/(2λ₄) < N + 1`.
    NonproportionalDecaying,
}

/// The single source of truth for every formula in the crate.
///
/// `lambda2`, `lambda4`, `c0` and `epsilon` must be strictly positive.
/// `lambda1` and `lambda3` only scale source terms and may be zero, which is
/// how the zero-source cases are expressed.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub c0: f64,
    /// String points; repeated entries encode multiplicity.
    pub strings: Vec<Complex64>,
    pub epsilon: f64,
    pub a: Complex64,
    regime: Regime,
}

impl Params {
    /// Builds a validated parameter set with `ε = 1` and `a = 0`.
    pub fn new(lambdas: [f64; 4], c0: f64, strings: Vec<Complex64>) -> Result<Self> {
        let [lambda1, lambda2, lambda3, lambda4] = lambdas;
        for (name, v) in [("lambda1", lambda1), ("lambda3", lambda3)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [("lambda2", lambda2), ("lambda4", lambda4), ("c0", c0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if strings.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParams("string points must be finite".into()));
        }
        let n = strings.len();
        let regime = classify(lambdas, n)?;
        Ok(Self {
            lambda1,
            lambda2,
            lambda3,
            lambda4,
            c0,
            strings,
            epsilon: 1.0,
            a: Complex64::new(0.0, 0.0),
            regime,
        })
    }

    /// All coefficients equal to one, `c₀ = 1`.
    pub fn unit(strings: Vec<Complex64>) -> Self {
        Self::new([1.0; 4], 1.0, strings).expect("unit coefficients are admissible")
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParams(format!("epsilon must be > 0, got {epsilon}")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_a(mut self, a: Complex64) -> Self {
        self.a = a;
        self
    }

    /// Same coefficients, different `c₀`.
    pub fn with_c0(&self, c0: f64) -> Result<Self> {
        let mut p = Self::new(self.lambdas(), c0, self.strings.clone())?;
        p.epsilon = self.epsilon;
        p.a = self.a;
        Ok(p)
    }

    /// Number of strings counted with multiplicity.
    pub fn n(&self) -> usize {
        self.strings.len()
    }

    /// `2λ₄/λ₂`, the exponent of the second profile.
    pub fn kappa(&self) -> f64 {
        2.0 * self.lambda4 / self.lambda2
    }

    pub fn lambdas(&self) -> [f64; 4] {
        [self.lambda1, self.lambda2, self.lambda3, self.lambda4]
    }

    /// `λ₁λ₄ − λ₂λ₃`.
    pub fn coupling_defect(&self) -> f64 {
        self.lambda1 * self.lambda4 - self.lambda2 * self.lambda3
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn is_proportional(&self) -> bool {
        self.regime == Regime::Proportional
    }

    /// Whether `2λ₄/λ₂ > 1/(N+1)`, i.e. `∫ρ₂ dx` converges.
    pub fn second_mass_finite(&self) -> bool {
        self.kappa() > 1.0 / (self.n() as f64 + 1.0)
    }
}

fn classify(lambdas: [f64; 4], n: usize) -> Result<Regime> {
    let [l1, l2, l3, l4] = lambdas;
    let lhs = l1 * l4;
    let rhs = l2 * l3;
    let scale = lhs.abs().max(rhs.abs());
    if (lhs - rhs).abs() <= PROPORTIONAL_RTOL * scale {
        return Ok(Regime::Proportional);
    }
    if l2 / (2.0 * l4) < n as f64 + 1.0 {
        Ok(Regime::NonproportionalDecaying)
    } else {
        Err(Error::Admissibility(format!(
            "lambda1*lambda4 != lambda2*lambda3 requires lambda2/(2 lambda4) < N+1; got {} >= {}",
            l2 / (2.0 * l4),
            n + 1
        )))
    }
}

/// Physical W-boson coefficients in model units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalPreset {
    pub m_w: f64,
    pub e_charge: f64,
    #[serde(rename = "G")]
    pub g: f64,
}

impl PhysicalPreset {
    /// `(λ₁, λ₂, λ₃, λ₄) = (2m², 4e², 16πGm⁴/e², 32πGm²)`.
    pub fn lambdas(&self) -> Result<[f64; 4]> {
        for (name, v) in [("m_w", self.m_w), ("e_charge", self.e_charge), ("G", self.g)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        let m2 = self.m_w * self.m_w;
        let e2 = self.e_charge * self.e_charge;
        Ok([
            2.0 * m2,
            4.0 * e2,
            16.0 * PI * self.g * m2 * m2 / e2,
            32.0 * PI * self.g * m2,
        ])
    }

    pub fn params(&self, c0: f64, strings: Vec<Complex64>) -> Result<Params> {
        Params::new(self.lambdas()?, c0, strings)
    }
}
