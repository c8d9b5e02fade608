//! Radial correction profiles `w₁`, `w₂`: two independent solution routes
//! for each, finite-difference residuals of their defining ODEs, and
//! logarithmic decay fits.
//!
//! `w₁` solves `w'' + w'/r + λ₂ρ₁w = −λ₁ρ₂` and `w₂` solves
//! `w'' + w'/r = −λ₄ρ₁w₁ − λ₃ρ₂`.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::ode::{dopri5, OdeTolerance};
use crate::params::Params;
use crate::profiles::{liouville_potential, phi0, rho1, rho2};
use crate::quadrature::{integrate, integrate_breaks, integrate_to_infinity, Tolerance};

/// Node set for radial profiles: one node at `1e-3`, uniform nodes on
/// `(0, r_uniform]`, then geometric nodes out to `r_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
}

impl RadialGrid {
    pub const FIRST_NODE: f64 = 1e-3;

    pub fn graded(n_uniform: usize, r_uniform: f64, n_log: usize, r_max: f64) -> Result<Self> {
        if n_uniform == 0 || !(r_uniform > 0.0) || !(r_max > r_uniform) {
            return Err(Error::InvalidParams(format!(
                "graded grid needs n_uniform > 0 and 0 < r_uniform < r_max; got {n_uniform}, {r_uniform}, {r_max}"
            )));
        }
        let mut nodes = Vec::with_capacity(n_uniform + n_log + 1);
        let h = r_uniform / n_uniform as f64;
        if h > Self::FIRST_NODE {
            nodes.push(Self::FIRST_NODE);
        }
        nodes.extend((1..=n_uniform).map(|i| r_uniform * i as f64 / n_uniform as f64));
        let ratio = (r_max / r_uniform).ln();
        nodes.extend((1..=n_log).map(|j| r_uniform * (ratio * j as f64 / n_log as f64).exp()));
        if let Some(last) = nodes.last_mut() {
            *last = r_max;
        }
        Self::from_nodes(nodes)
    }

    /// 2000 uniform nodes on `[0, 10]`, 2000 geometric nodes on `[10, 1e5]`.
    pub fn standard() -> Self {
        Self::graded(2000, 10.0, 2000, 1e5).expect("valid default grid")
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        check_nodes(&nodes)?;
        if nodes[0] > Self::FIRST_NODE * (1.0 + 1e-12) {
            return Err(Error::InvalidParams(format!("first radial node {} exceeds 1e-3", nodes[0])));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().expect("nonempty grid")
    }
}

fn check_nodes(nodes: &[f64]) -> Result<()> {
    if nodes.len() < 4 {
        return Err(Error::InvalidParams("a radial grid needs at least 4 nodes".into()));
    }
    if !(nodes[0] > 0.0) || nodes.windows(2).any(|w| !(w[1] > w[0])) || !nodes.iter().all(|r| r.is_finite()) {
        return Err(Error::InvalidParams("radial nodes must be positive, finite and strictly increasing".into()));
    }
    Ok(())
}

/// Samples of a radial function on strictly increasing positive nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_nodes(&nodes)?;
        if nodes.len() != values.len() {
            return Err(Error::GridMismatch(format!("{} nodes but {} values", nodes.len(), values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite value at r = {}", nodes[i])));
        }
        Ok(Self { nodes, values })
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes.iter().map(|&r| f(r)).collect();
        Self::new(grid.nodes.clone(), values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().expect("nonempty")
    }

    /// Four-point Lagrange interpolation; outside the node range the edge
    /// stencil extrapolates.
    pub fn value_at(&self, r: f64) -> f64 {
        let n = self.nodes.len();
        let idx = self.nodes.partition_point(|&x| x <= r);
        let start = idx.saturating_sub(2).min(n - 4);
        let xs = &self.nodes[start..start + 4];
        let ys = &self.values[start..start + 4];
        let mut acc = 0.0;
        for i in 0..4 {
            if r == xs[i] {
                return ys[i];
            }
            let mut w = 1.0;
            for j in 0..4 {
                if j != i {
                    w *= (r - xs[j]) / (xs[i] - xs[j]);
                }
            }
            acc += w * ys[i];
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Self, r_lo: f64, r_hi: f64) -> Result<f64> {
        if self.nodes != other.nodes {
            return Err(Error::GridMismatch("radial functions live on different nodes".into()));
        }
        Ok(self
            .nodes
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .filter(|(r, _)| **r >= r_lo && **r <= r_hi)
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// CSV with header `r,value`, shortest round-trip decimals.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,value")?;
        for (r, v) in self.nodes.iter().zip(&self.values) {
            writeln!(w, "{},{}", fmt_f64(*r), fmt_f64(*v))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line.trim() != "r,value" {
                    return Err(Error::Parse(format!("unexpected header {line:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (a, b) = line.split_once(',').ok_or_else(|| Error::Parse(format!("line {}: {line:?}", i + 1)))?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)));
            nodes.push(parse(a)?);
            values.push(parse(b)?);
        }
        Self::new(nodes, values)
    }
}

/// Least-squares fit `value ≈ slope·ln r + intercept` over a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub residual_rms: f64,
}

pub fn fit_decay(rf: &RadialFunction, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if lo < 100.0 || hi > rf.r_max() * (1.0 + 1e-12) || !(hi > lo) {
        return Err(Error::Range(format!(
            "fit window [{lo}, {hi}] must satisfy 100 <= r_lo < r_hi <= r_max = {}",
            rf.r_max()
        )));
    }
    let pts: Vec<(f64, f64)> = rf
        .nodes
        .iter()
        .zip(&rf.values)
        .filter(|(r, _)| **r >= lo && **r <= hi * (1.0 + 1e-12))
        .map(|(r, v)| (r.ln(), *v))
        .collect();
    if pts.len() < 10 {
        return Err(Error::Range(format!("only {} nodes in fit window [{lo}, {hi}]", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    Ok(DecayFit { slope, intercept, window, residual_rms: (ss / n).sqrt() })
}

fn panel_tol() -> Tolerance {
    Tolerance { abs: 1e-16, rel: 1e-13, max_evaluations: 200_000 }
}

/// `∫_a^b f` for either orientation.
fn signed_integral(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    if a == b {
        Ok(0.0)
    } else if a < b {
        Ok(integrate(f, a, b, panel_tol())?.value)
    } else {
        Ok(-integrate(f, b, a, panel_tol())?.value)
    }
}

/// Cumulative integrals of `f` at sorted `knots` starting from 0 at `knots[0]`.
fn cumulative(f: &impl Fn(f64) -> f64, knots: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(knots.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in knots.windows(2) {
        acc += integrate(f, w[0], w[1], panel_tol())?.value;
        out.push(acc);
    }
    Ok(out)
}

/// `Σ_{k<m} s^k` for `s ≤ 2`, the quotient `(1 − s^m)/(1 − s)`.
fn geometric_sum(s: f64, m: i32) -> f64 {
    let mut acc = 0.0;
    let mut p = 1.0;
    for _ in 0..m {
        acc += p;
        p *= s;
    }
    acc
}

/// `((1+s^m)/(1−s^m))²·(1−s)²/s`, analytic through `s = 1`.
fn amplitude(s: f64, m: i32) -> f64 {
    if s <= 2.0 {
        let big = s.powi(m);
        let q = geometric_sum(s, m);
        (1.0 + big) * (1.0 + big) / (s * q * q)
    } else {
        let inv = s.powi(-m);
        let q = (1.0 + inv) / (1.0 - inv) * (s - 1.0);
        q * q / s
    }
}

/// `φ₀(r)·r/(1 − r) = r·Σ_{k<m} r^k/(1 + r^m)`.
fn pole_term(r: f64, m: i32) -> f64 {
    if r <= 2.0 {
        r * geometric_sum(r, m) / (1.0 + r.powi(m))
    } else {
        let inv = r.powi(-m);
        r * (1.0 - inv) / ((r - 1.0) * (1.0 + inv))
    }
}

/// Half-width of the interval around `s = 1` replaced by an interpolant.
const NEAR_ONE: f64 = 1e-3;
/// Inside `|s − 1| < MID_ZONE` the inner integral is taken from `s = 1`.
const MID_ZONE: f64 = 0.25;

/// Sorted union of `{0, 1}` and `nodes`, with the index of each node.
fn knots_with_origin_and_one(nodes: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut knots = vec![0.0];
    let mut index = Vec::with_capacity(nodes.len());
    let mut one_done = false;
    for &r in nodes {
        if !one_done && r >= 1.0 {
            if r > 1.0 {
                knots.push(1.0);
            }
            one_done = true;
        }
        index.push(knots.len());
        knots.push(r);
    }
    if !one_done {
        knots.push(1.0);
    }
    (knots, index)
}

struct FormulaRoute<'a> {
    params: &'a Params,
    m: i32,
    knots: Vec<f64>,
    j_cum: Vec<f64>,
    j1: f64,
    a1: f64,
    near: [(f64, f64); 8],
}

impl<'a> FormulaRoute<'a> {
    fn new(params: &'a Params, knots: Vec<f64>) -> Result<Self> {
        let m = 2 * params.n() as i32 + 2;
        let mut route = Self { params, m, knots, j_cum: Vec::new(), j1: 0.0, a1: 4.0 / (m * m) as f64, near: [(0.0, 0.0); 8] };
        route.j_cum = cumulative(&|t| route.j_integrand(t), &route.knots)?;
        route.j1 = route.j(1.0)?;
        let mut near = [(0.0, 0.0); 8];
        for (slot, k) in near.iter_mut().zip([-4.0, -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0]) {
            let s = 1.0 + k * NEAR_ONE;
            *slot = (s, route.g_mid(s)?);
        }
        route.near = near;
        Ok(route)
    }

    /// `φ₀(t)·t·(−λ₁ρ₂(t))`.
    fn j_integrand(&self, t: f64) -> f64 {
        -self.params.lambda1 * phi0(t, self.params.n()) * t * rho2(t, self.params)
    }

    /// `J(s) = ∫₀^s φ₀ t F dt`.
    fn j(&self, s: f64) -> Result<f64> {
        let k = self.knots.partition_point(|&x| x <= s).saturating_sub(1);
        Ok(self.j_cum[k] + signed_integral(|t| self.j_integrand(t), self.knots[k], s)?)
    }

    fn phi_f(&self, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(0.0);
        }
        Ok(amplitude(s, self.m) * self.j(s)?)
    }

    fn phi_f1(&self) -> f64 {
        self.a1 * self.j1
    }

    /// `(φ_f(s) − φ_f(1))/(1 − s)²` with both differences formed without
    /// cancellation against `φ_f(1)`.
    fn g_mid(&self, s: f64) -> Result<f64> {
        let d = s - 1.0;
        let dj = signed_integral(|t| self.j_integrand(t), 1.0, s)?;
        let a = amplitude(s, self.m);
        Ok((a * dj + (a - self.a1) * self.j1) / (d * d))
    }

    fn g_near(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &(xi, yi)) in self.near.iter().enumerate() {
            let mut w = 1.0;
            for (j, &(xj, _)) in self.near.iter().enumerate() {
                if i != j {
                    w *= (s - xj) / (xi - xj);
                }
            }
            acc += w * yi;
        }
        acc
    }

    fn g(&self, s: f64) -> Result<f64> {
        let d = (s - 1.0).abs();
        if d < NEAR_ONE {
            Ok(self.g_near(s))
        } else if d < MID_ZONE {
            self.g_mid(s)
        } else {
            let d = s - 1.0;
            Ok((self.phi_f(s)? - self.phi_f1()) / (d * d))
        }
    }

    fn panel_g(&self, a: f64, b: f64) -> Result<f64> {
        let mut breaks = vec![a];
        for c in [1.0 - MID_ZONE, 1.0 - NEAR_ONE, 1.0 + NEAR_ONE, 1.0 + MID_ZONE] {
            if c > a && c < b {
                breaks.push(c);
            }
        }
        breaks.push(b);
        let failure = std::cell::Cell::new(None);
        let value = integrate_breaks(
            |s| match self.g(s) {
                Ok(v) => v,
                Err(e) => {
                    failure.set(Some(e.to_string()));
                    f64::NAN
                }
            },
            &breaks,
            // g carries roundoff of order 1e-10 relative near s = 1
            Tolerance { abs: 1e-14, rel: 1e-10, max_evaluations: 200_000 },
        )
        .map_err(|e| {
            let near = if (a - 1.0).abs() < MID_ZONE || (b - 1.0).abs() < MID_ZONE {
                format!(" in the neighbourhood |s - 1| < {MID_ZONE} of the removable singularity")
            } else {
                String::new()
            };
            Error::Numerical(format!("outer integral on [{a}, {b}]{near}: {}", failure.take().unwrap_or(e.to_string())))
        })?;
        Ok(value.value)
    }
}

/// `w₁ = φ₀(r)[∫₀^r (φ_f(s) − φ_f(1))/(1 − s)² ds + φ_f(1)·r/(1 − r)]` with
/// `φ_f(r) = ((1+r^m)/(1−r^m))²((1−r)²/r)∫₀^r φ₀(t)·t·(−λ₁ρ₂(t)) dt`,
/// `m = 2N+2`.
///
/// The removable singularity at `s = 1` is handled in two layers: on
/// `|s − 1| < 0.25` the differences are formed from `∫₁^s` directly, and on
/// `|s − 1| < 1e-3` the integrand is replaced by its degree-7 interpolant
/// through samples at `1 ± k·1e-3`, `k = 1..4`. The `r/(1 − r)` pole cancels
/// against `φ₀` analytically.
pub fn solve_w1_formula(params: &Params, grid: &RadialGrid) -> Result<RadialFunction> {
    let (knots, node_index) = knots_with_origin_and_one(grid.nodes());
    let route = FormulaRoute::new(params, knots)?;
    let mut g_cum = Vec::with_capacity(route.knots.len());
    g_cum.push(0.0);
    let mut acc = 0.0;
    for w in route.knots.windows(2) {
        acc += route.panel_g(w[0], w[1])?;
        g_cum.push(acc);
    }
    let n = params.n();
    let phi_f1 = route.phi_f1();
    let values = node_index
        .iter()
        .map(|&k| {
            let r = route.knots[k];
            phi0(r, n) * g_cum[k] + phi_f1 * pole_term(r, route.m)
        })
        .collect();
    RadialFunction::new(grid.nodes().to_vec(), values)
}

/// Direct integration of the `w₁` equation with `w₁(0) = 0`, `w₁'(0) = 0`,
/// the value the formula route takes at the origin.
pub fn solve_w1_ode(params: &Params, grid: &RadialGrid) -> Result<RadialFunction> {
    solve_w1_ode_from(params, grid, 0.0)
}

/// Direct integration with `w₁(0) = v0`, `w₁'(0) = 0`. The first step uses
/// the regular series `w = v0 + c₂r²`, `c₂ = −(ρ(0)v0 + λ₁c₀)/4`.
pub fn solve_w1_ode_from(params: &Params, grid: &RadialGrid, v0: f64) -> Result<RadialFunction> {
    let n = params.n();
    let l1 = params.lambda1;
    let rhs = |r: f64, y: &[f64; 2]| [y[1], -y[1] / r - liouville_potential(r, n) * y[0] - l1 * rho2(r, params)];
    let r0 = grid.nodes()[0];
    let c2 = -(liouville_potential(0.0, n) * v0 + l1 * params.c0) / 4.0;
    let y0 = [v0 + c2 * r0 * r0, 2.0 * c2 * r0];
    let out = dopri5(rhs, r0, y0, grid.nodes(), OdeTolerance::default())?;
    RadialFunction::new(grid.nodes().to_vec(), out.into_iter().map(|y| y[0]).collect())
}

/// Radial potential `V(r) = ln r·∫₀^r ρ₂ s ds + ∫_r^∞ ρ₂ ln s·s ds`, which
/// satisfies `ΔV = ρ₂` and grows like `(∫ρ₂ dx/2π) ln r`.
pub fn newtonian_potential(params: &Params, nodes: &[f64]) -> Result<RadialFunction> {
    if !params.second_mass_finite() {
        return Err(Error::Admissibility(format!(
            "the potential of rho2 needs 2 lambda4/lambda2 > 1/(N+1); kappa = {}",
            params.kappa()
        )));
    }
    let mut knots = vec![0.0];
    knots.extend_from_slice(nodes);
    let mass = cumulative(&|s| rho2(s, params) * s, &knots)?;
    let log_moment = |s: f64| if s == 0.0 { 0.0 } else { rho2(s, params) * s.ln() * s };
    let r_max = *nodes.last().expect("nonempty");
    let mut tail = vec![0.0; nodes.len()];
    tail[nodes.len() - 1] = integrate_to_infinity(log_moment, r_max, Tolerance { abs: 1e-16, rel: 1e-12, max_evaluations: 1_000_000 })?.value;
    for i in (0..nodes.len() - 1).rev() {
        tail[i] = tail[i + 1] + integrate(log_moment, nodes[i], nodes[i + 1], panel_tol())?.value;
    }
    let values = nodes.iter().enumerate().map(|(i, &r)| r.ln() * mass[i + 1] + tail[i]).collect();
    RadialFunction::new(nodes.to_vec(), values)
}

/// `w₂ = (λ₄/λ₂)w₁ + ((λ₁λ₄ − λ₂λ₃)/λ₂)·V`, with the potential term dropped
/// identically in the proportional regime.
pub fn solve_w2(params: &Params, w1: &RadialFunction) -> Result<RadialFunction> {
    let ratio = params.lambda4 / params.lambda2;
    let mut values: Vec<f64> = w1.values().iter().map(|w| ratio * w).collect();
    if !params.is_proportional() {
        let v = newtonian_potential(params, w1.nodes())?;
        let k = params.coupling_defect() / params.lambda2;
        for (out, vi) in values.iter_mut().zip(v.values()) {
            *out += k * vi;
        }
    }
    RadialFunction::new(w1.nodes().to_vec(), values)
}

/// `w₂` by integrating its equation twice from the origin,
/// `w₂(r) = w₂(0) + ∫₀^r s⁻¹∫₀^s t·(−λ₄ρ₁w₁ − λ₃ρ₂) dt ds`, with `w₁`
/// interpolated from its samples.
pub fn solve_w2_direct(params: &Params, w1: &RadialFunction, w2_origin: f64) -> Result<RadialFunction> {
    let l3 = params.lambda3;
    let l4 = params.lambda4;
    let source = |t: f64| t * (-l4 * rho1(t, params) * w1.value_at(t) - l3 * rho2(t, params));
    let mut knots = vec![0.0];
    knots.extend_from_slice(w1.nodes());
    let q_cum = cumulative(&source, &knots)?;
    let q = |s: f64| -> f64 {
        let k = knots.partition_point(|&x| x <= s).saturating_sub(1);
        let extra = if s > knots[k] { integrate(source, knots[k], s, panel_tol()).map(|r| r.value).unwrap_or(f64::NAN) } else { 0.0 };
        q_cum[k] + extra
    };
    let outer = |s: f64| if s == 0.0 { 0.0 } else { q(s) / s };
    let mut values = Vec::with_capacity(w1.len());
    let mut acc = w2_origin;
    for w in knots.windows(2) {
        acc += integrate(outer, w[0], w[1], panel_tol())?.value;
        values.push(acc);
    }
    RadialFunction::new(w1.nodes().to_vec(), values)
}

/// `w₂(0)` for [`solve_w2`]: `(λ₄/λ₂)w₁(0) + ((λ₁λ₄ − λ₂λ₃)/λ₂)·V(0)` with
/// `V(0) = ∫₀^∞ ρ₂ ln s·s ds`.
pub fn w2_origin_value(params: &Params, w1_origin: f64) -> Result<f64> {
    let mut value = params.lambda4 / params.lambda2 * w1_origin;
    if !params.is_proportional() {
        let v0 = crate::quadrature::integrate_to_infinity_breaks(
            |s| if s == 0.0 { 0.0 } else { rho2(s, params) * s.ln() * s },
            0.0,
            &[1.0],
            Tolerance { abs: 1e-14, rel: 1e-12, max_evaluations: 1_000_000 },
        )?
        .value;
        value += params.coupling_defect() / params.lambda2 * v0;
    }
    Ok(value)
}

/// Three-point nonuniform approximations of `w''` and `w'` at interior nodes.
fn radial_laplacian(rf: &RadialFunction) -> Vec<(f64, f64)> {
    let r = rf.nodes();
    let w = rf.values();
    (1..r.len() - 1)
        .map(|i| {
            let hm = r[i] - r[i - 1];
            let hp = r[i + 1] - r[i];
            let denom = hm * hp * (hm + hp);
            let d2 = 2.0 * (hm * w[i + 1] - (hm + hp) * w[i] + hp * w[i - 1]) / denom;
            let d1 = (hm * hm * w[i + 1] - hp * hp * w[i - 1] + (hp * hp - hm * hm) * w[i]) / denom;
            (r[i], d2 + d1 / r[i])
        })
        .collect()
}

/// `w₁'' + w₁'/r + λ₂ρ₁w₁ + λ₁ρ₂` on interior nodes.
pub fn residual_w1(params: &Params, w1: &RadialFunction) -> Result<RadialFunction> {
    let n = params.n();
    let lap = radial_laplacian(w1);
    let (nodes, values): (Vec<f64>, Vec<f64>) = lap
        .iter()
        .zip(&w1.values()[1..])
        .map(|(&(r, l), &w)| (r, l + liouville_potential(r, n) * w + params.lambda1 * rho2(r, params)))
        .unzip();
    RadialFunction::new(nodes, values)
}

/// `w₂'' + w₂'/r + λ₄ρ₁w₁ + λ₃ρ₂` on interior nodes.
pub fn residual_w2(params: &Params, w1: &RadialFunction, w2: &RadialFunction) -> Result<RadialFunction> {
    if w1.nodes() != w2.nodes() {
        return Err(Error::GridMismatch("w1 and w2 live on different nodes".into()));
    }
    let lap = radial_laplacian(w2);
    let (nodes, values): (Vec<f64>, Vec<f64>) = lap
        .iter()
        .zip(&w1.values()[1..])
        .map(|(&(r, l), &w)| (r, l + params.lambda4 * rho1(r, params) * w + params.lambda3 * rho2(r, params)))
        .unzip();
    RadialFunction::new(nodes, values)
}

/// Max `|residual|` over nodes in `[r_lo, r_hi]`.
pub fn max_abs_in(rf: &RadialFunction, r_lo: f64, r_hi: f64) -> f64 {
    rf.nodes()
        .iter()
        .zip(rf.values())
        .filter(|(r, _)| **r >= r_lo && **r <= r_hi)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max)
}
