//! Damped Newton solver for the full nonlinear system on a square grid.
//!
//! The string sources are removed by working with `U = u − Σ_j ln|z − z_j|²`,
//! which turns the system into
//!
//! ```text
//! ΔU = −λ₁e^η − λ₂P e^U,   Δη = −λ₃e^η − λ₄P e^U,   P = ∏_j |z − z_j|²,
//! ```
//!
//! with Dirichlet data taken from the ansatz `u = ln ρ^I + ε²w₁(ε|z|)`,
//! `η = ln ρ^II + ε²w₂(ε|z|)`.

use std::f64::consts::PI;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field2D, Grid2D};
use crate::io::fmt_f64;
use crate::krylov::{gmres, GmresConfig};
use crate::params::Params;
use crate::poisson::PoissonSolver;
use crate::profiles::Profiles;
use crate::quadrature::{integrate, Tolerance};
use crate::radial::RadialFunction;

/// Value stored for `u` on a node that coincides with a string point;
/// `exp` of it is exactly zero.
pub const STRING_SENTINEL: f64 = -1.0e3;

/// Largest `n` for which Newton steps use a sparse direct factorization
/// under [`LinearSolver::Auto`].
pub const DIRECT_SOLVE_MAX_N: usize = 257;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LinearSolver {
    /// Direct for `n ≤ 257`, iterative above.
    Auto,
    Direct,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NewtonConfig {
    /// Max-norm residual at which the iteration stops.
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Step reduction factor on a rejected trial step.
    pub damping: f64,
    /// Smallest step fraction tried before declaring failure.
    pub min_step: f64,
    pub linear_solver: LinearSolver,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol_residual: 1e-9, max_iter: 30, damping: 0.5, min_step: 1.0 / 1024.0, linear_solver: LinearSolver::Auto }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) || self.max_iter < 1 {
            return Err(Error::Config("newton needs tol > 0 and max_iter >= 1".into()));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) || !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return Err(Error::Config("damping must lie in (0, 1) and min_step in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Rejects grids whose boundary comes within `R/4` of a string point.
pub fn check_grid(params: &Params, grid: &Grid2D) -> Result<()> {
    let r = grid.half_width();
    for zj in &params.strings {
        let margin = r - zj.re.abs().max(zj.im.abs());
        if margin < r / 4.0 {
            return Err(Error::InvalidParams(format!(
                "string point {zj} is {margin} from the boundary of the box of half-width {r}; need >= {}",
                r / 4.0
            )));
        }
    }
    Ok(())
}

fn string_product(z: Complex64, strings: &[Complex64]) -> f64 {
    strings.iter().map(|&zj| (z - zj).norm_sqr()).product()
}

fn require_radial_reach(params: &Params, grid: &Grid2D, w: &RadialFunction) -> Result<()> {
    let need = params.epsilon * grid.half_width() * std::f64::consts::SQRT_2;
    if w.r_max() < need {
        return Err(Error::Range(format!("radial profile reaches {} but eps * diagonal = {need}", w.r_max())));
    }
    Ok(())
}

/// Ansatz with vanishing remainder: `u₀ = ln ρ^I + ε²w₁(ε|z|)`,
/// `η₀ = ln ρ^II + ε²w₂(ε|z|)`; `u₀` holds [`STRING_SENTINEL`] on string nodes.
pub fn initial_guess(params: &Params, w1: &RadialFunction, w2: &RadialFunction, grid: Grid2D) -> Result<(Field2D, Field2D)> {
    let (u_reg, eta) = initial_guess_regularized(params, w1, w2, grid)?;
    Ok((unregularize(&u_reg, params), eta))
}

/// Same ansatz with `u` already in regularized form, smooth at string nodes.
pub fn initial_guess_regularized(
    params: &Params,
    w1: &RadialFunction,
    w2: &RadialFunction,
    grid: Grid2D,
) -> Result<(Field2D, Field2D)> {
    require_radial_reach(params, &grid, w1)?;
    require_radial_reach(params, &grid, w2)?;
    let prof = Profiles::new(params);
    let e = params.epsilon;
    let e2 = e * e;
    let u = Field2D::from_fn(grid, |z| prof.ln_rho_i_regular(z) + e2 * w1.value_at(e * z.norm()));
    let eta = Field2D::from_fn(grid, |z| prof.ln_rho_ii(z) + e2 * w2.value_at(e * z.norm()));
    Ok((u, eta))
}

/// `U = u − Σ_j ln|z − z_j|²`. On a node that is a string point (where `u`
/// carries no information) `U` is the mean of its four neighbours.
pub fn regularize(u: &Field2D, params: &Params) -> Field2D {
    let grid = *u.grid();
    let mut out = Field2D::zeros(grid);
    let mut string_nodes = Vec::new();
    for j in 0..grid.n() {
        for i in 0..grid.n() {
            let z = grid.z(i, j);
            let p = string_product(z, &params.strings);
            if p == 0.0 {
                string_nodes.push((i, j));
            } else {
                out.set(i, j, u.get(i, j) - p.ln());
            }
        }
    }
    for (i, j) in string_nodes {
        let nb = [(i.wrapping_sub(1), j), (i + 1, j), (i, j.wrapping_sub(1)), (i, j + 1)];
        let vals: Vec<f64> = nb.iter().filter(|(a, b)| *a < grid.n() && *b < grid.n()).map(|&(a, b)| out.get(a, b)).collect();
        out.set(i, j, vals.iter().sum::<f64>() / vals.len() as f64);
    }
    out
}

/// `u = U + Σ_j ln|z − z_j|²`, with [`STRING_SENTINEL`] on string nodes.
pub fn unregularize(u_reg: &Field2D, params: &Params) -> Field2D {
    let grid = *u_reg.grid();
    let mut out = Field2D::zeros(grid);
    for j in 0..grid.n() {
        for i in 0..grid.n() {
            let p = string_product(grid.z(i, j), &params.strings);
            out.set(i, j, if p == 0.0 { STRING_SENTINEL } else { u_reg.get(i, j) + p.ln() });
        }
    }
    out
}

/// Per-node data shared by residual and Jacobian assembly.
struct Nonlinear {
    /// `P e^U`
    pe_u: Vec<f64>,
    /// `e^η`
    e_eta: Vec<f64>,
}

fn string_products(grid: &Grid2D, params: &Params) -> Vec<f64> {
    Field2D::from_fn(*grid, |z| string_product(z, &params.strings)).values().to_vec()
}

fn nonlinear_terms(u_reg: &Field2D, eta: &Field2D, products: &[f64]) -> Result<Nonlinear> {
    let grid = *u_reg.grid();
    let pe_u: Vec<f64> = u_reg.values().par_iter().zip(products).map(|(&v, &p)| p * v.exp()).collect();
    let e_eta: Vec<f64> = eta.values().par_iter().map(|v| v.exp()).collect();
    for (k, (a, b)) in pe_u.iter().zip(&e_eta).enumerate() {
        if !a.is_finite() || !b.is_finite() {
            let (i, j) = grid.ij(k);
            return Err(Error::Numerical(format!("exponential overflow at node ({i}, {j}), z = {}", grid.z(i, j))));
        }
    }
    Ok(Nonlinear { pe_u, e_eta })
}

fn residual_from(u_reg: &Field2D, eta: &Field2D, params: &Params, nl: &Nonlinear) -> (Vec<f64>, Vec<f64>) {
    let grid = u_reg.grid();
    let n = grid.n();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let (l1, l2, l3, l4) = (params.lambda1, params.lambda2, params.lambda3, params.lambda4);
    let u = u_reg.values();
    let e = eta.values();
    let mut r1 = vec![0.0; grid.len()];
    let mut r2 = vec![0.0; grid.len()];
    r1.par_chunks_mut(n).zip(r2.par_chunks_mut(n)).enumerate().for_each(|(j, (row1, row2))| {
        if j == 0 || j == n - 1 {
            return;
        }
        for i in 1..n - 1 {
            let k = i + j * n;
            let lap_u = (u[k - 1] + u[k + 1] + u[k - n] + u[k + n] - 4.0 * u[k]) * inv_h2;
            let lap_e = (e[k - 1] + e[k + 1] + e[k - n] + e[k + n] - 4.0 * e[k]) * inv_h2;
            row1[i] = lap_u + l1 * nl.e_eta[k] + l2 * nl.pe_u[k];
            row2[i] = lap_e + l3 * nl.e_eta[k] + l4 * nl.pe_u[k];
        }
    });
    (r1, r2)
}

/// Interior residuals `Δ_h U + λ₁e^η + λ₂P e^U` and `Δ_h η + λ₃e^η + λ₄P e^U`;
/// boundary rows are zero.
pub fn assemble_residual(u_reg: &Field2D, eta: &Field2D, params: &Params) -> Result<(Field2D, Field2D)> {
    u_reg.check_same_grid(eta)?;
    let grid = *u_reg.grid();
    let nl = nonlinear_terms(u_reg, eta, &string_products(&grid, params))?;
    let (r1, r2) = residual_from(u_reg, eta, params, &nl);
    Ok((Field2D::from_values(grid, r1)?, Field2D::from_values(grid, r2)?))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Relative mismatch between the discrete boundary flux and the interior
/// source integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FluxCheck {
    /// `h² Σ_interior Δ_h f`, which telescopes to a sum over boundary edges.
    pub boundary_flux: f64,
    /// `h² Σ_interior` of the source terms (`λ₁e^η + λ₂Pe^U`, resp.
    /// `λ₃e^η + λ₄Pe^U`).
    pub interior_source: f64,
    pub relative_discrepancy: f64,
}

fn boundary_flux(f: &Field2D) -> f64 {
    let n = f.grid().n();
    let mut acc = 0.0;
    for t in 1..n - 1 {
        acc += f.get(t, 0) - f.get(t, 1);
        acc += f.get(t, n - 1) - f.get(t, n - 2);
        acc += f.get(0, t) - f.get(1, t);
        acc += f.get(n - 1, t) - f.get(n - 2, t);
    }
    acc
}

/// Discrete divergence theorem for both equations.
pub fn flux_consistency(u_reg: &Field2D, eta: &Field2D, params: &Params) -> Result<(FluxCheck, FluxCheck)> {
    u_reg.check_same_grid(eta)?;
    let grid = *u_reg.grid();
    let nl = nonlinear_terms(u_reg, eta, &string_products(&grid, params))?;
    let h2 = grid.h() * grid.h();
    let n = grid.n();
    let (mut s1, mut s2) = (0.0, 0.0);
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let k = grid.index(i, j);
            s1 += params.lambda1 * nl.e_eta[k] + params.lambda2 * nl.pe_u[k];
            s2 += params.lambda3 * nl.e_eta[k] + params.lambda4 * nl.pe_u[k];
        }
    }
    let make = |flux: f64, src: f64| FluxCheck {
        boundary_flux: flux,
        interior_source: src * h2,
        relative_discrepancy: (flux + src * h2).abs() / (src * h2).abs(),
    };
    Ok((make(boundary_flux(u_reg), s1), make(boundary_flux(eta), s2)))
}

/// Outcome of [`newton_solve`] and of the diagnostics run after it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NewtonReport {
    /// Max-norm residual before the first step and after every accepted step.
    pub iterations: Vec<f64>,
    /// Accepted step fractions, one per accepted step.
    pub step_fractions: Vec<f64>,
    pub converged: bool,
    pub flux_u: f64,
    pub flux_eta: f64,
    pub linear_solver: String,
    /// Inner iterations per Newton step (1 per step for a direct solve).
    pub linear_iterations: Vec<usize>,
    /// `sup (|v*₁| + |v*₂|)/ln(e + |z|)`, once extracted.
    pub vstar_bound: Option<f64>,
    pub vstar1_bound: Option<f64>,
    pub vstar2_bound: Option<f64>,
    pub boundary: Option<BoundaryCheck>,
    /// Spread over lattice circles of radius `≤ R/4`; only for string-free
    /// or origin-centred configurations.
    pub angular_variation: Option<f64>,
    /// Only for string sets invariant under `x ↦ −x` and `y ↦ −y`.
    pub reflection_asymmetry: Option<f64>,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        *self.iterations.last().expect("at least the initial residual")
    }

    pub fn steps(&self) -> usize {
        self.iterations.len() - 1
    }

    /// `key=value` lines.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        put("converged", self.converged.to_string());
        put("steps", self.steps().to_string());
        put("final_residual", fmt_f64(self.final_residual()));
        put("residual_history", self.iterations.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","));
        put("step_fractions", self.step_fractions.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","));
        put("linear_solver", self.linear_solver.clone());
        put("linear_iterations", self.linear_iterations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        put("flux_u", fmt_f64(self.flux_u));
        put("flux_eta", fmt_f64(self.flux_eta));
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_else(|| "none".into());
        put("vstar_bound", opt(self.vstar_bound));
        put("vstar1_bound", opt(self.vstar1_bound));
        put("vstar2_bound", opt(self.vstar2_bound));
        if let Some(b) = &self.boundary {
            put("integral_exp_u_box", fmt_f64(b.box_integral_u));
            put("integral_exp_eta_box", fmt_f64(b.box_integral_eta));
            put("integral_exp_u_tail", fmt_f64(b.tail_u));
            put("integral_exp_eta_tail", fmt_f64(b.tail_eta));
            put("decay_exponent_u", fmt_f64(b.exponent_u));
            put("decay_exponent_eta", fmt_f64(b.exponent_eta));
        }
        if let Some(v) = self.angular_variation {
            put("angular_variation", fmt_f64(v));
        }
        if let Some(v) = self.reflection_asymmetry {
            put("reflection_asymmetry", fmt_f64(v));
        }
        s
    }
}

/// Interior-node numbering `(i, j) ↦ (i−1) + (j−1)(n−2)`.
struct Interior {
    n: usize,
    m: usize,
}

impl Interior {
    fn new(n: usize) -> Self {
        Self { n, m: n - 2 }
    }
    fn count(&self) -> usize {
        self.m * self.m
    }
    fn node(&self, q: usize) -> usize {
        let (i, j) = (q % self.m + 1, q / self.m + 1);
        i + j * self.n
    }
}

enum StepSolver {
    Direct { symbolic: Option<SymbolicLu<usize>> },
    Iterative { poisson: PoissonSolver },
}

impl StepSolver {
    fn new(kind: LinearSolver, grid: &Grid2D) -> Self {
        let direct = match kind {
            LinearSolver::Direct => true,
            LinearSolver::Iterative => false,
            LinearSolver::Auto => grid.n() <= DIRECT_SOLVE_MAX_N,
        };
        if direct {
            Self::Direct { symbolic: None }
        } else {
            Self::Iterative { poisson: PoissonSolver::new(grid.n() - 2, grid.h()) }
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Direct { .. } => "sparse_lu",
            Self::Iterative { .. } => "gmres_dst",
        }
    }

    /// Solves `J δ = rhs` on interior unknowns `[δU; δη]`; also returns the
    /// number of inner iterations (1 for a direct solve).
    fn solve(&mut self, grid: &Grid2D, params: &Params, nl: &Nonlinear, rhs: &[f64]) -> Result<(Vec<f64>, usize)> {
        let idx = Interior::new(grid.n());
        let m2 = idx.count();
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        let (l1, l2, l3, l4) = (params.lambda1, params.lambda2, params.lambda3, params.lambda4);
        match self {
            Self::Direct { symbolic } => {
                let mm = idx.m;
                let mut trip = Vec::with_capacity(12 * m2);
                for q in 0..m2 {
                    let k = idx.node(q);
                    let (qi, qj) = (q % mm, q / mm);
                    for (block, shift) in [(0usize, l2 * nl.pe_u[k]), (1, l3 * nl.e_eta[k])] {
                        let row = q + block * m2;
                        trip.push(Triplet::new(row, row, -4.0 * inv_h2 + shift));
                        if qi > 0 {
                            trip.push(Triplet::new(row, row - 1, inv_h2));
                        }
                        if qi + 1 < mm {
                            trip.push(Triplet::new(row, row + 1, inv_h2));
                        }
                        if qj > 0 {
                            trip.push(Triplet::new(row, row - mm, inv_h2));
                        }
                        if qj + 1 < mm {
                            trip.push(Triplet::new(row, row + mm, inv_h2));
                        }
                    }
                    trip.push(Triplet::new(q, q + m2, l1 * nl.e_eta[k]));
                    trip.push(Triplet::new(q + m2, q, l4 * nl.pe_u[k]));
                }
                let mat = SparseColMat::<usize, f64>::try_new_from_triplets(2 * m2, 2 * m2, &trip)
                    .map_err(|e| Error::Numerical(format!("Jacobian assembly failed: {e:?}")))?;
                if symbolic.is_none() {
                    *symbolic = Some(
                        SymbolicLu::try_new(mat.symbolic())
                            .map_err(|e| Error::Numerical(format!("symbolic factorization failed: {e:?}")))?,
                    );
                }
                let lu = Lu::try_new_with_symbolic(symbolic.clone().expect("set above"), mat.as_ref())
                    .map_err(|e| Error::Numerical(format!("Jacobian factorization failed: {e:?}")))?;
                let mut b = Mat::from_fn(2 * m2, 1, |i, _| rhs[i]);
                lu.solve_in_place(b.as_mut());
                let x: Vec<f64> = (0..2 * m2).map(|i| b[(i, 0)]).collect();
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numerical("sparse solve produced non-finite values".into()));
                }
                Ok((x, 1))
            }
            Self::Iterative { poisson } => {
                let mm = idx.m;
                let a11: Vec<f64> = (0..m2).map(|q| l2 * nl.pe_u[idx.node(q)]).collect();
                let a12: Vec<f64> = (0..m2).map(|q| l1 * nl.e_eta[idx.node(q)]).collect();
                let a21: Vec<f64> = (0..m2).map(|q| l4 * nl.pe_u[idx.node(q)]).collect();
                let a22: Vec<f64> = (0..m2).map(|q| l3 * nl.e_eta[idx.node(q)]).collect();
                let lap = |v: &[f64], q: usize| {
                    let (qi, qj) = (q % mm, q / mm);
                    let mut s = -4.0 * v[q];
                    if qi > 0 {
                        s += v[q - 1];
                    }
                    if qi + 1 < mm {
                        s += v[q + 1];
                    }
                    if qj > 0 {
                        s += v[q - mm];
                    }
                    if qj + 1 < mm {
                        s += v[q + mm];
                    }
                    s * inv_h2
                };
                let apply = |v: &[f64], out: &mut [f64]| {
                    let (vu, ve) = v.split_at(m2);
                    let (ou, oe) = out.split_at_mut(m2);
                    ou.par_iter_mut().enumerate().for_each(|(q, o)| *o = lap(vu, q) + a11[q] * vu[q] + a12[q] * ve[q]);
                    oe.par_iter_mut().enumerate().for_each(|(q, o)| *o = lap(ve, q) + a21[q] * vu[q] + a22[q] * ve[q]);
                };
                let precond = |v: &mut [f64]| {
                    let (vu, ve) = v.split_at_mut(m2);
                    poisson.solve(vu);
                    poisson.solve(ve);
                };
                let mut x = vec![0.0; 2 * m2];
                let its = gmres(apply, precond, rhs, &mut x, GmresConfig { restart: 80, max_iterations: 2000, rel_tol: 1e-10 })?;
                Ok((x, its))
            }
        }
    }
}

/// Damped Newton iteration from `(U₀, η₀)` with the boundary values held
/// fixed. Non-convergence is reported through `converged = false`, not an
/// error; errors are reserved for linear-solve breakdown and overflow.
pub fn newton_solve(
    u0: &Field2D,
    eta0: &Field2D,
    params: &Params,
    cfg: &NewtonConfig,
) -> Result<(Field2D, Field2D, NewtonReport)> {
    cfg.validate()?;
    u0.check_same_grid(eta0)?;
    let grid = *u0.grid();
    let products = string_products(&grid, params);
    let idx = Interior::new(grid.n());
    let m2 = idx.count();
    let mut u = u0.clone();
    let mut eta = eta0.clone();
    let mut nl = nonlinear_terms(&u, &eta, &products)?;
    let (mut r1, mut r2) = residual_from(&u, &eta, params, &nl);
    let mut norm = max_abs(&r1).max(max_abs(&r2));
    let mut history = vec![norm];
    let mut fractions = Vec::new();
    let mut linear_iterations = Vec::new();
    let mut solver = StepSolver::new(cfg.linear_solver, &grid);
    let mut converged = norm <= cfg.tol_residual;
    let mut stalled = false;
    while !converged && history.len() <= cfg.max_iter {
        let mut rhs = vec![0.0; 2 * m2];
        for q in 0..m2 {
            let k = idx.node(q);
            rhs[q] = -r1[k];
            rhs[q + m2] = -r2[k];
        }
        let (delta, its) = solver.solve(&grid, params, &nl, &rhs)?;
        linear_iterations.push(its);
        let mut t = 1.0;
        loop {
            let mut tu = u.clone();
            let mut te = eta.clone();
            for q in 0..m2 {
                let k = idx.node(q);
                tu.values_mut()[k] += t * delta[q];
                te.values_mut()[k] += t * delta[q + m2];
            }
            let trial = nonlinear_terms(&tu, &te, &products)
                .ok()
                .map(|tnl| {
                    let (t1, t2) = residual_from(&tu, &te, params, &tnl);
                    let tn = max_abs(&t1).max(max_abs(&t2));
                    (tnl, t1, t2, tn)
                })
                .filter(|(_, _, _, tn)| tn.is_finite());
            if let Some((tnl, t1, t2, tn)) = trial {
                if tn < norm {
                    u = tu;
                    eta = te;
                    nl = tnl;
                    r1 = t1;
                    r2 = t2;
                    norm = tn;
                    break;
                }
            }
            t *= cfg.damping;
            if t < cfg.min_step {
                stalled = true;
                break;
            }
        }
        if stalled {
            break;
        }
        history.push(norm);
        fractions.push(t);
        converged = norm <= cfg.tol_residual;
    }
    let (fu, fe) = flux_consistency(&u, &eta, params)?;
    let report = NewtonReport {
        iterations: history,
        step_fractions: fractions,
        converged,
        flux_u: fu.relative_discrepancy,
        flux_eta: fe.relative_discrepancy,
        linear_solver: solver.name().into(),
        linear_iterations,
        vstar_bound: None,
        vstar1_bound: None,
        vstar2_bound: None,
        boundary: None,
        angular_variation: None,
        reflection_asymmetry: None,
    };
    Ok((u, eta, report))
}

/// `∫e^u`, `∫e^η` over the box plus power-law tail estimates for the
/// exterior of the box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryCheck {
    pub box_integral_u: f64,
    pub box_integral_eta: f64,
    pub tail_u: f64,
    pub tail_eta: f64,
    /// Fitted `p` in `e^u ≈ A|z|^p` on the outer frame of the box.
    pub exponent_u: f64,
    pub exponent_eta: f64,
}

impl BoundaryCheck {
    pub fn total_u(&self) -> f64 {
        self.box_integral_u + self.tail_u
    }

    pub fn total_eta(&self) -> f64 {
        self.box_integral_eta + self.tail_eta
    }
}

/// Fitted exponents at or above this value are treated as non-integrable.
pub const CRITICAL_EXPONENT: f64 = -2.1;

/// Least-squares `ln v ≈ c + p ln|z|` over nodes with `max(|x|,|y|) ≥ 0.8R`.
fn fit_frame_decay(ln_values: &Field2D) -> (f64, f64) {
    let g = ln_values.grid();
    let r = g.half_width();
    let mut pts = Vec::new();
    for j in 0..g.n() {
        for i in 0..g.n() {
            let z = g.z(i, j);
            let v = ln_values.get(i, j);
            if z.re.abs().max(z.im.abs()) >= 0.8 * r && v.is_finite() && v > STRING_SENTINEL {
                pts.push((z.norm().ln(), v));
            }
        }
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let p = sxy / sxx;
    (my - p * mx, p)
}

/// `∫_{ℝ² ∖ [−R,R]²} |z|^p dx = 8∫₀^{π/4} (R/cos θ)^{p+2}/(−(p+2)) dθ`.
fn exterior_power_integral(r: f64, p: f64) -> Result<f64> {
    let q = integrate(|t: f64| (r / t.cos()).powf(p + 2.0), 0.0, PI / 4.0, Tolerance::default())?;
    Ok(8.0 * q.value / (-(p + 2.0)))
}

/// Integrability check for `e^u` and `e^η` (fields in regularized form).
pub fn verify_boundary_condition(u_reg: &Field2D, eta: &Field2D, params: &Params) -> Result<BoundaryCheck> {
    u_reg.check_same_grid(eta)?;
    let grid = *u_reg.grid();
    let products = string_products(&grid, params);
    let ln_eu = Field2D::from_values(
        grid,
        u_reg.values().iter().zip(&products).map(|(&v, &p)| if p == 0.0 { f64::NEG_INFINITY } else { v + p.ln() }).collect(),
    )?;
    let eu = ln_eu.map(f64::exp);
    let eeta = eta.map(f64::exp);
    let (cu, pu) = fit_frame_decay(&ln_eu);
    let (ce, pe) = fit_frame_decay(eta);
    for (name, p) in [("e^u", pu), ("e^eta", pe)] {
        if !(p < CRITICAL_EXPONENT) {
            return Err(Error::Numerical(format!(
                "{name} decays like |z|^{p:.3} near the boundary; not integrable (need < {CRITICAL_EXPONENT})"
            )));
        }
    }
    let r = grid.half_width();
    Ok(BoundaryCheck {
        box_integral_u: eu.integrate(),
        box_integral_eta: eeta.integrate(),
        tail_u: cu.exp() * exterior_power_integral(r, pu)?,
        tail_eta: ce.exp() * exterior_power_integral(r, pe)?,
        exponent_u: pu,
        exponent_eta: pe,
    })
}

/// `v*₁ = (U − ln ρ^I_reg − ε²w₁(ε|z|))/ε²`, `v*₂ = (η − ln ρ^II − ε²w₂(ε|z|))/ε²`
/// (fields in regularized form), and `sup (|v*₁| + |v*₂|)/ln(e + |z|)`.
pub fn extract_vstar(
    u_reg: &Field2D,
    eta: &Field2D,
    params: &Params,
    w1: &RadialFunction,
    w2: &RadialFunction,
) -> Result<(Field2D, Field2D, f64)> {
    let (a1, a2) = initial_guess_regularized(params, w1, w2, *u_reg.grid())?;
    let e2 = params.epsilon * params.epsilon;
    let v1 = u_reg.zip_map(&a1, |x, y| (x - y) / e2)?;
    let v2 = eta.zip_map(&a2, |x, y| (x - y) / e2)?;
    let (b, _, _) = vstar_bounds(&v1, &v2);
    Ok((v1, v2, b))
}

/// `(sup (|v₁|+|v₂|)/ln(e+|z|), sup |v₁|/ln(e+|z|), sup |v₂|/ln(e+|z|))`.
pub fn vstar_bounds(v1: &Field2D, v2: &Field2D) -> (f64, f64, f64) {
    let g = v1.grid();
    let mut out = (0.0f64, 0.0f64, 0.0f64);
    for j in 0..g.n() {
        for i in 0..g.n() {
            let w = 1.0 / (std::f64::consts::E + g.z(i, j).norm()).ln();
            let (a, b) = (v1.get(i, j).abs(), v2.get(i, j).abs());
            out.0 = out.0.max((a + b) * w);
            out.1 = out.1.max(a * w);
            out.2 = out.2.max(b * w);
        }
    }
    out
}

/// Largest spread of `field` over node sets that lie on a common circle
/// about the origin (Pythagorean triples scaled by the node index), for
/// circles of radius at most `max_radius`.
pub fn angular_variation(field: &Field2D, max_radius: f64) -> f64 {
    let g = field.grid();
    let c = (g.n() / 2) as isize;
    let h = g.h();
    let mut worst = 0.0f64;
    for (a, b, hyp) in [(3isize, 4isize, 5isize), (5, 12, 13), (8, 15, 17), (7, 24, 25), (20, 21, 29)] {
        let mut k = 1isize;
        while (hyp * k) as f64 * h <= max_radius && c + hyp * k < g.n() as isize {
            let (a, b, hyp) = (a * k, b * k, hyp * k);
            let mut pts = vec![(hyp, 0), (0, hyp), (-hyp, 0), (0, -hyp)];
            for (x, y) in [(a, b), (b, a)] {
                for (sx, sy) in [(1, 1), (-1, 1), (1, -1), (-1, -1)] {
                    pts.push((sx * x, sy * y));
                }
            }
            let vals: Vec<f64> = pts.iter().map(|&(x, y)| field.get((c + x) as usize, (c + y) as usize)).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max(hi - lo);
            k += 1;
        }
    }
    worst
}

/// Max deviation of `field` from its mirror images under `x ↦ −x`,
/// `y ↦ −y` and `z ↦ −z`.
pub fn reflection_asymmetry(field: &Field2D) -> f64 {
    let n = field.grid().n();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let v = field.get(i, j);
            worst = worst
                .max((v - field.get(n - 1 - i, j)).abs())
                .max((v - field.get(i, n - 1 - j)).abs())
                .max((v - field.get(n - 1 - i, n - 1 - j)).abs());
        }
    }
    worst
}

/// Whether the string multiset is invariant under `x ↦ −x` and `y ↦ −y`.
pub fn is_reflection_symmetric(strings: &[Complex64]) -> bool {
    let same = |image: &dyn Fn(Complex64) -> Complex64| {
        let mut a: Vec<(f64, f64)> = strings.iter().map(|z| (z.re, z.im)).collect();
        let mut b: Vec<(f64, f64)> = strings.iter().map(|&z| image(z)).map(|z| (z.re, z.im)).collect();
        a.sort_by(|p, q| p.partial_cmp(q).expect("finite"));
        b.sort_by(|p, q| p.partial_cmp(q).expect("finite"));
        a.iter().zip(&b).all(|(p, q)| (p.0 - q.0).abs() < 1e-12 && (p.1 - q.1).abs() < 1e-12)
    };
    same(&|z: Complex64| Complex64::new(-z.re, z.im)) && same(&|z: Complex64| Complex64::new(z.re, -z.im))
}

/// The grid with half-width `1.25R` and the same spacing, if `1.25(n−1)` is
/// an even integer.
pub fn grown_grid(grid: &Grid2D) -> Option<Grid2D> {
    let cells = grid.n() - 1;
    cells.is_multiple_of(8).then(|| Grid2D::new(1.25 * grid.half_width(), cells / 4 * 5 + 1).expect("valid by construction"))
}

/// Whole-plane integrals on the original and the grown box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryStability {
    pub base: BoundaryCheck,
    pub grown: BoundaryCheck,
    /// Relative change of `∫e^u` (box plus tail).
    pub change_u: f64,
    pub change_eta: f64,
}

impl BoundaryStability {
    pub fn is_stable(&self, tol: f64) -> bool {
        self.change_u < tol && self.change_eta < tol
    }
}

/// Tolerance on the relative change of the integrals under box growth.
pub const BOX_GROWTH_RTOL: f64 = 1e-2;

/// Repeats the solve on [`grown_grid`] and compares the integrability
/// estimates with `base`.
pub fn box_growth_stability(
    params: &Params,
    grid: &Grid2D,
    base: &BoundaryCheck,
    w1: &RadialFunction,
    w2: &RadialFunction,
    cfg: &NewtonConfig,
) -> Result<BoundaryStability> {
    let grown_grid = grown_grid(grid).ok_or_else(|| {
        Error::Config(format!("n - 1 = {} must be divisible by 8 to grow the box at fixed spacing", grid.n() - 1))
    })?;
    let (u0, eta0) = initial_guess_regularized(params, w1, w2, grown_grid)?;
    let (u, eta, report) = newton_solve(&u0, &eta0, params, cfg)?;
    if !report.converged {
        return Err(Error::Numerical(format!("solve on the grown box did not converge: {:e}", report.final_residual())));
    }
    let grown = verify_boundary_condition(&u, &eta, params)?;
    Ok(BoundaryStability {
        base: *base,
        grown,
        change_u: (grown.total_u() - base.total_u()).abs() / base.total_u(),
        change_eta: (grown.total_eta() - base.total_eta()).abs() / base.total_eta(),
    })
}

/// Everything produced by [`solve`].
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    /// `u` with [`STRING_SENTINEL`] on string nodes.
    pub u: Field2D,
    pub u_reg: Field2D,
    pub eta: Field2D,
    pub vstar1: Field2D,
    pub vstar2: Field2D,
    pub report: NewtonReport,
}

/// Initial guess, Newton iteration, and the post-solve diagnostics. The
/// boundary-condition check is attempted only after convergence; its
/// failure leaves `report.boundary` empty.
pub fn solve(
    params: &Params,
    grid: Grid2D,
    w1: &RadialFunction,
    w2: &RadialFunction,
    cfg: &NewtonConfig,
) -> Result<SolveOutcome> {
    check_grid(params, &grid)?;
    let (u0, eta0) = initial_guess_regularized(params, w1, w2, grid)?;
    let (u_reg, eta, mut report) = newton_solve(&u0, &eta0, params, cfg)?;
    let (vstar1, vstar2, bound) = extract_vstar(&u_reg, &eta, params, w1, w2)?;
    let (_, b1, b2) = vstar_bounds(&vstar1, &vstar2);
    report.vstar_bound = Some(bound);
    report.vstar1_bound = Some(b1);
    report.vstar2_bound = Some(b2);
    if report.converged {
        report.boundary = verify_boundary_condition(&u_reg, &eta, params).ok();
    }
    if params.strings.iter().all(|z| z.norm() == 0.0) {
        let r = grid.half_width() / 4.0;
        report.angular_variation = Some(angular_variation(&u_reg, r).max(angular_variation(&eta, r)));
    }
    if is_reflection_symmetric(&params.strings) {
        report.reflection_asymmetry = Some(reflection_asymmetry(&u_reg).max(reflection_asymmetry(&eta)));
    }
    Ok(SolveOutcome { u: unregularize(&u_reg, params), u_reg, eta, vstar1, vstar2, report })
}
