//! Discrete versions of the linearized operators: `L = Δ + ρ` on radial and
//! planar grids, the coupled operator `𝒜`, the bounded kernel `{φ₊, φ₋, φ₀}`,
//! projection onto the image of `L`, and finite-difference checks of the
//! `a`-derivatives of the scaled profiles.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field2D, Grid2D};
use crate::io::fmt_f64;
use crate::params::Params;
use crate::profiles::{phi_kernel, rho1, rho2, Kernel, Profiles};
use crate::radial::RadialFunction;

/// Weight exponent of the diagnostic weighted norms.
pub const WEIGHT_EXPONENT: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Radial,
    Planar,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GridDescriptor {
    Radial(Vec<f64>),
    Planar(Grid2D),
}

/// How rows on the edge of the grid are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryRule {
    /// Edge rows are not evaluated; their output is zero and they are
    /// reported by [`DiscreteOperator::is_boundary`].
    Excluded,
}

/// `Δ + V` with `Δ` the 5-point (planar) or 3-point nonuniform radial
/// (`∂²_r + r⁻¹∂_r`) stencil and `V` a diagonal potential.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteOperator {
    kind: OperatorKind,
    grid: GridDescriptor,
    potential: Vec<f64>,
    boundary: BoundaryRule,
}

/// `λ₂ρ₁ = 8(N+1)²r^{2N}/(1+r^{2N+2})²` with the leading 8 replaced by
/// `coefficient`.
fn potential_with(z: Complex64, n: usize, coefficient: f64) -> f64 {
    let r2 = z.norm_sqr();
    let np1 = n as f64 + 1.0;
    let big = r2.powi(n as i32 + 1);
    coefficient * np1 * np1 * r2.powi(n as i32) / ((1.0 + big) * (1.0 + big))
}

impl DiscreteOperator {
    /// `L = Δ + λ₂ρ₁` on a planar grid.
    pub fn planar_l(params: &Params, grid: Grid2D) -> Self {
        Self::planar_l_with_coefficient(params, grid, 8.0)
    }

    /// `L` with the leading coefficient of `λ₂ρ₁` replaced; `8` is the true
    /// operator. Exists so checks can be exercised against a corrupted one.
    #[doc(hidden)]
    pub fn planar_l_with_coefficient(params: &Params, grid: Grid2D, coefficient: f64) -> Self {
        let n = params.n();
        let potential = Field2D::from_fn(grid, |z| potential_with(z, n, coefficient)).values().to_vec();
        Self { kind: OperatorKind::Planar, grid: GridDescriptor::Planar(grid), potential, boundary: BoundaryRule::Excluded }
    }

    pub fn planar_with_potential(potential: &Field2D) -> Self {
        Self {
            kind: OperatorKind::Planar,
            grid: GridDescriptor::Planar(*potential.grid()),
            potential: potential.values().to_vec(),
            boundary: BoundaryRule::Excluded,
        }
    }

    /// `L = ∂²_r + r⁻¹∂_r + λ₂ρ₁` on radial nodes.
    pub fn radial_l(params: &Params, nodes: &[f64]) -> Result<Self> {
        if nodes.len() < 3 || nodes.windows(2).any(|w| !(w[1] > w[0])) || !(nodes[0] > 0.0) {
            return Err(Error::InvalidParams("radial operator needs >= 3 increasing positive nodes".into()));
        }
        let n = params.n();
        let potential = nodes.iter().map(|&r| potential_with(Complex64::new(r, 0.0), n, 8.0)).collect();
        Ok(Self {
            kind: OperatorKind::Radial,
            grid: GridDescriptor::Radial(nodes.to_vec()),
            potential,
            boundary: BoundaryRule::Excluded,
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn grid(&self) -> &GridDescriptor {
        &self.grid
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn boundary_rule(&self) -> BoundaryRule {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.potential.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potential.is_empty()
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        match &self.grid {
            GridDescriptor::Radial(nodes) => k == 0 || k + 1 == nodes.len(),
            GridDescriptor::Planar(g) => {
                let (i, j) = g.ij(k);
                g.is_boundary(i, j)
            }
        }
    }

    /// Stencil action on raw samples; edge rows are zero.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.len() {
            return Err(Error::GridMismatch(format!("operator has {} rows, input has {}", self.len(), v.len())));
        }
        let mut out = vec![0.0; v.len()];
        match &self.grid {
            GridDescriptor::Planar(g) => {
                let n = g.n();
                let inv_h2 = 1.0 / (g.h() * g.h());
                for j in 1..n - 1 {
                    for i in 1..n - 1 {
                        let k = i + j * n;
                        let lap = (v[k - 1] + v[k + 1] + v[k - n] + v[k + n] - 4.0 * v[k]) * inv_h2;
                        out[k] = lap + self.potential[k] * v[k];
                    }
                }
            }
            GridDescriptor::Radial(r) => {
                for i in 1..r.len() - 1 {
                    let (row, _) = radial_row(r, i);
                    out[i] = row[0] * v[i - 1] + row[1] * v[i] + row[2] * v[i + 1] + self.potential[i] * v[i];
                }
            }
        }
        Ok(out)
    }

    /// Nonzero entries `(row, col, value)` over all non-edge rows, including
    /// couplings into edge columns.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::new();
        match &self.grid {
            GridDescriptor::Planar(g) => {
                let n = g.n();
                let inv_h2 = 1.0 / (g.h() * g.h());
                for j in 1..n - 1 {
                    for i in 1..n - 1 {
                        let k = i + j * n;
                        t.push((k, k, -4.0 * inv_h2 + self.potential[k]));
                        for nb in [k - 1, k + 1, k - n, k + n] {
                            t.push((k, nb, inv_h2));
                        }
                    }
                }
            }
            GridDescriptor::Radial(r) => {
                for i in 1..r.len() - 1 {
                    let (row, _) = radial_row(r, i);
                    t.push((i, i - 1, row[0]));
                    t.push((i, i, row[1] + self.potential[i]));
                    t.push((i, i + 1, row[2]));
                }
            }
        }
        t
    }
}

/// Weights of `∂²_r + r⁻¹∂_r` at node `i` on `(i−1, i, i+1)`.
fn radial_row(r: &[f64], i: usize) -> ([f64; 3], f64) {
    let hm = r[i] - r[i - 1];
    let hp = r[i + 1] - r[i];
    let denom = hm * hp * (hm + hp);
    let d2 = [2.0 * hp / denom, -2.0 * (hm + hp) / denom, 2.0 * hm / denom];
    let d1 = [-hp * hp / denom, (hp * hp - hm * hm) / denom, hm * hm / denom];
    let inv_r = 1.0 / r[i];
    ([d2[0] + inv_r * d1[0], d2[1] + inv_r * d1[1], d2[2] + inv_r * d1[2]], inv_r)
}

pub fn apply_l(op: &DiscreteOperator, v: &Field2D) -> Result<Field2D> {
    match op.grid() {
        GridDescriptor::Planar(g) if g == v.grid() => Field2D::from_values(*g, op.apply(v.values())?),
        _ => Err(Error::GridMismatch("operator and field grids differ".into())),
    }
}

pub fn apply_l_radial(op: &DiscreteOperator, v: &RadialFunction) -> Result<Vec<f64>> {
    match op.grid() {
        GridDescriptor::Radial(nodes) if nodes.as_slice() == v.nodes() => op.apply(v.values()),
        _ => Err(Error::GridMismatch("operator and radial function nodes differ".into())),
    }
}

/// `(φ₊, φ₋, φ₀)` at `z`, from `z^{N+1}` without trigonometry.
pub fn kernel_triple(z: Complex64, n: usize) -> (f64, f64, f64) {
    let w = z.powi(n as i32 + 1);
    let big = w.norm_sqr();
    let d = 1.0 + big;
    (w.re / d, w.im / d, (1.0 - big) / d)
}

/// `φ₊`, `φ₋` or `φ₀` at `z`.
pub fn kernel_value(z: Complex64, which: Kernel, n: usize) -> f64 {
    let (p, m, o) = kernel_triple(z, n);
    match which {
        Kernel::Plus => p,
        Kernel::Minus => m,
        Kernel::Zero => o,
    }
}

/// Samples of `φ₊, φ₋, φ₀` on a planar grid.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelBasis {
    pub phi_plus: Field2D,
    pub phi_minus: Field2D,
    pub phi_zero: Field2D,
}

impl KernelBasis {
    pub fn sample(grid: Grid2D, n: usize) -> Self {
        Self {
            phi_plus: Field2D::from_fn(grid, |z| kernel_value(z, Kernel::Plus, n)),
            phi_minus: Field2D::from_fn(grid, |z| kernel_value(z, Kernel::Minus, n)),
            phi_zero: Field2D::from_fn(grid, |z| kernel_value(z, Kernel::Zero, n)),
        }
    }

    pub fn get(&self, which: Kernel) -> &Field2D {
        match which {
            Kernel::Plus => &self.phi_plus,
            Kernel::Minus => &self.phi_minus,
            Kernel::Zero => &self.phi_zero,
        }
    }
}

/// `∫₀^{2π} a(r, θ) b(r, θ) dθ` by the `samples`-point trapezoid rule,
/// exact for trigonometric polynomials of degree below `samples`.
pub fn angular_pairing(r: f64, n: usize, a: Kernel, b: Option<Kernel>, samples: usize) -> f64 {
    let dt = 2.0 * std::f64::consts::PI / samples as f64;
    (0..samples)
        .map(|k| {
            let t = k as f64 * dt;
            phi_kernel(r, t, a, n) * b.map_or(1.0, |b| phi_kernel(r, t, b, n))
        })
        .sum::<f64>()
        * dt
}

/// Discrete `L²` pairing `∫ a·b dx` (trapezoid).
pub fn pairing(a: &Field2D, b: &Field2D) -> Result<f64> {
    Ok(a.zip_map(b, |x, y| x * y)?.integrate())
}

/// `‖f‖_{X_α} = (∫(1 + |x|^{2+α}) f² dx)^{1/2}` with `α = 1/4`.
pub fn weighted_norm_x(f: &Field2D) -> f64 {
    let g = *f.grid();
    let w = Field2D::from_fn(g, |z| 1.0 + z.norm().powf(2.0 + WEIGHT_EXPONENT));
    w.zip_map(f, |wi, fi| wi * fi * fi).expect("same grid").integrate().sqrt()
}

/// `‖u‖_{Y_α}² = ‖Δu‖²_{X_α} + ‖u/(1 + |x|^{1+α/2})‖²_{L²}`, `Δ` discrete and
/// zero on edge rows.
pub fn weighted_norm_y(u: &Field2D) -> f64 {
    let g = *u.grid();
    let zero = Field2D::zeros(g);
    let lap = apply_l(&DiscreteOperator::planar_with_potential(&zero), u).expect("same grid");
    let damp = Field2D::from_fn(g, |z| 1.0 / (1.0 + z.norm().powf(1.0 + WEIGHT_EXPONENT / 2.0)));
    let tail = damp.zip_map(u, |d, v| (d * v) * (d * v)).expect("same grid").integrate();
    (weighted_norm_x(&lap).powi(2) + tail).sqrt()
}

/// Output of [`project_to_image`].
#[derive(Clone, Debug, PartialEq)]
pub struct ImageProjection {
    pub field: Field2D,
    pub alpha1: f64,
    pub alpha2: f64,
}

/// Finds `(α₁, α₂)` with `∫[f₁ − w(α₁φ₊ + α₂φ₋)]φ± dx = 0` for the discrete
/// pairing, `w = pairing_weight`, and returns the corrected field.
pub fn project_to_image(
    f1: &Field2D,
    pairing_weight: &Field2D,
    kernels: &KernelBasis,
    ipm: (f64, f64),
) -> Result<ImageProjection> {
    if ipm.0.abs() < 1e-12 || ipm.1.abs() < 1e-12 {
        return Err(Error::Degenerate(format!(
            "pairing integrals ({:e}, {:e}) vanish; the projection is undetermined",
            ipm.0, ipm.1
        )));
    }
    f1.check_same_grid(pairing_weight)?;
    f1.check_same_grid(&kernels.phi_plus)?;
    let wp = pairing_weight.zip_map(&kernels.phi_plus, |a, b| a * b)?;
    let wm = pairing_weight.zip_map(&kernels.phi_minus, |a, b| a * b)?;
    let m11 = pairing(&wp, &kernels.phi_plus)?;
    let m12 = pairing(&wm, &kernels.phi_plus)?;
    let m21 = pairing(&wp, &kernels.phi_minus)?;
    let m22 = pairing(&wm, &kernels.phi_minus)?;
    let b1 = pairing(f1, &kernels.phi_plus)?;
    let b2 = pairing(f1, &kernels.phi_minus)?;
    let det = m11 * m22 - m12 * m21;
    if !(det.abs() > 1e-14 * (m11.abs() * m22.abs()).max(f64::MIN_POSITIVE)) || det == 0.0 {
        return Err(Error::Degenerate(format!("discrete pairing matrix is singular (det {det:e})")));
    }
    let alpha1 = (b1 * m22 - b2 * m12) / det;
    let alpha2 = (m11 * b2 - m21 * b1) / det;
    let field = Field2D::from_values(
        *f1.grid(),
        f1.values()
            .iter()
            .zip(wp.values().iter().zip(wm.values()))
            .map(|(&f, (&p, &m))| f - alpha1 * p - alpha2 * m)
            .collect(),
    )?;
    Ok(ImageProjection { field, alpha1, alpha2 })
}

/// `4(λ₂w₁ρ₁ + λ₁ρ₂)` sampled on a grid (`w₁` interpolated radially).
pub fn pairing_weight(params: &Params, w1: &RadialFunction, grid: Grid2D) -> Result<Field2D> {
    require_radial_range(w1, &grid)?;
    Ok(Field2D::from_fn(grid, |z| {
        let r = z.norm();
        4.0 * (params.lambda2 * w1.value_at(r) * rho1(r, params) + params.lambda1 * rho2(r, params))
    }))
}

fn require_radial_range(w1: &RadialFunction, grid: &Grid2D) -> Result<()> {
    let diag = grid.half_width() * std::f64::consts::SQRT_2;
    if w1.r_max() < diag {
        return Err(Error::Range(format!("w1 reaches r = {} but the grid needs {diag}", w1.r_max())));
    }
    Ok(())
}

/// `(𝒜₁, 𝒜₂)[ν₁, ν₂, α]` with
/// `𝒜₁ = Δν₁ + λ₂ρ₁ν₁ − 4(λ₂w₁ρ₁ + λ₁ρ₂)(φ₊α₁ + φ₋α₂)` and
/// `𝒜₂ = Δν₂ + λ₄ρ₁ν₁ − 4(λ₄w₁ρ₁ + λ₃ρ₂)(φ₊α₁ + φ₋α₂)`; edge rows are zero.
pub fn apply_a(
    nu1: &Field2D,
    nu2: &Field2D,
    alpha: (f64, f64),
    params: &Params,
    w1: &RadialFunction,
) -> Result<(Field2D, Field2D)> {
    nu1.check_same_grid(nu2)?;
    let grid = *nu1.grid();
    let n = params.n();
    let zero = Field2D::zeros(grid);
    let lap = DiscreteOperator::planar_with_potential(&zero);
    let lap1 = lap.apply(nu1.values())?;
    let lap2 = lap.apply(nu2.values())?;
    let uses_w1 = alpha != (0.0, 0.0);
    if uses_w1 {
        require_radial_range(w1, &grid)?;
    }
    let mut a1 = vec![0.0; grid.len()];
    let mut a2 = vec![0.0; grid.len()];
    let (l1, l2, l3, l4) = (params.lambda1, params.lambda2, params.lambda3, params.lambda4);
    for j in 1..grid.n() - 1 {
        for i in 1..grid.n() - 1 {
            let k = grid.index(i, j);
            let z = grid.z(i, j);
            let r = z.norm();
            let p1 = rho1(r, params);
            let v1 = nu1.values()[k];
            let (mut s1, mut s2) = (0.0, 0.0);
            if uses_w1 {
                let (pp, pm, _) = kernel_triple(z, n);
                let dir = pp * alpha.0 + pm * alpha.1;
                let w = w1.value_at(r);
                let p2 = rho2(r, params);
                s1 = 4.0 * (l2 * w * p1 + l1 * p2) * dir;
                s2 = 4.0 * (l4 * w * p1 + l3 * p2) * dir;
            }
            a1[k] = lap1[k] + l2 * p1 * v1 - s1;
            a2[k] = lap2[k] + l4 * p1 * v1 - s2;
        }
    }
    Ok((Field2D::from_values(grid, a1)?, Field2D::from_values(grid, a2)?))
}

/// One row of a grid-refinement table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub norm: f64,
    /// `norm(previous h) / norm(this h)`; absent on the first row.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn push(&mut self, h: f64, norm: f64) {
        let ratio = self.rows.last().map(|prev| prev.norm / norm);
        self.rows.push(ConvergenceRow { h, norm, ratio });
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.ratio).collect()
    }

    /// Whether every ratio lies within `tol` (relative) of `4`.
    pub fn is_second_order(&self, tol: f64) -> bool {
        let r = self.ratios();
        !r.is_empty() && r.iter().all(|q| (q / 4.0 - 1.0).abs() <= tol)
    }

    /// CSV `h,norm,ratio`; the first row has an empty ratio.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "h,norm,ratio")?;
        for row in &self.rows {
            let ratio = row.ratio.map(fmt_f64).unwrap_or_default();
            writeln!(w, "{},{},{}", fmt_f64(row.h), fmt_f64(row.norm), ratio)?;
        }
        Ok(())
    }
}

/// Test function for the `L` identity checked by [`planar_convergence`]: `1/(16(1+r^{2N+2})²)`.
pub fn l_identity_input(z: Complex64, n: usize) -> f64 {
    let big = z.norm_sqr().powi(n as i32 + 1);
    1.0 / (16.0 * (1.0 + big) * (1.0 + big))
}

/// `(N+1)² r^{4N+2}/(1+r^{2N+2})⁴`.
pub fn l_identity_output(z: Complex64, n: usize) -> f64 {
    let r2 = z.norm_sqr();
    let big = r2.powi(n as i32 + 1);
    let np1 = n as f64 + 1.0;
    np1 * np1 * r2.powi(2 * n as i32 + 1) / (1.0 + big).powi(4)
}

/// Refinement table of `max |L v − target|` over `|x|, |y| ≤ interior_half`
/// on boxes of half-width `half_width`.
pub fn planar_convergence(
    params: &Params,
    half_width: f64,
    spacings: &[f64],
    interior_half: f64,
    v: impl Fn(Complex64) -> f64,
    target: impl Fn(Complex64) -> f64,
) -> Result<ConvergenceTable> {
    planar_convergence_with_coefficient(params, half_width, spacings, interior_half, v, target, 8.0)
}

#[doc(hidden)]
pub fn planar_convergence_with_coefficient(
    params: &Params,
    half_width: f64,
    spacings: &[f64],
    interior_half: f64,
    v: impl Fn(Complex64) -> f64,
    target: impl Fn(Complex64) -> f64,
    coefficient: f64,
) -> Result<ConvergenceTable> {
    let mut table = ConvergenceTable::default();
    for &h in spacings {
        let grid = Grid2D::with_spacing(half_width, h)?;
        let op = DiscreteOperator::planar_l_with_coefficient(params, grid, coefficient);
        let field = Field2D::from_fn(grid, &v);
        let mut lv = apply_l(&op, &field)?;
        drop(field);
        let n = grid.n();
        for j in 0..n {
            for i in 0..n {
                let k = grid.index(i, j);
                let t = target(grid.z(i, j));
                lv.values_mut()[k] -= t;
            }
        }
        table.push(h, lv.max_abs_in_box(interior_half));
    }
    Ok(table)
}

/// Refinement table for `L φ = 0`, `φ ∈ {φ₊, φ₋, φ₀}`.
pub fn kernel_convergence(
    params: &Params,
    which: Kernel,
    half_width: f64,
    spacings: &[f64],
    interior_half: f64,
) -> Result<ConvergenceTable> {
    let n = params.n();
    planar_convergence(params, half_width, spacings, interior_half, |z| kernel_value(z, which, n), |_| 0.0)
}

/// One `ε` row of [`check_da_limits`]: max deviations of the finite-difference
/// `a`-derivatives from their limits over the probe set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DaRow {
    pub epsilon: f64,
    pub g1_a1: f64,
    pub g1_a2: f64,
    pub g2_a1: f64,
    pub g2_a2: f64,
}

impl DaRow {
    pub fn columns(&self) -> [f64; 4] {
        [self.g1_a1, self.g1_a2, self.g2_a1, self.g2_a2]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DaTable {
    pub rows: Vec<DaRow>,
    pub step: f64,
    pub probes: usize,
    /// Max `|limit|` over probes.
    pub limit_scale: f64,
}

impl DaTable {
    /// Whether each of the four deviation columns strictly decreases down
    /// the table.
    pub fn is_monotone_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].columns().iter().zip(w[1].columns()).all(|(a, b)| b < *a))
    }

    /// Finite-difference truncation level, `1e-6·limit_scale`.
    pub fn noise_floor(&self) -> f64 {
        1e-6 * self.limit_scale
    }

    /// Like [`DaTable::is_monotone_decreasing`], except that consecutive
    /// entries both at or below [`DaTable::noise_floor`] count as converged.
    /// This happens for `N = 0`, where shifting `a` is an exact translation.
    pub fn is_converging(&self) -> bool {
        let floor = self.noise_floor();
        self.rows
            .windows(2)
            .all(|w| w[0].columns().iter().zip(w[1].columns()).all(|(a, b)| b < *a || (*a <= floor && b <= floor)))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epsilon,gI_a1,gI_a2,gII_a1,gII_a2")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", fmt_f64(r.epsilon), fmt_f64(r.g1_a1), fmt_f64(r.g1_a2), fmt_f64(r.g2_a1), fmt_f64(r.g2_a2))?;
        }
        Ok(())
    }
}

/// Twelve probe points on three circles, away from the real axis.
pub fn default_da_probes() -> Vec<Complex64> {
    let mut v = Vec::new();
    for r in [0.6, 1.0, 1.7] {
        for t in [0.3f64, 1.2, 2.5, 4.0] {
            v.push(Complex64::from_polar(r, t));
        }
    }
    v
}

/// Limits of `∂g/∂a` at `a = 0` as `ε → 0`: `(−4ρ₁φ₊, −4ρ₁φ₋, −2κρ₂φ₊, −2κρ₂φ₋)`
/// with `κ = 2λ₄/λ₂`.
pub fn da_limits(z: Complex64, params: &Params) -> [f64; 4] {
    let r = z.norm();
    let (pp, pm, _) = kernel_triple(z, params.n());
    let p1 = rho1(r, params);
    let p2 = rho2(r, params);
    let k = params.kappa();
    [-4.0 * p1 * pp, -4.0 * p1 * pm, -2.0 * k * p2 * pp, -2.0 * k * p2 * pm]
}

/// Central differences of `(g^I, g^II)` in `a₁` and `a₂` at `a = 0` for each
/// `ε`, compared with [`da_limits`].
///
/// The step defaults to `1e-3·min(ε)^{N+1}`; a step above `1e-2·ε^{N+1}` for
/// any listed `ε` is rejected.
pub fn check_da_limits(params: &Params, epsilons: &[f64], probes: &[Complex64], step: Option<f64>) -> Result<DaTable> {
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) || epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config("epsilon list must be positive and strictly decreasing".into()));
    }
    if probes.is_empty() {
        return Err(Error::Config("no probe points".into()));
    }
    let np1 = params.n() as i32 + 1;
    let eps_min = *epsilons.last().expect("nonempty");
    let step = step.unwrap_or(1e-3 * eps_min.powi(np1));
    for &e in epsilons {
        if !(step > 0.0) || step > 1e-2 * e.powi(np1) {
            return Err(Error::Config(format!(
                "finite-difference step {step:e} is not small against eps^(N+1) = {:e} at eps = {e}",
                e.powi(np1)
            )));
        }
    }
    let mut rows = Vec::with_capacity(epsilons.len());
    let mut limit_scale = 0.0f64;
    for &e in epsilons {
        for &z in probes {
            for &zj in &params.strings {
                if (z - e * zj).norm() < 0.05 {
                    return Err(Error::Config(format!("probe {z} is within 0.05 of the string image {}", e * zj)));
                }
            }
        }
        let base = params.clone().with_epsilon(e)?;
        let shifted = |da: Complex64| Profiles::new(&base.clone().with_a(da));
        let plus1 = shifted(Complex64::new(step, 0.0));
        let minus1 = shifted(Complex64::new(-step, 0.0));
        let plus2 = shifted(Complex64::new(0.0, step));
        let minus2 = shifted(Complex64::new(0.0, -step));
        let mut dev = [0.0f64; 4];
        for &z in probes {
            let (p1i, p1ii) = plus1.g_scaled(z);
            let (m1i, m1ii) = minus1.g_scaled(z);
            let (p2i, p2ii) = plus2.g_scaled(z);
            let (m2i, m2ii) = minus2.g_scaled(z);
            let fd = [
                (p1i - m1i) / (2.0 * step),
                (p2i - m2i) / (2.0 * step),
                (p1ii - m1ii) / (2.0 * step),
                (p2ii - m2ii) / (2.0 * step),
            ];
            let lim = da_limits(z, params);
            for c in 0..4 {
                dev[c] = dev[c].max((fd[c] - lim[c]).abs());
                limit_scale = limit_scale.max(lim[c].abs());
            }
        }
        rows.push(DaRow { epsilon: e, g1_a1: dev[0], g1_a2: dev[1], g2_a1: dev[2], g2_a2: dev[3] });
    }
    Ok(DaTable { rows, step, probes: probes.len(), limit_scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn kernel_triple_matches_polar_form() {
        for n in 0..4 {
            for (r, t) in [(0.3, 0.2), (1.0, 0.0), (2.5, 2.0), (7.0, -1.0)] {
                let z = Complex64::from_polar(r, t);
                let (p, m, o) = kernel_triple(z, n);
                assert!((p - phi_kernel(r, t, Kernel::Plus, n)).abs() < 1e-14);
                assert!((m - phi_kernel(r, t, Kernel::Minus, n)).abs() < 1e-14);
                assert!((o - phi_kernel(r, t, Kernel::Zero, n)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn planar_pattern_is_symmetric_on_interior() {
        let p = Params::unit(vec![]);
        let g = Grid2D::new(2.0, 65).unwrap();
        let op = DiscreteOperator::planar_l(&p, g);
        let t = op.triplets();
        let set: std::collections::HashMap<(usize, usize), f64> = t.iter().map(|&(a, b, v)| ((a, b), v)).collect();
        for (&(a, b), &v) in &set {
            if !op.is_boundary(a) && !op.is_boundary(b) {
                assert_eq!(set.get(&(b, a)), Some(&v));
            }
        }
        // diagonal potential is λ₂ρ₁ sampled at the nodes
        let k = g.index(40, 20);
        let r = g.z(40, 20).norm();
        assert!((op.potential()[k] - p.lambda2 * rho1(r, &p)).abs() < 1e-14);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let p = Params::unit(vec![]);
        let op = DiscreteOperator::planar_l(&p, Grid2D::new(2.0, 65).unwrap());
        let f = Field2D::zeros(Grid2D::new(2.0, 67).unwrap());
        assert!(matches!(apply_l(&op, &f), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn radial_operator_annihilates_phi0() {
        let p = Params::unit(vec![Complex64::new(0.2, 0.0)]);
        let table: Vec<f64> = [200usize, 400]
            .iter()
            .map(|&m| {
                let nodes: Vec<f64> = (1..=m).map(|i| 5.0 * i as f64 / m as f64).collect();
                let op = DiscreteOperator::radial_l(&p, &nodes).unwrap();
                let rf = RadialFunction::new(nodes.clone(), nodes.iter().map(|&r| crate::profiles::phi0(r, 1)).collect()).unwrap();
                apply_l_radial(&op, &rf).unwrap().iter().fold(0.0, |a: f64, b| a.max(b.abs()))
            })
            .collect();
        assert!((table[0] / table[1] - 4.0).abs() < 0.4, "{table:?}");
    }

    #[test]
    fn angular_orthogonality() {
        for n in 0..3 {
            for r in [0.4, 1.0, 3.0] {
                assert!(angular_pairing(r, n, Kernel::Plus, Some(Kernel::Minus), 64).abs() < 1e-12);
                assert!(angular_pairing(r, n, Kernel::Plus, None, 64).abs() < 1e-12);
                assert!(angular_pairing(r, n, Kernel::Minus, None, 64).abs() < 1e-12);
                let q = crate::profiles::phi_pm_radial(r, n);
                assert!((angular_pairing(r, n, Kernel::Plus, Some(Kernel::Plus), 64) - PI * q * q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn limit_value_at_unit_radius() {
        for l2 in [1.0, 2.0] {
            let p = Params::new([1.0, l2, 1.0 / l2, 1.0], 1.0, vec![]).unwrap();
            let lim = da_limits(Complex64::new(1.0, 0.0), &p);
            assert!((lim[0] + 4.0 / l2).abs() < 1e-14);
        }
    }

    #[test]
    fn second_profile_derivative_opposes_a() {
        // at z = 0, F(0) = 0 so g^II depends on |a|² only through a growing denominator
        let p = Params::unit(vec![]).with_epsilon(0.3).unwrap();
        let plus = Profiles::new(&p.clone().with_a(Complex64::new(0.2, 0.0))).g_scaled(Complex64::new(0.0, 0.0)).1;
        let plus2 = Profiles::new(&p.clone().with_a(Complex64::new(0.2 + 1e-6, 0.0))).g_scaled(Complex64::new(0.0, 0.0)).1;
        assert!(plus2 < plus);
    }

    #[test]
    fn convergence_table_csv() {
        let mut t = ConvergenceTable::default();
        t.push(0.1, 4e-3);
        t.push(0.05, 1e-3);
        assert!(t.is_second_order(0.01));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "h,norm,ratio\n0.1,0.004,\n0.05,0.001,4.0\n");
    }
}
