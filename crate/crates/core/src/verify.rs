//! The identity, kernel and derivative-limit checks run by `wstring verify`.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::analysis::check_l_identity;
use crate::error::Result;
use crate::grid::{Field2D, Grid2D};
use crate::io::fmt_f64;
use crate::linop::{
    angular_pairing, apply_a, check_da_limits, default_da_probes, kernel_value, l_identity_input, l_identity_output,
    planar_convergence_with_coefficient, ConvergenceTable,
};
use crate::params::Params;
use crate::profiles::{rho1, Kernel, LiouvilleIdentity, Profiles};
use crate::radial::RadialFunction;

/// One row of the verification table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// The measured quantity the threshold applies to.
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Fixed-width table, one check per line.
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<28} {:>6} {:>24} {:>12}  {}\n", "check", "status", "value", "threshold", "detail");
        for c in &self.checks {
            s.push_str(&format!(
                "{:<28} {:>6} {:>24} {:>12}  {}\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                fmt_f64(c.value),
                format!("{:e}", c.threshold),
                c.detail
            ));
        }
        s
    }

    /// CSV `name,passed,value,threshold`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "name,passed,value,threshold")?;
        for c in &self.checks {
            writeln!(w, "{},{},{},{}", c.name, c.passed, fmt_f64(c.value), fmt_f64(c.threshold))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    /// Box half-width for the planar kernel checks.
    pub half_width: f64,
    /// Refinement sequence for the planar checks.
    pub spacings: Vec<f64>,
    /// Norms are taken over `|x|, |y| ≤ interior_half`.
    pub interior_half: f64,
    /// Allowed relative deviation of a refinement ratio from 4.
    pub ratio_tol: f64,
    /// Stencil step for the Liouville identities (halved once).
    pub liouville_h: f64,
    pub liouville_tol: f64,
    pub da_epsilons: Vec<f64>,
    /// Leading coefficient of `λ₂ρ₁`; anything but 8 corrupts `L`.
    #[doc(hidden)]
    pub rho1_coefficient: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            half_width: 20.0,
            spacings: vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            interior_half: 10.0,
            ratio_tol: 0.2,
            liouville_h: 1e-3,
            liouville_tol: 1e-4,
            da_epsilons: vec![0.4, 0.2, 0.1],
            rho1_coefficient: 8.0,
        }
    }
}

/// Minimum distance between a Liouville probe and a string point.
pub const PROBE_CLEARANCE: f64 = 0.5;

/// Stencil residuals below this level are rounding noise (about
/// `1e-16·|ln ρ|/h²` at `h = 5e-4`) and are left out of the order test.
pub const STENCIL_ROUNDOFF_FLOOR: f64 = 1e-9;

/// Up to 48 probe points on six circles, keeping [`PROBE_CLEARANCE`] from
/// every string.
pub fn liouville_probes(params: &Params) -> Vec<Complex64> {
    let mut v = Vec::new();
    for r in [0.35, 0.9, 1.6, 2.7, 4.0, 6.0] {
        for k in 0..8 {
            let z = Complex64::from_polar(r, 0.4 + k as f64 * std::f64::consts::PI / 4.0);
            if params.strings.iter().all(|&zj| (z - zj).norm() >= PROBE_CLEARANCE) {
                v.push(z);
            }
        }
    }
    v
}

fn ratio_detail(t: &ConvergenceTable) -> String {
    let norms: Vec<String> = t.rows.iter().map(|r| format!("{:.3e}", r.norm)).collect();
    let ratios: Vec<String> = t.ratios().iter().map(|r| format!("{r:.3}")).collect();
    format!("norms [{}] ratios [{}]", norms.join(", "), ratios.join(", "))
}

/// Largest `|ratio/4 − 1|` of a refinement table.
fn ratio_deviation(t: &ConvergenceTable) -> f64 {
    let r = t.ratios();
    if r.is_empty() {
        return f64::INFINITY;
    }
    r.iter().map(|q| (q / 4.0 - 1.0).abs()).fold(0.0, f64::max)
}

fn liouville_checks(params: &Params, opts: &VerifyOptions, out: &mut Vec<Check>) -> Result<()> {
    let prof = Profiles::new(params);
    let probes = liouville_probes(params);
    for (name, id) in [("liouville_primary", LiouvilleIdentity::Primary), ("liouville_companion", LiouvilleIdentity::Companion)] {
        let mut worst = 0.0f64;
        let mut worst_ratio = 0.0f64;
        for &z in &probes {
            let r1 = prof.liouville_residual(z, opts.liouville_h, id)?;
            let r2 = prof.liouville_residual(z, opts.liouville_h / 2.0, id)?;
            worst = worst.max(r1.abs());
            if r1.abs() > STENCIL_ROUNDOFF_FLOOR {
                worst_ratio = worst_ratio.max((r1 / r2 / 4.0 - 1.0).abs());
            }
        }
        out.push(Check {
            name: name.into(),
            value: worst,
            threshold: opts.liouville_tol,
            passed: worst < opts.liouville_tol,
            detail: format!("max stencil residual at h = {:e} over {} probes", opts.liouville_h, probes.len()),
        });
        out.push(Check {
            name: format!("{name}_order"),
            value: worst_ratio,
            threshold: opts.ratio_tol,
            passed: worst_ratio <= opts.ratio_tol,
            detail: format!("max |ratio/4 - 1| when h halves, residuals above {STENCIL_ROUNDOFF_FLOOR:e}"),
        });
    }
    Ok(())
}

fn kernel_checks(params: &Params, opts: &VerifyOptions, out: &mut Vec<Check>) -> Result<()> {
    let n = params.n();
    for (name, which) in [("kernel_phi_plus", Kernel::Plus), ("kernel_phi_minus", Kernel::Minus), ("kernel_phi_zero", Kernel::Zero)] {
        let t = planar_convergence_with_coefficient(
            params,
            opts.half_width,
            &opts.spacings,
            opts.interior_half,
            |z| kernel_value(z, which, n),
            |_| 0.0,
            opts.rho1_coefficient,
        )?;
        let dev = ratio_deviation(&t);
        out.push(Check { name: name.into(), value: dev, threshold: opts.ratio_tol, passed: dev <= opts.ratio_tol, detail: ratio_detail(&t) });
    }
    let t = planar_convergence_with_coefficient(
        params,
        opts.half_width,
        &opts.spacings,
        opts.interior_half,
        |z| l_identity_input(z, n),
        |z| l_identity_output(z, n),
        opts.rho1_coefficient,
    )?;
    let dev = ratio_deviation(&t);
    out.push(Check { name: "l_identity_planar".into(), value: dev, threshold: opts.ratio_tol, passed: dev <= opts.ratio_tol, detail: ratio_detail(&t) });
    let samples: Vec<f64> = (1..=200).map(|k| k as f64 * 0.025).collect();
    let pointwise = check_l_identity(&samples, n);
    out.push(Check {
        name: "l_identity_pointwise".into(),
        value: pointwise,
        threshold: 1e-8,
        passed: pointwise < 1e-8,
        detail: "analytic derivatives, r in (0, 5]".into(),
    });
    let mut orth = 0.0f64;
    for r in [0.3, 1.0, 2.0, 5.0] {
        orth = orth
            .max(angular_pairing(r, n, Kernel::Plus, Some(Kernel::Minus), 256).abs())
            .max(angular_pairing(r, n, Kernel::Plus, None, 256).abs())
            .max(angular_pairing(r, n, Kernel::Minus, None, 256).abs());
    }
    out.push(Check {
        name: "angular_orthogonality".into(),
        value: orth,
        threshold: 1e-10,
        passed: orth < 1e-10,
        detail: "max |int phi+ phi- dtheta|, |int phi+- dtheta|".into(),
    });
    Ok(())
}

/// Max of `|𝒜₁|`, `|𝒜₂|` on the interior half-box.
fn a_norm(params: &Params, grid: Grid2D, nu: impl Fn(Complex64) -> (f64, f64), interior_half: f64) -> Result<(f64, f64)> {
    let nu1 = Field2D::from_fn(grid, |z| nu(z).0);
    let nu2 = Field2D::from_fn(grid, |z| nu(z).1);
    // α = 0 never reads w₁
    let unused = RadialFunction::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 4])?;
    let (a1, a2) = apply_a(&nu1, &nu2, (0.0, 0.0), params, &unused)?;
    Ok((a1.max_abs_in_box(interior_half), a2.max_abs_in_box(interior_half)))
}

fn coupled_kernel_checks(params: &Params, opts: &VerifyOptions, out: &mut Vec<Check>) -> Result<()> {
    let n = params.n();
    let ratio = params.lambda4 / params.lambda2;
    let spacings = &opts.spacings[..opts.spacings.len().min(2)];
    let grids: Vec<Grid2D> = spacings.iter().map(|&h| Grid2D::with_spacing(opts.half_width, h)).collect::<Result<_>>()?;

    let (c1, c2) = a_norm(params, grids[0], |_| (0.0, 1.0), opts.interior_half)?;
    let c = c1.max(c2);
    out.push(Check {
        name: "coupled_kernel_constant".into(),
        value: c,
        threshold: 1e-12,
        passed: c < 1e-12,
        detail: "(nu1, nu2, alpha) = (0, 1, 0)".into(),
    });
    for (name, which) in [
        ("coupled_kernel_phi_plus", Kernel::Plus),
        ("coupled_kernel_phi_minus", Kernel::Minus),
        ("coupled_kernel_phi_zero", Kernel::Zero),
    ] {
        let norms: Vec<f64> = grids
            .iter()
            .map(|&g| {
                a_norm(params, g, |z| (kernel_value(z, which, n), ratio * kernel_value(z, which, n)), opts.interior_half)
                    .map(|(a, b)| a.max(b))
            })
            .collect::<Result<_>>()?;
        let q = norms[0] / norms[1];
        let dev = (q / 4.0 - 1.0).abs();
        out.push(Check {
            name: name.into(),
            value: dev,
            threshold: opts.ratio_tol,
            passed: dev <= opts.ratio_tol,
            detail: format!("norms [{:.3e}, {:.3e}] ratio {q:.3}", norms[0], norms[1]),
        });
    }
    // (φ₊, 0, 0): 𝒜₂ = λ₄ρ₁φ₊ + O(h²), order one
    let g = grids[grids.len() - 1];
    let (_, a2) = a_norm(params, g, |z| (kernel_value(z, Kernel::Plus, n), 0.0), opts.interior_half)?;
    let scale = Field2D::from_fn(g, |z| params.lambda4 * rho1(z.norm(), params) * kernel_value(z, Kernel::Plus, n))
        .max_abs_in_box(opts.interior_half);
    let frac = a2 / scale;
    out.push(Check {
        name: "coupled_control_nonzero".into(),
        value: frac,
        threshold: 0.5,
        passed: frac > 0.5,
        detail: "max |A2(phi+, 0, 0)| / max |lambda4 rho1 phi+|".into(),
    });
    Ok(())
}

fn da_checks(params: &Params, opts: &VerifyOptions, out: &mut Vec<Check>) -> Result<()> {
    let probes: Vec<Complex64> = default_da_probes()
        .into_iter()
        .filter(|&z| opts.da_epsilons.iter().all(|&e| params.strings.iter().all(|&zj| (z - e * zj).norm() >= 0.1)))
        .collect();
    let base = params.clone().with_a(Complex64::new(0.0, 0.0));
    let table = check_da_limits(&base, &opts.da_epsilons, &probes, None)?;
    let last = table.rows.last().map(|r| r.columns().iter().cloned().fold(0.0, f64::max)).unwrap_or(f64::NAN);
    let mono = table.is_converging();
    let cols: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("eps {}: [{}]", r.epsilon, r.columns().iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(", ")))
        .collect();
    out.push(Check {
        name: "a_derivative_limits".into(),
        value: last,
        threshold: f64::INFINITY,
        passed: mono && probes.len() >= 10,
        detail: format!(
            "decreasing {mono} (floor {:.1e}) over {} probes; {}",
            table.noise_floor(),
            probes.len(),
            cols.join("; ")
        ),
    });
    Ok(())
}

/// Runs every check for `params`.
pub fn run_verify(params: &Params, opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    liouville_checks(params, opts, &mut checks)?;
    kernel_checks(params, opts, &mut checks)?;
    coupled_kernel_checks(params, opts, &mut checks)?;
    da_checks(params, opts, &mut checks)?;
    Ok(VerifyReport { checks })
}
