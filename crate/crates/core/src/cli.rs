//! Command implementations behind the `wstring` binary. Each command returns
//! the text to print and an exit code; files go to the output directory.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::analysis::{
    beta_fn, beta_integral, const_c1, const_c2, growth_rates, integral_i, integral_i_closed, integral_ipm, pairing_closed,
    pairing_reduced_self_adjoint, rho1_mass, rho2_mass, rho2_mass_closed,
};
use crate::config::{Command, RunConfig};
use crate::error::{Error, Result};
use crate::grid::Field2D;
use crate::io::fmt_f64;
use crate::params::{Params, Regime};
use crate::profiles::{phi0, phi_pm_radial, rho1, rho2, Profiles};
use crate::radial::{fit_decay, solve_w1_formula, solve_w1_ode, solve_w2, solve_w2_direct, w2_origin_value, RadialFunction, RadialGrid};
use crate::solver::{box_growth_stability, grown_grid, solve, BOX_GROWTH_RTOL};
use crate::verify::{run_verify, VerifyOptions};

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Config = 1,
    Admissibility = 2,
    Radial = 3,
    Verify = 4,
    Solver = 5,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Text for stdout plus the exit code.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandOutput {
    pub code: ExitCode,
    pub text: String,
}

/// Settings that do not come from the configuration file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    #[doc(hidden)]
    pub rho1_coefficient: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { out_dir: None, rho1_coefficient: 8.0 }
    }
}

/// Relative tolerance for the closed-form cross-checks of `constants`.
pub const CONSTANT_RTOL: f64 = 1e-8;
/// Relative tolerance for the beta-function cross-check.
pub const BETA_RTOL: f64 = 1e-10;
/// Relative tolerance between the two evaluations of the pairing integral.
pub const PAIRING_RTOL: f64 = 1e-6;
/// Relative tolerance on fitted decay slopes.
pub const SLOPE_RTOL: f64 = 0.02;
/// Absolute floor on slope errors, for targets that vanish.
pub const SLOPE_ATOL: f64 = 1e-6;
/// Max-norm agreement of the two radial routes on `[0, 50]`.
pub const ROUTE_TOL: f64 = 1e-6;
/// Relative discrepancy allowed in the discrete divergence theorem.
pub const FLUX_RTOL: f64 = 1e-3;

/// Loads the configuration at `path` and runs `command`.
pub fn run(command: Command, config_path: &Path, opts: &RunOptions) -> CommandOutput {
    match RunConfig::from_path(config_path) {
        Ok(cfg) => run_config(command, &cfg, opts),
        Err(e) => fail(ExitCode::Config, &e),
    }
}

pub fn run_config(command: Command, cfg: &RunConfig, opts: &RunOptions) -> CommandOutput {
    if let Some(c) = cfg.command {
        if c != command {
            return fail(
                ExitCode::Config,
                &Error::Config(format!("config is for `{}` but `{}` was requested", c.name(), command.name())),
            );
        }
    }
    let params = match cfg.params() {
        Ok(p) => p,
        Err(e) => return fail(code_for(&e, ExitCode::Config), &e),
    };
    // every command needs the finite total mass of rho2 somewhere downstream
    if !params.second_mass_finite() {
        let e = Error::Admissibility(format!(
            "the mass of rho2 diverges: 2 lambda4/lambda2 = {} <= 1/(N+1) = {}",
            params.kappa(),
            1.0 / (params.n() as f64 + 1.0)
        ));
        return fail(ExitCode::Admissibility, &e);
    }
    let out_dir = opts.out_dir.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let failure_code = match command {
        Command::Radial => ExitCode::Radial,
        Command::Solve => ExitCode::Solver,
        Command::Constants | Command::Profiles | Command::Verify => ExitCode::Verify,
    };
    let result = match command {
        Command::Constants => cmd_constants(&params, cfg, &out_dir, opts.out_dir.is_some()),
        Command::Profiles => cmd_profiles(&params, cfg, &out_dir),
        Command::Radial => cmd_radial(&params, cfg, &out_dir),
        Command::Verify => cmd_verify(&params, &out_dir, opts),
        Command::Solve => cmd_solve(cfg, &out_dir),
    };
    match result {
        Ok(out) => out,
        Err(e) => fail(code_for(&e, failure_code), &e),
    }
}

fn code_for(e: &Error, fallback: ExitCode) -> ExitCode {
    match e {
        Error::Admissibility(_) => ExitCode::Admissibility,
        Error::Config(_) | Error::InvalidParams(_) => ExitCode::Config,
        _ => fallback,
    }
}

fn fail(code: ExitCode, e: &Error) -> CommandOutput {
    CommandOutput { code, text: format!("error: {e}\n") }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}

struct Lines {
    text: String,
    all_pass: bool,
}

impl Lines {
    fn new() -> Self {
        Self { text: String::new(), all_pass: true }
    }

    fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key}: {value}");
    }

    fn num(&mut self, key: &str, value: f64) {
        self.put(key, fmt_f64(value));
    }

    fn check(&mut self, key: &str, err: f64, tol: f64) {
        let ok = err <= tol;
        self.all_pass &= ok;
        self.put(key, format!("{} (error {err:e}, tolerance {tol:e})", if ok { "pass" } else { "FAIL" }));
    }
}

fn cmd_constants(params: &Params, cfg: &RunConfig, out_dir: &Path, write_file: bool) -> Result<CommandOutput> {
    let mut l = Lines::new();
    let np1 = params.n() as f64 + 1.0;
    let mu = 1.0 / np1;
    l.put("N", params.n());
    l.num("kappa", params.kappa());
    l.put("regime", match params.regime() {
        Regime::Proportional => "proportional",
        Regime::NonproportionalDecaying => "nonproportional_decaying",
    });
    l.put("proportional", params.is_proportional());
    l.put("admissible", true);
    l.put("second_mass_finite", params.second_mass_finite());
    if !params.second_mass_finite() {
        return Err(Error::Admissibility(format!(
            "the mass of rho2 diverges: 2 lambda4/lambda2 = {} <= 1/(N+1) = {mu}",
            params.kappa()
        )));
    }
    let dc = const_c2(params)?;
    l.num("C1", dc.c1);
    l.num("C2", dc.c2);
    l.num("beta_term", dc.beta_term);

    let i_quad = integral_i(params)?;
    let i_closed = integral_i_closed(params)?;
    l.num("I_quadrature", i_quad.value);
    l.num("I_closed_form", i_closed);
    l.num("I_minus_C1", i_quad.value - const_c1(params));

    let m_quad = rho2_mass(params)?;
    let m_closed = rho2_mass_closed(params)?;
    l.num("rho2_mass_quadrature", m_quad.value);
    l.num("rho2_mass_closed_form", m_closed);
    let m1 = rho1_mass(params)?;
    l.num("lambda2_rho1_mass", m1.value);
    l.num("lambda2_rho1_mass_expected", 8.0 * PI * np1);

    let b_gamma = beta_fn(mu, params.kappa() - mu)?;
    let b_int = beta_integral(mu, params.kappa() - mu)?;
    l.num("beta_gamma_path", b_gamma);
    l.num("beta_integral_path", b_int.value);

    let w1 = solve_w1_formula(params, &cfg.radial_grid()?)?;
    let ipm = integral_ipm(params, &w1)?;
    let ipm_sa = pairing_reduced_self_adjoint(params)?;
    let ipm_closed = pairing_closed(params)?;
    l.num("Ipm_direct", ipm.direct.value);
    l.num("Ipm_reduced", ipm.reduced.value);
    l.num("Ipm_reduced_self_adjoint", ipm_sa.value);
    l.num("Ipm_closed_form", ipm_closed);
    let g = growth_rates(params)?;
    l.num("w1_growth_rate", g.w1);
    l.num("w2_growth_rate", g.w2);

    // the closed form vanishes when κ = 2μ, so errors are taken against its prefactor
    let i_scale = i_closed.abs().max(params.lambda1 * params.c0 / (2.0 * np1) * beta_fn(mu, 1.0 + params.kappa() - mu)?);
    let i_err = if i_scale > 0.0 { (i_quad.value - i_closed).abs() / i_scale } else { 0.0 };
    l.check("check_I_closed_form", i_err, CONSTANT_RTOL);
    l.check("check_rho2_mass", rel_err(m_quad.value, m_closed), CONSTANT_RTOL);
    l.check("check_rho1_mass", rel_err(m1.value, 8.0 * PI * np1), CONSTANT_RTOL);
    l.check("check_beta_paths", rel_err(b_gamma, b_int.value), BETA_RTOL);
    let pair_scale = ipm_sa.value.abs().max(PI * params.lambda1 * params.c0 / 4.0);
    let pair_err = |a: f64, b: f64| if pair_scale > 0.0 { (a - b).abs() / pair_scale } else { 0.0 };
    l.check("check_Ipm_paths", pair_err(ipm.direct.value, ipm_sa.value), PAIRING_RTOL);
    l.check("check_Ipm_closed_form", pair_err(ipm_sa.value, ipm_closed), PAIRING_RTOL);

    if write_file {
        create(out_dir, "constants.txt")?.write_all(l.text.as_bytes())?;
    }
    Ok(CommandOutput { code: if l.all_pass { ExitCode::Ok } else { ExitCode::Verify }, text: l.text })
}

fn cmd_profiles(params: &Params, cfg: &RunConfig, out_dir: &Path) -> Result<CommandOutput> {
    let grid = cfg.grid()?;
    let prof = Profiles::new(params);
    let mut w = create(out_dir, "profiles.csv")?;
    writeln!(w, "x,y,ln_rho_i,ln_rho_ii")?;
    for j in 0..grid.n() {
        for i in 0..grid.n() {
            let z = grid.z(i, j);
            writeln!(w, "{},{},{},{}", fmt_f64(z.re), fmt_f64(z.im), fmt_f64(prof.ln_rho_i(z)), fmt_f64(prof.ln_rho_ii(z)))?;
        }
    }
    w.flush()?;
    let mut w = create(out_dir, "radial_profiles.csv")?;
    writeln!(w, "r,rho1,rho2,phi0,phi_pm")?;
    let n = params.n();
    for k in 0..=600 {
        let r = 10f64.powf(-3.0 + k as f64 / 100.0);
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(r),
            fmt_f64(rho1(r, params)),
            fmt_f64(rho2(r, params)),
            fmt_f64(phi0(r, n)),
            fmt_f64(phi_pm_radial(r, n))
        )?;
    }
    w.flush()?;
    let mut l = Lines::new();
    l.put("profiles_csv", out_dir.join("profiles.csv").display());
    l.put("radial_profiles_csv", out_dir.join("radial_profiles.csv").display());
    l.put("grid", format!("R = {}, n = {}", grid.half_width(), grid.n()));
    Ok(CommandOutput { code: ExitCode::Ok, text: l.text })
}

/// Slope fit window: `[10³, 10⁵]`, or the top two decades of a shorter grid.
fn fit_window(r_max: f64) -> (f64, f64) {
    if r_max >= 1e5 {
        (1e3, 1e5)
    } else {
        (r_max / 100.0, r_max)
    }
}

fn slope_err(fit: f64, target: f64) -> (f64, bool) {
    let e = (fit - target).abs();
    let rel = if target == 0.0 { e } else { e / target.abs() };
    (rel, e <= SLOPE_RTOL * target.abs() + SLOPE_ATOL)
}

fn cmd_radial(params: &Params, cfg: &RunConfig, out_dir: &Path) -> Result<CommandOutput> {
    let grid: RadialGrid = cfg.radial_grid()?;
    let w1 = solve_w1_formula(params, &grid)?;
    let w2 = solve_w2(params, &w1)?;
    let w1_ode = solve_w1_ode(params, &grid)?;
    let w2_direct = solve_w2_direct(params, &w1, w2_origin_value(params, 0.0)?)?;
    w1.write_csv(create(out_dir, "w1.csv")?)?;
    w2.write_csv(create(out_dir, "w2.csv")?)?;

    let window = fit_window(grid.r_max());
    let f1 = fit_decay(&w1, window)?;
    let f2 = fit_decay(&w2, window)?;
    let g = growth_rates(params)?;
    let dc = const_c2(params)?;
    let route1 = w1.max_abs_diff(&w1_ode, 0.0, 50.0_f64.min(grid.r_max()))?;
    let route2 = w2.max_abs_diff(&w2_direct, 0.0, 50.0_f64.min(grid.r_max()))?;
    let (e1, ok1) = slope_err(f1.slope, g.w1);
    let (e2, ok2) = slope_err(f2.slope, g.w2);
    let passed = ok1 && ok2 && route1 <= ROUTE_TOL && route2 <= ROUTE_TOL;

    let mut t = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(t, "{k}={v}");
    };
    put("fit_window", format!("{},{}", fmt_f64(window.0), fmt_f64(window.1)));
    put("w1_slope", fmt_f64(f1.slope));
    put("w1_target", fmt_f64(g.w1));
    put("w1_relative_error", fmt_f64(e1));
    put("w1_minus_C1", fmt_f64(-dc.c1));
    put("w1_minus_C1_relative_error", fmt_f64(rel_err(f1.slope, -dc.c1)));
    put("w1_fit_residual_rms", fmt_f64(f1.residual_rms));
    put("w2_slope", fmt_f64(f2.slope));
    put("w2_target", fmt_f64(g.w2));
    put("w2_relative_error", fmt_f64(e2));
    put("w2_minus_C2", fmt_f64(-dc.c2));
    put("w2_minus_C2_relative_error", fmt_f64(rel_err(f2.slope, -dc.c2)));
    put("w2_fit_residual_rms", fmt_f64(f2.residual_rms));
    put("route_agreement_w1", fmt_f64(route1));
    put("route_agreement_w2", fmt_f64(route2));
    put("passed", passed.to_string());
    create(out_dir, "decay_fit.txt")?.write_all(t.as_bytes())?;
    Ok(CommandOutput { code: if passed { ExitCode::Ok } else { ExitCode::Radial }, text: t })
}

fn cmd_verify(params: &Params, out_dir: &Path, opts: &RunOptions) -> Result<CommandOutput> {
    let vopts = VerifyOptions { rho1_coefficient: opts.rho1_coefficient, ..VerifyOptions::default() };
    let report = run_verify(params, &vopts)?;
    report.write_csv(create(out_dir, "verify.csv")?)?;
    let mut text = report.to_table();
    let code = if report.all_passed() {
        ExitCode::Ok
    } else {
        let names: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
        let _ = writeln!(text, "failed: {}", names.join(", "));
        ExitCode::Verify
    };
    Ok(CommandOutput { code, text })
}

fn write_field(f: &Field2D, dir: &Path, name: &str) -> Result<()> {
    let mut w = create(dir, name)?;
    f.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_solve(cfg: &RunConfig, out_dir: &Path) -> Result<CommandOutput> {
    let grid = cfg.grid()?;
    let newton = cfg.newton()?;
    let rgrid = cfg.radial_grid()?;
    let epsilons = cfg.epsilons();
    let sweep = epsilons.len() > 1;
    // w₁, w₂ do not depend on ε
    let p0 = cfg.params()?;
    let w1: RadialFunction = solve_w1_formula(&p0, &rgrid)?;
    let w2 = solve_w2(&p0, &w1)?;

    let mut text = String::new();
    let mut summary = create(out_dir, if sweep { "sweep_summary.csv" } else { "summary.csv" })?;
    writeln!(summary, "epsilon,converged,steps,final_residual,vstar_bound,flux_u,flux_eta,passed")?;
    let mut all_ok = true;
    let mut bounds = Vec::new();
    for &eps in &epsilons {
        let params = cfg.params_at(eps)?;
        let dir = if sweep { out_dir.join(format!("eps_{}", fmt_f64(eps))) } else { out_dir.to_path_buf() };
        let outcome = solve(&params, grid, &w1, &w2, &newton)?;
        let rep = &outcome.report;
        write_field(&outcome.u, &dir, "u.csv")?;
        write_field(&outcome.eta, &dir, "eta.csv")?;
        write_field(&outcome.vstar1, &dir, "vstar1.csv")?;
        write_field(&outcome.vstar2, &dir, "vstar2.csv")?;

        let mut report_text = rep.to_key_value();
        let mut ok = rep.converged && rep.flux_u <= FLUX_RTOL && rep.flux_eta <= FLUX_RTOL && rep.boundary.is_some();
        if let (true, Some(b)) = (rep.converged, rep.boundary.as_ref()) {
            if grown_grid(&grid).is_some() {
                let st = box_growth_stability(&params, &grid, b, &w1, &w2, &newton)?;
                let _ = writeln!(report_text, "box_growth_change_u={}", fmt_f64(st.change_u));
                let _ = writeln!(report_text, "box_growth_change_eta={}", fmt_f64(st.change_eta));
                ok &= st.is_stable(BOX_GROWTH_RTOL);
            } else {
                let _ = writeln!(report_text, "box_growth_check=skipped (n - 1 not divisible by 8)");
            }
        }
        let _ = writeln!(report_text, "passed={ok}");
        create(&dir, "newton_report.txt")?.write_all(report_text.as_bytes())?;
        writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(eps),
            rep.converged,
            rep.steps(),
            fmt_f64(rep.final_residual()),
            rep.vstar_bound.map(fmt_f64).unwrap_or_default(),
            fmt_f64(rep.flux_u),
            fmt_f64(rep.flux_eta),
            ok
        )?;
        if sweep {
            let _ = writeln!(text, "[epsilon = {}]", fmt_f64(eps));
        }
        text.push_str(&report_text);
        if !rep.converged {
            let _ = writeln!(
                text,
                "did not converge; residual history: {}",
                rep.iterations.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ")
            );
        }
        all_ok &= ok;
        bounds.push(rep.vstar_bound.unwrap_or(f64::NAN));
    }
    summary.flush()?;
    if sweep {
        let decreasing = bounds.windows(2).all(|w| w[1] < w[0]);
        let _ = writeln!(text, "vstar_bound_decreasing={decreasing}");
    }
    Ok(CommandOutput { code: if all_ok { ExitCode::Ok } else { ExitCode::Solver }, text })
}

/// Configures the global thread pool from `WSTRING_THREADS` (`0` or unset
/// means automatic).
pub fn init_threads() -> Result<()> {
    let n = match std::env::var("WSTRING_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| Error::Config(format!("WSTRING_THREADS must be a count, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}
