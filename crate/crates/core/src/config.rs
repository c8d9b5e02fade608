//! JSON run configuration for the command-line tool.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::params::{Params, PhysicalPreset};
use crate::radial::RadialGrid;
use crate::solver::{LinearSolver, NewtonConfig};

/// Coefficients given directly.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExplicitBlock {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub c0: f64,
}

/// Coefficients derived from the W-boson mass, charge and gravitational
/// constant, in model units.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PhysicalBlock {
    pub m_w: f64,
    pub e_charge: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub c0: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub half_width: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NewtonBlock {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub linear_solver: Option<LinearSolverChoice>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolverChoice {
    Auto,
    Direct,
    Iterative,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RadialBlock {
    pub n_uniform: usize,
    pub r_uniform: f64,
    pub n_log: usize,
    pub r_max: f64,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Constants,
    Profiles,
    Radial,
    Verify,
    Solve,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Profiles => "profiles",
            Command::Radial => "radial",
            Command::Verify => "verify",
            Command::Solve => "solve",
        }
    }
}

/// The whole configuration document. Exactly one of `explicit` and
/// `physical` must be present; `epsilon` and `epsilon_sweep` are mutually
/// exclusive.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub explicit: Option<ExplicitBlock>,
    pub physical: Option<PhysicalBlock>,
    /// String points as `[x, y]` pairs.
    #[serde(default)]
    pub strings: Vec<[f64; 2]>,
    pub epsilon: Option<f64>,
    pub epsilon_sweep: Option<Vec<f64>>,
    /// Translation parameter `a` as `[a₁, a₂]`.
    pub a: Option<[f64; 2]>,
    pub grid: Option<GridBlock>,
    pub newton: Option<NewtonBlock>,
    pub radial: Option<RadialBlock>,
    pub output_dir: Option<PathBuf>,
    /// If present, must agree with the command given on the command line.
    pub command: Option<Command>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate_shape()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn validate_shape(&self) -> Result<()> {
        match (&self.explicit, &self.physical) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `explicit` or `physical` coefficients, not both".into())),
            (None, None) => return Err(Error::Config("missing coefficient block: `explicit` or `physical`".into())),
            _ => {}
        }
        if self.epsilon.is_some() && self.epsilon_sweep.is_some() {
            return Err(Error::Config("`epsilon` and `epsilon_sweep` are mutually exclusive".into()));
        }
        if let Some(s) = &self.epsilon_sweep {
            if s.is_empty() {
                return Err(Error::Config("`epsilon_sweep` is empty".into()));
            }
        }
        Ok(())
    }

    pub fn strings(&self) -> Vec<Complex64> {
        self.strings.iter().map(|p| Complex64::new(p[0], p[1])).collect()
    }

    /// `[ε]`, the sweep, or `[1]` when neither is given.
    pub fn epsilons(&self) -> Vec<f64> {
        match (&self.epsilon, &self.epsilon_sweep) {
            (Some(e), _) => vec![*e],
            (None, Some(s)) => s.clone(),
            (None, None) => vec![1.0],
        }
    }

    /// Validated parameters at the first configured `ε`.
    pub fn params(&self) -> Result<Params> {
        self.params_at(self.epsilons()[0])
    }

    pub fn params_at(&self, epsilon: f64) -> Result<Params> {
        let strings = self.strings();
        let p = match (&self.explicit, &self.physical) {
            (Some(e), None) => Params::new([e.lambda1, e.lambda2, e.lambda3, e.lambda4], e.c0, strings)?,
            (None, Some(ph)) => PhysicalPreset { m_w: ph.m_w, e_charge: ph.e_charge, g: ph.g }.params(ph.c0, strings)?,
            _ => unreachable!("shape validated on load"),
        };
        let a = self.a.map_or(Complex64::new(0.0, 0.0), |a| Complex64::new(a[0], a[1]));
        Ok(p.with_epsilon(epsilon)?.with_a(a))
    }

    /// Planar grid; defaults to `R = 8`, `n = 257`.
    pub fn grid(&self) -> Result<Grid2D> {
        match &self.grid {
            Some(g) => Grid2D::new(g.half_width, g.n),
            None => Grid2D::new(8.0, 257),
        }
    }

    pub fn radial_grid(&self) -> Result<RadialGrid> {
        match &self.radial {
            Some(r) => RadialGrid::graded(r.n_uniform, r.r_uniform, r.n_log, r.r_max),
            None => Ok(RadialGrid::standard()),
        }
    }

    pub fn newton(&self) -> Result<NewtonConfig> {
        let mut cfg = NewtonConfig::default();
        if let Some(b) = &self.newton {
            if let Some(t) = b.tol {
                cfg.tol_residual = t;
            }
            if let Some(m) = b.max_iter {
                cfg.max_iter = m;
            }
            if let Some(l) = b.linear_solver {
                cfg.linear_solver = match l {
                    LinearSolverChoice::Auto => LinearSolver::Auto,
                    LinearSolverChoice::Direct => LinearSolver::Direct,
                    LinearSolverChoice::Iterative => LinearSolver::Iterative,
                };
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
