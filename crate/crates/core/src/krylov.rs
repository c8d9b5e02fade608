//! Restarted GMRES with right preconditioning.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresConfig {
    pub restart: usize,
    pub max_iterations: usize,
    /// Stop once `‖b − Ax‖₂ ≤ rel_tol·‖b‖₂`.
    pub rel_tol: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self { restart: 60, max_iterations: 2000, rel_tol: 1e-12 }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for `x` (initial guess taken from `x`), where `apply_a`
/// writes `A v` into its second argument and `precond` applies `M⁻¹` in
/// place. Returns the number of inner iterations used.
pub fn gmres(
    apply_a: impl Fn(&[f64], &mut [f64]),
    precond: impl Fn(&mut [f64]),
    b: &[f64],
    x: &mut [f64],
    cfg: GmresConfig,
) -> Result<usize> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let target = cfg.rel_tol * bnorm;
    let m = cfg.restart.max(1);
    let mut total = 0usize;
    let mut w = vec![0.0; n];
    let mut r = vec![0.0; n];
    loop {
        apply_a(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm(&r);
        if beta <= target {
            return Ok(total);
        }
        if total >= cfg.max_iterations {
            return Err(Error::Numerical(format!(
                "GMRES stalled after {total} iterations: residual {:e} relative",
                beta / bnorm
            )));
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut z_basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut z = basis[k].clone();
            precond(&mut z);
            apply_a(&z, &mut w);
            z_basis.push(z);
            // modified Gram–Schmidt
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(&w, v);
                hess[i][k] = hik;
                for t in 0..n {
                    w[t] -= hik * v[t];
                }
            }
            let hnext = norm(&w);
            hess[k + 1][k] = hnext;
            for i in 0..k {
                let tmp = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = tmp;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                return Err(Error::Numerical("GMRES breakdown: zero Krylov direction".into()));
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            if g[k + 1].abs() <= target || hnext == 0.0 || total >= cfg.max_iterations {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        for (yi, z) in y.iter().zip(&z_basis) {
            for t in 0..n {
                x[t] += yi * z[t];
            }
        }
    }
}
