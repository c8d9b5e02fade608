//! Fast solver for the 5-point Dirichlet Laplacian on a square via the
//! type-I discrete sine transform.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Type-I DST of length `m` computed through a complex FFT of length
/// `2(m+1)` on the odd extension.
pub struct Dst1 {
    m: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dst1 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { m, fft: planner.plan_fft_forward(2 * (m + 1)) }
    }

    /// `y_k = Σ_{j=1}^{m} x_j sin(πjk/(m+1))`, in place, with a caller-owned
    /// scratch buffer of length `2(m+1)`.
    pub fn transform(&self, x: &mut [f64], buf: &mut Vec<Complex64>) {
        let m = self.m;
        let len = 2 * (m + 1);
        buf.clear();
        buf.resize(len, Complex64::new(0.0, 0.0));
        for j in 0..m {
            buf[j + 1] = Complex64::new(x[j], 0.0);
            buf[len - 1 - j] = Complex64::new(-x[j], 0.0);
        }
        self.fft.process(buf);
        for k in 0..m {
            x[k] = -0.5 * buf[k + 1].im;
        }
    }
}

/// Solves `Δ_h u = f` on the `m × m` interior of a square grid with
/// spacing `h` and zero Dirichlet data.
pub struct PoissonSolver {
    m: usize,
    dst: Dst1,
    eig: Vec<f64>,
}

impl PoissonSolver {
    pub fn new(m: usize, h: f64) -> Self {
        let eig = (1..=m)
            .map(|k| (2.0 * (std::f64::consts::PI * k as f64 / (m + 1) as f64).cos() - 2.0) / (h * h))
            .collect();
        Self { m, dst: Dst1::new(m), eig }
    }

    /// Overwrites `f` (row-major, `x` fastest) with the solution.
    pub fn solve(&self, f: &mut [f64]) {
        let m = self.m;
        let mut buf = Vec::with_capacity(2 * (m + 1));
        let mut col = vec![0.0; m];
        self.transform_2d(f, &mut buf, &mut col);
        for j in 0..m {
            for i in 0..m {
                f[i + j * m] /= self.eig[i] + self.eig[j];
            }
        }
        self.transform_2d(f, &mut buf, &mut col);
        let scale = (2.0 / (m + 1) as f64).powi(2);
        for v in f.iter_mut() {
            *v *= scale;
        }
    }

    fn transform_2d(&self, f: &mut [f64], buf: &mut Vec<Complex64>, col: &mut [f64]) {
        let m = self.m;
        for row in f.chunks_mut(m) {
            self.dst.transform(row, buf);
        }
        for i in 0..m {
            for j in 0..m {
                col[j] = f[i + j * m];
            }
            self.dst.transform(col, buf);
            for j in 0..m {
                f[i + j * m] = col[j];
            }
        }
    }
}
