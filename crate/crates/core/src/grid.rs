//! Square planar grids and scalar fields on them, with CSV and binary
//! serialization.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// Uniform `n × n` grid on `[−R, R]²`, `h = 2R/(n−1)`, `n` odd so the origin
/// is a node. Node `(i, j)` sits at `(−R + i h, −R + j h)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    half_width: f64,
    n: usize,
}

impl Grid2D {
    pub const MIN_NODES: usize = 65;

    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParams(format!("grid half-width must be positive, got {half_width}")));
        }
        if n < Self::MIN_NODES || n.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!("grid node count must be odd and >= 65, got {n}")));
        }
        Ok(Self { half_width, n })
    }

    /// Grid with spacing `h` on `[−R, R]²`; `R/h` must be an integer.
    pub fn with_spacing(half_width: f64, h: f64) -> Result<Self> {
        let cells = 2.0 * half_width / h;
        if (cells - cells.round()).abs() > 1e-9 * cells {
            return Err(Error::InvalidParams(format!("2R/h = {cells} is not an integer")));
        }
        Self::new(half_width, cells.round() as usize + 1)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }

    pub fn z(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.coord(i), self.coord(j))
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.n
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.n, k / self.n)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n - 1 || j == self.n - 1
    }

    /// Index of the node at `(x, y)` if it lies on the grid (within `1e-9 h`).
    pub fn node_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let h = self.h();
        let fi = (x + self.half_width) / h;
        let fj = (y + self.half_width) / h;
        let (ri, rj) = (fi.round(), fj.round());
        if (fi - ri).abs() > 1e-9 || (fj - rj).abs() > 1e-9 || ri < 0.0 || rj < 0.0 {
            return None;
        }
        let (i, j) = (ri as usize, rj as usize);
        (i < self.n && j < self.n).then_some((i, j))
    }
}

/// A real value per node of a [`Grid2D`], stored with `x` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Field2D {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for a {}² grid", values.len(), grid.n())));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(Complex64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..n {
            for i in 0..n {
                values.push(f(grid.z(i, j)));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "grids differ: (R={}, n={}) vs (R={}, n={})",
                self.grid.half_width(),
                self.grid.n(),
                other.grid.half_width(),
                other.grid.n()
            )));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max `|value|` over nodes with `|x|, |y| ≤ half`.
    pub fn max_abs_in_box(&self, half: f64) -> f64 {
        let g = &self.grid;
        let mut m: f64 = 0.0;
        for j in 0..g.n() {
            let y = g.coord(j);
            if y.abs() > half + 1e-12 {
                continue;
            }
            for i in 0..g.n() {
                if g.coord(i).abs() <= half + 1e-12 {
                    m = m.max(self.get(i, j).abs());
                }
            }
        }
        m
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self { grid: self.grid, values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() })
    }

    /// Trapezoidal `∫ field dx dy` over the box.
    pub fn integrate(&self) -> f64 {
        let g = &self.grid;
        let n = g.n();
        let h = g.h();
        let mut acc = 0.0;
        for j in 0..n {
            let wy = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            for i in 0..n {
                let wx = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                acc += wx * wy * self.get(i, j);
            }
        }
        acc * h * h
    }

    /// CSV with header `x,y,value`, one node per line, `x` fastest.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,value")?;
        let g = &self.grid;
        for j in 0..g.n() {
            let y = fmt_f64(g.coord(j));
            for i in 0..g.n() {
                writeln!(w, "{},{},{}", fmt_f64(g.coord(i)), y, fmt_f64(self.get(i, j)))?;
            }
        }
        Ok(())
    }

    /// Reads the CSV layout of [`Field2D::write_csv`]; the grid is inferred
    /// from the node count and the extreme coordinates.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            if k == 0 {
                if line.trim() != "x,y,value" {
                    return Err(Error::Parse(format!("unexpected header {line:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 columns", k + 1)));
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", k + 1)));
            xs.push(parse(parts[0])?);
            values.push(parse(parts[2])?);
        }
        let n = (values.len() as f64).sqrt().round() as usize;
        if n * n != values.len() || n == 0 {
            return Err(Error::Parse(format!("{} rows is not a square grid", values.len())));
        }
        let grid = Grid2D::new(-xs[0], n)?;
        Self::from_values(grid, values)
    }

    /// Binary layout: `n` as u64 LE, `R` as f64 LE, then `n²` f64 LE values
    /// with `x` fastest (value `(i, j)` at position `i + j n`).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.grid.n() as u64).to_le_bytes())?;
        w.write_all(&self.grid.half_width().to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let half_width = f64::from_le_bytes(b8);
        let grid = Grid2D::new(half_width, n)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        Self::from_values(grid, values)
    }
}
