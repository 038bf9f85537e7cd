//! Periodic grids, n-dimensional FFTs and spectral derivatives.
//!
//! Layout is row-major with the last axis fastest. For half-space work the
//! last axis is the normal direction x_N and index 0 on it is the boundary.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type VectorField = Vec<Vec<C64>>;

#[derive(Clone)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub extent: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("dim", &self.dim).field("n", &self.n).field("extent", &self.extent).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.extent == other.extent
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize, extent: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Param(format!("grid dimension {dim} not in 1..=3")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Param(format!("points per axis {n} must be a power of two >= 4")));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::Param(format!("extent {extent} must be positive")));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Grid { dim, n, extent, fwd, inv })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    /// Coordinate of index i along an axis, in FFT wrap order.
    pub fn coord(&self, i: usize) -> f64 {
        let k = if i < self.n / 2 { i as f64 } else { i as f64 - self.n as f64 };
        k * self.dx()
    }

    /// Angular wavenumber of index i along an axis (Nyquist mapped to -n/2).
    pub fn wavenumber(&self, i: usize) -> f64 {
        let k = if i < self.n / 2 { i as f64 } else { i as f64 - self.n as f64 };
        2.0 * PI * k / self.extent
    }

    pub fn max_wavenumber(&self) -> f64 {
        PI * self.n as f64 / self.extent
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Per-axis indices of a flat index.
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().take(self.dim).fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn frequency(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut k = [0.0; 3];
        for a in 0..self.dim {
            k[a] = self.wavenumber(idx[a]);
        }
        k
    }

    pub fn frequency_norm(&self, flat: usize) -> f64 {
        self.frequency(flat).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.coord(idx[a]);
        }
        x
    }

    fn check_len(&self, data: &[C64]) {
        assert_eq!(data.len(), self.len(), "field does not match grid size");
    }

    fn transform(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        self.check_len(data);
        let n = self.n;
        let mut line = vec![C64::new(0.0, 0.0); n];
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..self.dim {
            let st = self.stride(axis);
            let block = st * n;
            for base in (0..data.len()).step_by(block) {
                for off in 0..st {
                    let start = base + off;
                    for (k, v) in line.iter_mut().enumerate() {
                        *v = data[start + k * st];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (k, v) in line.iter().enumerate() {
                        data[start + k * st] = *v;
                    }
                }
            }
        }
    }

    /// Unnormalized forward transform.
    pub fn fft(&self, data: &mut [C64]) {
        self.transform(data, &self.fwd);
    }

    /// Inverse transform including the 1/n^dim factor.
    pub fn ifft(&self, data: &mut [C64]) {
        self.transform(data, &self.inv);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn fft_of(&self, data: &[C64]) -> Vec<C64> {
        let mut v = data.to_vec();
        self.fft(&mut v);
        v
    }

    pub fn ifft_of(&self, data: &[C64]) -> Vec<C64> {
        let mut v = data.to_vec();
        self.ifft(&mut v);
        v
    }

    /// Samples f at every grid point.
    pub fn sample<F: Fn(&[f64; 3]) -> C64>(&self, f: F) -> Vec<C64> {
        (0..self.len()).map(|i| f(&self.point(i))).collect()
    }

    /// Spectral multi-index derivative, kappa[a] derivatives along axis a.
    /// (i xi)^kappa on the whole grid, built from per-axis tables.
    pub fn derivative_symbol(&self, kappa: &[usize]) -> Vec<C64> {
        let mut sym = vec![C64::new(1.0, 0.0); self.len()];
        for a in 0..self.dim {
            let p = kappa.get(a).copied().unwrap_or(0) as u32;
            if p == 0 {
                continue;
            }
            let table: Vec<C64> = (0..self.n).map(|j| C64::new(0.0, self.wavenumber(j)).powu(p)).collect();
            let st = self.stride(a);
            for block in sym.chunks_mut(st * self.n) {
                for (row, m) in block.chunks_mut(st).zip(&table) {
                    row.iter_mut().for_each(|v| *v *= m);
                }
            }
        }
        sym
    }

    pub fn derivative_hat(&self, hat: &[C64], kappa: &[usize]) -> Vec<C64> {
        if kappa.iter().all(|&k| k == 0) {
            return hat.to_vec();
        }
        hat.iter().zip(self.derivative_symbol(kappa)).map(|(v, m)| m * v).collect()
    }

    pub fn derivative(&self, f: &[C64], kappa: &[usize]) -> Vec<C64> {
        let hat = self.fft_of(f);
        self.ifft_of(&self.derivative_hat(&hat, kappa))
    }

    /// Uniform-weight L_p norm.
    pub fn lp_norm(&self, f: &[C64], p: f64) -> f64 {
        let w = self.cell_volume();
        if p.is_infinite() {
            return f.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        (f.iter().map(|v| v.norm().powf(p)).sum::<f64>() * w).powf(1.0 / p)
    }

    pub fn l2_norm(&self, f: &[C64]) -> f64 {
        self.lp_norm(f, 2.0)
    }

    pub fn sup_norm(&self, f: &[C64]) -> f64 {
        f.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn vec_l2_norm(&self, f: &[Vec<C64>]) -> f64 {
        f.iter().map(|c| self.l2_norm(c).powi(2)).sum::<f64>().sqrt()
    }
}

/// Tangential slice of a field at normal index k (last axis).
pub fn normal_slice(grid: &Grid, f: &[C64], k: usize) -> Vec<C64> {
    let m = grid.len() / grid.n;
    (0..m).map(|t| f[t * grid.n + k]).collect()
}

/// Number of half-space rows x_N = k dx, k = 0..=n/2.
pub fn half_rows(grid: &Grid) -> usize {
    grid.n / 2 + 1
}

/// Restriction of a torus field to the rows x_N in [0, L/2], stored with the
/// normal index fastest: index t * rows + k.
pub fn restrict_half(grid: &Grid, f: &[C64]) -> Vec<C64> {
    let rows = half_rows(grid);
    let m = grid.len() / grid.n;
    let mut out = Vec::with_capacity(m * rows);
    for t in 0..m {
        out.extend_from_slice(&f[t * grid.n..t * grid.n + rows]);
    }
    out
}

/// Even extension across x_N = 0 of a half-row field (inverse of restrict_half
/// on even fields).
pub fn even_extend(grid: &Grid, half: &[C64]) -> Vec<C64> {
    let rows = half_rows(grid);
    let m = grid.len() / grid.n;
    assert_eq!(half.len(), m * rows, "half field does not match grid");
    let n = grid.n;
    let mut out = vec![C64::new(0.0, 0.0); grid.len()];
    for t in 0..m {
        for k in 0..n {
            let src = if k < rows { k } else { n - k };
            out[t * n + k] = half[t * rows + src];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_roundtrip_and_derivative() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let f = g.sample(|x| C64::new((2.0 * x[0]).sin() * x[1].cos(), 0.0));
        let back = g.ifft_of(&g.fft_of(&f));
        assert!(f.iter().zip(&back).all(|(a, b)| (a - b).norm() < 1e-14));
        let d = g.derivative(&f, &[1, 0]);
        for i in 0..g.len() {
            let x = g.point(i);
            assert!((d[i].re - 2.0 * (2.0 * x[0]).cos() * x[1].cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn half_restriction_roundtrip() {
        let g = Grid::new(2, 8, 4.0).unwrap();
        let f = g.sample(|x| C64::new((-x[1] * x[1]).exp() + x[0], 0.0));
        let h = restrict_half(&g, &f);
        let e = even_extend(&g, &h);
        assert!(f.iter().zip(&e).all(|(a, b)| (a - b).norm() < 1e-15));
    }
}
