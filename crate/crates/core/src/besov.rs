//! Littlewood-Paley blocks and Besov norms on periodic grids.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{even_extend, Grid};

fn mollifier(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step: 1 on [0, 1], 0 on [2, inf).
pub fn theta(r: f64) -> f64 {
    let a = mollifier(2.0 - r);
    let b = mollifier(r - 1.0);
    if a + b == 0.0 {
        return 0.0;
    }
    a / (a + b)
}

/// Dyadic profile theta(r) - theta(2r), supported in [1/2, 2]. The sum over
/// k in Z of phi_hat(2^{-k} r) telescopes to 1 for r > 0.
pub fn phi_hat(r: f64) -> f64 {
    theta(r) - theta(2.0 * r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QIndex {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "inf")]
    Inf,
}

#[derive(Debug, Clone)]
pub struct LPBasis {
    pub grid: Grid,
    /// Blocks phi_k for k = 1..=num_blocks; block 0 is the low-frequency psi.
    pub num_blocks: usize,
    weights: Vec<Vec<f64>>,
}

impl LPBasis {
    /// Multiplier of block k (0 = psi) at every grid frequency.
    pub fn block_weights(&self, k: usize) -> &[f64] {
        &self.weights[k]
    }

    /// max over nonzero frequencies of |psi + sum_k phi_k - 1|.
    pub fn partition_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.grid.len() {
            let s: f64 = self.weights.iter().map(|w| w[i]).sum();
            worst = worst.max((s - 1.0).abs());
        }
        worst
    }
}

pub fn make_basis(grid: &Grid) -> Result<LPBasis> {
    if grid.n < 16 {
        return Err(Error::Config(format!("{} points per axis, need at least 16", grid.n)));
    }
    let kmax = (0..grid.len()).map(|i| grid.frequency_norm(i)).fold(0.0, f64::max);
    // phi_k lives on [2^{k-1}, 2^{k+1}]; stop once 2^{K-1} >= kmax
    let num_blocks = (kmax.log2().ceil().max(0.0) as usize) + 1;
    if num_blocks < 3 {
        return Err(Error::Config(format!("grid hosts only {num_blocks} dyadic blocks (max |xi| = {kmax:.3})")));
    }
    let mut weights = Vec::with_capacity(num_blocks + 1);
    weights.push((0..grid.len()).map(|i| theta(grid.frequency_norm(i))).collect());
    for k in 1..=num_blocks {
        let scale = 2f64.powi(-(k as i32));
        weights.push((0..grid.len()).map(|i| phi_hat(scale * grid.frequency_norm(i))).collect());
    }
    Ok(LPBasis { grid: grid.clone(), num_blocks, weights })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesovProfile {
    pub s: f64,
    pub p: f64,
    pub q_index: QIndex,
    /// 2^{sk} ||phi_k * f||_{L_p}, k = 1..=K.
    pub block_norms: Vec<f64>,
    pub low_block: f64,
    pub total: f64,
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Param(format!("Lebesgue exponent {p} outside (1, inf)")));
    }
    Ok(())
}

/// Besov profile from the unnormalized FFT of a field.
pub fn besov_norm_hat(hat: &[C64], s: f64, p: f64, q_index: QIndex, basis: &LPBasis) -> Result<BesovProfile> {
    check_p(p)?;
    let grid = &basis.grid;
    let block_lp = |k: usize| -> f64 {
        let w = &basis.weights[k];
        if p == 2.0 {
            // Parseval: the uniform-weight L2 sum equals the coefficient sum
            let sum: f64 = hat.iter().zip(w).map(|(v, &m)| (m * m) * v.norm_sqr()).sum();
            (sum * grid.cell_volume() / grid.len() as f64).sqrt()
        } else {
            let mut v: Vec<C64> = hat.iter().zip(w).map(|(v, &m)| v * m).collect();
            grid.ifft(&mut v);
            grid.lp_norm(&v, p)
        }
    };
    let low_block = block_lp(0);
    let block_norms: Vec<f64> = (1..=basis.num_blocks).map(|k| 2f64.powf(s * k as f64) * block_lp(k)).collect();
    let high = match q_index {
        QIndex::One => block_norms.iter().sum(),
        QIndex::Inf => block_norms.iter().cloned().fold(0.0, f64::max),
    };
    Ok(BesovProfile { s, p, q_index, block_norms, low_block, total: low_block + high })
}

pub fn besov_norm(f: &[C64], s: f64, p: f64, q_index: QIndex, basis: &LPBasis) -> Result<BesovProfile> {
    besov_norm_hat(&basis.grid.fft_of(f), s, p, q_index, basis)
}

/// Sum of the component norms of a vector field.
pub fn besov_norm_vec(f: &[Vec<C64>], s: f64, p: f64, q_index: QIndex, basis: &LPBasis) -> Result<f64> {
    let mut t = 0.0;
    for c in f {
        t += besov_norm(c, s, p, q_index, basis)?.total;
    }
    Ok(t)
}

/// T_m f = F^{-1}[m F f] with m given at each grid frequency vector.
pub fn multiplier_apply<M>(m: M, f: &[C64], grid: &Grid) -> Result<Vec<C64>>
where
    M: Fn(&[f64; 3]) -> C64,
{
    let mut hat = grid.fft_of(f);
    for (i, v) in hat.iter_mut().enumerate() {
        let mv = m(&grid.frequency(i));
        if !mv.is_finite() {
            return Err(Error::Input(format!("non-finite symbol value at frequency {:?}", grid.frequency(i))));
        }
        *v *= mv;
    }
    grid.ifft(&mut hat);
    Ok(hat)
}

/// ||T_m f||_{B^{s_out}_{p,1}} / ||f||_{B^{s_in}_{p,1}}.
pub fn multiplier_ratio<M>(m: M, f: &[C64], s_out: f64, s_in: f64, p: f64, basis: &LPBasis) -> Result<f64>
where
    M: Fn(&[f64; 3]) -> C64,
{
    let tf = multiplier_apply(m, f, &basis.grid)?;
    let num = besov_norm(&tf, s_out, p, QIndex::One, basis)?.total;
    let den = besov_norm(f, s_in, p, QIndex::One, basis)?.total;
    Ok(num / den)
}

/// ||uv||_{B^s_{q,1}} / (||u||_{B^s_{q,1}} max(||v||_{B^{N/q}_{q,inf}}, ||v||_inf)).
pub fn product_ratio(u: &[C64], v: &[C64], s: f64, q: f64, basis: &LPBasis) -> Result<f64> {
    check_p(q)?;
    let n = basis.grid.dim as f64;
    if !(n - 1.0 < q && q < 2.0 * n) {
        return Err(Error::Param(format!("product estimate needs N-1 < q < 2N, got q = {q}")));
    }
    if !(-1.0 + n / q <= s && s < 1.0 / q) {
        return Err(Error::Param(format!("product estimate needs -1+N/q <= s < 1/q, got s = {s}")));
    }
    let uv: Vec<C64> = u.iter().zip(v).map(|(a, b)| a * b).collect();
    let num = besov_norm(&uv, s, q, QIndex::One, basis)?.total;
    let bu = besov_norm(u, s, q, QIndex::One, basis)?.total;
    let bv = besov_norm(v, n / q, q, QIndex::Inf, basis)?.total;
    let vinf = basis.grid.sup_norm(v);
    Ok(num / (bu * bv.max(vinf)))
}

/// Default exponent of the s = 0 variant.
pub const LIPSCHITZ_EPS: f64 = 0.05;

/// ||fg||_{B^s_{q,1}} / (||f||_{B^s_{q,1}} ||g||_inf^{1-|s|} ||g||_{W^1_inf}^{|s|}).
/// For s = 0 the exponent |s| is replaced by eps.
pub fn lipschitz_mult_ratio(f: &[C64], g: &[C64], s: f64, q: f64, eps: f64, basis: &LPBasis) -> Result<f64> {
    check_p(q)?;
    if !(-1.0 + 1.0 / q < s && s < 1.0 / q) {
        return Err(Error::Param(format!("multiplication estimate needs -1+1/q < s < 1/q, got s = {s}")));
    }
    let grid = &basis.grid;
    let expo = if s == 0.0 { eps } else { s.abs() };
    let fg: Vec<C64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
    let num = besov_norm(&fg, s, q, QIndex::One, basis)?.total;
    let bf = besov_norm(f, s, q, QIndex::One, basis)?.total;
    let ginf = grid.sup_norm(g);
    let mut w1 = ginf;
    let ghat = grid.fft_of(g);
    for a in 0..grid.dim {
        let mut kappa = [0usize; 3];
        kappa[a] = 1;
        let d = grid.ifft_of(&grid.derivative_hat(&ghat, &kappa[..grid.dim]));
        w1 += grid.sup_norm(&d);
    }
    Ok(num / (bf * ginf.powf(1.0 - expo) * w1.powf(expo)))
}

/// Norm of the even extension across x_N = 0 of a half-row field
/// (layout of grid::restrict_half).
pub fn halfspace_norm(half: &[C64], s: f64, p: f64, q_index: QIndex, basis: &LPBasis) -> Result<BesovProfile> {
    check_p(p)?;
    if !(-1.0 + 1.0 / p < s && s < 1.0 / p) {
        return Err(Error::Param(format!("even-extension norm needs -1+1/p < s < 1/p, got s = {s}")));
    }
    besov_norm(&even_extend(&basis.grid, half), s, p, q_index, basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn profile_support_and_telescoping() {
        assert_eq!(phi_hat(0.5), 0.0);
        assert_eq!(phi_hat(2.0), 0.0);
        assert_eq!(phi_hat(0.3), 0.0);
        assert_eq!(theta(0.7), 1.0);
        assert_eq!(theta(2.5), 0.0);
        for &r in &[0.013, 0.9, 1.0, 1.5, 3.7, 1234.5] {
            let s: f64 = (-20..40).map(|k| phi_hat(2f64.powi(-k) * r)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_function_lives_in_low_block() {
        let g = Grid::new(2, 16, 16.0).unwrap();
        let b = make_basis(&g).unwrap();
        let f = vec![C64::new(1.0, 0.0); g.len()];
        let prof = besov_norm(&f, 0.5, 2.0, QIndex::One, &b).unwrap();
        assert!(prof.block_norms.iter().all(|&v| v < 1e-14));
        assert!((prof.low_block - 16.0).abs() < 1e-12);
    }

    #[test]
    fn coarse_grid_rejected() {
        let g = Grid::new(2, 8, 16.0).unwrap();
        assert!(matches!(make_basis(&g), Err(Error::Config(_))));
        let g = Grid::new(1, 16, 1000.0).unwrap();
        assert!(matches!(make_basis(&g), Err(Error::Config(_))));
    }

    #[test]
    fn single_mode_closed_form() {
        // |xi| = 2 pi 8 / 16 = pi, lands in blocks 1 and 2 only
        let g = Grid::new(2, 32, 16.0).unwrap();
        let b = make_basis(&g).unwrap();
        let k = 2.0 * PI * 8.0 / 16.0;
        let f = g.sample(|x| C64::from_polar(1.0, k * x[0]));
        let s = 0.5;
        let prof = besov_norm(&f, s, 2.0, QIndex::One, &b).unwrap();
        let vol = 16.0;
        let want_low = theta(k) * vol;
        let want: f64 = (1..=b.num_blocks).map(|j| 2f64.powf(s * j as f64) * phi_hat(k / 2f64.powi(j as i32)) * vol).sum();
        assert!((prof.low_block - want_low).abs() < 1e-12);
        assert!((prof.total - want_low - want).abs() < 1e-12);
        let nonzero = prof.block_norms.iter().filter(|&&v| v > 1e-10).count();
        assert!(nonzero <= 2, "{:?}", prof.block_norms);
    }
}
