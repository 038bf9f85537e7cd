//! Generalized Stokes resolvent problem with constant reference density.
//!
//! Eliminating rho = lambda^{-1}(f - eta0 div u) leaves a Lame problem at
//! eta0 lambda perturbed by lambda^{-1} P' eta0 grad div u in the interior and by
//! -lambda^{-1} P' eta0 (div u) n on the boundary. The perturbation is removed
//! by fixed-point iteration.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::besov::{besov_norm, halfspace_norm, LPBasis, QIndex};
use crate::error::{Error, Result};
use crate::grid::{even_extend, half_rows, restrict_half, Grid, VectorField};
use crate::halfspace::field::{full_lame_halfspace_at, row_trace, HalfLameSolution, RhsData};
use crate::symbols::{Material, SectorPoint};
use crate::wholespace::solve_wholespace_hat;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Whole,
    Half,
}

impl std::str::FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole" | "wholespace" => Ok(Domain::Whole),
            "half" | "halfspace" => Ok(Domain::Half),
            _ => Err(Error::Param(format!("unknown domain {s:?}"))),
        }
    }
}

/// Whole space: torus fields, `h` empty. Half space: half-row fields
/// (layout t * rows + k) for f, g and h; only the trace of h enters.
#[derive(Debug, Clone, PartialEq)]
pub struct StokesData {
    pub f: Vec<C64>,
    pub g: VectorField,
    pub h: VectorField,
}

impl StokesData {
    pub fn is_zero(&self) -> bool {
        let z = C64::new(0.0, 0.0);
        self.f.iter().chain(self.g.iter().flatten()).chain(self.h.iter().flatten()).all(|v| *v == z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StokesSolution {
    pub rho: Vec<C64>,
    pub u: VectorField,
    pub iterations: usize,
    pub contraction_ratio: f64,
    pub mass_residual: f64,
    pub momentum_residual: f64,
    pub boundary_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_ratio: f64,
}

impl Default for StokesOptions {
    fn default() -> Self {
        StokesOptions { tol: 1e-10, max_iter: 200, max_ratio: 0.5 }
    }
}

fn rel(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    let num: f64 = a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().flatten().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

fn l2(v: &[Vec<C64>]) -> f64 {
    v.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn diff(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Tracks successive increments of the fixed-point loop.
struct Contraction {
    first: f64,
    last: f64,
    ratio: f64,
    count: usize,
}

impl Contraction {
    fn new() -> Self {
        Contraction { first: 0.0, last: 0.0, ratio: 0.0, count: 0 }
    }

    /// Returns true once converged.
    fn push(&mut self, inc: f64, opts: &StokesOptions) -> Result<bool> {
        self.count += 1;
        if self.count > 1 && inc <= opts.tol * self.first {
            return Ok(true);
        }
        if self.count == 1 {
            self.first = inc;
        } else if self.last > 0.0 {
            self.ratio = self.ratio.max(inc / self.last);
            if self.count >= 3 && self.ratio > opts.max_ratio {
                return Err(Error::Contraction(format!(
                    "increment ratio {:.3} exceeds {}: |lambda| is below the contraction threshold",
                    self.ratio, opts.max_ratio
                )));
            }
        }
        self.last = inc;
        if self.count > opts.max_iter {
            return Err(Error::Contraction(format!("no convergence in {} iterations", opts.max_iter)));
        }
        Ok(inc == 0.0)
    }
}

fn solve_whole(data: &StokesData, lambda: C64, mat: &Material, grid: &Grid, opts: &StokesOptions) -> Result<StokesSolution> {
    let nn = grid.dim;
    if data.f.len() != grid.len() || data.g.len() != nn || data.g.iter().any(|c| c.len() != grid.len()) {
        return Err(Error::Input("whole-space Stokes data must live on the torus grid".into()));
    }
    let eta = mat.rho_star;
    let pp = mat.p_prime;
    let inv = 1.0 / lambda;
    let fhat = grid.fft_of(&data.f);
    let ghat: Vec<Vec<C64>> = data.g.iter().map(|c| grid.fft_of(c)).collect();
    let freq: Vec<[f64; 3]> = (0..grid.len()).map(|i| grid.frequency(i)).collect();
    // G = g - lambda^{-1} P' grad f
    let big_g: VectorField = (0..nn).map(|a| (0..grid.len()).map(|i| ghat[a][i] - inv * pp * I * freq[i][a] * fhat[i]).collect()).collect();
    let div_hat = |u: &VectorField| -> Vec<C64> { (0..grid.len()).map(|i| (0..nn).map(|a| I * freq[i][a] * u[a][i]).sum()).collect() };
    let mut uhat = vec![vec![C64::new(0.0, 0.0); grid.len()]; nn];
    let mut track = Contraction::new();
    let mut iterations = 0;
    if !data.is_zero() {
        loop {
            let dv = div_hat(&uhat);
            let rhs: VectorField = (0..nn).map(|a| (0..grid.len()).map(|i| big_g[a][i] + inv * pp * eta * I * freq[i][a] * dv[i]).collect()).collect();
            let next = solve_wholespace_hat(&rhs, eta * lambda, mat, grid)?;
            let inc = diff(&next, &uhat);
            uhat = next;
            iterations += 1;
            if track.push(inc, opts)? {
                break;
            }
        }
    }
    let dv = div_hat(&uhat);
    let rho_hat: Vec<C64> = (0..grid.len()).map(|i| inv * (fhat[i] - eta * dv[i])).collect();
    // residuals in coefficient space
    let mass: Vec<C64> = (0..grid.len()).map(|i| lambda * rho_hat[i] + eta * dv[i]).collect();
    let mass_residual = rel(&[mass], &[fhat.clone()]);
    let mom: VectorField = (0..nn)
        .map(|a| {
            (0..grid.len())
                .map(|i| {
                    let k = freq[i];
                    let s: f64 = k[..nn].iter().map(|v| v * v).sum();
                    let kd: C64 = (0..nn).map(|b| k[b] * uhat[b][i]).sum();
                    (eta * lambda + mat.alpha * s) * uhat[a][i] + mat.beta * k[a] * kd + pp * I * k[a] * rho_hat[i]
                })
                .collect()
        })
        .collect();
    let momentum_residual = rel(&mom, &ghat);
    let u = uhat.iter().map(|c| grid.ifft_of(c)).collect();
    Ok(StokesSolution {
        rho: grid.ifft_of(&rho_hat),
        u,
        iterations,
        contraction_ratio: track.ratio,
        mass_residual,
        momentum_residual,
        boundary_residual: 0.0,
    })
}

fn unit(nn: usize, a: usize) -> Vec<usize> {
    let mut k = vec![0; nn];
    k[a] = 1;
    k
}

/// grad div u on half rows.
fn grad_div(sol: &HalfLameSolution) -> VectorField {
    let nn = sol.grid.dim;
    (0..nn)
        .map(|c| {
            let mut out = vec![C64::new(0.0, 0.0); sol.tgrid.len() * sol.rows()];
            for a in 0..nn {
                let mut k = unit(nn, a);
                k[c] += 1;
                let d = sol.component_rows(a, &k);
                out.iter_mut().zip(&d).for_each(|(o, v)| *o += v);
            }
            out
        })
        .collect()
}

/// Spectral gradient of the even extension, restricted to the half rows.
fn half_gradient(grid: &Grid, f: &[C64]) -> VectorField {
    let hat = grid.fft_of(&even_extend(grid, f));
    (0..grid.dim).map(|a| restrict_half(grid, &grid.ifft_of(&grid.derivative_hat(&hat, &unit(grid.dim, a))))).collect()
}

/// Half-space solve that also returns the final Lame solution (for derivatives).
pub fn solve_stokes_half_with_state(data: &StokesData, lambda: C64, mat: &Material, grid: &Grid, opts: &StokesOptions) -> Result<(StokesSolution, HalfLameSolution)> {
    let nn = grid.dim;
    let size = grid.len() / grid.n * half_rows(grid);
    if data.f.len() != size || data.g.len() != nn || data.h.len() != nn || data.g.iter().chain(&data.h).any(|c| c.len() != size) {
        return Err(Error::Input(format!("half-space Stokes data must have {size} half-row points per component")));
    }
    let eta = mat.rho_star;
    let pp = mat.p_prime;
    let inv = 1.0 / lambda;
    let grad_f = half_gradient(grid, &data.f);
    let big_g: VectorField = (0..nn).map(|a| data.g[a].iter().zip(&grad_f[a]).map(|(g, df)| g - inv * pp * df).collect()).collect();
    // H = h + lambda^{-1} P' f n with n = -e_N
    let mut big_h = data.h.clone();
    for (hv, fv) in big_h[nn - 1].iter_mut().zip(&data.f) {
        *hv -= inv * pp * fv;
    }
    let zero = vec![vec![C64::new(0.0, 0.0); size]; nn];
    let mut sol = full_lame_halfspace_at(&RhsData { g: zero.clone(), h: zero.clone() }, eta * lambda, mat, grid)?;
    let mut u = zero.clone();
    let mut track = Contraction::new();
    let mut iterations = 0;
    if !data.is_zero() {
        loop {
            let gd = if iterations == 0 { zero.clone() } else { grad_div(&sol) };
            let div = if iterations == 0 { vec![C64::new(0.0, 0.0); size] } else { sol.divergence() };
            let g: VectorField = (0..nn).map(|a| big_g[a].iter().zip(&gd[a]).map(|(x, y)| x + inv * pp * eta * y).collect()).collect();
            let mut h = big_h.clone();
            for (hv, dv) in h[nn - 1].iter_mut().zip(&div) {
                *hv += inv * pp * eta * dv;
            }
            sol = full_lame_halfspace_at(&RhsData { g, h }, eta * lambda, mat, grid)?;
            let next = sol.values();
            let inc = diff(&next, &u);
            u = next;
            iterations += 1;
            if track.push(inc, opts)? {
                break;
            }
        }
    }
    let div = sol.divergence();
    let rho: Vec<C64> = data.f.iter().zip(&div).map(|(f, d)| inv * (f - eta * d)).collect();
    let mass: Vec<C64> = rho.iter().zip(&div).map(|(r, d)| lambda * r + eta * d).collect();
    let mass_residual = rel(&[mass], &[data.f.clone()]);
    // momentum: eta lambda u - alpha Lap u - beta grad div u + P' grad rho = g
    let lame = sol.apply_lame();
    let gd = grad_div(&sol);
    let mom: VectorField = (0..nn)
        .map(|a| (0..size).map(|i| lame[a][i] + pp * inv * (grad_f[a][i] - eta * gd[a][i])).collect())
        .collect();
    let momentum_residual = rel(&mom, &data.g);
    // boundary: stress(u) n - P' rho n = h, i.e. lame stress + P' rho e_N
    let mut st = sol.stress();
    let rt = row_trace(grid, &rho);
    for (s, r) in st[nn - 1].iter_mut().zip(&rt) {
        *s += pp * r;
    }
    let ht: VectorField = data.h.iter().map(|c| row_trace(grid, c)).collect();
    let boundary_residual = rel(&st, &ht);
    Ok((StokesSolution { rho, u, iterations, contraction_ratio: track.ratio, mass_residual, momentum_residual, boundary_residual }, sol))
}

pub fn solve_stokes(data: &StokesData, point: &SectorPoint, mat: &Material, grid: &Grid, domain: Domain, opts: &StokesOptions) -> Result<StokesSolution> {
    mat.validate()?;
    match domain {
        Domain::Whole => solve_whole(data, point.lambda, mat, grid, opts),
        Domain::Half => Ok(solve_stokes_half_with_state(data, point.lambda, mat, grid, opts)?.0),
    }
}

/// Direct solve of the coupled per-mode system
/// [lambda, eta i xi^T; P' i xi, (eta lambda + a|xi|^2) I + b xi xi^T] (rho, u) = (f, g).
pub fn mode_dense_solve(lambda: C64, xi: &[f64], f: C64, g: &[C64], mat: &Material) -> Result<(C64, Vec<C64>)> {
    use nalgebra::{DMatrix, DVector};
    let nn = xi.len();
    let s: f64 = xi.iter().map(|v| v * v).sum();
    let mut m = DMatrix::from_element(nn + 1, nn + 1, C64::new(0.0, 0.0));
    m[(0, 0)] = lambda;
    for a in 0..nn {
        m[(0, a + 1)] = mat.rho_star * I * xi[a];
        m[(a + 1, 0)] = mat.p_prime * I * xi[a];
        for b in 0..nn {
            m[(a + 1, b + 1)] = C64::from(mat.beta * xi[a] * xi[b]);
        }
        m[(a + 1, a + 1)] += mat.rho_star * lambda + mat.alpha * s;
    }
    let rhs = DVector::from_fn(nn + 1, |i, _| if i == 0 { f } else { g[i - 1] });
    let x = m.lu().solve(&rhs).ok_or_else(|| Error::Oracle("singular per-mode Stokes system".into()))?;
    Ok((x[0], (0..nn).map(|a| x[a + 1]).collect()))
}

/// Power-iteration estimate of the norm of u -> S(P(u), P_bdry(u)).
pub fn contraction_probe(point: &SectorPoint, mat: &Material, grid: &Grid, domain: Domain, iters: usize, seed: u64) -> Result<f64> {
    mat.validate()?;
    let nn = grid.dim;
    let lambda = point.lambda;
    let eta = mat.rho_star;
    let pp = mat.p_prime;
    let inv = 1.0 / lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rand_field = |len: usize| -> VectorField {
        (0..nn).map(|_| (0..len).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()).collect()
    };
    let mut est = 0.0;
    match domain {
        Domain::Whole => {
            let freq: Vec<[f64; 3]> = (0..grid.len()).map(|i| grid.frequency(i)).collect();
            let mut uhat = rand_field(grid.len());
            let mut norm = l2(&uhat);
            for _ in 0..iters {
                let dv: Vec<C64> = (0..grid.len()).map(|i| (0..nn).map(|a| I * freq[i][a] * uhat[a][i]).sum()).collect();
                let rhs: VectorField = (0..nn).map(|a| (0..grid.len()).map(|i| inv * pp * eta * I * freq[i][a] * dv[i]).collect()).collect();
                let next = solve_wholespace_hat(&rhs, eta * lambda, mat, grid)?;
                let nn2 = l2(&next);
                est = nn2 / norm;
                if nn2 == 0.0 {
                    break;
                }
                uhat = next.into_iter().map(|c| c.into_iter().map(|v| v / nn2).collect()).collect();
                norm = 1.0;
            }
        }
        Domain::Half => {
            let size = grid.len() / grid.n * half_rows(grid);
            // start from a smooth random field: solve once with random data
            let g0 = rand_field(size);
            let zero = vec![vec![C64::new(0.0, 0.0); size]; nn];
            let mut sol = full_lame_halfspace_at(&RhsData { g: g0, h: zero.clone() }, eta * lambda, mat, grid)?;
            let mut norm = l2(&sol.values());
            for _ in 0..iters {
                let gd = grad_div(&sol);
                let div = sol.divergence();
                let scale = 1.0 / norm;
                let g: VectorField = gd.iter().map(|c| c.iter().map(|v| inv * pp * eta * v * scale).collect()).collect();
                let mut h = zero.clone();
                for (hv, dv) in h[nn - 1].iter_mut().zip(&div) {
                    *hv = inv * pp * eta * dv * scale;
                }
                sol = full_lame_halfspace_at(&RhsData { g, h }, eta * lambda, mat, grid)?;
                norm = l2(&sol.values());
                est = norm;
                if norm == 0.0 {
                    break;
                }
            }
        }
    }
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionFit {
    pub magnitudes: Vec<f64>,
    /// Worst probe ratio over the sampled arguments, per magnitude.
    pub ratios: Vec<f64>,
    pub slope: f64,
    /// Geometric mean of ratio |lambda|.
    pub constant: f64,
    /// |lambda| beyond which every sampled ratio |lambda| bound gives ratio <= 1/2.
    pub lambda4: f64,
}

pub fn fit_lambda4(mat: &Material, grid: &Grid, domain: Domain, magnitudes: &[f64], epsilon: f64, iters: usize, seed: u64) -> Result<ContractionFit> {
    let args = [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI - epsilon];
    let mut ratios = Vec::with_capacity(magnitudes.len());
    for &r in magnitudes {
        let mut worst: f64 = 0.0;
        for &a in &args {
            let pt = SectorPoint { lambda: C64::from_polar(r, a), epsilon, lambda0: 0.0 };
            worst = worst.max(contraction_probe(&pt, mat, grid, domain, iters, seed)?);
        }
        ratios.push(worst);
    }
    let slope = crate::symbols::loglog_slope(magnitudes, &ratios)?;
    let constant = (magnitudes.iter().zip(&ratios).map(|(m, r)| (m * r).ln()).sum::<f64>() / magnitudes.len() as f64).exp();
    let worst = magnitudes.iter().zip(&ratios).map(|(m, r)| m * r).fold(0.0, f64::max);
    Ok(ContractionFit { magnitudes: magnitudes.to_vec(), ratios, slope, constant, lambda4: 2.0 * worst })
}

/// (|lambda| ||(rho,u)||_{B^s} + ||rho||_{B^{s+1}} + ||u||_{B^{s+2}}) /
/// (||f||_{B^{s+1}} + ||g||_{B^s} + ||h||_{B^{s+1}}), with q-index 1 and p = 2.
pub fn resolvent_ratio(sol: &StokesSolution, data: &StokesData, lambda: C64, s: f64, domain: Domain, basis: &LPBasis) -> Result<f64> {
    let norm = |f: &[C64], sv: f64| -> Result<f64> {
        Ok(match domain {
            Domain::Whole => besov_norm(f, sv, 2.0, QIndex::One, basis)?.total,
            Domain::Half => halfspace_norm(f, sv, 2.0, QIndex::One, basis)?.total,
        })
    };
    let vnorm = |v: &VectorField, sv: f64| -> Result<f64> { v.iter().map(|c| norm(c, sv)).sum() };
    let lhs = lambda.norm() * (norm(&sol.rho, s)? + vnorm(&sol.u, s)?) + norm(&sol.rho, s + 1.0)? + vnorm(&sol.u, s + 2.0)?;
    let rhs = norm(&data.f, s + 1.0)? + vnorm(&data.g, s)? + if data.h.is_empty() { 0.0 } else { vnorm(&data.h, s + 1.0)? };
    if rhs == 0.0 {
        return Err(Error::Input("zero data".into()));
    }
    Ok(lhs / rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pt(l: f64) -> SectorPoint {
        SectorPoint::new(C64::new(l, 0.3 * l), PI / 6.0, 1.0).unwrap()
    }

    #[test]
    fn zero_data() {
        let grid = Grid::new(2, 16, 8.0).unwrap();
        let z = vec![C64::new(0.0, 0.0); grid.len()];
        let d = StokesData { f: z.clone(), g: vec![z.clone(), z], h: Vec::new() };
        let s = solve_stokes(&d, &pt(10.0), &Material::default(), &grid, Domain::Whole, &StokesOptions::default()).unwrap();
        assert_eq!(s.iterations, 0);
        assert!(s.u.iter().flatten().chain(&s.rho).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn single_mode_matches_dense() {
        let grid = Grid::new(2, 16, 2.0 * PI).unwrap();
        let mat = Material::new(1.0, 0.5, 1.3, 0.8).unwrap();
        let e = grid.sample(|x| C64::from_polar(1.0, 2.0 * x[0] + x[1]));
        let f: Vec<C64> = e.iter().map(|v| v * 0.5).collect();
        let g = vec![e.clone(), e.iter().map(|v| v * C64::new(0.0, -1.0)).collect()];
        let p = pt(10.0);
        let s = solve_stokes(&StokesData { f, g, h: Vec::new() }, &p, &mat, &grid, Domain::Whole, &StokesOptions::default()).unwrap();
        let (r, u) = mode_dense_solve(p.lambda, &[2.0, 1.0], C64::new(0.5, 0.0), &[C64::new(1.0, 0.0), C64::new(0.0, -1.0)], &mat).unwrap();
        for i in 0..grid.len() {
            assert!((s.rho[i] - r * e[i]).norm() < 1e-10);
            assert!((s.u[0][i] - u[0] * e[i]).norm() < 1e-10);
            assert!((s.u[1][i] - u[1] * e[i]).norm() < 1e-10);
        }
        assert!(s.mass_residual < 1e-14 && s.momentum_residual < 1e-8);
    }

    #[test]
    fn half_space_residuals() {
        let grid = Grid::new(2, 32, 8.0).unwrap();
        let mat = Material::default();
        let bump = restrict_half(&grid, &grid.sample(|x| C64::new((-(x[0] * x[0] + x[1] * x[1])).exp(), 0.0)));
        let d = StokesData { f: bump.clone(), g: vec![bump.clone(), bump.clone()], h: vec![bump.clone(), bump] };
        let s = solve_stokes(&d, &pt(20.0), &mat, &grid, Domain::Half, &StokesOptions::default()).unwrap();
        assert!(s.contraction_ratio <= 0.5);
        assert!(s.mass_residual < 1e-13);
        assert!(s.momentum_residual < 1e-8 && s.boundary_residual < 1e-8, "{} {}", s.momentum_residual, s.boundary_residual);
    }
}
