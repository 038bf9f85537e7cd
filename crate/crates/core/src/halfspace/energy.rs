//! Energy identity behind uniqueness for the homogeneous free-boundary problem.
//!
//! For v decaying in x_N and satisfying the homogeneous boundary conditions,
//! (L v, v) = lambda ||v||^2 + Q(v) with the real form
//! Q = a sum_{j,k<N} ||i xi_k v_j||^2 + a sum_j ||d v_j + i xi_j v_N||^2
//!   + a ||i xi'.v'||^2 + 2a ||d v_N||^2 + (b-a) ||i xi'.v' + d v_N||^2.
//! Trial fields are exponential sums, so every inner product is exact.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bvp::{decay_rate, oracle_bvp};
use super::modes::boundary_coeffs_at;
use crate::error::{Error, Result};
use crate::symbols::Material;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyOptions {
    pub trials: usize,
    pub terms: usize,
    pub seed: u64,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        EnergyOptions { trials: 20, terms: 4, seed: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrial {
    pub norm_sq: f64,
    pub form: f64,
    /// |(Lv, v) - lambda ||v||^2 - Q| relative to the size of the terms.
    pub identity_residual: f64,
    /// |Im (Lv, v) - Im lambda ||v||^2| relative.
    pub im_residual: f64,
    /// Re (Lv, v) - Re lambda ||v||^2, which must be >= 0.
    pub re_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub lambda: C64,
    pub xi: Vec<f64>,
    /// Norm of the computed solution with zero data (closed form and oracle).
    pub homogeneous_norm: f64,
    pub trials: Vec<EnergyTrial>,
    pub max_identity_residual: f64,
    pub max_im_residual: f64,
    pub min_re_margin: f64,
}

/// Components share the decay rates; coef[J][k] multiplies e^{-rates[k] x}.
#[derive(Debug, Clone)]
struct ExpField {
    rates: Vec<C64>,
    coef: Vec<Vec<C64>>,
}

fn inner(rates: &[C64], f: &[C64], g: &[C64]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (k, fk) in f.iter().enumerate() {
        for (l, gl) in g.iter().enumerate() {
            s += fk * gl.conj() / (rates[k] + rates[l].conj());
        }
    }
    s
}

impl ExpField {
    fn dx(&self, c: &[C64]) -> Vec<C64> {
        c.iter().zip(&self.rates).map(|(v, a)| -a * v).collect()
    }

    fn norm_sq(&self, c: &[C64]) -> f64 {
        inner(&self.rates, c, c).re
    }
}

fn lin(terms: &[(C64, &[C64])]) -> Vec<C64> {
    let n = terms[0].1.len();
    (0..n).map(|k| terms.iter().map(|(w, v)| w * v[k]).sum()).collect()
}

fn form_and_lhs(v: &ExpField, lambda: C64, xi: &[f64], mat: &Material) -> (f64, C64, f64, f64) {
    let d = xi.len();
    let (al, be) = (mat.alpha, mat.beta);
    let s: f64 = xi.iter().map(|x| x * x).sum();
    let r = &v.rates;
    let dv: Vec<Vec<C64>> = v.coef.iter().map(|c| v.dx(c)).collect();
    let ddv: Vec<Vec<C64>> = dv.iter().map(|c| v.dx(c)).collect();
    let zero = vec![C64::new(0.0, 0.0); r.len()];
    let mut div_t = zero.clone();
    let mut div_t_dx = zero.clone();
    for j in 0..d {
        for k in 0..r.len() {
            div_t[k] += I * xi[j] * v.coef[j][k];
            div_t_dx[k] += I * xi[j] * dv[j][k];
        }
    }
    // (L v, v)
    let mut lhs = C64::new(0.0, 0.0);
    for j in 0..d {
        let bracket = lin(&[(C64::from(1.0), &div_t), (C64::from(1.0), &dv[d])]);
        let lv = lin(&[(lambda + al * s, &v.coef[j]), (C64::from(-al), &ddv[j]), (-be * I * xi[j], &bracket)]);
        lhs += inner(r, &lv, &v.coef[j]);
    }
    let lvn = lin(&[(lambda + al * s, &v.coef[d]), (C64::from(-al), &ddv[d]), (C64::from(-be), &div_t_dx), (C64::from(-be), &ddv[d])]);
    lhs += inner(r, &lvn, &v.coef[d]);

    let mut q = 0.0;
    let mut mag = 0.0;
    let mut add = |w: f64, f: &[C64]| {
        let t = w * inner(r, f, f).re;
        q += t;
        mag += t.abs();
    };
    for j in 0..d {
        for k in 0..d {
            let f: Vec<C64> = v.coef[j].iter().map(|c| I * xi[k] * c).collect();
            add(al, &f);
        }
        let f = lin(&[(C64::from(1.0), &dv[j]), (I * xi[j], &v.coef[d])]);
        add(al, &f);
    }
    add(al, &div_t);
    add(2.0 * al, &dv[d]);
    let f = lin(&[(C64::from(1.0), &div_t), (C64::from(1.0), &dv[d])]);
    add(be - al, &f);
    let nsq: f64 = v.coef.iter().map(|c| v.norm_sq(c)).sum();
    (q, lhs, nsq, mag)
}

/// Projects the coefficients onto the homogeneous boundary conditions.
fn project_bc(v: &mut ExpField, xi: &[f64], mat: &Material) -> Result<()> {
    let d = xi.len();
    let nn = d + 1;
    let kk = v.rates.len();
    let idx = |j: usize, k: usize| j * kk + k;
    let mut c = DMatrix::from_element(nn, nn * kk, C64::new(0.0, 0.0));
    for j in 0..d {
        for k in 0..kk {
            c[(j, idx(j, k))] += -v.rates[k];
            c[(j, idx(d, k))] += I * xi[j];
            c[(d, idx(j, k))] += (mat.beta - mat.alpha) * I * xi[j];
        }
    }
    for k in 0..kk {
        c[(d, idx(d, k))] += -(mat.alpha + mat.beta) * v.rates[k];
    }
    let x = DVector::from_fn(nn * kk, |i, _| v.coef[i / kk][i % kk]);
    let cch = &c * c.adjoint();
    let y = cch.lu().solve(&(&c * &x)).ok_or_else(|| Error::Oracle("degenerate boundary constraints".into()))?;
    let p = x - c.adjoint() * y;
    for i in 0..nn * kk {
        v.coef[i / kk][i % kk] = p[i];
    }
    Ok(())
}

pub fn energy_uniqueness_check(lambda: C64, xi: &[f64], mat: &Material, opts: &EnergyOptions) -> Result<EnergyReport> {
    mat.validate()?;
    let d = xi.len();
    let nn = d + 1;
    let zero_h = vec![C64::new(0.0, 0.0); nn];
    let st = boundary_coeffs_at(lambda, xi, &zero_h, mat)?;
    let xn = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let x_max = 25.0 / decay_rate(lambda, xn, mat)?;
    let prof = oracle_bvp(lambda, xi, &zero_h, mat, x_max, 256)?;
    let homogeneous_norm = st.m.iter().chain(&st.n).map(|v| v.norm()).fold(0.0, f64::max).max(prof.u.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut trials = Vec::with_capacity(opts.trials);
    for _ in 0..opts.trials {
        let kk = opts.terms.max(nn + 1);
        let rates: Vec<C64> = (0..kk).map(|_| C64::new(rng.gen_range(0.5..3.0), rng.gen_range(-2.0..2.0))).collect();
        let coef: Vec<Vec<C64>> = (0..nn).map(|_| (0..kk).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()).collect();
        let mut v = ExpField { rates, coef };
        project_bc(&mut v, xi, mat)?;
        let (q, lhs, nsq, mag) = form_and_lhs(&v, lambda, xi, mat);
        let scale = lambda.norm() * nsq + mag;
        let id = lhs - lambda * nsq - q;
        trials.push(EnergyTrial {
            norm_sq: nsq,
            form: q,
            identity_residual: id.norm() / scale,
            im_residual: (lhs.im - lambda.im * nsq).abs() / scale,
            re_margin: lhs.re - lambda.re * nsq,
        });
    }
    let fold = |f: fn(&EnergyTrial) -> f64| trials.iter().map(f).fold(0.0, f64::max);
    let max_identity_residual = fold(|t| t.identity_residual);
    let max_im_residual = fold(|t| t.im_residual);
    let min_re_margin = trials.iter().map(|t| t.re_margin).fold(f64::INFINITY, f64::min);
    Ok(EnergyReport { lambda, xi: xi.to_vec(), homogeneous_norm, trials, max_identity_residual, max_im_residual, min_re_margin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn identity_and_bounds() {
        let mat = Material::default();
        let r = energy_uniqueness_check(C64::new(1.0, 0.0), &[0.8], &mat, &EnergyOptions::default()).unwrap();
        assert_eq!(r.homogeneous_norm, 0.0);
        assert!(r.max_identity_residual < 1e-12);
        assert!(r.min_re_margin >= 0.0);
        let lam = C64::from_polar(2.0, PI - PI / 6.0);
        let r = energy_uniqueness_check(lam, &[0.8, -0.3], &mat, &EnergyOptions::default()).unwrap();
        assert!(r.max_im_residual < 1e-10);
    }
}
