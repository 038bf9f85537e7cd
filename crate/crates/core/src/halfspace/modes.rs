//! Per-mode boundary coefficients of the half-space Lame problem.
//!
//! For tangential frequency xi' the transformed solution is
//! u_J(x) = m_J e^{-Bx} + n_J (e^{-Ax} - e^{-Bx}), J = 1..N,
//! with components ordered tangential first and normal last.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbols::{boundary_symbols_at, exp_difference_derivative_with, symbol_scale, Material, Roots, SectorPoint, LOP_FLOOR};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub xi: Vec<f64>,
    pub lambda: C64,
    pub roots: Roots,
    pub lop: C64,
    pub m: Vec<C64>,
    pub n: Vec<C64>,
    pub ell: C64,
    /// Boundary data the coefficients were computed from.
    pub h: Vec<C64>,
    pub mat: Material,
}

fn dot_ixi(xi: &[f64], v: &[C64]) -> C64 {
    xi.iter().zip(v).map(|(&k, x)| I * k * x).sum()
}

/// Closed-form coefficients. The 2x2 system for (i xi'.m', l/(B^2-A^2)) is
/// solved by Cramer's rule with determinant L, then m_N, n_J and m_j follow by
/// back substitution. The algebra below is the result in the symbols m1, m2.
pub fn boundary_coeffs_at(lambda: C64, xi: &[f64], h: &[C64], mat: &Material) -> Result<ModeState> {
    let d = xi.len();
    if h.len() != d + 1 {
        return Err(Error::Input(format!("trace has {} components, expected {}", h.len(), d + 1)));
    }
    let xn = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sym = boundary_symbols_at(lambda, xn, mat)?;
    let scale4 = symbol_scale(lambda, xn).powi(4);
    if !(sym.lop.norm() >= LOP_FLOOR * scale4) {
        return Err(Error::Nonvanishing(format!("near-singular Lopatinski determinant {:.3e} at lambda = {lambda}, xi' = {xi:?}", sym.lop.norm())));
    }
    let (a, b) = (sym.roots.a, sym.roots.b);
    let s = xn * xn;
    let p = lambda * mat.gamma_b();
    let q = b * b + s;
    let bma = lambda * mat.gamma_gap();
    let al = mat.alpha * sym.lop;
    let dv = dot_ixi(xi, &h[..d]);
    let hn = h[d];

    let y = (-2.0 * b * dv + q * hn) / al;
    let ell = bma * y;
    let m_nn = (sym.m2 * dv - a * p * hn) / al;
    let n_nn = -a * y;
    let tang = (sym.m1 * dv - b * sym.m2 * hn) / (al * b);
    let mut m = Vec::with_capacity(d + 1);
    let mut n = Vec::with_capacity(d + 1);
    for j in 0..d {
        m.push(h[j] / (mat.alpha * b) + I * xi[j] * tang);
        n.push(I * xi[j] * y);
    }
    m.push(m_nn);
    n.push(n_nn);
    Ok(ModeState { xi: xi.to_vec(), lambda, roots: sym.roots, lop: sym.lop, m, n, ell, h: h.to_vec(), mat: *mat })
}

/// The linear maps h -> m and h -> n as N x N matrices (row J, column K gives
/// the K-th trace component's contribution to coefficient J).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMaps {
    pub roots: Roots,
    pub m: Vec<Vec<C64>>,
    pub n: Vec<Vec<C64>>,
}

impl CoefficientMaps {
    pub fn apply_m(&self, h: &[C64]) -> Vec<C64> {
        self.m.iter().map(|row| row.iter().zip(h).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn apply_n(&self, h: &[C64]) -> Vec<C64> {
        self.n.iter().map(|row| row.iter().zip(h).map(|(a, b)| a * b).sum()).collect()
    }
}

pub fn coefficient_maps(lambda: C64, xi: &[f64], mat: &Material) -> Result<CoefficientMaps> {
    let nn = xi.len() + 1;
    let zero = C64::new(0.0, 0.0);
    let mut m = vec![vec![zero; nn]; nn];
    let mut n = vec![vec![zero; nn]; nn];
    let mut roots = None;
    for k in 0..nn {
        let mut e = vec![zero; nn];
        e[k] = C64::new(1.0, 0.0);
        let st = boundary_coeffs_at(lambda, xi, &e, mat)?;
        for j in 0..nn {
            m[j][k] = st.m[j];
            n[j][k] = st.n[j];
        }
        roots = Some(st.roots);
    }
    Ok(CoefficientMaps { roots: roots.expect("at least one component"), m, n })
}

pub fn boundary_coeffs(point: &SectorPoint, xi: &[f64], h: &[C64], mat: &Material) -> Result<ModeState> {
    mat.validate()?;
    boundary_coeffs_at(point.lambda, xi, h, mat)
}

impl ModeState {
    pub fn dim(&self) -> usize {
        self.m.len()
    }

    /// k-th x_N derivative of the profile at x.
    pub fn derivative(&self, x: f64, k: u32) -> Vec<C64> {
        let (a, b) = (self.roots.a, self.roots.b);
        let e = (-b).powu(k) * (-b * x).exp();
        let amb = -self.lambda * self.mat.gamma_gap() / (a + b);
        let dd = exp_difference_derivative_with(a, b, amb, x, k);
        self.m.iter().zip(&self.n).map(|(m, n)| m * e + n * dd).collect()
    }

    /// The first `k` derivatives (k = 0 included) at once.
    pub fn derivatives(&self, x: f64, upto: u32) -> Vec<Vec<C64>> {
        (0..=upto).map(|k| self.derivative(x, k)).collect()
    }

    /// Relative residual of each algebraic identity of the construction.
    pub fn identity_residuals(&self) -> Vec<(String, f64)> {
        let (a, b) = (self.roots.a, self.roots.b);
        let (al, be) = (self.mat.alpha, self.mat.beta);
        let d = self.xi.len();
        let xi = &self.xi;
        let s: f64 = xi.iter().map(|v| v * v).sum();
        let (m, n, h, ell) = (&self.m, &self.n, &self.h, self.ell);
        // B^2 - A^2 exactly; b*b - a*a cancels when |xi'|^2 >> |lambda|
        let b2a2 = self.lambda * self.mat.gamma_gap();
        let (la, lb) = (self.lambda * self.mat.gamma_a(), self.lambda * self.mat.gamma_b());
        let bma = b2a2 / (a + b);
        // s - AB, B^2 + s - 2AB and s - B^2 without the O(s) cancellation
        let s_ab = -(a * bma + la);
        let q_ab = bma * bma - la;
        let s_bb = -lb;
        let dm = dot_ixi(xi, &m[..d]);
        let dn = dot_ixi(xi, &n[..d]);
        let dh = dot_ixi(xi, &h[..d]);
        let (mn, nn, hn) = (m[d], n[d], h[d]);

        let rel = |terms: &[C64]| -> f64 {
            let sum: C64 = terms.iter().sum();
            let mag: f64 = terms.iter().map(|t| t.norm()).sum();
            if mag == 0.0 {
                0.0
            } else {
                sum.norm() / mag
            }
        };
        let mut out = Vec::new();
        for j in 0..d {
            let ixj = I * xi[j];
            out.push((format!("n_tangential[{j}]"), rel(&[al * b2a2 * n[j], -be * ixj * dn, be * ixj * a * nn])));
            out.push((format!("div_b_tangential[{j}]"), rel(&[be * ixj * dm, -be * ixj * dn, -be * ixj * b * mn, be * ixj * b * nn])));
            out.push((format!("bc_tangential[{j}]"), rel(&[b * m[j], -b * n[j], a * n[j], -ixj * mn, -h[j] / al])));
            out.push((format!("ell_tangential[{j}]"), rel(&[n[j] * b2a2, -ixj * ell])));
        }
        out.push(("n_normal".into(), rel(&[al * b2a2 * nn, be * a * dn, -be * a * a * nn])));
        // differences expanded so the scale is that of m and n, not of m - n
        out.push(("div_b_normal".into(), rel(&[be * b * dm, -be * b * dn, -be * b * b * mn, be * b * b * nn])));
        out.push((
            "bc_normal".into(),
            rel(&[al * b * mn, -al * b * nn, al * a * nn, al * dm, be * b * mn, -be * b * nn, be * a * nn, -be * dm, -hn]),
        ));
        out.push(("ell_definition".into(), rel(&[ell, -be / al * dn, be / al * a * nn])));
        out.push(("ell_normal".into(), rel(&[nn * b2a2, a * ell])));
        out.push(("div_b".into(), rel(&[dm, -dn, -b * mn, b * nn])));
        out.push(("bc_normal_reduced".into(), rel(&[b * mn, -bma * nn, dm, -ell, -hn / al])));
        out.push(("ell_divergence".into(), rel(&[b2a2 * dn, s * ell])));
        out.push(("m_normal_ell".into(), rel(&[b * mn * b2a2, -dm * b2a2, -s_ab * ell])));
        out.push((
            "tangential_data_ell".into(),
            rel(&[b2a2 * b * dh / al, -(b * b + s) * b2a2 * dm, -s * q_ab * ell]),
        ));
        out.push(("normal_data_ell".into(), rel(&[b2a2 * hn / al, -2.0 * b2a2 * dm, -s_bb * ell])));
        out
    }

    pub fn max_identity_residual(&self) -> (String, f64) {
        self.identity_residuals().into_iter().fold((String::new(), 0.0), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc })
    }

    /// Relative residual of the transformed Lame ODE system at x.
    pub fn ode_residual(&self, x: f64) -> f64 {
        let d = self.xi.len();
        let lam = self.lambda;
        let (al, be) = (self.mat.alpha, self.mat.beta);
        let s: f64 = self.xi.iter().map(|v| v * v).sum();
        let u = self.derivative(x, 0);
        let u1 = self.derivative(x, 1);
        let u2 = self.derivative(x, 2);
        let du = dot_ixi(&self.xi, &u[..d]);
        let du1 = dot_ixi(&self.xi, &u1[..d]);
        let mut worst: f64 = 0.0;
        let mut norm: f64 = 0.0;
        for j in 0..d {
            let ixj = I * self.xi[j];
            let terms = [(lam + al * s) * u[j], -al * u2[j], -be * ixj * du, -be * ixj * u1[d]];
            worst = worst.max(terms.iter().sum::<C64>().norm());
            norm = norm.max(terms.iter().map(|t| t.norm()).sum());
        }
        let terms = [(lam + al * s) * u[d], -al * u2[d], -be * du1, -be * u2[d]];
        worst = worst.max(terms.iter().sum::<C64>().norm());
        norm = norm.max(terms.iter().map(|t| t.norm()).sum());
        if norm == 0.0 {
            0.0
        } else {
            worst / norm
        }
    }

    /// Relative residual of the two boundary conditions at x_N = 0.
    pub fn bc_residual(&self) -> f64 {
        let d = self.xi.len();
        let (al, be) = (self.mat.alpha, self.mat.beta);
        let u = self.derivative(0.0, 0);
        let u1 = self.derivative(0.0, 1);
        let du = dot_ixi(&self.xi, &u[..d]);
        let mut worst: f64 = 0.0;
        let mut norm: f64 = 0.0;
        for j in 0..d {
            let terms = [u1[j], I * self.xi[j] * u[d], self.h[j] / al];
            worst = worst.max(terms.iter().sum::<C64>().norm());
            norm = norm.max(terms.iter().map(|t| t.norm()).sum());
        }
        let terms = [al * u1[d], -al * du, be * du, be * u1[d], self.h[d]];
        worst = worst.max(terms.iter().sum::<C64>().norm());
        norm = norm.max(terms.iter().map(|t| t.norm()).sum());
        if norm == 0.0 {
            0.0
        } else {
            worst / norm
        }
    }
}

pub fn evaluate_mode(state: &ModeState, x: f64) -> Result<Vec<C64>> {
    if !(x >= 0.0) {
        return Err(Error::Param(format!("x_N = {x} must be nonnegative")));
    }
    Ok(state.derivative(x, 0))
}

/// Independent oracle: least-squares solve of the full system in (m, n)
/// assembled from the interior relations and both boundary conditions.
pub fn dense_coefficients(lambda: C64, xi: &[f64], h: &[C64], mat: &Material) -> Result<(Vec<C64>, Vec<C64>)> {
    let d = xi.len();
    let nn = d + 1;
    let xn = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = crate::symbols::roots_at(lambda, xn, mat)?;
    let (a, b) = (r.a, r.b);
    let (al, be) = (mat.alpha, mat.beta);
    let b2a2 = b * b - a * a;
    // unknown layout: m_0..m_d, n_0..n_d
    let mi = |j: usize| j;
    let ni = |j: usize| nn + j;
    let mut rows: Vec<(Vec<C64>, C64)> = Vec::new();
    let zero = C64::new(0.0, 0.0);
    for j in 0..d {
        let ixj = I * xi[j];
        // alpha (B^2-A^2) n_j - beta i xi_j (i xi'.n' - A n_N) = 0
        let mut row = vec![zero; 2 * nn];
        row[ni(j)] += al * b2a2;
        for k in 0..d {
            row[ni(k)] += -be * ixj * I * xi[k];
        }
        row[ni(d)] += be * ixj * a;
        rows.push((row, zero));
        // beta i xi_j (i xi'.(m'-n') - B(m_N - n_N)) = 0
        let mut row = vec![zero; 2 * nn];
        for k in 0..d {
            row[mi(k)] += be * ixj * I * xi[k];
            row[ni(k)] += -be * ixj * I * xi[k];
        }
        row[mi(d)] += -be * ixj * b;
        row[ni(d)] += be * ixj * b;
        rows.push((row, zero));
        // B(m_j - n_j) + A n_j - i xi_j m_N = h_j / alpha
        let mut row = vec![zero; 2 * nn];
        row[mi(j)] += b;
        row[ni(j)] += a - b;
        row[mi(d)] += -ixj;
        rows.push((row, h[j] / al));
    }
    let mut row = vec![zero; 2 * nn];
    for k in 0..d {
        row[ni(k)] += be * a * I * xi[k];
    }
    row[ni(d)] += al * b2a2 - be * a * a;
    rows.push((row, zero));
    let mut row = vec![zero; 2 * nn];
    for k in 0..d {
        row[mi(k)] += be * b * I * xi[k];
        row[ni(k)] += -be * b * I * xi[k];
    }
    row[mi(d)] += -be * b * b;
    row[ni(d)] += be * b * b;
    rows.push((row, zero));
    // alpha(B(m_N-n_N) + A n_N + i xi'.m') + beta(B(m_N-n_N) + A n_N - i xi'.m') = h_N
    let mut row = vec![zero; 2 * nn];
    row[mi(d)] += (al + be) * b;
    row[ni(d)] += (al + be) * (a - b);
    for k in 0..d {
        row[mi(k)] += (al - be) * I * xi[k];
    }
    rows.push((row, h[d]));

    let mat_a = DMatrix::from_fn(rows.len(), 2 * nn, |r, c| rows[r].0[c]);
    let rhs = DVector::from_fn(rows.len(), |r, _| rows[r].1);
    let svd = mat_a.svd(true, true);
    let sol = svd.solve(&rhs, 1e-14).map_err(|e| Error::Oracle(e.to_string()))?;
    Ok(((0..nn).map(|j| sol[j]).collect(), (0..nn).map(|j| sol[nn + j]).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit() -> Material {
        Material::new(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_trace_gives_zero_coefficients() {
        let st = boundary_coeffs_at(C64::new(2.0, 1.0), &[0.7], &[C64::new(0.0, 0.0); 2], &unit()).unwrap();
        assert!(st.m.iter().chain(&st.n).all(|v| v.norm() == 0.0));
        assert_eq!(st.ell, C64::new(0.0, 0.0));
    }

    #[test]
    fn reference_mode_matches_dense_oracle() {
        let h = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let st = boundary_coeffs_at(C64::new(1.0, 0.0), &[1.0], &h, &unit()).unwrap();
        let (m, n) = dense_coefficients(C64::new(1.0, 0.0), &[1.0], &h, &unit()).unwrap();
        for j in 0..2 {
            assert!((st.m[j] - m[j]).norm() < 1e-12 * st.m[j].norm().max(1.0));
            assert!((st.n[j] - n[j]).norm() < 1e-12 * st.n[j].norm().max(1.0));
        }
        assert!(st.max_identity_residual().1 < 1e-12);
    }

    #[test]
    fn zero_frequency_limit() {
        let mat = Material::new(1.3, 0.4, 1.0, 1.0).unwrap();
        let h = [C64::new(0.8, -0.2), C64::new(0.0, 0.0)];
        let st = boundary_coeffs_at(C64::new(3.0, 1.0), &[0.0], &h, &mat).unwrap();
        assert!((st.m[0] - h[0] / (mat.alpha * st.roots.b)).norm() < 1e-15);
        assert!(st.n[0].norm() < 1e-15);
    }

    #[test]
    fn ode_and_boundary_residuals_vanish() {
        let mat = Material::new(0.8, 1.7, 1.0, 1.0).unwrap();
        let lam = C64::from_polar(4.0, 0.9 * (PI - PI / 6.0));
        let h = [C64::new(0.3, 1.0), C64::new(-0.5, 0.2), C64::new(1.0, -0.7)];
        let st = boundary_coeffs_at(lam, &[0.4, -1.3], &h, &mat).unwrap();
        for &x in &[0.0, 0.1, 0.7, 2.0] {
            assert!(st.ode_residual(x) < 1e-13, "x = {x}: {}", st.ode_residual(x));
        }
        assert!(st.bc_residual() < 1e-13);
        assert!(st.max_identity_residual().1 < 1e-13);
    }
}
