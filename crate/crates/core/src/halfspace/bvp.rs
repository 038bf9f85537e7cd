//! Finite-difference oracle for one tangential mode.
//!
//! Second-order centered differences on [0, X]. The boundary conditions at 0
//! eliminate the ghost values, so the system stays block tridiagonal with
//! N x N blocks. Homogeneous Dirichlet data close the system at X.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbols::{roots_at, Material};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvpProfile {
    pub x: Vec<f64>,
    /// u[node][component]
    pub u: Vec<Vec<C64>>,
}

impl BvpProfile {
    /// Linear interpolation at x (exact at nodes).
    pub fn at(&self, x: f64) -> Vec<C64> {
        let h = self.x[1] - self.x[0];
        let i = ((x / h).floor() as usize).min(self.x.len() - 2);
        let t = (x - self.x[i]) / h;
        self.u[i].iter().zip(&self.u[i + 1]).map(|(a, b)| a * (1.0 - t) + b * t).collect()
    }
}

/// Smallest decay rate min(Re A, Re B) over the mode.
pub fn decay_rate(lambda: C64, xi_norm: f64, mat: &Material) -> Result<f64> {
    let r = roots_at(lambda, xi_norm, mat)?;
    Ok(r.a.re.min(r.b.re))
}

pub fn oracle_bvp(lambda: C64, xi: &[f64], h: &[C64], mat: &Material, x_max: f64, intervals: usize) -> Result<BvpProfile> {
    let d = xi.len();
    let nn = d + 1;
    if h.len() != nn {
        return Err(Error::Input(format!("trace has {} components, expected {nn}", h.len())));
    }
    let xn = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let kappa = decay_rate(lambda, xn, mat)?;
    if x_max * kappa < 20.0 {
        return Err(Error::Param(format!("X_max = {x_max} too short for decay rate {kappa:.3e}")));
    }
    if intervals < 4 {
        return Err(Error::Param("need at least 4 intervals".into()));
    }
    let (al, be) = (mat.alpha, mat.beta);
    let s: f64 = xn * xn;
    let hs = x_max / intervals as f64;
    let zero = C64::new(0.0, 0.0);
    let mut lo = DMatrix::from_element(nn, nn, zero);
    let mut di = DMatrix::from_element(nn, nn, zero);
    let mut up = DMatrix::from_element(nn, nn, zero);
    let h2 = hs * hs;
    for j in 0..d {
        let ixj = I * xi[j];
        lo[(j, j)] = C64::from(-al / h2);
        up[(j, j)] = C64::from(-al / h2);
        di[(j, j)] += lambda + al * s + 2.0 * al / h2;
        for k in 0..d {
            di[(j, k)] += -be * ixj * I * xi[k];
        }
        lo[(j, d)] = be * ixj / (2.0 * hs);
        up[(j, d)] = -be * ixj / (2.0 * hs);
    }
    lo[(d, d)] = C64::from(-(al + be) / h2);
    up[(d, d)] = C64::from(-(al + be) / h2);
    di[(d, d)] = lambda + al * s + 2.0 * (al + be) / h2;
    for k in 0..d {
        lo[(d, k)] = be * I * xi[k] / (2.0 * hs);
        up[(d, k)] = -be * I * xi[k] / (2.0 * hs);
    }
    // ghost: U_{-1} = U_1 + 2h (G U_0 + c)
    let mut g = DMatrix::from_element(nn, nn, zero);
    let mut c = DVector::from_element(nn, zero);
    for j in 0..d {
        g[(j, d)] = I * xi[j];
        g[(d, j)] = (be - al) * I * xi[j] / (al + be);
        c[j] = h[j] / al;
    }
    c[d] = h[d] / (al + be);
    let di0 = &di + &lo * &g * C64::from(2.0 * hs);
    let up0 = &up + &lo;
    let rhs0 = -(&lo * &c) * C64::from(2.0 * hs);

    // block Thomas sweep over nodes 0..intervals-1 (node `intervals` is Dirichlet)
    let m = intervals;
    let mut cp: Vec<DMatrix<C64>> = Vec::with_capacity(m);
    let mut dp: Vec<DVector<C64>> = Vec::with_capacity(m);
    let zero_rhs = DVector::from_element(nn, zero);
    for i in 0..m {
        let (a_i, u_i, r_i) = if i == 0 { (&di0, &up0, &rhs0) } else { (&di, &up, &zero_rhs) };
        let (den, rhs) = if i == 0 {
            (a_i.clone(), r_i.clone())
        } else {
            (a_i - &lo * &cp[i - 1], r_i - &lo * &dp[i - 1])
        };
        let lu = den.lu();
        let ci = lu.solve(u_i).ok_or_else(|| Error::Oracle(format!("singular block at node {i}")))?;
        let dv = lu.solve(&rhs).ok_or_else(|| Error::Oracle(format!("singular block at node {i}")))?;
        cp.push(ci);
        dp.push(dv);
    }
    let mut sol = vec![DVector::from_element(nn, zero); m + 1];
    sol[m - 1] = dp[m - 1].clone();
    for i in (0..m - 1).rev() {
        sol[i] = &dp[i] - &cp[i] * &sol[i + 1];
    }
    let x = (0..=m).map(|i| i as f64 * hs).collect();
    let u = sol.into_iter().map(|v| v.iter().cloned().collect()).collect();
    Ok(BvpProfile { x, u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halfspace::modes::boundary_coeffs_at;

    #[test]
    fn zero_data_zero_profile() {
        let p = oracle_bvp(C64::new(1.0, 0.0), &[1.0], &[C64::new(0.0, 0.0); 2], &Material::default(), 30.0, 64).unwrap();
        assert!(p.u.iter().flatten().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn second_order_convergence() {
        let mat = Material::default();
        let lam = C64::new(1.0, 0.0);
        let h = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let st = boundary_coeffs_at(lam, &[1.0], &h, &mat).unwrap();
        let mut errs = Vec::new();
        for &n in &[512usize, 1024, 2048] {
            let p = oracle_bvp(lam, &[1.0], &h, &mat, 32.0, n * 32).unwrap();
            let e = p.x.iter().zip(&p.u).map(|(&x, u)| {
                let v = st.derivative(x, 0);
                u.iter().zip(&v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
            });
            errs.push(e.fold(0.0, f64::max));
        }
        let r1 = (errs[0] / errs[1]).log2();
        let r2 = (errs[1] / errs[2]).log2();
        assert!((r1 - 2.0).abs() < 0.1 && (r2 - 2.0).abs() < 0.1, "{errs:?}");
    }
}
