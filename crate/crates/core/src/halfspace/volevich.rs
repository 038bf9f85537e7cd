//! Volevich form of the half-space solution.
//!
//! With the data vector H = (lambda^{1/2} h, grad h) the solution reads
//! u(x) = int_0^inf F'^{-1}[ B e^{-B(x+y)} M1 F'H(y) + B^2 M(x+y) M2 F'H(y) ] dy.
//! It follows from u(x) = -int_0^inf d/dy [e^{-B(x+y)} m(h(y)) + D(x+y) n(h(y))] dy
//! with D = e^{-Ax} - e^{-Bx} = (A-B) M and the identity M' = -e^{-Bx} - A M.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{tangential_xi, trapezoid_weights, HalfSpaceField};
use super::modes::coefficient_maps;
use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use crate::quad::{bisect_panels, composite, geometric_panels};
use crate::symbols::{kernel_m_ab, roots_at, Material, SectorPoint};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolevichOptions {
    pub panel_start: f64,
    pub panel_ratio: f64,
    pub y_max: f64,
    pub order: usize,
    /// Step of the 4th-order differences in x_N.
    pub fd_step: f64,
    /// Largest accepted relative change under panel bisection.
    pub refine_tol: f64,
}

impl Default for VolevichOptions {
    fn default() -> Self {
        VolevichOptions { panel_start: 1e-3, panel_ratio: 2.0, y_max: 40.0, order: 16, fd_step: 1e-3, refine_tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct VolevichReport {
    pub field: HalfSpaceField,
    /// Relative L2 change between the base and the bisected quadrature.
    pub refinement_change: f64,
}

/// Symbol matrices (M1, M2), each N x (N + N^2). Columns 0..N act on
/// lambda^{1/2} h_J; column N + i N + J acts on d_i h_J (i = N-1 is the normal).
pub fn volevich_symbols(lambda: C64, xi: &[f64], mat: &Material) -> Result<(Vec<Vec<C64>>, Vec<Vec<C64>>)> {
    let d = xi.len();
    let nn = d + 1;
    let cols = nn + nn * nn;
    let maps = coefficient_maps(lambda, xi, mat)?;
    let (a, b) = (maps.roots.a, maps.roots.b);
    let zero = C64::new(0.0, 0.0);
    // reconstruction h = R H and normal-derivative pick P H
    let mut r = vec![vec![zero; cols]; nn];
    let mut p = vec![vec![zero; cols]; nn];
    let sl = lambda.sqrt();
    for j in 0..nn {
        r[j][j] = sl / (mat.alpha * b * b);
        for l in 0..d {
            r[j][nn + l * nn + j] = -I * xi[l] / (b * b);
        }
        p[j][nn + d * nn + j] = C64::new(1.0, 0.0);
    }
    let mul = |m: &Vec<Vec<C64>>, x: &Vec<Vec<C64>>| -> Vec<Vec<C64>> {
        (0..nn).map(|i| (0..cols).map(|c| (0..nn).map(|k| m[i][k] * x[k][c]).sum()).collect()).collect()
    };
    let mr = mul(&maps.m, &r);
    let mp = mul(&maps.m, &p);
    let nr = mul(&maps.n, &r);
    let np = mul(&maps.n, &p);
    let bma = b - a;
    let m1 = (0..nn).map(|i| (0..cols).map(|c| mr[i][c] - mp[i][c] / b - bma / b * nr[i][c]).collect()).collect();
    let m2 = (0..nn).map(|i| (0..cols).map(|c| bma / (b * b) * (np[i][c] - a * nr[i][c])).collect()).collect();
    Ok((m1, m2))
}

/// 4th-order derivative in y, centered when y >= 2 delta and one-sided below.
fn dy_data<H>(h: &H, y: f64, delta: f64) -> VectorField
where
    H: Fn(f64) -> VectorField,
{
    let comb = |pts: &[(f64, f64)]| -> VectorField {
        let mut out: Option<VectorField> = None;
        for &(off, w) in pts {
            let v = h(y + off * delta);
            match &mut out {
                None => out = Some(v.iter().map(|c| c.iter().map(|x| x * (w / (12.0 * delta))).collect()).collect()),
                Some(o) => {
                    for (oc, vc) in o.iter_mut().zip(&v) {
                        for (a, b) in oc.iter_mut().zip(vc) {
                            *a += b * (w / (12.0 * delta));
                        }
                    }
                }
            }
        }
        out.expect("nonempty stencil")
    };
    if y >= 2.0 * delta {
        comb(&[(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)])
    } else {
        comb(&[(0.0, -25.0), (1.0, 48.0), (2.0, -36.0), (3.0, 16.0), (4.0, -3.0)])
    }
}

fn volevich_pass<H>(h: &H, lambda: C64, mat: &Material, tgrid: &Grid, vertical: &[f64], panels: &[(f64, f64)], opts: &VolevichOptions) -> Result<Vec<VectorField>>
where
    H: Fn(f64) -> VectorField + Sync,
{
    let nn = tgrid.dim + 1;
    let d = nn - 1;
    let (ys, ws) = composite(panels, opts.order);
    // transformed data and normal derivative at every quadrature node
    let data: Vec<(VectorField, VectorField)> = ys
        .par_iter()
        .map(|&y| {
            let v = h(y);
            let dv = dy_data(h, y, opts.fd_step);
            (v.iter().map(|c| tgrid.fft_of(c)).collect(), dv.iter().map(|c| tgrid.fft_of(c)).collect())
        })
        .collect();
    if data.iter().any(|(v, dv)| v.len() != nn || dv.len() != nn || v.iter().chain(dv).any(|c| c.len() != tgrid.len())) {
        return Err(Error::Input(format!("boundary data must have {nn} components on {} points", tgrid.len())));
    }
    let sl = lambda.sqrt();
    let spectra: Vec<Vec<Vec<C64>>> = (0..tgrid.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<Vec<C64>>> {
            let xi = tangential_xi(tgrid, i);
            let zero = C64::new(0.0, 0.0);
            if data.iter().all(|(v, dv)| v.iter().chain(dv).all(|c| c[i] == zero)) {
                return Ok(vec![vec![zero; nn]; vertical.len()]);
            }
            let (m1, m2) = volevich_symbols(lambda, &xi, mat)?;
            let r = roots_at(lambda, xi.iter().map(|v| v * v).sum::<f64>().sqrt(), mat)?;
            let (a, b) = (r.a, r.b);
            let cols = nn + nn * nn;
            let mut big_h = vec![zero; cols];
            let mut c1 = Vec::with_capacity(ys.len());
            let mut c2 = Vec::with_capacity(ys.len());
            for (v, dv) in &data {
                for j in 0..nn {
                    big_h[j] = sl * v[j][i];
                    for l in 0..d {
                        big_h[nn + l * nn + j] = I * xi[l] * v[j][i];
                    }
                    big_h[nn + d * nn + j] = dv[j][i];
                }
                let apply = |m: &Vec<Vec<C64>>| -> Vec<C64> { m.iter().map(|row| row.iter().zip(&big_h).map(|(x, y)| x * y).sum()).collect() };
                c1.push(apply(&m1));
                c2.push(apply(&m2));
            }
            Ok(vertical
                .iter()
                .map(|&x| {
                    let mut acc = vec![zero; nn];
                    for (k, (&y, &w)) in ys.iter().zip(&ws).enumerate() {
                        let e = b * (-b * (x + y)).exp() * w;
                        let mk = b * b * kernel_m_ab(a, b, x + y) * w;
                        for j in 0..nn {
                            acc[j] += e * c1[k][j] + mk * c2[k][j];
                        }
                    }
                    acc
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..vertical.len())
        .map(|k| {
            (0..nn)
                .map(|j| {
                    let mut c: Vec<C64> = spectra.iter().map(|s| s[k][j]).collect();
                    tgrid.ifft(&mut c);
                    c
                })
                .collect()
        })
        .collect())
}

/// Solves the free-boundary problem with boundary data h(x', x_N) extended into
/// the half-space. `h(y)` returns the components on the tangential grid at height y.
pub fn solve_halfspace_volevich<H>(h: &H, point: &SectorPoint, mat: &Material, tgrid: &Grid, vertical: &[f64], opts: &VolevichOptions) -> Result<VolevichReport>
where
    H: Fn(f64) -> VectorField + Sync,
{
    mat.validate()?;
    let panels = geometric_panels(opts.panel_start, opts.panel_ratio, opts.y_max)?;
    let base = volevich_pass(h, point.lambda, mat, tgrid, vertical, &panels, opts)?;
    let fine = volevich_pass(h, point.lambda, mat, tgrid, vertical, &bisect_panels(&panels), opts)?;
    let mk = |values: Vec<VectorField>| HalfSpaceField { tgrid: tgrid.clone(), vertical: vertical.to_vec(), values, mode_states: None };
    let (base, fine) = (mk(base), mk(fine));
    let norm = fine.l2_norm();
    let change = if norm == 0.0 { 0.0 } else { fine.diff_l2(&base) / norm };
    if change > opts.refine_tol {
        return Err(Error::Quadrature(format!("Volevich quadrature changed by {change:.3e} under refinement")));
    }
    Ok(VolevichReport { field: fine, refinement_change: change })
}

/// The model operator f -> int_0^inf F'^{-1}[B e^{-B(x+y)} F'f(y)] dy for a
/// scalar f on the tangential grid. Returns ||L f|| / ||f|| in L2 over the
/// vertical nodes.
pub fn l1_operator_ratio<F>(f: &F, lambda: C64, mat: &Material, tgrid: &Grid, vertical: &[f64], opts: &VolevichOptions) -> Result<f64>
where
    F: Fn(f64) -> Vec<C64> + Sync,
{
    let panels = bisect_panels(&geometric_panels(opts.panel_start, opts.panel_ratio, opts.y_max)?);
    let (ys, ws) = composite(&panels, opts.order);
    let data: Vec<Vec<C64>> = ys.par_iter().map(|&y| tgrid.fft_of(&f(y))).collect();
    let spectra: Vec<Vec<C64>> = (0..tgrid.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<C64>> {
            let xn = tgrid.frequency_norm(i);
            let b = roots_at(lambda, xn, mat)?.b;
            Ok(vertical
                .iter()
                .map(|&x| ys.iter().zip(&ws).zip(&data).map(|((&y, &w), v)| w * b * (-b * (x + y)).exp() * v[i]).sum())
                .collect())
        })
        .collect::<Result<_>>()?;
    let tw = trapezoid_weights(vertical);
    let cv = tgrid.cell_volume();
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, (&x, &w)) in vertical.iter().zip(&tw).enumerate() {
        let mut c: Vec<C64> = spectra.iter().map(|s| s[k]).collect();
        tgrid.ifft(&mut c);
        num += w * cv * c.iter().map(|v| v.norm_sqr()).sum::<f64>();
        den += w * cv * f(x).iter().map(|v| v.norm_sqr()).sum::<f64>();
    }
    if den == 0.0 {
        return Err(Error::Input("zero data".into()));
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halfspace::field::{solve_halfspace_trace, vertical_nodes};
    use std::f64::consts::PI;

    #[test]
    fn zero_data() {
        let tg = Grid::new(1, 16, 8.0).unwrap();
        let pt = SectorPoint::new(C64::new(2.0, 0.0), PI / 6.0, 1.0).unwrap();
        let h = |_y: f64| vec![vec![C64::new(0.0, 0.0); 16]; 2];
        let r = solve_halfspace_volevich(&h, &pt, &Material::default(), &tg, &[0.0, 1.0], &VolevichOptions::default()).unwrap();
        assert_eq!(r.field.l2_norm(), 0.0);
    }

    #[test]
    fn matches_trace_form() {
        let tg = Grid::new(1, 32, 8.0).unwrap();
        let mat = Material::new(1.0, 0.7, 1.0, 1.0).unwrap();
        let pt = SectorPoint::new(C64::new(2.0, 1.5), PI / 6.0, 1.0).unwrap();
        let trace: Vec<Vec<C64>> = vec![
            (0..32).map(|i| C64::new((-(tg.coord(i).powi(2))).exp(), 0.0)).collect(),
            (0..32).map(|i| C64::new(tg.coord(i) * (-(tg.coord(i).powi(2))).exp(), 0.0)).collect(),
        ];
        let h = |y: f64| trace.iter().map(|c| c.iter().map(|v| v * (-y).exp()).collect()).collect();
        let v = vertical_nodes(pt.lambda, &mat, 33, 1e-9).unwrap();
        let a = solve_halfspace_trace(&trace, &pt, &mat, &tg, &v).unwrap();
        let b = solve_halfspace_volevich(&h, &pt, &mat, &tg, &v, &VolevichOptions::default()).unwrap();
        let rel = a.diff_l2(&b.field) / a.l2_norm();
        assert!(rel < 1e-6, "{rel}");
    }
}
