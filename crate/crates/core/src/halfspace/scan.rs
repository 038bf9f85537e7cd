//! Resolvent-estimate scan for the half-space Lame problem with interior data.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::field::{full_lame_halfspace_at, RhsData};
use crate::besov::{halfspace_norm, LPBasis, QIndex};
use crate::error::Result;
use crate::grid::{half_rows, Grid, VectorField};
use crate::symbols::{multi_indices, Material, SectorPoint};
use crate::wholespace::{fold_rows, DataNorms, EstimateParams, NormBundle, ResolventEstimateRow};

/// Probe data on the half rows: tangential modes e^{i k x_0} and even normal
/// modes cos(k x_N), each in every component direction.
pub fn half_mode_family(grid: &Grid, indices: &[usize]) -> Vec<VectorField> {
    let rows = half_rows(grid);
    let m = grid.len() / grid.n;
    let dx = grid.dx();
    let nn = grid.dim;
    let mut fam = Vec::new();
    for &j in indices {
        let k = 2.0 * std::f64::consts::PI * j as f64 / grid.extent;
        let tangential: Vec<C64> = (0..m * rows).map(|i| C64::from_polar(1.0, k * grid.coord(i / rows / grid.n.pow(grid.dim as u32 - 2)))).collect();
        let normal: Vec<C64> = (0..m * rows).map(|i| C64::new((k * (i % rows) as f64 * dx).cos(), 0.0)).collect();
        for profile in [&tangential, &normal] {
            for c in 0..nn {
                let mut f = vec![vec![C64::new(0.0, 0.0); m * rows]; nn];
                f[c] = profile.clone();
                fam.push(f);
            }
        }
    }
    fam
}

fn half_bundle(rhs: &RhsData, lambda: C64, mat: &Material, grid: &Grid, s: f64, q: f64, basis: &LPBasis) -> Result<NormBundle> {
    let sol = full_lame_halfspace_at(rhs, lambda, mat, grid)?;
    let mut nb = NormBundle { u: 0.0, grad: 0.0, hess: 0.0 };
    for kappa in multi_indices(grid.dim, 2) {
        let order: usize = kappa.iter().sum();
        let mut t = 0.0;
        for c in sol.derivative_rows(&kappa) {
            t += halfspace_norm(&c, s, q, QIndex::One, basis)?.total;
        }
        match order {
            0 => nb.u += t,
            1 => nb.grad += t,
            _ => nb.hess += t,
        }
    }
    Ok(nb)
}

/// Per-lambda sup over the probe family of each estimate quotient, with
/// h = 0. Norms are Besov norms of the even extensions. The lambda-derivative
/// families are skipped unless `with_dlambda`.
pub fn halfspace_resolvent_scan(
    g_family: &[VectorField],
    lambdas: &[SectorPoint],
    params: &EstimateParams,
    mat: &Material,
    basis: &LPBasis,
    with_dlambda: bool,
) -> Result<Vec<ResolventEstimateRow>> {
    params.validate()?;
    mat.validate()?;
    let grid = &basis.grid;
    let (s, sigma, q) = (params.s, params.sigma, params.q);
    let size = grid.len() / grid.n * half_rows(grid);
    let zero = vec![vec![C64::new(0.0, 0.0); size]; grid.dim];
    let data: Vec<DataNorms> = g_family
        .iter()
        .map(|g| {
            let norm = |sv: f64| -> Result<f64> { g.iter().map(|c| Ok(halfspace_norm(c, sv, q, QIndex::One, basis)?.total)).sum() };
            Ok(DataNorms { minus: norm(s - sigma)?, base: norm(s)?, plus: norm(s + sigma)? })
        })
        .collect::<Result<_>>()?;
    let per_lambda: Vec<Result<Vec<ResolventEstimateRow>>> = lambdas
        .par_iter()
        .map(|pt| {
            let lam = pt.lambda;
            let mut rows = BTreeMap::new();
            for (member, (g, dn)) in g_family.iter().zip(&data).enumerate() {
                if dn.base == 0.0 {
                    continue;
                }
                let rhs = RhsData { g: g.clone(), h: zero.clone() };
                let nb = half_bundle(&rhs, lam, mat, grid, s, q, basis)?;
                let nb_d = if with_dlambda {
                    let dl = lam * params.dlambda_step;
                    // the map lambda -> u is linear in the data, difference the fields
                    let up = full_lame_halfspace_at(&rhs, lam + dl, mat, grid)?;
                    let um = full_lame_halfspace_at(&rhs, lam - dl, mat, grid)?;
                    let mut nb = NormBundle { u: 0.0, grad: 0.0, hess: 0.0 };
                    for kappa in multi_indices(grid.dim, 2) {
                        let order: usize = kappa.iter().sum();
                        let mut t = 0.0;
                        for (a, b) in up.derivative_rows(&kappa).iter().zip(um.derivative_rows(&kappa)) {
                            let d: Vec<C64> = a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * dl)).collect();
                            t += halfspace_norm(&d, s, q, QIndex::One, basis)?.total;
                        }
                        match order {
                            0 => nb.u += t,
                            1 => nb.grad += t,
                            _ => nb.hess += t,
                        }
                    }
                    nb
                } else {
                    nb
                };
                fold_rows(&mut rows, lam, member, &nb, &nb_d, dn, sigma);
            }
            Ok(rows.into_values().filter(|r| with_dlambda || !r.family.ends_with("_dlambda")).collect())
        })
        .collect();
    let mut out = Vec::new();
    for r in per_lambda {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::make_basis;
    use std::f64::consts::PI;

    #[test]
    fn scan_rows_are_finite() {
        let grid = Grid::new(2, 32, 8.0).unwrap();
        let basis = make_basis(&grid).unwrap();
        let fam = half_mode_family(&grid, &[1, 4]);
        assert_eq!(fam.len(), 8);
        let pts = [SectorPoint::new(C64::new(10.0, 0.0), PI / 6.0, 1.0).unwrap()];
        let rows = halfspace_resolvent_scan(&fam, &pts, &EstimateParams::default(), &Material::default(), &basis, true).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0));
    }
}
