//! Half-space fields: trace-form assembly and the full problem with interior
//! forcing.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::modes::{boundary_coeffs_at, ModeState};
use crate::error::{Error, Result};
use crate::grid::{even_extend, half_rows, restrict_half, Grid, VectorField};
use crate::symbols::{roots_at, Material, SectorPoint};
use crate::wholespace::solve_wholespace_hat;

/// Field on tangential torus x vertical nodes.
#[derive(Debug, Clone)]
pub struct HalfSpaceField {
    pub tgrid: Grid,
    pub vertical: Vec<f64>,
    /// values[node][component][tangential index]
    pub values: Vec<VectorField>,
    pub mode_states: Option<Vec<ModeState>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeResidual {
    pub mode: usize,
    pub ode_residual: f64,
    pub bc_residual: f64,
}

impl HalfSpaceField {
    pub fn zeros(tgrid: &Grid, vertical: &[f64]) -> Self {
        let nn = tgrid.dim + 1;
        let values = vertical.iter().map(|_| vec![vec![C64::new(0.0, 0.0); tgrid.len()]; nn]).collect();
        HalfSpaceField { tgrid: tgrid.clone(), vertical: vertical.to_vec(), values, mode_states: None }
    }

    pub fn components(&self) -> usize {
        self.tgrid.dim + 1
    }

    /// L2 norm with trapezoid weights on the vertical nodes.
    pub fn l2_norm(&self) -> f64 {
        let w = trapezoid_weights(&self.vertical);
        let cv = self.tgrid.cell_volume();
        let s: f64 = self
            .values
            .iter()
            .zip(&w)
            .map(|(v, wk)| wk * cv * v.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>())
            .sum();
        s.sqrt()
    }

    pub fn diff_l2(&self, other: &HalfSpaceField) -> f64 {
        let mut d = self.clone();
        for (a, b) in d.values.iter_mut().zip(&other.values) {
            for (ca, cb) in a.iter_mut().zip(b) {
                for (x, y) in ca.iter_mut().zip(cb) {
                    *x -= y;
                }
            }
        }
        d.l2_norm()
    }

    pub fn sup_at(&self, node: usize) -> f64 {
        self.values[node].iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Per-mode ODE residual (worst over vertical nodes) and boundary residual.
    pub fn mode_residuals(&self) -> Vec<ModeResidual> {
        let Some(states) = &self.mode_states else { return Vec::new() };
        states
            .par_iter()
            .enumerate()
            .map(|(i, st)| ModeResidual {
                mode: i,
                ode_residual: self.vertical.iter().map(|&x| st.ode_residual(x)).fold(0.0, f64::max),
                bc_residual: st.bc_residual(),
            })
            .collect()
    }

    /// Ratio of sup norms at the two largest nodes against the slowest
    /// admissible decay. Returns (observed, bound).
    pub fn decay_check(&self, lambda: C64, mat: &Material) -> Result<(f64, f64)> {
        let k = self.vertical.len();
        if k < 2 {
            return Err(Error::Input("need two vertical nodes".into()));
        }
        let (x0, x1) = (self.vertical[k - 2], self.vertical[k - 1]);
        let kappa = roots_at(lambda, 0.0, mat)?.a.re.min(roots_at(lambda, 0.0, mat)?.b.re);
        let (s0, s1) = (self.sup_at(k - 2), self.sup_at(k - 1));
        let observed = if s0 == 0.0 { 0.0 } else { s1 / s0 };
        // the M kernel carries an extra factor x on top of the exponential
        let bound = (-kappa * (x1 - x0)).exp() * (x1 / x0.max(f64::MIN_POSITIVE)).max(1.0);
        Ok((observed, bound))
    }
}

pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = x[i + 1] - x[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// Slowest decay rate over all modes of the tangential grid (attained at xi' = 0).
pub fn slowest_decay(lambda: C64, mat: &Material) -> Result<f64> {
    let r = roots_at(lambda, 0.0, mat)?;
    Ok(r.a.re.min(r.b.re))
}

/// `count` uniform nodes on [0, X] with X such that the slowest mode decays below `tol`.
pub fn vertical_nodes(lambda: C64, mat: &Material, count: usize, tol: f64) -> Result<Vec<f64>> {
    let kappa = slowest_decay(lambda, mat)?;
    let x_max = (-tol.ln()) / kappa;
    Ok((0..count).map(|i| x_max * i as f64 / (count - 1) as f64).collect())
}

pub(crate) fn tangential_xi(tgrid: &Grid, i: usize) -> Vec<f64> {
    tgrid.frequency(i)[..tgrid.dim].to_vec()
}

/// Per-mode states for a trace given on the tangential grid.
pub fn trace_modes(h: &[Vec<C64>], lambda: C64, mat: &Material, tgrid: &Grid) -> Result<Vec<ModeState>> {
    let nn = tgrid.dim + 1;
    if h.len() != nn || h.iter().any(|c| c.len() != tgrid.len()) {
        return Err(Error::Input(format!("trace must have {nn} components on {} points", tgrid.len())));
    }
    let hat: Vec<Vec<C64>> = h.iter().map(|c| tgrid.fft_of(c)).collect();
    (0..tgrid.len())
        .into_par_iter()
        .map(|i| {
            let hv: Vec<C64> = hat.iter().map(|c| c[i]).collect();
            boundary_coeffs_at(lambda, &tangential_xi(tgrid, i), &hv, mat)
        })
        .collect()
}

/// Mode sum for the kappa-derivative (kappa[..N-1] tangential, kappa[N-1] normal) at x.
fn modal_values(states: &[ModeState], tgrid: &Grid, kappa: &[usize], x: f64) -> VectorField {
    let nn = tgrid.dim + 1;
    let kn = kappa.get(nn - 1).copied().unwrap_or(0) as u32;
    let mut spec = vec![vec![C64::new(0.0, 0.0); tgrid.len()]; nn];
    for (i, st) in states.iter().enumerate() {
        let mut f = C64::new(1.0, 0.0);
        for (a, &k) in st.xi.iter().enumerate() {
            f *= C64::new(0.0, k).powu(kappa.get(a).copied().unwrap_or(0) as u32);
        }
        if f == C64::new(0.0, 0.0) || st.m.iter().chain(&st.n).all(|v| *v == C64::new(0.0, 0.0)) {
            continue;
        }
        let v = st.derivative(x, kn);
        for c in 0..nn {
            spec[c][i] = f * v[c];
        }
    }
    spec.iter_mut().for_each(|c| tgrid.ifft(c));
    spec
}

pub fn solve_halfspace_trace(h: &[Vec<C64>], point: &SectorPoint, mat: &Material, tgrid: &Grid, vertical: &[f64]) -> Result<HalfSpaceField> {
    mat.validate()?;
    if vertical.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::Param("vertical nodes must be nonnegative".into()));
    }
    let states = trace_modes(h, point.lambda, mat, tgrid)?;
    let values = vertical.par_iter().map(|&x| modal_values(&states, tgrid, &[], x)).collect();
    Ok(HalfSpaceField { tgrid: tgrid.clone(), vertical: vertical.to_vec(), values, mode_states: Some(states) })
}

/// Interior force and boundary data on the half rows of a torus grid
/// (layout t * rows + k, see `restrict_half`).
#[derive(Debug, Clone, PartialEq)]
pub struct RhsData {
    pub g: VectorField,
    pub h: VectorField,
}

/// u = u_whole + u_corr on the half rows x_N = k dx, k = 0..=n/2.
#[derive(Debug, Clone)]
pub struct HalfLameSolution {
    pub grid: Grid,
    pub tgrid: Grid,
    pub lambda: C64,
    pub mat: Material,
    pub whole_hat: VectorField,
    pub modes: Vec<ModeState>,
}

fn tangential_grid(grid: &Grid) -> Result<Grid> {
    if grid.dim < 2 {
        return Err(Error::Param("half-space grid needs dimension >= 2".into()));
    }
    Grid::new(grid.dim - 1, grid.n, grid.extent)
}

/// Trace at row 0 of a half-row field.
pub fn row_trace(grid: &Grid, half: &[C64]) -> Vec<C64> {
    let rows = half_rows(grid);
    (0..grid.len() / grid.n).map(|t| half[t * rows]).collect()
}

/// Boundary stress (-a(d_N u_j + d_j u_N), -(2a d_N u_N + (b-a) div u)) at row 0,
/// from a trace oracle giving d^kappa u_c at x_N = 0.
pub fn boundary_stress<D>(grid: &Grid, mat: &Material, trace: D) -> VectorField
where
    D: Fn(usize, &[usize]) -> Vec<C64>,
{
    let nn = grid.dim;
    let d = nn - 1;
    let unit = |a: usize| -> Vec<usize> {
        let mut k = vec![0; nn];
        k[a] = 1;
        k
    };
    let tr = |c: usize, a: usize| trace(c, &unit(a));
    let m = grid.len() / grid.n;
    let diag: Vec<Vec<C64>> = (0..nn).map(|a| tr(a, a)).collect();
    let div: Vec<C64> = (0..m).map(|t| diag.iter().map(|c| c[t]).sum::<C64>()).collect();
    let dn_un = &diag[d];
    let mut out = Vec::with_capacity(nn);
    for j in 0..d {
        let a = tr(j, d);
        let b = tr(d, j);
        out.push((0..m).map(|t| -mat.alpha * (a[t] + b[t])).collect());
    }
    out.push((0..m).map(|t| -(2.0 * mat.alpha * dn_un[t] + (mat.beta - mat.alpha) * div[t])).collect());
    out
}

impl HalfLameSolution {
    pub fn rows(&self) -> usize {
        half_rows(&self.grid)
    }

    /// Trace at x_N = 0 of a whole-space derivative: sum over normal
    /// frequencies, then one tangential inverse transform.
    fn whole_trace(&self, c: usize, kappa: &[usize]) -> Vec<C64> {
        let n = self.grid.n;
        let hat = &self.whole_hat[c];
        let sym = self.grid.derivative_symbol(kappa);
        let mut out: Vec<C64> = (0..self.tgrid.len())
            .map(|t| (t * n..(t + 1) * n).map(|i| hat[i] * sym[i]).sum::<C64>() / n as f64)
            .collect();
        self.tgrid.ifft(&mut out);
        out
    }

    fn whole_rows(&self, c: usize, kappa: &[usize]) -> Vec<C64> {
        let d = self.grid.ifft_of(&self.grid.derivative_hat(&self.whole_hat[c], kappa));
        restrict_half(&self.grid, &d)
    }

    fn modal_rows(&self, kappa: &[usize]) -> VectorField {
        let rows = self.rows();
        let dx = self.grid.dx();
        let per_row: Vec<VectorField> = (0..rows).into_par_iter().map(|k| modal_values(&self.modes, &self.tgrid, kappa, k as f64 * dx)).collect();
        let m = self.tgrid.len();
        (0..self.grid.dim)
            .map(|c| {
                let mut out = vec![C64::new(0.0, 0.0); m * rows];
                for (k, row) in per_row.iter().enumerate() {
                    for t in 0..m {
                        out[t * rows + k] = row[c][t];
                    }
                }
                out
            })
            .collect()
    }

    /// kappa-derivative of every component on the half rows.
    pub fn derivative_rows(&self, kappa: &[usize]) -> VectorField {
        let modal = self.modal_rows(kappa);
        modal
            .into_iter()
            .enumerate()
            .map(|(c, mc)| {
                let w = self.whole_rows(c, kappa);
                w.iter().zip(&mc).map(|(a, b)| a + b).collect()
            })
            .collect()
    }

    /// kappa-derivative of a single component on the half rows.
    pub fn component_rows(&self, c: usize, kappa: &[usize]) -> Vec<C64> {
        let mc = self.modal_rows(kappa).swap_remove(c);
        self.whole_rows(c, kappa).iter().zip(&mc).map(|(a, b)| a + b).collect()
    }

    pub fn values(&self) -> VectorField {
        self.derivative_rows(&vec![0; self.grid.dim])
    }

    pub fn stress(&self) -> VectorField {
        boundary_stress(&self.grid, &self.mat, |c, k| row_trace(&self.grid, &self.derivative_rows(k)[c]))
    }

    /// Divergence on the half rows.
    pub fn divergence(&self) -> Vec<C64> {
        let nn = self.grid.dim;
        let mut out = vec![C64::new(0.0, 0.0); self.tgrid.len() * self.rows()];
        for a in 0..nn {
            let mut k = vec![0; nn];
            k[a] = 1;
            let d = self.component_rows(a, &k);
            out.iter_mut().zip(&d).for_each(|(o, v)| *o += v);
        }
        out
    }

    /// lambda u - alpha Lap u - beta grad div u on the half rows.
    pub fn apply_lame(&self) -> VectorField {
        let nn = self.grid.dim;
        let (al, be) = (self.mat.alpha, self.mat.beta);
        let mut second = vec![vec![Vec::new(); nn]; nn];
        for a in 0..nn {
            for b in a..nn {
                let mut k = vec![0; nn];
                k[a] += 1;
                k[b] += 1;
                second[a][b] = self.derivative_rows(&k);
            }
        }
        let u = self.values();
        (0..nn)
            .map(|c| {
                (0..u[c].len())
                    .map(|i| {
                        let lap: C64 = (0..nn).map(|a| second[a][a][c][i]).sum();
                        let gd: C64 = (0..nn).map(|a| {
                            let (p, q) = if a <= c { (a, c) } else { (c, a) };
                            second[p][q][a][i]
                        }).sum();
                        self.lambda * u[c][i] - al * lap - be * gd
                    })
                    .collect()
            })
            .collect()
    }

    /// Relative interior and boundary residuals against the data.
    pub fn residuals(&self, rhs: &RhsData) -> (f64, f64) {
        let lu = self.apply_lame();
        let rel = |a: &[Vec<C64>], b: &[Vec<C64>]| -> f64 {
            let num: f64 = a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm_sqr()).sum();
            let den: f64 = b.iter().flatten().map(|y| y.norm_sqr()).sum();
            if den == 0.0 {
                num.sqrt()
            } else {
                (num / den).sqrt()
            }
        };
        let interior = rel(&lu, &rhs.g);
        let st = self.stress();
        let ht: VectorField = rhs.h.iter().map(|c| row_trace(&self.grid, c)).collect();
        (interior, rel(&st, &ht))
    }

    pub fn to_field(&self) -> HalfSpaceField {
        let rows = self.rows();
        let u = self.values();
        let m = self.tgrid.len();
        let values = (0..rows).map(|k| u.iter().map(|c| (0..m).map(|t| c[t * rows + k]).collect()).collect()).collect();
        HalfSpaceField {
            tgrid: self.tgrid.clone(),
            vertical: (0..rows).map(|k| k as f64 * self.grid.dx()).collect(),
            values,
            mode_states: Some(self.modes.clone()),
        }
    }
}

/// Solves lambda u - alpha Lap u - beta grad div u = g in the half-space with
/// the free boundary condition stress(u) = h at x_N = 0, with lambda taken
/// as given (no sector check).
pub fn full_lame_halfspace_at(rhs: &RhsData, lambda: C64, mat: &Material, grid: &Grid) -> Result<HalfLameSolution> {
    mat.validate()?;
    let tgrid = tangential_grid(grid)?;
    let nn = grid.dim;
    let size = tgrid.len() * half_rows(grid);
    if rhs.g.len() != nn || rhs.h.len() != nn || rhs.g.iter().chain(&rhs.h).any(|c| c.len() != size) {
        return Err(Error::Input(format!("data must have {nn} components on {size} half-row points")));
    }
    let ghat: Vec<Vec<C64>> = rhs.g.iter().map(|c| grid.fft_of(&even_extend(grid, c))).collect();
    let whole_hat = solve_wholespace_hat(&ghat, lambda, mat, grid)?;
    let mut sol = HalfLameSolution { grid: grid.clone(), tgrid: tgrid.clone(), lambda, mat: *mat, whole_hat, modes: Vec::new() };
    let sw = boundary_stress(grid, mat, |c, k| sol.whole_trace(c, k));
    let corr: VectorField = rhs.h.iter().zip(&sw).map(|(h, s)| row_trace(grid, h).iter().zip(s).map(|(a, b)| a - b).collect()).collect();
    sol.modes = trace_modes(&corr, lambda, mat, &tgrid)?;
    Ok(sol)
}

pub fn full_lame_halfspace(rhs: &RhsData, point: &SectorPoint, mat: &Material, grid: &Grid) -> Result<HalfLameSolution> {
    full_lame_halfspace_at(rhs, point.lambda, mat, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pt(l: C64) -> SectorPoint {
        SectorPoint::new(l, PI / 6.0, 1.0).unwrap()
    }

    #[test]
    fn zero_trace_zero_field() {
        let tg = Grid::new(1, 16, 8.0).unwrap();
        let v = vertical_nodes(C64::new(2.0, 0.0), &Material::default(), 17, 1e-9).unwrap();
        let f = solve_halfspace_trace(&vec![vec![C64::new(0.0, 0.0); 16]; 2], &pt(C64::new(2.0, 0.0)), &Material::default(), &tg, &v).unwrap();
        assert_eq!(f.l2_norm(), 0.0);
    }

    #[test]
    fn single_mode_is_diagonal() {
        let tg = Grid::new(1, 16, 2.0 * PI).unwrap();
        let mat = Material::default();
        let lam = C64::new(3.0, 2.0);
        let h0: Vec<C64> = (0..16).map(|i| C64::from_polar(1.0, 2.0 * tg.coord(i))).collect();
        let h = vec![vec![C64::new(0.0, 0.0); 16], h0];
        let v = vertical_nodes(lam, &mat, 9, 1e-9).unwrap();
        let f = solve_halfspace_trace(&h, &pt(lam), &mat, &tg, &v).unwrap();
        let st = boundary_coeffs_at(lam, &[2.0], &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)], &mat).unwrap();
        for (k, &x) in v.iter().enumerate() {
            let u = st.derivative(x, 0);
            for i in 0..16 {
                let e = C64::from_polar(1.0, 2.0 * tg.coord(i));
                for c in 0..2 {
                    assert!((f.values[k][c][i] - u[c] * e).norm() < 1e-13);
                }
            }
        }
        let res = f.mode_residuals();
        assert!(res.iter().all(|r| r.ode_residual < 1e-10 && r.bc_residual < 1e-10));
    }

    #[test]
    fn full_problem_residuals() {
        let grid = Grid::new(2, 32, 8.0).unwrap();
        let mat = Material::new(1.0, 0.5, 1.0, 1.0).unwrap();
        let lam = C64::new(2.0, 3.0);
        let full = grid.sample(|x| C64::new((-(x[0] * x[0] + x[1] * x[1])).exp(), 0.0));
        let half = restrict_half(&grid, &full);
        let zero = vec![C64::new(0.0, 0.0); half.len()];
        let rhs = RhsData { g: vec![half.clone(), half.clone()], h: vec![zero.clone(), zero] };
        let sol = full_lame_halfspace(&rhs, &pt(lam), &mat, &grid).unwrap();
        let (ri, rb) = sol.residuals(&rhs);
        assert!(ri < 1e-8 && rb < 1e-8, "{ri} {rb}");
    }
}
