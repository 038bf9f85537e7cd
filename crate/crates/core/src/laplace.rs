//! Inverse Laplace transform on the shifted sector contour, time traces,
//! decay fits, dyadic sums and the evolution pipeline.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::besov::{halfspace_norm, besov_norm, LPBasis, QIndex};
use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use crate::quad::{bisect_panels, composite, geometric_panels};
use crate::stokes::{solve_stokes, Domain, StokesData, StokesOptions, StokesSolution};
use crate::symbols::{Material, SectorPoint};

/// ln(1e14): e^{-t r cos eps} below 1e-14 at the truncation radius.
pub const TRUNCATION_EXPONENT: f64 = 32.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub gamma: f64,
    pub epsilon: f64,
    pub r_max: f64,
    /// Gauss-Legendre order per panel.
    pub order: usize,
    pub panel_start: f64,
    pub panels: Vec<(f64, f64)>,
    /// (lambda, weight) with the 1/(2 pi i) factor and the ray direction included.
    pub nodes: Vec<(C64, C64)>,
}

fn build_nodes(gamma: f64, epsilon: f64, panels: &[(f64, f64)], order: usize) -> Vec<(C64, C64)> {
    let (r, w) = composite(panels, order);
    let dir = C64::from_polar(1.0, PI - epsilon);
    let c = 1.0 / (2.0 * PI * C64::new(0.0, 1.0));
    let mut nodes = Vec::with_capacity(2 * r.len());
    // Gamma_+ outward, Gamma_- inward (hence the sign)
    for (&ri, &wi) in r.iter().zip(&w) {
        nodes.push((gamma + ri * dir, c * wi * dir));
    }
    for (&ri, &wi) in r.iter().zip(&w) {
        nodes.push((gamma + ri * dir.conj(), -c * wi * dir.conj()));
    }
    nodes
}

pub fn contour_nodes(gamma: f64, epsilon: f64, r_max: f64, n: usize) -> Result<ContourSpec> {
    contour_nodes_with(gamma, epsilon, r_max, n, 1e-3)
}

pub fn contour_nodes_with(gamma: f64, epsilon: f64, r_max: f64, n: usize, panel_start: f64) -> Result<ContourSpec> {
    if n < 16 {
        return Err(Error::Config(format!("contour order {n} below 16")));
    }
    if !(gamma > 0.0) || !(epsilon > 0.0 && epsilon < PI / 2.0) {
        return Err(Error::Param(format!("gamma = {gamma}, epsilon = {epsilon} out of range")));
    }
    let panels = geometric_panels(panel_start, 2.0, r_max)?;
    let nodes = build_nodes(gamma, epsilon, &panels, n);
    Ok(ContourSpec { gamma, epsilon, r_max, order: n, panel_start, panels, nodes })
}

/// Contour whose truncation is adequate for all t >= t_min.
pub fn contour_for(gamma: f64, epsilon: f64, t_min: f64, n: usize) -> Result<ContourSpec> {
    if !(t_min > 0.0) {
        return Err(Error::Param("t_min must be positive".into()));
    }
    contour_nodes(gamma, epsilon, TRUNCATION_EXPONENT / (t_min * epsilon.cos()), n)
}

impl ContourSpec {
    /// Every panel bisected: twice the nodes on the same rays.
    pub fn refined(&self) -> ContourSpec {
        let panels = bisect_panels(&self.panels);
        let nodes = build_nodes(self.gamma, self.epsilon, &panels, self.order);
        ContourSpec { panels, nodes, ..self.clone() }
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if t == 0.0 || !t.is_finite() {
            return Err(Error::Param(format!("inversion time {t} must be finite and nonzero")));
        }
        if t > 0.0 && t * self.r_max * self.epsilon.cos() < TRUNCATION_EXPONENT * (1.0 - 1e-9) {
            return Err(Error::Config(format!("r_max = {} too small for t = {t}", self.r_max)));
        }
        Ok(())
    }
}

/// Evaluates F once per node and returns e^{-gamma t} f(t) for every t > 0.
pub fn invert_scaled_many<F>(times: &[f64], f: &F, spec: &ContourSpec) -> Result<Vec<Vec<C64>>>
where
    F: Fn(C64) -> Result<Vec<C64>> + Sync,
{
    for &t in times {
        spec.check_time(t)?;
        if t < 0.0 {
            return Err(Error::Param("negative times go through invert_causal".into()));
        }
    }
    let vals: Vec<Vec<C64>> = spec.nodes.par_iter().map(|(l, _)| f(*l)).collect::<Result<_>>()?;
    let len = vals.first().map_or(0, |v| v.len());
    Ok(times
        .iter()
        .map(|&t| {
            let mut acc = vec![C64::new(0.0, 0.0); len];
            for ((l, w), v) in spec.nodes.iter().zip(&vals) {
                let e = w * ((l - spec.gamma) * t).exp();
                if e == C64::new(0.0, 0.0) {
                    continue;
                }
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += e * x;
                }
            }
            acc
        })
        .collect())
}

/// f(t) = (1/2 pi i) int e^{lambda t} F(lambda) d lambda over the contour, t > 0;
/// t < 0 goes through the windowed vertical line.
pub fn invert<F>(t: f64, f: &F, spec: &ContourSpec) -> Result<Vec<C64>>
where
    F: Fn(C64) -> Result<Vec<C64>> + Sync,
{
    spec.check_time(t)?;
    if t < 0.0 {
        return invert_causal(t, f, spec.gamma, CAUSAL_WINDOW[CAUSAL_WINDOW.len() - 1]);
    }
    let v = invert_scaled_many(&[t], f, spec)?.remove(0);
    let s = (spec.gamma * t).exp();
    Ok(v.into_iter().map(|x| x * s).collect())
}

/// invert with a refinement check: the value on the bisected contour must
/// agree to `tol` (relative to max(1, |value|)).
pub fn invert_checked<F>(t: f64, f: &F, spec: &ContourSpec, tol: f64) -> Result<Vec<C64>>
where
    F: Fn(C64) -> Result<Vec<C64>> + Sync,
{
    let a = invert(t, f, spec)?;
    if t < 0.0 {
        return Ok(a);
    }
    let b = invert(t, f, &spec.refined())?;
    let scale = b.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let change = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale;
    if change > tol {
        return Err(Error::Quadrature(format!("contour refinement changed the value by {change:.2e} at t = {t}")));
    }
    Ok(b)
}

pub fn invert_scalar<F>(t: f64, f: &F, spec: &ContourSpec) -> Result<C64>
where
    F: Fn(C64) -> C64 + Sync,
{
    Ok(invert(t, &|l| Ok(vec![f(l)]), spec)?[0])
}

/// Window constants c in R = c/|t|; the last one is the default.
pub const CAUSAL_WINDOW: [f64; 4] = [4.0, 6.0, 8.0, 10.0];

/// Vertical-line inversion with the Gaussian window e^{-tau^2/R^2}, R = c/|t|.
/// Multiplying by the window equals mollifying e^{-gamma t} f in time with a
/// Gaussian of width ~ 1/R, so for a causal f the value at t < 0 is of size
/// e^{-c^2/4}.
pub fn invert_causal<F>(t: f64, f: &F, gamma: f64, c: f64) -> Result<Vec<C64>>
where
    F: Fn(C64) -> Result<Vec<C64>> + Sync,
{
    if !(t < 0.0) {
        return Err(Error::Param("causal inversion needs t < 0".into()));
    }
    let r = c / t.abs();
    let tau_max = 6.0 * r;
    let width = (PI / t.abs()).min(gamma).min(1.0);
    let np = (2.0 * tau_max / width).ceil() as usize;
    let panels: Vec<(f64, f64)> = (0..np).map(|i| (-tau_max + i as f64 * 2.0 * tau_max / np as f64, -tau_max + (i + 1) as f64 * 2.0 * tau_max / np as f64)).collect();
    let (taus, ws) = composite(&panels, 16);
    let vals: Vec<Vec<C64>> = taus.par_iter().map(|&tau| f(C64::new(gamma, tau))).collect::<Result<_>>()?;
    let len = vals.first().map_or(0, |v| v.len());
    let mut acc = vec![C64::new(0.0, 0.0); len];
    for ((&tau, &w), v) in taus.iter().zip(&ws).zip(&vals) {
        let e = w / (2.0 * PI) * (C64::new(gamma, tau) * t).exp() * (-(tau / r).powi(2)).exp();
        for (a, x) in acc.iter_mut().zip(v) {
            *a += e * x;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausalRow {
    pub t: f64,
    pub window: f64,
    /// Truncation |Im lambda| <= r_max of the vertical line.
    pub r_max: f64,
    /// Largest modulus over the inverted field.
    pub norm: f64,
}

/// Inverts F at each negative time for every window constant.
pub fn causality_scan<F>(f: &F, times: &[f64], gamma: f64, windows: &[f64]) -> Result<Vec<CausalRow>>
where
    F: Fn(C64) -> Result<Vec<C64>> + Sync,
{
    let mut rows = Vec::new();
    for &t in times {
        for &c in windows {
            let v = invert_causal(t, f, gamma, c)?;
            let norm = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
            rows.push(CausalRow { t, window: c, r_max: 6.0 * c / t.abs(), norm });
        }
    }
    Ok(rows)
}

/// True when the norms at each time decrease as r_max grows.
pub fn causal_monotone(rows: &[CausalRow]) -> bool {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| (a.t, a.r_max).partial_cmp(&(b.t, b.r_max)).unwrap());
    sorted.windows(2).all(|w| w[0].t != w[1].t || w[1].norm <= w[0].norm)
}

/// Lambda^{1/2}_gamma applied through the transform: inversion of lambda^{1/2} F.
pub fn half_derivative<F>(t: f64, f: &F, spec: &ContourSpec) -> Result<Vec<C64>>
where
    F: Fn(C64) -> Result<Vec<C64>> + Sync,
{
    let g = |l: C64| -> Result<Vec<C64>> { Ok(f(l)?.into_iter().map(|v| l.sqrt() * v).collect()) };
    invert(t, &g, spec)
}

// ---------------------------------------------------------------------------
// Time traces

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub times: Vec<f64>,
    /// e^{-gamma t} times the norm, so large t cannot overflow.
    pub values: Vec<f64>,
    pub gamma: f64,
    pub norm_name: String,
}

/// t = 2^{j + k/per_cell} from 2^{j_min} to 2^{j_max} inclusive.
pub fn dyadic_times(j_min: i32, j_max: i32, per_cell: usize) -> Vec<f64> {
    let n = (j_max - j_min) as usize * per_cell;
    (0..=n).map(|i| 2f64.powf(j_min as f64 + i as f64 / per_cell as f64)).collect()
}

impl TimeTrace {
    pub fn scaled(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Unweighted norm; may overflow for large gamma t.
    pub fn norm(&self, i: usize) -> f64 {
        (self.gamma * self.times[i]).exp() * self.values[i]
    }
}

/// Least-squares slope of log(e^{-gamma t} value) against log t on [lo, hi].
pub fn decay_fit(trace: &TimeTrace, lo: f64, hi: f64) -> Result<f64> {
    let idx: Vec<usize> = (0..trace.times.len()).filter(|&i| trace.times[i] >= lo * (1.0 - 1e-12) && trace.times[i] <= hi * (1.0 + 1e-12)).collect();
    let decades = (hi / lo).log10();
    if (idx.len() as f64) < 8.0 * decades || idx.len() < 2 {
        return Err(Error::Input(format!("{} points on a window of {decades:.2} decades, need 8 per decade", idx.len())));
    }
    let mut x = Vec::with_capacity(idx.len());
    let mut y = Vec::with_capacity(idx.len());
    for i in idx {
        let v = trace.scaled(i);
        if !(v > 0.0) {
            return Err(Error::Input(format!("nonpositive value {v} at t = {}", trace.times[i])));
        }
        x.push(trace.times[i]);
        y.push(v);
    }
    crate::symbols::loglog_slope(&x, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicSum {
    pub total: f64,
    /// (j, 2^j sup_{[2^j, 2^{j+1}]} e^{-gamma t} value)
    pub terms: Vec<(i32, f64)>,
    /// Ratios of the two outermost terms at the small-t and large-t ends.
    pub end_ratios: (f64, f64),
    pub divergent: bool,
}

/// Ratio at which an end of the dyadic sum counts as non-decaying.
pub const DIVERGENCE_RATIO: f64 = 0.98;

pub fn dyadic_l1(trace: &TimeTrace) -> Result<DyadicSum> {
    let tmin = trace.times.iter().cloned().fold(f64::INFINITY, f64::min);
    let tmax = trace.times.iter().cloned().fold(0.0, f64::max);
    if !(tmin > 0.0) {
        return Err(Error::Input("trace needs positive times".into()));
    }
    let j0 = (tmin.log2() + 1e-9).floor() as i32;
    let j1 = (tmax.log2() - 1e-9).ceil() as i32;
    let mut terms = Vec::new();
    for j in j0..j1 {
        let (a, b) = (2f64.powi(j), 2f64.powi(j + 1));
        let sup = (0..trace.times.len())
            .filter(|&i| trace.times[i] >= a * (1.0 - 1e-12) && trace.times[i] <= b * (1.0 + 1e-12))
            .map(|i| trace.scaled(i))
            .fold(0.0, f64::max);
        terms.push((j, a * sup));
    }
    if terms.len() < 2 {
        return Err(Error::Input("trace covers fewer than two dyadic cells".into()));
    }
    let total: f64 = terms.iter().map(|t| t.1).sum();
    let n = terms.len();
    let ratio = |a: f64, b: f64| if b == 0.0 { if a == 0.0 { 0.0 } else { f64::INFINITY } } else { a / b };
    let lo = ratio(terms[0].1, terms[1].1);
    let hi = ratio(terms[n - 1].1, terms[n - 2].1);
    let significant = |v: f64| v > 1e-6 * total;
    let divergent = !total.is_finite() || (lo >= DIVERGENCE_RATIO && significant(terms[0].1)) || (hi >= DIVERGENCE_RATIO && significant(terms[n - 1].1));
    Ok(DyadicSum { total, terms, end_ratios: (lo, hi), divergent })
}

// ---------------------------------------------------------------------------
// Evolution with separable data

/// t^k e^{-a t} for t > 0, zero before.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeProfile {
    pub k: u32,
    pub a: f64,
}

impl TimeProfile {
    pub fn validate(&self) -> Result<()> {
        if self.k > 2 || !(self.a >= 0.0) {
            return Err(Error::Input(format!("unsupported time profile t^{} e^(-{} t)", self.k, self.a)));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            t.powi(self.k as i32) * (-self.a * t).exp()
        }
    }

    /// k! / (lambda + a)^{k+1}
    pub fn transform(&self, lambda: C64) -> C64 {
        let fact = (1..=self.k).product::<u32>() as f64;
        fact / (lambda + self.a).powu(self.k + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveData {
    pub space: StokesData,
    pub f_profile: TimeProfile,
    pub g_profile: TimeProfile,
    pub h_profile: TimeProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub order: usize,
    pub panel_start: f64,
    pub epsilon: f64,
    /// Besov smoothness for the reported norms (p = 2, q-index 1).
    pub s: f64,
    /// Number of interior times (t <= 1) for the mass-equation check.
    pub checks: usize,
    /// Contraction guard for the per-node Stokes solves. Nodes near the
    /// contour apex sit at |lambda| = gamma sin eps, below the probe threshold.
    pub stokes: StokesOptions,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { order: 20, panel_start: 1e-3, epsilon: PI / 6.0, s: 0.2, checks: 5, stokes: StokesOptions { tol: 1e-12, max_iter: 400, max_ratio: 0.8 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveResult {
    /// ||u(t)||_{B^s}
    pub u_trace: TimeTrace,
    /// ||rho(t)||_{B^s}
    pub rho_trace: TimeTrace,
    /// sum over second derivatives of ||d^2 u(t)||_{B^s}
    pub hess_trace: TimeTrace,
    /// Worst relative residual of d_t rho + eta0 div u = f over the check times.
    pub mass_residual: f64,
    pub nodes: usize,
}

/// Fields accumulated per time: rho, div u, u components, second derivatives.
fn solution_fields(sol: &StokesSolution, stokes_div: Vec<C64>, hess: VectorField) -> Vec<Vec<C64>> {
    let mut out = vec![sol.rho.clone(), stokes_div];
    out.extend(sol.u.iter().cloned());
    out.extend(hess);
    out
}

fn second_indices(dim: usize) -> Vec<Vec<usize>> {
    let mut v = Vec::new();
    for a in 0..dim {
        for b in a..dim {
            let mut k = vec![0; dim];
            k[a] += 1;
            k[b] += 1;
            v.push(k);
        }
    }
    v
}

/// Solves at one contour node and returns the fields to accumulate.
fn node_fields(data: &EvolveData, lambda: C64, mat: &Material, grid: &Grid, domain: Domain, opts: &StokesOptions) -> Result<Vec<Vec<C64>>> {
    let scale = |v: &[C64], c: C64| -> Vec<C64> { v.iter().map(|x| x * c).collect() };
    let (cf, cg, ch) = (data.f_profile.transform(lambda), data.g_profile.transform(lambda), data.h_profile.transform(lambda));
    let sd = StokesData {
        f: scale(&data.space.f, cf),
        g: data.space.g.iter().map(|c| scale(c, cg)).collect(),
        h: data.space.h.iter().map(|c| scale(c, ch)).collect(),
    };
    // node lambdas are off the nominal sector of the probe, only |lambda| matters
    let pt = SectorPoint { lambda, epsilon: PI / 12.0, lambda0: 0.0 };
    let nn = grid.dim;
    match domain {
        Domain::Whole => {
            let sol = solve_stokes(&sd, &pt, mat, grid, domain, opts)?;
            let uhat: Vec<Vec<C64>> = sol.u.iter().map(|c| grid.fft_of(c)).collect();
            let div: Vec<C64> = {
                let mut d = vec![C64::new(0.0, 0.0); grid.len()];
                for a in 0..nn {
                    let mut k = vec![0; nn];
                    k[a] = 1;
                    let da = grid.derivative_hat(&uhat[a], &k);
                    d.iter_mut().zip(&da).for_each(|(o, v)| *o += v);
                }
                grid.ifft_of(&d)
            };
            let mut hess = Vec::new();
            for k in second_indices(nn) {
                for c in &uhat {
                    hess.push(grid.ifft_of(&grid.derivative_hat(c, &k)));
                }
            }
            Ok(solution_fields(&sol, div, hess))
        }
        Domain::Half => {
            let (sol, lame) = crate::stokes::solve_stokes_half_with_state(&sd, lambda, mat, grid, opts)?;
            let div = lame.divergence();
            let mut hess = Vec::new();
            for k in second_indices(nn) {
                hess.extend(lame.derivative_rows(&k));
            }
            Ok(solution_fields(&sol, div, hess))
        }
    }
}

pub fn evolve(data: &EvolveData, times: &[f64], gamma: f64, mat: &Material, grid: &Grid, domain: Domain, opts: &EvolveOptions) -> Result<EvolveResult> {
    data.f_profile.validate()?;
    data.g_profile.validate()?;
    data.h_profile.validate()?;
    mat.validate()?;
    let tmin = times.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(tmin > 0.0) {
        return Err(Error::Param("evolution times must be positive".into()));
    }
    let r_max = TRUNCATION_EXPONENT / (tmin * opts.epsilon.cos());
    let spec = contour_nodes_with(gamma, opts.epsilon, r_max, opts.order, opts.panel_start)?;
    let basis = crate::besov::make_basis(grid)?;
    let nn = grid.dim;

    // check times in the interior, each with two neighbours for d/dt
    // where e^{-gamma t} u(t) sits well above the quadrature floor
    let hi = times.iter().rposition(|&t| t <= 1.0).unwrap_or(times.len() - 1).max(2);
    let checks: Vec<f64> = (1..=opts.checks).map(|i| times[i * hi / (opts.checks + 1)]).collect();
    let mut all_times = times.to_vec();
    for &t in &checks {
        let d = 1e-3 * t;
        all_times.extend([t - d, t + d]);
    }
    let zero_data = data.space.is_zero();
    let nt = all_times.len();
    let mut acc: Vec<Vec<Vec<C64>>> = Vec::new();
    if !zero_data {
        // deterministic reduction: solve in parallel batches, accumulate in node order
        let batch = rayon::current_num_threads().max(1) * 4;
        for chunk in spec.nodes.chunks(batch) {
            let fields: Vec<Vec<Vec<C64>>> = chunk.par_iter().map(|(l, _)| node_fields(data, *l, mat, grid, domain, &opts.stokes)).collect::<Result<_>>()?;
            if acc.is_empty() {
                acc = vec![fields[0].iter().map(|c| vec![C64::new(0.0, 0.0); c.len()]).collect(); nt];
            }
            for ((l, w), fv) in chunk.iter().zip(&fields) {
                for (ti, &t) in all_times.iter().enumerate() {
                    let e = w * ((l - gamma) * t).exp();
                    if e.norm() < 1e-300 {
                        continue;
                    }
                    for (a, x) in acc[ti].iter_mut().zip(fv) {
                        for (p, q) in a.iter_mut().zip(x) {
                            *p += e * q;
                        }
                    }
                }
            }
        }
    }
    let norm = |f: &[C64]| -> Result<f64> {
        Ok(match domain {
            Domain::Whole => besov_norm(f, opts.s, 2.0, QIndex::One, &basis)?.total,
            Domain::Half => halfspace_norm(f, opts.s, 2.0, QIndex::One, &basis)?.total,
        })
    };
    let mut u_vals = Vec::with_capacity(times.len());
    let mut rho_vals = Vec::with_capacity(times.len());
    let mut hess_vals = Vec::with_capacity(times.len());
    for ti in 0..times.len() {
        if zero_data {
            u_vals.push(0.0);
            rho_vals.push(0.0);
            hess_vals.push(0.0);
            continue;
        }
        let f = &acc[ti];
        rho_vals.push(norm(&f[0])?);
        let mut u = 0.0;
        for c in 0..nn {
            u += norm(&f[2 + c])?;
        }
        u_vals.push(u);
        let mut h = 0.0;
        for c in 2 + nn..f.len() {
            h += norm(&f[c])?;
        }
        hess_vals.push(h);
    }
    let mut mass_residual: f64 = 0.0;
    if !zero_data {
        for (i, &t) in checks.iter().enumerate() {
            let d = 1e-3 * t;
            let ti = times.iter().position(|&x| x == t).expect("check time on grid");
            let (im, ip) = (times.len() + 2 * i, times.len() + 2 * i + 1);
            // weighted form: e^{-gamma t} d_t rho = R' + gamma R with R = e^{-gamma t} rho
            let ft = (-gamma * t).exp() * data.f_profile.eval(t);
            let mut num = 0.0;
            let mut den = 0.0;
            for p in 0..acc[ti][0].len() {
                let drho = (acc[ip][0][p] - acc[im][0][p]) / (2.0 * d) + gamma * acc[ti][0][p];
                let div = acc[ti][1][p];
                let r = drho + mat.rho_star * div - data.space.f[p] * ft;
                num += r.norm_sqr();
                den += drho.norm_sqr() + (mat.rho_star * div).norm_sqr() + (data.space.f[p] * ft).norm_sqr();
            }
            if den > 0.0 {
                mass_residual = mass_residual.max((num / den).sqrt());
            }
        }
    }
    let mk = |values: Vec<f64>, name: &str| TimeTrace { times: times.to_vec(), values, gamma, norm_name: name.to_string() };
    Ok(EvolveResult {
        u_trace: mk(u_vals, "u_Bs"),
        rho_trace: mk(rho_vals, "rho_Bs"),
        hess_trace: mk(hess_vals, "hess_u_Bs"),
        mass_residual,
        nodes: spec.nodes.len(),
    })
}

/// Per-mode whole-space Lame family e_1 -> u(t) evaluated by contour inversion.
/// For each t returns sup over grid modes of ||d^2 u(t)||_{B^s} / ||g||_{B^{s+shift}}.
pub fn hessian_decay_trace(times: &[f64], shift: f64, s: f64, mat: &Material, basis: &LPBasis, spec: &ContourSpec) -> Result<TimeTrace> {
    let grid = &basis.grid;
    let nn = grid.dim;
    let modes: Vec<usize> = (1..grid.len()).collect();
    let weight = |i: usize, sv: f64| -> f64 {
        let mut w = basis.block_weights(0)[i];
        for k in 1..=basis.num_blocks {
            w += 2f64.powf(sv * k as f64) * basis.block_weights(k)[i];
        }
        w
    };
    let per_mode: Vec<Vec<f64>> = modes
        .par_iter()
        .map(|&i| -> Result<Vec<f64>> {
            let xi = grid.frequency(i);
            let xi = &xi[..nn];
            let s2: f64 = xi.iter().map(|v| v * v).sum();
            let mut g = vec![C64::new(0.0, 0.0); nn];
            g[0] = C64::new(1.0, 0.0);
            let f = |l: C64| -> Result<Vec<C64>> { crate::wholespace::mode_solve(l, xi, &g, mat) };
            let u = invert_scaled_many(times, &f, spec)?;
            let ratio = weight(i, s) / weight(i, s + shift);
            Ok(u.iter().map(|v| s2 * v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt() * ratio).collect())
        })
        .collect::<Result<_>>()?;
    let values = (0..times.len())
        .map(|ti| {
            per_mode.iter().map(|m| m[ti]).fold(0.0, f64::max)
        })
        .collect();
    Ok(TimeTrace { times: times.to_vec(), values, gamma: spec.gamma, norm_name: format!("hess_u_Bs/g_Bs{shift:+}") })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_pairs() {
        let spec = contour_for(1.1, PI / 6.0, 0.1, 20).unwrap();
        for &t in &[0.1, 1.0, 3.0, 10.0] {
            let one = invert_scalar(t, &|l| 1.0 / l, &spec).unwrap();
            assert!((one - 1.0).norm() < 1e-6, "t = {t}: {one}");
            let ramp = invert_scalar(t, &|l| 1.0 / (l * l), &spec).unwrap();
            assert!((ramp - t).norm() < 1e-6 * t);
            let ex = invert_scalar(t, &|l| 1.0 / (l + 2.0), &spec).unwrap();
            assert!((ex - (-2.0 * t).exp()).norm() < 1e-8);
            let h = half_derivative(t, &|l| Ok(vec![l.powf(-1.5)]), &spec).unwrap()[0];
            assert!((h - 1.0).norm() < 1e-6);
        }
    }

    #[test]
    fn refinement_and_composition() {
        let spec = contour_for(1.1, PI / 6.0, 0.1, 20).unwrap();
        let fine = spec.refined();
        let f = |l: C64| Ok(vec![1.0 / (l + 1.0).powu(2), l.powf(-1.5), 1.0 / (l * l)]);
        for &t in &[0.1, 0.5, 2.0, 10.0] {
            let a = invert(t, &f, &spec).unwrap();
            let b = invert(t, &f, &fine).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() < 1e-8 * y.norm().max(1.0), "t = {t}");
            }
            // half derivative twice is the time derivative of t e^{-t}
            let g = |l: C64| Ok(vec![l.sqrt() / (l + 1.0).powu(2)]);
            let dd = half_derivative(t, &g, &spec).unwrap()[0];
            assert!((dd.re - (1.0 - t) * (-t).exp()).abs() < 1e-6, "{dd}");
        }
    }

    #[test]
    fn unresolved_quadrature_reported() {
        // pole just left of the contour, near r = 2
        let spec = contour_for(1.1, PI / 6.0, 1.0, 16).unwrap();
        let p = C64::new(-0.7, 1.0);
        let f = |l: C64| Ok(vec![1.0 / (l - p)]);
        assert!(matches!(invert_checked(1.0, &f, &spec, 1e-8), Err(Error::Quadrature(_))));
        let g = |l: C64| Ok(vec![1.0 / (l + 2.0)]);
        assert!(invert_checked(1.0, &g, &spec, 1e-8).is_ok());
    }

    #[test]
    fn zero_time_rejected() {
        let spec = contour_nodes(2.0, PI / 6.0, 100.0, 16).unwrap();
        assert!(invert_scalar(0.0, &|l| 1.0 / l, &spec).is_err());
    }

    #[test]
    fn causal_window_is_small() {
        let mut last = f64::INFINITY;
        for c in CAUSAL_WINDOW {
            let v = invert_causal(-1.0, &|l| Ok(vec![1.0 / l]), 2.0, c).unwrap()[0].norm();
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn fitter_and_dyadic() {
        let times = dyadic_times(-10, 6, 8);
        let tr = TimeTrace { values: times.iter().map(|t| t.powf(-0.9)).collect(), times: times.clone(), gamma: 0.0, norm_name: "x".into() };
        assert!((decay_fit(&tr, 1e-2, 1.0).unwrap() + 0.9).abs() < 0.01);
        let harmonic = TimeTrace { values: times.iter().map(|t| 1.0 / t).collect(), ..tr.clone() };
        assert!(dyadic_l1(&harmonic).unwrap().divergent);
        let conv = TimeTrace { values: times.iter().map(|&t| if t <= 1.0 { t.powf(-0.875) } else { 0.0 }).collect(), ..tr };
        assert!(!dyadic_l1(&conv).unwrap().divergent);
    }
}
