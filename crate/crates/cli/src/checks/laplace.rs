//! Time-domain checks: causality, known transform pairs, decay exponents and
//! the dyadic L1 sum of the evolution.

use std::f64::consts::PI;

use lamesolve::besov::{besov_norm, make_basis, QIndex};
use lamesolve::grid::{even_extend, half_rows, Grid};
use lamesolve::halfspace::{full_lame_halfspace_at, RhsData};
use lamesolve::laplace::{
    causal_monotone, causality_scan, decay_fit, dyadic_l1, dyadic_times, evolve, half_derivative, hessian_decay_trace, invert_scalar, ContourSpec, EvolveData,
    EvolveOptions, TimeProfile, TimeTrace, CAUSAL_WINDOW,
};
use lamesolve::stokes::{solve_stokes, Domain, StokesData, StokesOptions};
use lamesolve::symbols::SectorPoint;
use lamesolve::wholespace::solve_wholespace_hat;
use lamesolve::{Result, C64};

use super::{contour, fmt, lame_gamma, numeric};
use crate::config::ExperimentConfig;
use crate::report::{Outcome, Table};

pub const CAUSAL_TIMES: [f64; 3] = [-2.0, -1.0, -0.5];
pub const CAUSAL_TOL: f64 = 1e-6;

fn gaussian_trace(tg: &Grid, rows: usize) -> Vec<C64> {
    let mut h = vec![C64::new(0.0, 0.0); tg.len() * rows];
    for t in 0..tg.len() {
        let x = tg.coord(t);
        for k in 0..rows {
            h[t * rows + k] = C64::new((-x * x).exp(), 0.0);
        }
    }
    h
}

/// Normal traction e^{-|x'|^2} on the half rows (only the trace enters).
fn normal_traction(grid: &Grid, scale: f64) -> Vec<Vec<C64>> {
    let tg = Grid::new(grid.dim - 1, grid.n, grid.extent).expect("tangential grid of a valid grid");
    let rows = half_rows(grid);
    let mut h = vec![vec![C64::new(0.0, 0.0); tg.len() * rows]; grid.dim];
    h[grid.dim - 1] = gaussian_trace(&tg, rows).into_iter().map(|v| v * scale).collect();
    h
}

pub fn causality(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mat = cfg.material()?;
    let gamma = lame_gamma(cfg);
    let grid = cfg.plane_grid_or(32, 16.0)?;
    let half_size = grid.len() / grid.n * half_rows(&grid);
    let zero_half = vec![C64::new(0.0, 0.0); half_size];
    let rhs = RhsData { g: vec![zero_half.clone(); grid.dim], h: normal_traction(&grid, 1.0) };
    let half = |l: C64| -> Result<Vec<C64>> { Ok(full_lame_halfspace_at(&rhs, l, &mat, &grid)?.values().concat()) };
    let half_sqrt = |l: C64| -> Result<Vec<C64>> { Ok(half(l)?.into_iter().map(|v| l.sqrt() * v).collect()) };
    let bump = grid.sample(|x| C64::new((-(x[0] * x[0] + x[1] * x[1])).exp(), 0.0));
    let ghat = vec![grid.fft_of(&bump), vec![C64::new(0.0, 0.0); grid.len()]];
    let whole = |l: C64| -> Result<Vec<C64>> { Ok(solve_wholespace_hat(&ghat, l, &mat, &grid)?.iter().map(|c| grid.ifft_of(c)).collect::<Vec<_>>().concat()) };
    // the coupled system needs |lambda| above the contraction threshold on the line
    let l4 = super::stokes::lambda4(cfg, &grid, Domain::Whole)?.lambda4;
    let stokes_gamma = cfg.contour.gamma.map_or(2.0 * l4, |g| g.max(2.0 * l4));
    let sdata = StokesData { f: bump.clone(), g: vec![bump.clone(), vec![C64::new(0.0, 0.0); grid.len()]], h: Vec::new() };
    let opts = StokesOptions { tol: 1e-12, max_iter: 400, max_ratio: 0.8 };
    let stokes = |l: C64| -> Result<Vec<C64>> {
        let pt = SectorPoint { lambda: l, epsilon: cfg.sector.epsilon, lambda0: 0.0 };
        let s = solve_stokes(&sdata, &pt, &mat, &grid, Domain::Whole, &opts)?;
        let mut v = s.rho;
        v.extend(s.u.concat());
        Ok(v)
    };

    let mut o = Outcome::default();
    o.fit("gamma_lame", gamma);
    o.fit("gamma_stokes", stokes_gamma);
    let mut t = Table::new("causality", &["family", "t", "window", "r_max", "norm"]);
    let families: [(&str, f64, &(dyn Fn(C64) -> Result<Vec<C64>> + Sync)); 4] =
        [("half_lame", gamma, &half), ("half_lame_sqrt_lambda", gamma, &half_sqrt), ("whole_lame", gamma, &whole), ("whole_stokes", stokes_gamma, &stokes)];
    for (name, g, f) in families {
        let check = format!("causality.{name}");
        let Some(rows) = numeric(&mut o, &check, causality_scan(&f, &CAUSAL_TIMES, g, &CAUSAL_WINDOW))? else { continue };
        let last = CAUSAL_WINDOW[CAUSAL_WINDOW.len() - 1];
        let worst = rows.iter().filter(|r| r.window == last).map(|r| r.norm).fold(0.0, f64::max);
        o.below(&check, worst, CAUSAL_TOL, format!("max modulus at t in {CAUSAL_TIMES:?} with the widest window"));
        let mono = causal_monotone(&rows);
        o.check(&format!("{check}_monotone"), mono, worst, "decreasing in r_max", "norms at each t against r_max");
        for r in &rows {
            t.push([name.to_string(), r.t.to_string(), r.window.to_string(), fmt(r.r_max), fmt(r.norm)]);
        }
    }
    o.tables.push(t);
    Ok(o)
}

pub const PAIR_TIMES: [f64; 5] = [0.1, 0.3, 1.0, 3.0, 10.0];
pub const PAIR_TOL: f64 = 1e-6;

/// (name, F, f)
type Pair = (&'static str, fn(C64) -> C64, fn(f64) -> f64);

pub const PAIRS: [Pair; 5] = [
    ("1/lambda", |l| 1.0 / l, |_| 1.0),
    ("1/lambda^2", |l| 1.0 / (l * l), |t| t),
    ("1/(lambda+2)", |l| 1.0 / (l + 2.0), |t| (-2.0 * t).exp()),
    ("lambda^-1/2", |l| 1.0 / l.sqrt(), |t| 1.0 / (PI * t).sqrt()),
    ("lambda^-3/2", |l| l.powf(-1.5), |t| 2.0 * (t / PI).sqrt()),
];

pub fn known_pairs(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = contour(cfg, lame_gamma(cfg), PAIR_TIMES[0])?;
    let fine = spec.refined();
    let mut o = Outcome::default();
    let mut t = Table::new("laplace_pairs", &["pair", "t", "inverted", "exact", "relative_error", "refinement_change"]);
    let (mut worst, mut refine) = (0.0f64, 0.0f64);
    for (name, big, small) in PAIRS {
        for &tt in &PAIR_TIMES {
            let Some(v) = numeric(&mut o, "laplace.known_pairs", invert_scalar(tt, &big, &spec))? else { return Ok(o) };
            let Some(w) = numeric(&mut o, "laplace.known_pairs", invert_scalar(tt, &big, &fine))? else { return Ok(o) };
            let exact = small(tt);
            let err = (v - exact).norm() / exact.abs().max(1.0);
            let ch = (v - w).norm() / w.norm().max(1.0);
            worst = worst.max(err);
            refine = refine.max(ch);
            t.push([name.to_string(), tt.to_string(), fmt(v.re), fmt(exact), fmt(err), fmt(ch)]);
        }
    }
    // lambda^{1/2} applied twice to 1/(lambda+1)^2 gives d/dt (t e^{-t})
    let g = |l: C64| Ok(vec![l.sqrt() / (l + 1.0).powu(2)]);
    let mut comp = 0.0f64;
    for &tt in &PAIR_TIMES {
        let Some(v) = numeric(&mut o, "laplace.known_pairs", half_derivative(tt, &g, &spec))? else { return Ok(o) };
        let exact = (1.0 - tt) * (-tt).exp();
        comp = comp.max((v[0] - exact).norm() / exact.abs().max(1.0));
    }
    worst = worst.max(comp);
    o.below("laplace.known_pairs", worst, PAIR_TOL, format!("{} pairs and a half-derivative composition at t in {PAIR_TIMES:?}", PAIRS.len()));
    o.below("laplace.refinement", refine, 1e-8, "change under panel bisection");
    o.tables.push(t);
    Ok(o)
}

pub const FITTER_TOL: f64 = 0.01;

/// Fits exact power laws with a weak log-periodic wobble over the decay window.
pub fn fitter_selftest() -> Result<Outcome> {
    let times = dyadic_times(-10, -3, 8);
    let mut o = Outcome::default();
    let mut worst = 0.0f64;
    for p in [-0.5, -0.875, -0.9, -1.125] {
        let values = times.iter().map(|t| 3.0 * t.powf(p) * (1.0 + 0.002 * (3.0 * t.ln()).sin())).collect();
        let tr = TimeTrace { times: times.clone(), values, gamma: 0.0, norm_name: "synthetic".into() };
        let s = decay_fit(&tr, times[0], times[times.len() - 1])?;
        worst = worst.max((s - p).abs());
    }
    o.below("laplace.fitter_selftest", worst, FITTER_TOL, "largest slope error over synthetic power laws");
    Ok(o)
}

pub const DECAY_TOL: f64 = 0.15;
pub const DECAY_WINDOW: (i32, i32) = (-10, -3);

pub fn decay_fits(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mat = cfg.material()?;
    let (s, sigma) = (cfg.besov.s, cfg.besov.sigma);
    cfg.params().validate()?;
    let grid = cfg.plane_grid_or(64, 2.0 * PI)?;
    let basis = make_basis(&grid)?;
    let times = dyadic_times(DECAY_WINDOW.0, DECAY_WINDOW.1, 8);
    let spec: ContourSpec = contour(cfg, lame_gamma(cfg), times[0])?;
    let mut o = Outcome::default();
    let mut t = Table::new("decay_traces", &["shift", "t", "weighted_ratio"]);
    for (shift, target) in [(sigma, -(1.0 - sigma / 2.0)), (-sigma, -(1.0 + sigma / 2.0))] {
        let name = format!("decay.slope_{}", if shift > 0.0 { "plus_sigma" } else { "minus_sigma" });
        let Some(tr) = numeric(&mut o, &name, hessian_decay_trace(&times, shift, s, &mat, &basis, &spec))? else { continue };
        let Some(slope) = numeric(&mut o, &name, decay_fit(&tr, times[0], times[times.len() - 1]))? else { continue };
        o.near(&name, slope, target, DECAY_TOL, format!("data in B^(s{shift:+}), t in [2^{}, 2^{}]", DECAY_WINDOW.0, DECAY_WINDOW.1));
        o.fit(&format!("slope_{}", if shift > 0.0 { "plus_sigma" } else { "minus_sigma" }), slope);
        for (i, &tt) in tr.times.iter().enumerate() {
            t.push([shift.to_string(), fmt(tt), fmt(tr.scaled(i))]);
        }
    }
    o.tables.push(t);
    Ok(o)
}

pub fn decay_rates(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut o = known_pairs(cfg)?;
    o.merge(fitter_selftest()?);
    o.merge(decay_fits(cfg)?);
    Ok(o)
}

pub const L1_RANGE: (i32, i32) = (-10, 6);
pub const L1_EXTEND: i32 = 2;
pub const L1_PER_CELL: usize = 8;
pub const STABILITY_TOL: f64 = 0.01;
pub const LINEARITY_TOL: f64 = 0.01;
pub const EVOLVE_MASS_TOL: f64 = 1e-4;

fn traction_data(grid: &Grid, scale: f64) -> EvolveData {
    let size = grid.len() / grid.n * half_rows(grid);
    let z = vec![C64::new(0.0, 0.0); size];
    EvolveData {
        space: StokesData { f: z.clone(), g: vec![z; grid.dim], h: normal_traction(grid, scale) },
        f_profile: TimeProfile { k: 0, a: 1.0 },
        g_profile: TimeProfile { k: 0, a: 1.0 },
        h_profile: TimeProfile { k: 0, a: 1.0 },
    }
}

fn restrict(trace: &TimeTrace, lo: f64, hi: f64) -> TimeTrace {
    let keep: Vec<usize> = (0..trace.times.len()).filter(|&i| trace.times[i] >= lo * (1.0 - 1e-12) && trace.times[i] <= hi * (1.0 + 1e-12)).collect();
    TimeTrace { times: keep.iter().map(|&i| trace.times[i]).collect(), values: keep.iter().map(|&i| trace.values[i]).collect(), ..trace.clone() }
}

pub fn l1_maxreg(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mat = cfg.material()?;
    let grid = cfg.plane_grid_or(64, 16.0)?;
    let basis = make_basis(&grid)?;
    let mut o = Outcome::default();
    let Some(fit) = numeric(&mut o, "l1.lambda4", super::stokes::lambda4(cfg, &grid, Domain::Half))? else { return Ok(o) };
    let gamma = cfg.contour.gamma.unwrap_or(2.0 * fit.lambda4);
    o.fit("lambda4_half", fit.lambda4);
    o.fit("gamma", gamma);
    let opts = EvolveOptions { epsilon: cfg.sector.epsilon, s: cfg.besov.s, order: cfg.contour.n, ..EvolveOptions::default() };
    let (j0, j1) = L1_RANGE;
    let (lo, hi) = (2f64.powi(j0), 2f64.powi(j1));
    let ext_times = dyadic_times(j0 - L1_EXTEND, j1 + L1_EXTEND, L1_PER_CELL);
    let times = dyadic_times(j0, j1, L1_PER_CELL);

    let Some(base) = numeric(&mut o, "l1.evolve", evolve(&traction_data(&grid, 1.0), &ext_times, gamma, &mat, &grid, Domain::Half, &opts))? else { return Ok(o) };
    let Some(ext) = numeric(&mut o, "l1.dyadic_finite", dyadic_l1(&base.hess_trace))? else { return Ok(o) };
    let Some(sum) = numeric(&mut o, "l1.dyadic_finite", dyadic_l1(&restrict(&base.hess_trace, lo, hi)))? else { return Ok(o) };
    o.check(
        "l1.dyadic_finite",
        !sum.divergent && !ext.divergent && sum.total.is_finite(),
        sum.total,
        "finite, both ends decaying",
        format!("end ratios ({:.3}, {:.3}) on [2^{j0}, 2^{j1}]", sum.end_ratios.0, sum.end_ratios.1),
    );
    let change = (ext.total - sum.total).abs() / ext.total;
    o.below("l1.stability", change, STABILITY_TOL, format!("[2^{j0}, 2^{j1}] against [2^{}, 2^{}]", j0 - L1_EXTEND, j1 + L1_EXTEND));
    o.below("l1.mass_equation", base.mass_residual, EVOLVE_MASS_TOL, "d_t rho + eta0 div u = f at interior times");

    let mut lin = 0.0f64;
    let mut scaled_sums = Vec::new();
    for k in [2.0, 4.0] {
        let Some(r) = numeric(&mut o, "l1.linearity", evolve(&traction_data(&grid, k), &times, gamma, &mat, &grid, Domain::Half, &opts))? else { return Ok(o) };
        let Some(d) = numeric(&mut o, "l1.linearity", dyadic_l1(&r.hess_trace))? else { return Ok(o) };
        lin = lin.max((d.total / (k * sum.total) - 1.0).abs());
        scaled_sums.push(d.total);
    }
    o.below("l1.linearity", lin, LINEARITY_TOL, format!("sums {:.6e}, {:.6e}, {:.6e} for data x1, x2, x4", sum.total, scaled_sums[0], scaled_sums[1]));

    // data side: |h_N|_{B^{s+1}} times the L1 weight of the time profile
    let tg = Grid::new(grid.dim - 1, grid.n, grid.extent)?;
    let h = gaussian_trace(&tg, half_rows(&grid));
    // h is constant in x_N, so its even extension is smooth and the
    // whole-space norm applies at s + 1 > 1/2
    let data_norm = besov_norm(&even_extend(&grid, &h), cfg.besov.s + 1.0, 2.0, QIndex::One, &basis)?.total / (gamma + 1.0);
    o.fit("l1_sum", sum.total);
    o.fit("l1_sum_extended", ext.total);
    o.fit("data_norm", data_norm);
    o.fit("l1_constant", sum.total / data_norm);
    o.fit("mass_residual", base.mass_residual);

    let mut t = Table::new("l1_trace", &["t", "weighted_hess_u", "weighted_u", "weighted_rho"]);
    for i in 0..base.hess_trace.times.len() {
        t.push([fmt(base.hess_trace.times[i]), fmt(base.hess_trace.values[i]), fmt(base.u_trace.values[i]), fmt(base.rho_trace.values[i])]);
    }
    o.tables.push(t);
    let mut t = Table::new("l1_dyadic_terms", &["j", "term"]);
    for (j, v) in &ext.terms {
        t.push([j.to_string(), fmt(*v)]);
    }
    o.tables.push(t);
    Ok(o)
}
