//! Stokes coupling: contraction fit, fixed-point convergence above the
//! fitted threshold, residuals and the per-mode dense oracle.

use std::f64::consts::PI;

use lamesolve::grid::{restrict_half, Grid};
use lamesolve::stokes::{fit_lambda4, mode_dense_solve, solve_stokes, ContractionFit, Domain, StokesData, StokesOptions};
use lamesolve::symbols::{Material, SectorPoint};
use lamesolve::{Result, C64};

use super::{fmt, fmt_c, numeric};
use crate::config::ExperimentConfig;
use crate::report::{Outcome, Table};

pub const FIT_MAGNITUDES: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
pub const POWER_ITERS: usize = 15;
pub const SLOPE_TOL: f64 = 0.1;
pub const MASS_TOL: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const DENSE_TOL: f64 = 1e-10;
/// Multiples of the fitted threshold at which the iteration must converge.
pub const ABOVE: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

/// Looser than the solver default so that the measured ratio is reported
/// rather than cut off.
pub const CONVERGENCE_OPTIONS: StokesOptions = StokesOptions { tol: 1e-12, max_iter: 400, max_ratio: 0.95 };

pub fn lambda4(cfg: &ExperimentConfig, grid: &Grid, domain: Domain) -> Result<ContractionFit> {
    let mags: Vec<f64> = FIT_MAGNITUDES.iter().map(|m| m * cfg.sector.lambda0).collect();
    fit_lambda4(&cfg.material()?, grid, domain, &mags, cfg.sector.epsilon, POWER_ITERS, cfg.seed)
}

fn bump_data(grid: &Grid, domain: Domain) -> StokesData {
    let bump = grid.sample(|x| C64::new((-(x[0] * x[0] + x[1] * x[1])).exp(), 0.0));
    let shifted = grid.sample(|x| C64::new(0.5 * (-((x[0] - 1.0).powi(2) + x[1] * x[1])).exp(), 0.0));
    match domain {
        Domain::Whole => StokesData { f: bump.clone(), g: vec![shifted.clone(), bump], h: Vec::new() },
        Domain::Half => {
            let (b, s) = (restrict_half(grid, &bump), restrict_half(grid, &shifted));
            StokesData { f: b.clone(), g: vec![s.clone(), b.clone()], h: vec![s, b] }
        }
    }
}

fn dense_gap(lambda: C64, mat: &Material, eps: f64, lam0: f64) -> Result<f64> {
    let grid = Grid::new(2, 16, 2.0 * PI)?;
    let e = grid.sample(|x| C64::from_polar(1.0, 2.0 * x[0] + x[1]));
    let f: Vec<C64> = e.iter().map(|v| v * 0.5).collect();
    let g = vec![e.clone(), e.iter().map(|v| v * C64::new(0.0, -1.0)).collect()];
    let pt = SectorPoint::new(lambda, eps, lam0)?;
    let s = solve_stokes(&StokesData { f, g, h: Vec::new() }, &pt, mat, &grid, Domain::Whole, &CONVERGENCE_OPTIONS)?;
    let (r, u) = mode_dense_solve(lambda, &[2.0, 1.0], C64::new(0.5, 0.0), &[C64::new(1.0, 0.0), C64::new(0.0, -1.0)], mat)?;
    let scale = r.norm().max(u[0].norm()).max(u[1].norm());
    let mut gap = 0.0f64;
    for i in 0..grid.len() {
        gap = gap.max((s.rho[i] - r * e[i]).norm()).max((s.u[0][i] - u[0] * e[i]).norm()).max((s.u[1][i] - u[1] * e[i]).norm());
    }
    Ok(gap / scale)
}

pub fn stokes_coupled(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mat = cfg.material()?;
    let (eps, lam0) = (cfg.sector.epsilon, cfg.sector.lambda0);
    let grid = cfg.plane_grid_or(32, 16.0)?;
    let mut o = Outcome::default();
    let mut fit_t = Table::new("contraction_fit", &["domain", "lambda_abs", "ratio", "ratio_times_lambda"]);
    let mut run_t = Table::new("fixed_point_runs", &["domain", "lambda", "iterations", "contraction_ratio", "mass_residual", "momentum_residual", "boundary_residual"]);
    let mut whole_l4 = None;
    for (domain, dname) in [(Domain::Whole, "whole"), (Domain::Half, "half")] {
        let Some(fit) = numeric(&mut o, &format!("stokes.{dname}_contraction_fit"), lambda4(cfg, &grid, domain))? else { continue };
        for (m, r) in fit.magnitudes.iter().zip(&fit.ratios) {
            fit_t.push([dname.to_string(), fmt(*m), fmt(*r), fmt(m * r)]);
        }
        o.near(&format!("stokes.{dname}_ratio_slope"), fit.slope, -1.0, SLOPE_TOL, format!("log-log slope of the contraction ratio, lambda_4 = {:.4}", fit.lambda4));
        o.fit(&format!("lambda4_{dname}"), fit.lambda4);
        o.fit(&format!("ratio_constant_{dname}"), fit.constant);
        if domain == Domain::Whole {
            whole_l4 = Some(fit.lambda4);
        }

        let data = bump_data(&grid, domain);
        let (mut worst_ratio, mut mass, mut mom, mut bnd) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let mut failures = Vec::new();
        for mult in ABOVE {
            for arg in [0.0, PI / 2.0, PI - eps] {
                let lam = C64::from_polar(mult * fit.lambda4.max(lam0), arg);
                let run = SectorPoint::new(lam, eps, lam0).and_then(|pt| solve_stokes(&data, &pt, &mat, &grid, domain, &CONVERGENCE_OPTIONS));
                match run {
                    Ok(s) => {
                        worst_ratio = worst_ratio.max(s.contraction_ratio);
                        mass = mass.max(s.mass_residual);
                        mom = mom.max(s.momentum_residual);
                        bnd = bnd.max(s.boundary_residual);
                        run_t.push([dname.to_string(), fmt_c(lam), s.iterations.to_string(), fmt(s.contraction_ratio), fmt(s.mass_residual), fmt(s.momentum_residual), fmt(s.boundary_residual)]);
                    }
                    Err(e) => failures.push(format!("lambda = {}: {e}", fmt_c(lam))),
                }
            }
        }
        let runs = ABOVE.len() * 3;
        o.check(
            &format!("stokes.{dname}_converges_above_lambda4"),
            failures.is_empty() && worst_ratio < 1.0,
            worst_ratio,
            "all runs converge, ratio < 1",
            if failures.is_empty() { format!("{runs} runs at |lambda| = (1, 2, 4, 8) lambda_4") } else { failures.join("; ") },
        );
        o.below(&format!("stokes.{dname}_mass_residual"), mass, MASS_TOL, "relative residual of lambda rho + eta0 div u = f");
        o.below(&format!("stokes.{dname}_momentum_residual"), mom, RESIDUAL_TOL, "relative residual of the momentum equation");
        if domain == Domain::Half {
            o.below("stokes.half_boundary_residual", bnd, RESIDUAL_TOL, "relative residual of the stress condition");
        }
    }
    let mut gap = 0.0f64;
    let mut lams = vec![C64::new(10.0, 3.0) * lam0];
    if let Some(l4) = whole_l4 {
        lams.push(C64::from_polar(2.0 * l4.max(lam0), PI / 3.0));
    }
    for lam in lams {
        if let Some(g) = numeric(&mut o, "stokes.dense_oracle", dense_gap(lam, &mat, eps, lam0))? {
            gap = gap.max(g);
        }
    }
    o.below("stokes.dense_oracle", gap, DENSE_TOL, "single Fourier mode against the dense (N+1)x(N+1) solve");
    o.tables.push(fit_t);
    o.tables.push(run_t);
    Ok(o)
}
