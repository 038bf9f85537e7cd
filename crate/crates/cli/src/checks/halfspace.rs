//! Closed-form half-space modes against their identities, the BVP oracle,
//! the energy form and the Volevich representation.

use lamesolve::grid::Grid;
use lamesolve::halfspace::{
    boundary_coeffs_at, decay_rate, energy_uniqueness_check, oracle_bvp, solve_halfspace_trace, solve_halfspace_volevich, vertical_nodes, EnergyOptions, VolevichOptions,
};
use lamesolve::symbols::{Material, SectorPoint};
use lamesolve::{Result, C64};
use rand::Rng;
use rayon::prelude::*;

use super::{fmt, fmt_c, numeric, random_c64, random_xi, rng, sector_lambda};
use crate::config::ExperimentConfig;
use crate::report::{FieldDump, Outcome, Table};

pub const IDENTITY_SAMPLES: usize = 200;
pub const IDENTITY_TOL: f64 = 1e-12;
pub const ORACLE_SAMPLES: usize = 20;
pub const ORACLE_PER_UNIT: [usize; 3] = [512, 1024, 2048];
pub const ORACLE_GAP: f64 = 1e-4;
pub const VOLEVICH_SETS: usize = 10;
pub const VOLEVICH_TOL: f64 = 1e-6;

pub fn identities(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mat = cfg.material()?;
    let eps = cfg.sector.epsilon;
    let lam0 = cfg.sector.lambda0;
    let mut r = rng(cfg, 1);
    let mut o = Outcome::default();
    let mut t = Table::new("identity_residuals", &["lambda", "xi_norm", "dim", "worst_identity", "residual", "bc_residual"]);
    let (mut worst, mut worst_name, mut worst_bc) = (0.0f64, String::new(), 0.0f64);
    for i in 0..IDENTITY_SAMPLES {
        // alternate N = 2 and N = 3
        let d = 1 + i % 2;
        let lam = sector_lambda(&mut r, eps, lam0, 1e4 * lam0);
        let xi = if i % 20 == 0 { vec![0.0; d] } else { random_xi(&mut r, d, 1e-2, 1e2) };
        let h: Vec<C64> = (0..=d).map(|_| random_c64(&mut r)).collect();
        let Some(st) = numeric(&mut o, "halfspace.identities", boundary_coeffs_at(lam, &xi, &h, &mat))? else { return Ok(o) };
        let (name, res) = st.max_identity_residual();
        let bc = st.bc_residual();
        if res > worst || !res.is_finite() {
            worst = res;
            worst_name = name.clone();
        }
        worst_bc = worst_bc.max(bc);
        let xn = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        t.push([fmt_c(lam), fmt(xn), (d + 1).to_string(), name, fmt(res), fmt(bc)]);
    }
    o.below("halfspace.identities", worst, IDENTITY_TOL, format!("{IDENTITY_SAMPLES} samples, worst identity {worst_name}"));
    o.below("halfspace.boundary_conditions", worst_bc, IDENTITY_TOL, "relative residual of the stress conditions at x_N = 0");
    o.fit("identity_residual_max", worst);
    o.tables.push(t);
    Ok(o)
}

struct OracleRun {
    lambda: C64,
    xi: f64,
    errors: Vec<f64>,
    scale: f64,
}

fn oracle_sample(lambda: C64, xi: f64, h: &[C64], mat: &Material) -> Result<OracleRun> {
    let st = boundary_coeffs_at(lambda, &[xi], h, mat)?;
    let kappa = decay_rate(lambda, xi, mat)?;
    // whole units so that every resolution shares the coarse nodes
    let x_max = (25.0 / kappa).ceil();
    let mut errors = Vec::new();
    let mut scale = 0.0f64;
    for &n in &ORACLE_PER_UNIT {
        let p = oracle_bvp(lambda, &[xi], h, mat, x_max, n * x_max as usize)?;
        let mut e = 0.0f64;
        for (&x, u) in p.x.iter().zip(&p.u) {
            let v = st.derivative(x, 0);
            scale = scale.max(v.iter().map(|c| c.norm()).fold(0.0, f64::max));
            e = e.max(u.iter().zip(&v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
        }
        errors.push(e);
    }
    Ok(OracleRun { lambda, xi, errors, scale })
}

pub fn oracle(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mat = cfg.material()?;
    let eps = cfg.sector.epsilon;
    let lam0 = cfg.sector.lambda0;
    let mut r = rng(cfg, 2);
    let samples: Vec<(C64, f64, Vec<C64>)> = (0..ORACLE_SAMPLES)
        .map(|_| {
            let lam = sector_lambda(&mut r, eps, lam0, 100.0 * lam0);
            let xi = 0.1 * 100f64.powf(r.gen::<f64>());
            (lam, xi, vec![random_c64(&mut r), random_c64(&mut r)])
        })
        .collect();
    let runs: Vec<Result<OracleRun>> = samples.par_iter().map(|(l, x, h)| oracle_sample(*l, *x, h, &mat)).collect();
    let mut o = Outcome::default();
    let mut t = Table::new("oracle_convergence", &["lambda", "xi", "err_512", "err_1024", "err_2048", "order_coarse", "order_fine", "relative_gap"]);
    let (mut worst_order, mut worst_gap) = (2.0f64, 0.0f64);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for run in runs {
        let Some(run) = numeric(&mut o, "halfspace.oracle", run)? else { return Ok(o) };
        let e = &run.errors;
        let p1 = (e[0] / e[1]).log2();
        let p2 = (e[1] / e[2]).log2();
        let gap = e[2] / run.scale;
        for p in [p1, p2] {
            lo = lo.min(p);
            hi = hi.max(p);
            if (p - 2.0).abs() > (worst_order - 2.0).abs() || p.is_nan() {
                worst_order = p;
            }
        }
        worst_gap = worst_gap.max(gap);
        t.push([fmt_c(run.lambda), fmt(run.xi), fmt(e[0]), fmt(e[1]), fmt(e[2]), format!("{p1:.4}"), format!("{p2:.4}"), fmt(gap)]);
    }
    o.near("halfspace.oracle_order", worst_order, 2.0, 0.1, format!("{ORACLE_SAMPLES} samples, orders in [{lo:.4}, {hi:.4}] for 512/1024/2048 per unit"));
    o.below("halfspace.oracle_gap", worst_gap, ORACLE_GAP, "max-norm gap relative to max |u| at h = 1/2048");
    o.fit("oracle_order_min", lo);
    o.fit("oracle_order_max", hi);
    o.tables.push(t);
    Ok(o)
}

pub fn energy(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mat = cfg.material()?;
    let eps = cfg.sector.epsilon;
    let lam0 = cfg.sector.lambda0;
    let opts = EnergyOptions { seed: cfg.seed, ..EnergyOptions::default() };
    let mut o = Outcome::default();
    let mut r = rng(cfg, 3);
    let (mut hom, mut id, mut im, mut margin) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for i in 0..8 {
        let d = 1 + i % 2;
        let lam = match i {
            0 => C64::new(lam0, 0.0),
            1 => C64::from_polar(2.0 * lam0, std::f64::consts::PI - eps),
            _ => sector_lambda(&mut r, eps, lam0, 1e3 * lam0),
        };
        let xi = random_xi(&mut r, d, 0.1, 10.0);
        let Some(rep) = numeric(&mut o, "halfspace.energy", energy_uniqueness_check(lam, &xi, &mat, &opts))? else { return Ok(o) };
        hom = hom.max(rep.homogeneous_norm);
        id = id.max(rep.max_identity_residual);
        im = im.max(rep.max_im_residual);
        margin = margin.min(rep.min_re_margin);
    }
    o.check("halfspace.uniqueness", hom == 0.0, hom, "= 0", "solution with zero boundary data");
    o.below("halfspace.energy_identity", id, 1e-10, "(Lv, v) - lambda |v|^2 - Q over decaying trial fields");
    o.below("halfspace.energy_imaginary", im, 1e-10, "Im (Lv, v) = Im lambda |v|^2");
    o.check("halfspace.energy_real_margin", margin >= 0.0, margin, ">= 0", "Re (Lv, v) - Re lambda |v|^2");
    Ok(o)
}

pub fn halfspace_verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut o = identities(cfg)?;
    o.merge(oracle(cfg)?);
    o.merge(energy(cfg)?);
    Ok(o)
}

/// Smooth trace: per component a sum of Gaussians with random centers,
/// widths and amplitudes.
fn smooth_trace(tg: &Grid, r: &mut impl Rng) -> Vec<Vec<C64>> {
    let (d, l) = (tg.dim, tg.extent);
    (0..=d)
        .map(|_| {
            let bumps: Vec<(Vec<f64>, f64, C64)> =
                (0..3).map(|_| ((0..d).map(|_| r.gen_range(-0.2..0.2) * l).collect(), r.gen_range(0.7..1.5), C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))).collect();
            tg.sample(|x| bumps.iter().map(|(c, w, a)| a * (-c.iter().zip(x).map(|(c, x)| (x - c).powi(2)).sum::<f64>() / (w * w)).exp()).sum())
        })
        .collect()
}

pub fn volevich(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mat = cfg.material()?;
    let eps = cfg.sector.epsilon;
    let lam0 = cfg.sector.lambda0;
    let tg = Grid::new(cfg.dim() - 1, cfg.grid.n.unwrap_or(32), cfg.grid.extent.unwrap_or(16.0))?;
    let mut r = rng(cfg, 4);
    let mut o = Outcome::default();
    let mut t = Table::new("volevich_crosscheck", &["set", "lambda", "depth_rate", "relative_l2", "refinement_change"]);
    let mut worst = 0.0f64;
    for set in 0..VOLEVICH_SETS {
        let lam = sector_lambda(&mut r, eps, lam0, 100.0 * lam0);
        let pt = SectorPoint::new(lam, eps, lam0)?;
        let trace = smooth_trace(&tg, &mut r);
        let a = r.gen_range(0.5..2.0);
        let ext = |y: f64| -> Vec<Vec<C64>> { trace.iter().map(|c| c.iter().map(|v| v * (-a * y).exp()).collect()).collect() };
        let v = vertical_nodes(lam, &mat, 33, 1e-9)?;
        let Some(direct) = numeric(&mut o, "halfspace.volevich", solve_halfspace_trace(&trace, &pt, &mat, &tg, &v))? else { return Ok(o) };
        let Some(rep) = numeric(&mut o, "halfspace.volevich", solve_halfspace_volevich(&ext, &pt, &mat, &tg, &v, &VolevichOptions::default()))? else { return Ok(o) };
        let rel = direct.diff_l2(&rep.field) / direct.l2_norm();
        worst = worst.max(rel);
        t.push([set.to_string(), fmt_c(lam), fmt(a), fmt(rel), fmt(rep.refinement_change)]);
        if set == 0 {
            // boundary slice of the first component
            o.fields.push(FieldDump { name: "volevich_u0_boundary".into(), dims: vec![tg.n; tg.dim], extent: tg.extent, data: rep.field.values[0][0].clone() });
        }
    }
    o.below("halfspace.volevich", worst, VOLEVICH_TOL, format!("{VOLEVICH_SETS} data sets, relative L2 over the vertical nodes"));
    o.fit("volevich_gap_max", worst);
    o.tables.push(t);
    Ok(o)
}
