//! Besov engine: partition of unity, product and multiplication estimate scans,
//! Fourier multiplier battery.

use std::f64::consts::PI;

use lamesolve::besov::{lipschitz_mult_ratio, make_basis, multiplier_ratio, product_ratio, LPBasis, LIPSCHITZ_EPS};
use lamesolve::grid::Grid;
use lamesolve::{Result, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{fmt, random_c64, rng};
use crate::config::ExperimentConfig;
use crate::report::{Outcome, Table};

pub const PARTITION_TOL: f64 = 1e-12;
pub const PAIRS: usize = 50;
/// Largest accepted relative change of a sup ratio when the grid is doubled.
pub const DOUBLING_TOL: f64 = 0.02;
pub const RESCALINGS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
/// sup over R of the rescaled ratio against its value at R = 1.
pub const RESCALING_GROWTH: f64 = 2.0;
pub const MULTIPLIER_SAMPLES: usize = 20;

/// Trigonometric polynomial with integer wave vectors; identical as a
/// function on every grid of the same extent that resolves it.
#[derive(Debug, Clone)]
struct TrigPoly(Vec<([i64; 2], C64)>);

impl TrigPoly {
    fn random(r: &mut ChaCha8Rng, terms: usize, lo: i64, hi: i64) -> Self {
        TrigPoly(
            (0..terms)
                .map(|_| {
                    let mut m = [0i64; 2];
                    loop {
                        m[0] = r.gen_range(-hi..=hi);
                        m[1] = r.gen_range(-hi..=hi);
                        let a = m[0].abs().max(m[1].abs());
                        if a >= lo {
                            break;
                        }
                    }
                    (m, random_c64(r))
                })
                .collect(),
        )
    }

    fn sample(&self, grid: &Grid) -> Vec<C64> {
        let k = 2.0 * PI / grid.extent;
        grid.sample(|x| self.0.iter().map(|(m, a)| a * C64::from_polar(1.0, k * (m[0] as f64 * x[0] + m[1] as f64 * x[1]))).sum())
    }
}

struct Pair {
    regime: &'static str,
    u: TrigPoly,
    v: TrigPoly,
}

fn pairs(r: &mut ChaCha8Rng, band: i64) -> Vec<Pair> {
    let mut out = Vec::new();
    for i in 0..PAIRS {
        // every fifth pair probes the paraproduct regimes
        let (regime, u, v) = match i % 5 {
            3 => ("high_low", TrigPoly::random(r, 3, band / 2, band), TrigPoly::random(r, 3, 0, 2)),
            4 => ("low_high", TrigPoly::random(r, 3, 0, 2), TrigPoly::random(r, 3, band / 2, band)),
            _ => ("random", TrigPoly::random(r, 6, 0, band), TrigPoly::random(r, 6, 0, band)),
        };
        out.push(Pair { regime, u, v });
    }
    out
}

fn sup_by_regime(vals: &[(&'static str, f64)]) -> Vec<(&'static str, f64)> {
    let mut out: Vec<(&'static str, f64)> = Vec::new();
    for &(k, v) in vals {
        match out.iter_mut().find(|(n, _)| *n == k) {
            Some(e) => e.1 = e.1.max(v),
            None => out.push((k, v)),
        }
    }
    out
}

fn bump(grid: &Grid, rscale: f64) -> Vec<C64> {
    grid.sample(|x| C64::new(1.0 + 0.5 * (-(rscale * rscale) * (x[0] * x[0] + x[1] * x[1]) / 16.0).exp(), 0.0))
}

pub fn besov_estimates(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (s, q) = (cfg.besov.s, cfg.besov.q);
    let coarse = cfg.plane_grid_or(64, 16.0)?;
    let fine = Grid::new(2, 2 * coarse.n, coarse.extent)?;
    let bases: Vec<LPBasis> = vec![make_basis(&coarse)?, make_basis(&fine)?];
    let mut o = Outcome::default();

    let part = bases.iter().map(|b| b.partition_error()).fold(0.0, f64::max);
    o.below("besov.partition_of_unity", part, PARTITION_TOL, format!("grids {}^2 and {}^2", coarse.n, fine.n));

    // product estimate; the band keeps uv resolved on the coarse grid
    let band = (coarse.n / 8) as i64;
    let mut r = rng(cfg, 11);
    let ps = pairs(&mut r, band);
    let mut t = Table::new("product_ratios", &["pair", "regime", "ratio_coarse", "ratio_fine"]);
    let mut per_grid = [Vec::new(), Vec::new()];
    for (i, p) in ps.iter().enumerate() {
        let mut row = Vec::new();
        for (g, b) in bases.iter().enumerate() {
            let v = product_ratio(&p.u.sample(&b.grid), &p.v.sample(&b.grid), s, q, b)?;
            per_grid[g].push((p.regime, v));
            row.push(v);
        }
        t.push([i.to_string(), p.regime.to_string(), fmt(row[0]), fmt(row[1])]);
    }
    o.tables.push(t);
    let sup = |v: &[(&str, f64)]| v.iter().map(|x| x.1).fold(0.0, f64::max);
    let (pc, pf) = (sup(&per_grid[0]), sup(&per_grid[1]));
    o.check("besov.product_bounded", pc.is_finite() && pc > 0.0, pc, "finite", format!("sup over {PAIRS} band-limited pairs, s = {s}, q = {q}"));
    o.below("besov.product_doubling", (pf - pc).abs() / pc, DOUBLING_TOL, format!("sup {pc:.6e} on {}^2, {pf:.6e} on {}^2", coarse.n, fine.n));
    for (regime, v) in sup_by_regime(&per_grid[0]) {
        o.fit(&format!("product_sup_{regime}"), v);
    }
    let one = vec![C64::new(1.0, 0.0); coarse.len()];
    let unit = product_ratio(&ps[0].u.sample(&coarse), &one, s, q, &bases[0])?;
    o.fit("product_ratio_v_one", unit);

    // multiplication by a slowly varying bump and its rescalings
    let mut r = rng(cfg, 12);
    let fs: Vec<TrigPoly> = (0..PAIRS).map(|_| TrigPoly::random(&mut r, 6, 0, band)).collect();
    let mut t = Table::new("lipschitz_ratios", &["rescale", "ratio_coarse", "ratio_fine"]);
    let mut by_r = Vec::new();
    let mut worst_doubling = 0.0f64;
    for &rs in &RESCALINGS {
        let mut sups = [0.0f64; 2];
        for (g, b) in bases.iter().enumerate() {
            let gb = bump(&b.grid, rs);
            for f in &fs {
                sups[g] = sups[g].max(lipschitz_mult_ratio(&f.sample(&b.grid), &gb, s, q, LIPSCHITZ_EPS, b)?);
            }
        }
        worst_doubling = worst_doubling.max((sups[1] - sups[0]).abs() / sups[0]);
        by_r.push(sups[0]);
        t.push([rs.to_string(), fmt(sups[0]), fmt(sups[1])]);
    }
    o.tables.push(t);
    let growth = by_r.iter().fold(0.0f64, |a, &b| a.max(b)) / by_r[0];
    o.check("besov.lipschitz_bounded", by_r.iter().all(|v| v.is_finite()), by_r[0], "finite", format!("sup over {PAIRS} band-limited f at R = 1"));
    o.below("besov.lipschitz_rescaling", growth, RESCALING_GROWTH, format!("sup over R in {RESCALINGS:?} relative to R = 1"));
    o.below("besov.lipschitz_doubling", worst_doubling, DOUBLING_TOL, "largest relative change of the sup under grid doubling");
    let unit = lipschitz_mult_ratio(&fs[0].sample(&coarse), &one, s, q, LIPSCHITZ_EPS, &bases[0])?;
    o.below("besov.lipschitz_unit", (unit - 1.0).abs(), 1e-12, "g = 1 gives ratio 1");
    for (rs, v) in RESCALINGS.iter().zip(&by_r) {
        o.fit(&format!("lipschitz_sup_R{rs}"), *v);
    }

    // multiplier battery with p = 2, where blockwise Plancherel gives the bounds
    let b = &bases[0];
    let mut r = rng(cfg, 13);
    let smooth: Vec<Vec<C64>> = (0..MULTIPLIER_SAMPLES).map(|_| TrigPoly::random(&mut r, 8, 0, (coarse.n / 2 - 1) as i64).sample(&coarse)).collect();
    let (mut id, mut riesz, mut deriv) = (0.0f64, 0.0f64, 0.0f64);
    for f in &smooth {
        id = id.max((multiplier_ratio(|_| C64::new(1.0, 0.0), f, s, s, 2.0, b)? - 1.0).abs());
        riesz = riesz.max(multiplier_ratio(
            |x| {
                let n2 = x[0] * x[0] + x[1] * x[1];
                C64::new(if n2 == 0.0 { 0.0 } else { x[0] * x[0] / n2 }, 0.0)
            },
            f,
            s,
            s,
            2.0,
            b,
        )?);
        deriv = deriv.max(multiplier_ratio(|x| C64::new(0.0, x[0]), f, s, s + 1.0, 2.0, b)?);
    }
    o.below("besov.multiplier_identity", id, 1e-12, "m = 1 gives ratio 1");
    o.check("besov.multiplier_riesz", riesz <= 1.0 + 1e-12, riesz, "<= 1", "xi_1^2/|xi|^2, |m| <= 1 on every block");
    o.check("besov.multiplier_derivative", deriv <= 2.0 + 1e-12, deriv, "<= 2", "i xi_1 from B^(s+1) to B^s, |xi| <= 2^(k+1) on block k");
    o.fit("multiplier_riesz_sup", riesz);
    o.fit("multiplier_derivative_sup", deriv);
    Ok(o)
}
