//! Resolvent-estimate exponents for the whole-space and half-space Lame problem.

use lamesolve::besov::make_basis;
use lamesolve::halfspace::{half_mode_family, halfspace_resolvent_scan};
use lamesolve::symbols::{loglog_slope, SectorPoint};
use lamesolve::wholespace::{axis_mode_family, family_rows, resolvent_scan, ResolventEstimateRow};
use lamesolve::{Result, C64};

use super::{fmt, fmt_c, numeric};
use crate::config::ExperimentConfig;
use crate::report::{Outcome, Table};

/// Probe wavenumber indices; dense at low frequency where the sup sits for small |lambda|.
pub const PROBES: [usize; 19] = [1, 2, 3, 4, 5, 6, 8, 10, 12, 14, 16, 20, 24, 28, 32, 40, 48, 56, 63];
pub const SLOPE_TOL: f64 = 0.1;

/// |lambda| = lambda_0 10^{1 + i/8}, i = 0..16.
pub fn magnitudes(lambda0: f64) -> Vec<f64> {
    (0..=16).map(|i| lambda0 * 10f64.powf(1.0 + i as f64 / 8.0)).collect()
}

/// (family, window in units of lambda_0, target slope)
fn fits(sigma: f64) -> [(&'static str, f64, f64, f64); 2] {
    [("ii_top", 10.0, 100.0, -sigma / 2.0), ("iii", 100.0, 1000.0, -(1.0 - sigma / 2.0))]
}

fn window_slope(rows: &[ResolventEstimateRow], family: &str, lo: f64, hi: f64) -> Result<f64> {
    let sel: Vec<&ResolventEstimateRow> = family_rows(rows, family).into_iter().filter(|r| r.lambda.norm() >= lo * (1.0 - 1e-9) && r.lambda.norm() <= hi * (1.0 + 1e-9)).collect();
    let x: Vec<f64> = sel.iter().map(|r| r.lambda.norm()).collect();
    let y: Vec<f64> = sel.iter().map(|r| r.raw).collect();
    loglog_slope(&x, &y)
}

pub fn resolvent(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mat = cfg.material()?;
    let params = cfg.params();
    params.validate()?;
    let (eps, lam0) = (cfg.sector.epsilon, cfg.sector.lambda0);
    let grid = cfg.plane_grid_or(128, 8.0)?;
    let basis = make_basis(&grid)?;
    let probes: Vec<usize> = PROBES.iter().copied().filter(|&j| j < grid.n / 2).collect();
    let pts: Vec<SectorPoint> = magnitudes(lam0).into_iter().map(|m| SectorPoint::new(C64::new(m, 0.0), eps, lam0)).collect::<Result<_>>()?;
    let mut o = Outcome::default();
    let Some(whole) = numeric(&mut o, "resolvent.whole_scan", resolvent_scan(&axis_mode_family(&grid, &probes), &pts, &params, &mat, &basis))? else { return Ok(o) };
    let Some(half) =
        numeric(&mut o, "resolvent.half_scan", halfspace_resolvent_scan(&half_mode_family(&grid, &probes), &pts, &params, &mat, &basis, false))?
    else {
        return Ok(o);
    };
    let mut t = Table::new("resolvent_rows", &["domain", "family", "lambda", "raw", "ratio", "member"]);
    for (domain, rows) in [("whole", &whole), ("half", &half)] {
        for (fam, lo, hi, target) in fits(params.sigma) {
            let name = format!("resolvent.{domain}_{fam}_slope");
            if let Some(s) = numeric(&mut o, &name, window_slope(rows, fam, lo * lam0, hi * lam0))? {
                o.near(&name, s, target, SLOPE_TOL, format!("log-log slope of the sup quotient on |lambda| in [{}, {}]", lo * lam0, hi * lam0));
                o.fit(&format!("slope_{domain}_{fam}"), s);
            }
        }
        for r in rows.iter() {
            t.push([domain.to_string(), r.family.clone(), fmt_c(r.lambda), fmt(r.raw), fmt(r.ratio), r.member.to_string()]);
            let key = format!("sup_ratio_{domain}_{}", r.family);
            let cur = o.fitted.get(&key).copied().unwrap_or(0.0);
            o.fit(&key, cur.max(r.ratio));
        }
    }
    o.tables.push(t);
    Ok(o)
}
