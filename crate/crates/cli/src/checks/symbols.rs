//! Lopatinski scan and symbol-class certification.

use lamesolve::symbols::{lopatinski_scan, named_symbol, symbol_class_check, CertifierOptions, SampleGrid, SymbolReport, Verdict};
use lamesolve::Result;

use super::{fmt, fmt_c, numeric};
use crate::config::ExperimentConfig;
use crate::report::{Outcome, Table};

/// Band r |lambda| <= |xi'|^2 <= |lambda| / r for the middle-regime minimum.
pub const MIDDLE_R: f64 = 0.1;

/// Largest accepted relative change of c2 when the scan grid is doubled.
pub const REFINE_TOL: f64 = 0.05;

pub fn sample_grid(cfg: &ExperimentConfig) -> SampleGrid {
    SampleGrid { epsilon: cfg.sector.epsilon, lambda_min: cfg.sector.lambda0, xi_dim: cfg.dim() - 1, ..SampleGrid::default() }
}

/// The certifier needs 8 samples per decade in |lambda| and |xi'|: the
/// order-3 derivatives of M^-1 peak sharply at the sector edge near
/// |xi'|^2 ~ 1.4 |lambda|, and 4 per decade misses the peak by a third.
pub fn certifier_grid(cfg: &ExperimentConfig) -> SampleGrid {
    SampleGrid { lambda_per_decade: 8, xi_per_decade: 8, ..sample_grid(cfg) }
}

pub fn lopatinski(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mat = cfg.material()?;
    let sg = sample_grid(cfg);
    let mut o = Outcome::default();
    let Some(base) = numeric(&mut o, "lopatinski.scan", lopatinski_scan(&sg, &mat, MIDDLE_R))? else { return Ok(o) };
    let Some(fine) = numeric(&mut o, "lopatinski.scan_refined", lopatinski_scan(&sg.refined(), &mat, MIDDLE_R))? else { return Ok(o) };
    o.check("lopatinski.c2_positive", base.c2 > 0.0, base.c2, "> 0", format!("minimum at lambda = {}, |xi'| = {:.4e}", fmt_c(base.c2_lambda), base.c2_xi));
    let change = (fine.c2 - base.c2).abs() / base.c2;
    o.below("lopatinski.c2_refinement", change, REFINE_TOL, format!("c2 = {:.6e} base, {:.6e} doubled", base.c2, fine.c2));
    o.check("lopatinski.weighted_positive", base.c_weighted > 0.0, base.c_weighted, "> 0", "lower bound |L| >= c |lambda| (|lambda|^1/2 + |xi'|)^2");
    o.check("lopatinski.root_sandwich", base.d1 > 0.0 && base.d2.is_finite(), base.d1, "d1 > 0, d2 finite", format!("d2 = {:.4e}", base.d2));
    for (k, v) in [("c2", base.c2), ("c2_refined", fine.c2), ("c2_middle", base.c2_middle), ("c_weighted", base.c_weighted), ("d1", base.d1), ("d2", base.d2)] {
        o.fit(k, v);
    }
    let mut t = Table::new("lopatinski_rows", &["lambda_re", "lambda_im", "xi_norm", "ratio"]);
    for r in &base.rows {
        t.push([fmt(r.lambda.re), fmt(r.lambda.im), fmt(r.xi_norm), fmt(r.ratio)]);
    }
    o.tables.push(t);
    Ok(o)
}

/// (name, order, certify the lambda derivative too)
pub const CERTIFIED: [(&str, i32, bool); 4] = [("M_inv", -2, true), ("m1_over_lambda", 0, false), ("m2_over_lambda", 0, false), ("m3_over_lambda", -1, false)];

fn report_rows(t: &mut Table, name: &str, r: &SymbolReport) {
    let refined = |i: usize| r.refined_ratios.get(i).map(|k| fmt(k.ratio)).unwrap_or_default();
    for (i, k) in r.max_ratio_per_kappa.iter().enumerate() {
        t.push([name.to_string(), r.order.to_string(), format!("{:?}", k.kappa), fmt(k.ratio), refined(i)]);
    }
    if let (Some(d), Some(o)) = (&r.lambda_derivative_ratios, r.lambda_derivative_order) {
        let rd = r.refined_lambda_derivative_ratios.as_ref();
        for (i, k) in d.iter().enumerate() {
            let fine = rd.and_then(|v| v.get(i)).map(|k| fmt(k.ratio)).unwrap_or_default();
            t.push([format!("d_lambda {name}"), o.to_string(), format!("{:?}", k.kappa), fmt(k.ratio), fine]);
        }
    }
}

pub fn symbol_classes(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mat = cfg.material()?;
    let sg = certifier_grid(cfg);
    let mut o = Outcome::default();
    let mut t = Table::new("symbol_ratios", &["symbol", "order", "kappa", "sup_ratio", "sup_ratio_refined"]);
    for (name, order, dl) in CERTIFIED {
        let sym = named_symbol(name, mat)?;
        let opts = CertifierOptions { lambda_derivative: dl, ..CertifierOptions::default() };
        let check = format!("symbols.{name}_order{order}");
        let Some(r) = numeric(&mut o, &check, symbol_class_check(&sym, order, &sg, &opts))? else { continue };
        let worst = r.max_ratio_per_kappa.iter().chain(r.lambda_derivative_ratios.iter().flatten()).map(|k| k.ratio).fold(0.0, f64::max);
        let detail = match &r.offending {
            Some(k) => format!("kappa {:?} grows to {:.4e} at lambda = {}", k.kappa, k.ratio, fmt_c(k.lambda)),
            None if dl => format!("derivatives up to order {}, d_lambda at order {}", opts.max_kappa, order - 2),
            None => format!("derivatives up to order {}", opts.max_kappa),
        };
        o.check(&check, r.verdict == Verdict::Bounded, worst, "bounded and refinement-stable", detail);
        o.fit(&format!("sup_{name}"), worst);
        report_rows(&mut t, name, &r);
    }
    // B has order 1; certifying it at order 0 must fail
    let b = named_symbol("B", mat)?;
    let opts = CertifierOptions { max_kappa: 1, ..CertifierOptions::default() };
    if let Some(r) = numeric(&mut o, "symbols.control_B_order0", symbol_class_check(&b, 0, &sg, &opts))? {
        let worst = r.max_ratio_per_kappa.iter().map(|k| k.ratio).fold(0.0, f64::max);
        o.check("symbols.control_B_order0", r.verdict == Verdict::Unbounded, worst, "unbounded", "order-1 symbol tested at order 0");
    }
    o.tables.push(t);
    Ok(o)
}
