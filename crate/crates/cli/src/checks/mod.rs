//! One function per experiment. Each returns the checks, tables and fitted
//! constants of a run; numerical failures become failed checks, parameter
//! problems propagate as errors.

use std::f64::consts::PI;

use lamesolve::laplace::{contour_for, contour_nodes, ContourSpec};
use lamesolve::{Error, Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::report::Outcome;

pub mod besov;
pub mod halfspace;
pub mod laplace;
pub mod resolvent;
pub mod stokes;
pub mod symbols;

pub(crate) fn rng(cfg: &ExperimentConfig, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
    r.set_stream(stream);
    r
}

/// |lambda| log-uniform in [lo, hi], arg uniform in the open sector.
pub(crate) fn sector_lambda(rng: &mut ChaCha8Rng, epsilon: f64, lo: f64, hi: f64) -> C64 {
    let r = lo * (hi / lo).powf(rng.gen::<f64>());
    let a = (PI - epsilon) * (2.0 * rng.gen::<f64>() - 1.0);
    C64::from_polar(r, a)
}

/// Random direction in R^d with log-uniform length in [lo, hi].
pub(crate) fn random_xi(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            let len = lo * (hi / lo).powf(rng.gen::<f64>());
            return v.iter().map(|x| x / n * len).collect();
        }
    }
}

pub(crate) fn random_c64(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// The contour comes closest to the origin at gamma sin(eps), which is
/// lambda_0 for the default opening.
pub(crate) fn lame_gamma(cfg: &ExperimentConfig) -> f64 {
    cfg.contour.gamma.unwrap_or(2.0 * cfg.sector.lambda0)
}

/// Contour from the config, sized for the smallest requested time.
pub(crate) fn contour(cfg: &ExperimentConfig, gamma: f64, t_min: f64) -> Result<ContourSpec> {
    match cfg.contour.r_max {
        Some(r) => {
            let spec = contour_nodes(gamma, cfg.sector.epsilon, r, cfg.contour.n)?;
            spec.check_time(t_min)?;
            Ok(spec)
        }
        None => contour_for(gamma, cfg.sector.epsilon, t_min, cfg.contour.n),
    }
}

/// Numerical failures are findings, not crashes: they become a failed check.
pub(crate) fn numeric<T>(o: &mut Outcome, name: &str, r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ (Error::Param(_) | Error::Config(_) | Error::Input(_))) => Err(e),
        Err(e) => {
            o.check(name, false, f64::NAN, "no error", e.to_string());
            Ok(None)
        }
    }
}

pub(crate) fn fmt_c(z: C64) -> String {
    format!("{:.6e}{:+.6e}i", z.re, z.im)
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v:.6e}")
}
