//! Experiment registry and the runner.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lamesolve::Error;
use serde::Serialize;

use crate::checks;
use crate::config::ExperimentConfig;
use crate::report::{write_outputs, Outcome};
use crate::CliError;

pub type RunFn = fn(&ExperimentConfig) -> lamesolve::Result<Outcome>;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Experiment {
    pub name: &'static str,
    /// Core module the experiment exercises.
    pub module: &'static str,
    /// The estimate or property under test, in one line.
    pub anchor: &'static str,
    #[serde(skip)]
    pub run: RunFn,
}

pub const EXPERIMENTS: [Experiment; 10] = [
    Experiment {
        name: "lopatinski-scan",
        module: "symbols",
        anchor: "|L(lambda, xi')| >= c2 (|lambda|^1/2 + |xi'|)^4 on the sector, root sandwich d1, d2",
        run: checks::symbols::lopatinski,
    },
    Experiment {
        name: "symbol-class",
        module: "symbols",
        anchor: "M^-1 of order -2 (d_lambda at -4), m1/lambda, m2/lambda of order 0, m3/lambda of order -1",
        run: checks::symbols::symbol_classes,
    },
    Experiment {
        name: "halfspace-verify",
        module: "halfspace",
        anchor: "closed-form half-space modes: algebraic identities, BVP oracle, energy uniqueness",
        run: checks::halfspace::halfspace_verify,
    },
    Experiment {
        name: "volevich-crosscheck",
        module: "halfspace",
        anchor: "trace-form and Volevich-form half-space solutions coincide",
        run: checks::halfspace::volevich,
    },
    Experiment {
        name: "resolvent-scan",
        module: "wholespace",
        anchor: "Lame resolvent bounds scale as |lambda|^-sigma/2 and |lambda|^-(1-sigma/2), whole and half space",
        run: checks::resolvent::resolvent,
    },
    Experiment {
        name: "stokes-coupled",
        module: "stokes_resolvent",
        anchor: "Stokes resolvent by contraction for |lambda| >= lambda_4, ratio ~ C/|lambda|",
        run: checks::stokes::stokes_coupled,
    },
    Experiment {
        name: "causality",
        module: "laplace",
        anchor: "inverse transforms of the resolvent families vanish for t < 0",
        run: checks::laplace::causality,
    },
    Experiment {
        name: "decay-rates",
        module: "laplace",
        anchor: "e^-gamma t |d^2 u(t)|_B^s ~ t^-(1 -+ sigma/2) for data in B^(s +- sigma); transform pairs and fitter",
        run: checks::laplace::decay_rates,
    },
    Experiment {
        name: "l1-maxreg",
        module: "laplace",
        anchor: "dyadic L1-in-time sum of e^-gamma t |d^2 u|_B^s is finite and linear in the data",
        run: checks::laplace::l1_maxreg,
    },
    Experiment {
        name: "besov-estimates",
        module: "besov",
        anchor: "Littlewood-Paley partition, product and multiplication estimates, multiplier bounds",
        run: checks::besov::besov_estimates,
    },
];

pub fn find(name: &str) -> Result<&'static Experiment, CliError> {
    EXPERIMENTS.iter().find(|e| e.name == name).ok_or_else(|| CliError::UnknownExperiment(name.to_string()))
}

pub fn list(module: Option<&str>) -> Vec<&'static Experiment> {
    EXPERIMENTS.iter().filter(|e| module.map_or(true, |m| e.module == m)).collect()
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub experiment: &'static str,
    pub outcome: Outcome,
    pub wall_time_s: f64,
    pub output_dir: PathBuf,
    pub manifest: String,
}

/// Runs the experiment body. Parameter-type errors abort, numerical errors
/// are recorded as a failed check.
pub fn execute(exp: &Experiment, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    match (exp.run)(cfg) {
        Ok(o) => Ok(o),
        Err(e @ (Error::Param(_) | Error::Config(_) | Error::Input(_))) => Err(e.into()),
        Err(e) => {
            let mut o = Outcome::default();
            o.check(&format!("{}.run", exp.name), false, f64::NAN, "no error", e.to_string());
            Ok(o)
        }
    }
}

/// Runs and writes `<out>/<experiment>/` with CSV tables and manifest.json.
pub fn run(exp: &'static Experiment, cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary, CliError> {
    let t0 = Instant::now();
    let outcome = execute(exp, cfg)?;
    let wall_time_s = t0.elapsed().as_secs_f64();
    let dir = out.join(exp.name);
    let mut echo = cfg.clone();
    echo.experiment = Some(exp.name.to_string());
    let manifest = write_outputs(exp.name, &outcome, &echo, wall_time_s, &dir)?;
    Ok(RunSummary { experiment: exp.name, outcome, wall_time_s, output_dir: dir, manifest })
}
