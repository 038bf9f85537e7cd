//! Acceptance battery: one PASS/FAIL line per criterion, each within its
//! wall-time budget. Runs sequentially so the timings are not shared.

use std::process::ExitCode;
use std::time::Instant;

use lamesolve::Result;
use lamesolve_cli::checks::{besov, halfspace, laplace, resolvent, stokes, symbols};
use lamesolve_cli::config::ExperimentConfig;
use lamesolve_cli::report::Outcome;

type Criterion = (&'static str, f64, fn(&ExperimentConfig) -> Result<Outcome>);

fn pairs_and_fitter(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut o = laplace::known_pairs(cfg)?;
    o.merge(laplace::fitter_selftest()?);
    Ok(o)
}

const CRITERIA: [Criterion; 12] = [
    ("algebraic closure of the half-space modes", 5.0, halfspace::identities),
    ("finite-difference oracle, order 2 and gap < 1e-4", 60.0, halfspace::oracle),
    ("trace form against Volevich form", 120.0, halfspace::volevich),
    ("Lopatinski determinant bounded below", 10.0, symbols::lopatinski),
    ("symbol classes of the solution operators", 60.0, symbols::symbol_classes),
    ("resolvent estimate exponents", 300.0, resolvent::resolvent),
    ("causality of the inverted resolvents", 60.0, laplace::causality),
    ("decay exponents of the Hessian traces", 300.0, laplace::decay_fits),
    ("L1 maximal regularity, dyadic sum", 600.0, laplace::l1_maxreg),
    ("Stokes coupling through the Lame resolvent", 120.0, stokes::stokes_coupled),
    ("Besov engine", 120.0, besov::besov_estimates),
    ("known Laplace pairs and fitter self-test", 10.0, pairs_and_fitter),
];

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let cfg = ExperimentConfig::default();
    let mut failed = 0;
    for (i, (name, budget, run)) in CRITERIA.iter().enumerate() {
        let id = format!("criterion_{:02}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = run(&cfg);
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match &result {
            Ok(o) if o.checks.is_empty() => (false, "no checks ran".to_string()),
            Ok(o) => {
                let bad: Vec<String> = o.failed().iter().map(|c| format!("{} = {:.4e} (want {})", c.name, c.value, c.threshold)).collect();
                (bad.is_empty(), if bad.is_empty() { format!("{} checks", o.checks.len()) } else { bad.join("; ") })
            }
            Err(e) => (false, e.to_string()),
        };
        let in_time = secs < *budget;
        let pass = ok && in_time;
        println!("{} {id} {name}: {detail}; {secs:.1} s of {budget} s", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
