use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use pulsenet_core::analysis::{coalition_histogram, Verdict};
use pulsenet_core::output::{self, EVENTS_FILE, REPORT_FILE, SAMPLES_FILE, SWEEP_FILE};
use pulsenet_core::sweep::{run_sweep, Axis, Grid};
use pulsenet_core::{load_config, run_trials, ConfigError, TrialPlan, TrialRun, VerificationReport};
use thiserror::Error;

use crate::RunArgs;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    /// Trials with at least one VIOLATED verdict.
    pub violations: usize,
    /// Trials stopped by an engine error.
    pub failures: usize,
}

/// 0 success, 1 theorem violation, 2 usage or config error, 3 numeric
/// failure. A violation outranks a failure in another trial.
pub fn exit_code(result: &Result<Outcome, CliError>) -> u8 {
    match result {
        Err(_) => 2,
        Ok(o) if o.violations > 0 => 1,
        Ok(o) if o.failures > 0 => 3,
        Ok(_) => 0,
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn plan(args: &RunArgs) -> TrialPlan {
    TrialPlan {
        trials: args.trials as usize,
        seed: args.seed,
        stop: args.stop(),
        sampling: args.sample,
    }
}

/// `out` itself for a single trial, `out/trial_NNNN` otherwise.
fn trial_dir(out: &Path, trials: usize, trial: usize) -> PathBuf {
    if trials == 1 {
        out.to_path_buf()
    } else {
        out.join(format!("trial_{trial:04}"))
    }
}

fn report_failures(runs: &[TrialRun]) -> usize {
    let mut failures = 0;
    for run in runs {
        if let Err(f) = &run.outcome {
            eprintln!("trial {}: {f}", run.trial);
            failures += 1;
        }
    }
    failures
}

pub fn simulate(args: &RunArgs) -> Result<Outcome, CliError> {
    let template = load_config(&args.config)?;
    let plan = plan(args);
    let runs = run_trials(&template, &plan, args.execution())?;
    let mut histogram = BTreeMap::new();
    for run in &runs {
        let dir = trial_dir(&args.out, plan.trials, run.trial);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let trace = run.trace();
        let events = dir.join(EVENTS_FILE);
        output::save_events(&events, trace).map_err(io_err(&events))?;
        if trace.samples.is_some() {
            let samples = dir.join(SAMPLES_FILE);
            output::save_samples(&samples, trace).map_err(io_err(&samples))?;
        }
        for (size, count) in coalition_histogram(trace) {
            *histogram.entry(size).or_insert(0usize) += count;
        }
    }
    let failures = report_failures(&runs);
    println!("coalition size  count");
    for (size, count) in &histogram {
        println!("{size:>14}  {count}");
    }
    Ok(Outcome {
        violations: 0,
        failures,
    })
}

fn tally(reports: &[(usize, VerificationReport)]) -> [[usize; 3]; 5] {
    let mut counts = [[0usize; 3]; 5];
    for (_, r) in reports {
        for (k, v) in r.verdicts.all().iter().enumerate() {
            let col = match v {
                Verdict::Confirmed => 0,
                Verdict::Vacuous(_) => 1,
                Verdict::Violated => 2,
            };
            counts[k][col] += 1;
        }
    }
    counts
}

pub fn verify(args: &RunArgs) -> Result<Outcome, CliError> {
    let template = load_config(&args.config)?;
    let plan = plan(args);
    let runs = run_trials(&template, &plan, args.execution())?;
    let failures = report_failures(&runs);
    let reports: Vec<(usize, VerificationReport)> = runs
        .iter()
        .filter_map(|r| r.report(args.min_recurrences).map(|rep| (r.trial, rep)))
        .collect();
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let path = args.out.join(REPORT_FILE);
    output::save_report(&path, args.min_recurrences, &reports).map_err(io_err(&path))?;

    let p = runs[0].config.predicates();
    println!(
        "m = {}  cooperative = {}  complete = {}  large = {}  weak = {}  similar = {} (lhs {:.6})",
        p.m, p.is_cooperative, p.is_complete, p.is_large, p.is_weak, p.is_similar, p.similarity_lhs
    );
    match p.r_value {
        Some(r) => println!("r = {r}  waiting bound = {}", p.waiting_bound),
        None => println!("r undefined  waiting bound = {}", p.waiting_bound),
    }
    if p.bounds_estimated {
        println!("velocity bounds are sampled estimates");
    }
    let waits: Vec<f64> = reports
        .iter()
        .filter_map(|(_, r)| r.summary.first_grand_coalition)
        .collect();
    if let Some(max) = waits.iter().copied().reduce(f64::max) {
        println!(
            "grand coalition reached in {}/{} trials, longest wait {max}",
            waits.len(),
            reports.len()
        );
    } else {
        println!("no grand coalition in {} trials", reports.len());
    }
    println!("{:<14} {:>9} {:>9} {:>9}", "check", "CONFIRMED", "VACUOUS", "VIOLATED");
    let names = ["theorem1", "waiting_time", "theorem2", "assertion_a", "assertion_b"];
    for (name, [c, v, x]) in names.iter().zip(tally(&reports)) {
        println!("{name:<14} {c:>9} {v:>9} {x:>9}");
    }
    Ok(verdict_outcome(&reports, failures))
}

pub fn verdict_outcome(reports: &[(usize, VerificationReport)], failures: usize) -> Outcome {
    Outcome {
        violations: reports.iter().filter(|(_, r)| r.has_violation()).count(),
        failures,
    }
}

pub fn sweep(args: &RunArgs, axes: Vec<Axis>) -> Result<Outcome, CliError> {
    let template = load_config(&args.config)?;
    let grid = Grid::from_axes(axes)?;
    let cells = run_sweep(&template, &grid, &plan(args), args.min_recurrences, args.execution())?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let path = args.out.join(SWEEP_FILE);
    output::save_sweep(&path, &cells).map_err(io_err(&path))?;
    println!(
        "{:>5} {:>8} {:>8} {:>7} {:>6} {:>8} {:>4} {:>10} {:>8}",
        "m", "delta", "theta", "spread", "large", "similar", "r", "wait_max", "purity"
    );
    let fmt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
    for c in &cells {
        println!(
            "{:>5} {:>8} {:>8} {:>7} {:>6} {:>8} {:>4} {:>10} {:>8}",
            c.m,
            fmt(c.delta),
            c.theta,
            c.spread,
            c.predicates.is_large,
            c.predicates.is_similar,
            c.predicates.r_value.map(|r| r.to_string()).unwrap_or_else(|| "-".into()),
            fmt(c.wait_max),
            fmt(c.purity),
        );
    }
    Ok(Outcome {
        violations: cells.iter().map(|c| c.violations).sum(),
        failures: cells.iter().map(|c| c.failures).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pulsenet_core::engine::{SpikeEvent, Trace};
    use pulsenet_core::{Model, NetworkConfig, WeightMatrix};

    fn e1_rest() -> NetworkConfig {
        NetworkConfig::new(
            vec![Model::linear(1.0, 1.0).unwrap(); 19],
            WeightMatrix::uniform(19, 0.3).unwrap(),
            vec![vec![0.0]; 19],
        )
        .unwrap()
    }

    fn event(n: usize, t: f64, coalition: Vec<usize>) -> SpikeEvent {
        SpikeEvent {
            n,
            t,
            waves: vec![coalition.clone()],
            coalition,
            pre: vec![0.0; 19],
            post: vec![0.0; 19],
        }
    }

    #[test]
    fn exit_codes() {
        let ok = Outcome {
            violations: 0,
            failures: 0,
        };
        assert_eq!(exit_code(&Ok(ok)), 0);
        assert_eq!(exit_code(&Ok(Outcome { violations: 2, ..ok })), 1);
        assert_eq!(exit_code(&Ok(Outcome { failures: 1, ..ok })), 3);
        assert_eq!(
            exit_code(&Ok(Outcome {
                violations: 1,
                failures: 1
            })),
            1
        );
        let err = Err(CliError::Config(ConfigError::Invalid("x".into())));
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn injected_violation_exits_with_one() {
        // A coalition of 10 units sits strictly between r = 4 and m = 19.
        let trace = Trace {
            m: 19,
            events: vec![event(0, 0.5, (0..10).collect()), event(1, 1.0, (0..19).collect())],
            samples: None,
            end_time: 1.0,
        };
        let report = VerificationReport::new(&e1_rest(), &trace, 10);
        assert!(report.has_violation());
        let outcome = verdict_outcome(&[(0, report)], 0);
        assert_eq!(exit_code(&Ok(outcome)), 1);
    }

    #[test]
    fn trial_directories() {
        let out = Path::new("o");
        assert_eq!(trial_dir(out, 1, 0), PathBuf::from("o"));
        assert_eq!(trial_dir(out, 3, 2), PathBuf::from("o/trial_0002"));
    }
}
