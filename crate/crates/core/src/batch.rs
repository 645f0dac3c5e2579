//! Seeded multi-trial runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::VerificationReport;
use crate::config::{ConfigError, NetworkTemplate};
use crate::engine::{self, RunFailure, Stop, Trace};
use crate::network::NetworkConfig;
use crate::par::{map_indexed, Execution};

/// Generator for trial `trial` of a run seeded with `seed`. Each trial gets
/// its own ChaCha stream, so trials are independent of scheduling order.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialPlan {
    pub trials: usize,
    pub seed: u64,
    pub stop: Stop,
    pub sampling: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrialRun {
    pub trial: usize,
    pub config: NetworkConfig,
    pub outcome: Result<Trace, RunFailure>,
}

impl TrialRun {
    pub fn trace(&self) -> &Trace {
        match &self.outcome {
            Ok(trace) => trace,
            Err(failure) => &failure.trace,
        }
    }

    pub fn report(&self, min_recurrences: usize) -> Option<VerificationReport> {
        self.outcome
            .as_ref()
            .ok()
            .map(|trace| VerificationReport::new(&self.config, trace, min_recurrences))
    }
}

/// Instantiates and runs every trial of `plan`.
pub fn run_trials(
    template: &NetworkTemplate,
    plan: &TrialPlan,
    exec: Execution,
) -> Result<Vec<TrialRun>, ConfigError> {
    if plan.trials == 0 {
        return Err(ConfigError::Invalid("at least one trial is required".into()));
    }
    let configs = (0..plan.trials)
        .map(|trial| template.instantiate(&mut trial_rng(plan.seed, trial)))
        .collect::<Result<Vec<_>, _>>()?;
    let outcomes = map_indexed(exec, plan.trials, |trial| {
        engine::run(&configs[trial], plan.stop, plan.sampling)
    });
    Ok(configs
        .into_iter()
        .zip(outcomes)
        .enumerate()
        .map(|(trial, (config, outcome))| TrialRun {
            trial,
            config,
            outcome,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use rand::Rng;

    const E1: &str = r#"{"m": 19, "theta": 1.0, "units": {"kind": "linear", "v": 1.0},
                         "weights": 0.3, "initial": "random"}"#;

    #[test]
    fn trial_streams_differ_and_repeat() {
        let a: f64 = trial_rng(5, 0).random();
        let b: f64 = trial_rng(5, 1).random();
        let again: f64 = trial_rng(5, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, again);
    }

    #[test]
    fn schedules_agree() {
        let t = parse_config(E1).unwrap();
        let plan = TrialPlan {
            trials: 8,
            seed: 3,
            stop: Stop::MaxTime(5.0),
            sampling: None,
        };
        let seq = run_trials(&t, &plan, Execution::Sequential).unwrap();
        let par = run_trials(&t, &plan, Execution::Parallel).unwrap();
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.outcome, b.outcome);
        }
    }

    #[test]
    fn zero_trials_is_an_error() {
        let t = parse_config(E1).unwrap();
        let plan = TrialPlan {
            trials: 0,
            seed: 0,
            stop: Stop::MaxEvents(1),
            sampling: None,
        };
        assert!(run_trials(&t, &plan, Execution::Sequential).is_err());
    }
}
