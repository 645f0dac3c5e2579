//! Fixed-step reference simulator.
//!
//! Advances every unit by a constant step and checks thresholds after each
//! step. When a step overshoots, the crossing instant inside it is located by
//! linear interpolation of the satisfaction, all units are flowed to that
//! instant and the cascade is resolved with the same wave closure as the
//! event-driven engine. It shares no crossing-time search with [`Engine::run`].

use super::{Engine, EngineError, RunFailure, SimState, Stop, Trace};

impl Engine<'_> {
    pub fn run_oracle(&self, stop: Stop, dt: f64) -> Result<Trace, RunFailure> {
        let m = self.cfg.m();
        let mut trace = Trace::empty(m, false);
        let fail = |mut trace: Trace, t: f64, error| {
            trace.end_time = t;
            Err(RunFailure { trace: Box::new(trace), error })
        };
        if let Err(error) = stop.validate() {
            return fail(trace, 0.0, error);
        }
        if !(dt.is_finite() && dt > 0.0) {
            let error = EngineError::InvalidArgument(format!("oracle step must be positive, got {dt}"));
            return fail(trace, 0.0, error);
        }
        let min_period = self
            .units()
            .iter()
            .map(|u| u.theta() / u.velocity_bounds().max)
            .fold(f64::INFINITY, f64::min);
        if dt >= min_period {
            return fail(trace, 0.0, EngineError::StepTooCoarse { dt, min_period });
        }
        let tie = self.tie_window.max(dt * dt);
        let units = self.units();

        let mut s = SimState::initial(self.cfg);
        loop {
            match stop {
                Stop::MaxEvents(k) if trace.events.len() >= k => break,
                Stop::MaxTime(limit) if s.t >= limit => break,
                _ => {}
            }
            let trial = match self.flow_all(&s.states, dt, s.t + dt) {
                Ok(states) => states,
                Err(e) => return fail(trace, s.t, e),
            };
            let crossings: Vec<(usize, f64)> = (0..m)
                .filter_map(|i| {
                    let before = units[i].satisfaction(&s.states[i]);
                    let after = units[i].satisfaction(&trial[i]);
                    let theta = units[i].theta();
                    (after >= theta).then(|| (i, dt * (theta - before) / (after - before)))
                })
                .collect();
            if crossings.is_empty() {
                s.t += dt;
                s.states = trial;
                continue;
            }
            let first = crossings.iter().map(|&(_, tau)| tau).fold(f64::INFINITY, f64::min);
            let initiators: Vec<usize> = crossings
                .iter()
                .filter(|&&(_, tau)| tau <= first + tie)
                .map(|&(i, _)| i)
                .collect();
            let t_event = s.t + first;
            if !stop.admits(t_event) {
                break;
            }
            let fired = self
                .flow_all(&s.states, first, t_event)
                .and_then(|flowed| self.fire(s.event_count, t_event, flowed, &initiators));
            match fired {
                Ok((event, states)) => {
                    trace.events.push(event);
                    s = SimState {
                        t: t_event,
                        states,
                        event_count: s.event_count + 1,
                    };
                }
                Err(e) => return fail(trace, s.t, e),
            }
        }
        trace.end_time = match stop {
            Stop::MaxTime(limit) => limit,
            Stop::MaxEvents(_) => s.t,
        };
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::super::run_oracle;
    use super::*;
    use crate::models::Model;
    use crate::network::{NetworkConfig, WeightMatrix};

    fn single(v: f64) -> NetworkConfig {
        NetworkConfig::new(
            vec![Model::linear(1.0, v).unwrap()],
            WeightMatrix::uniform(1, 0.0).unwrap(),
            vec![vec![0.0]],
        )
        .unwrap()
    }

    #[test]
    fn single_unit_spike_time_within_one_step() {
        let trace = run_oracle(&single(1.0), Stop::MaxEvents(1), 1e-4).unwrap();
        let t = trace.events[0].t;
        assert!((t - 1.0).abs() <= 1e-4, "{t}");
    }

    #[test]
    fn coarse_step_is_rejected() {
        let err = run_oracle(&single(1.0), Stop::MaxEvents(1), 1.5).unwrap_err();
        assert!(matches!(err.error, EngineError::StepTooCoarse { .. }));
        assert!(err.error.to_string().contains("step-too-coarse"));
    }

    #[test]
    fn cascade_matches_event_driven_engine() {
        let cfg = NetworkConfig::new(
            vec![Model::linear(1.0, 1.0).unwrap(); 3],
            WeightMatrix::uniform(3, 0.4).unwrap(),
            vec![vec![0.1], vec![0.4], vec![0.7]],
        )
        .unwrap();
        let exact = super::super::run(&cfg, Stop::MaxEvents(5), None).unwrap();
        let fixed = run_oracle(&cfg, Stop::MaxEvents(5), 1e-4).unwrap();
        for (a, b) in exact.events.iter().zip(&fixed.events) {
            assert_eq!(a.coalition, b.coalition);
            assert!((a.t - b.t).abs() < 1e-3);
        }
    }
}
