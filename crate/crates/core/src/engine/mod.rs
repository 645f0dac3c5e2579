//! Event-driven simulation of a pulse-coupled network.
//!
//! Between spiking instants every unit follows its own free flow. The engine
//! jumps from one instant to the next: it finds the earliest threshold
//! crossing, flows all units exactly to it, resolves the avalanche into a
//! coalition, resets the members and pulses everyone else.

mod cascade;
mod oracle;

use thiserror::Error;

use crate::models::{Model, ModelError, State};
use crate::network::NetworkConfig;

pub use cascade::{resolve_cascade, Cascade};

/// Crossings closer than `TIE_REL * max_i(theta_i / v_min_i)` to the earliest
/// one are treated as simultaneous.
pub const TIE_REL: f64 = 1e-9;

/// Relative slack on a time horizon, absorbing bisection round-off.
const HORIZON_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("numeric failure: unit #{} produced a non-finite state at t = {t}", unit + 1)]
    NumericFailure { unit: usize, t: f64 },
    #[error("unit #{} at t = {t}: {source}", unit + 1)]
    Model {
        unit: usize,
        t: f64,
        #[source]
        source: ModelError,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cascade did not close within {m} waves")]
    CascadeOverflow { m: usize },
    #[error(
        "event {n}: coalition of {size} units with r = {r} is not the grand coalition of {m}"
    )]
    AssertionB {
        n: usize,
        size: usize,
        r: usize,
        m: usize,
    },
    #[error("step-too-coarse: step {dt} is not below the shortest free period {min_period}")]
    StepTooCoarse { dt: f64, min_period: f64 },
}

impl EngineError {
    fn from_model(unit: usize, t: f64, source: ModelError) -> Self {
        match source {
            ModelError::NonFinite => EngineError::NumericFailure { unit, t },
            source => EngineError::Model { unit, t, source },
        }
    }
}

/// Global state between spiking instants.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub states: Vec<State>,
    /// Index of the next spiking instant.
    pub event_count: usize,
}

impl SimState {
    pub fn initial(cfg: &NetworkConfig) -> Self {
        SimState {
            t: 0.0,
            states: cfg.initial_states().to_vec(),
            event_count: 0,
        }
    }

    pub fn satisfactions(&self, cfg: &NetworkConfig) -> Vec<f64> {
        cfg.units()
            .iter()
            .zip(&self.states)
            .map(|(u, x)| u.satisfaction(x))
            .collect()
    }
}

/// One spiking instant and its coalition.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeEvent {
    pub n: usize,
    pub t: f64,
    /// Sorted unit indices.
    pub coalition: Vec<usize>,
    pub waves: Vec<Vec<usize>>,
    /// Satisfactions just before the instant.
    pub pre: Vec<f64>,
    /// Satisfactions at the instant, after resets and pulses.
    pub post: Vec<f64>,
}

impl SpikeEvent {
    pub fn size(&self) -> usize {
        self.coalition.len()
    }

    pub fn is_grand(&self) -> bool {
        self.coalition.len() == self.pre.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    MaxEvents(usize),
    /// Keep every instant `t <= T`.
    MaxTime(f64),
}

impl Stop {
    fn validate(&self) -> Result<(), EngineError> {
        match *self {
            Stop::MaxTime(t) if !(t.is_finite() && t >= 0.0) => Err(EngineError::InvalidArgument(
                format!("time horizon must be finite and non-negative, got {t}"),
            )),
            _ => Ok(()),
        }
    }

    fn admits(&self, t: f64) -> bool {
        match *self {
            Stop::MaxEvents(_) => true,
            Stop::MaxTime(limit) => t <= limit + HORIZON_REL * limit.max(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub t: f64,
    pub satisfactions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub m: usize,
    /// Strictly increasing in time.
    pub events: Vec<SpikeEvent>,
    /// Satisfaction rows at `k * step`, when sampling was requested.
    pub samples: Option<Vec<SampleRow>>,
    /// Time up to which the trace is complete.
    pub end_time: f64,
}

impl Trace {
    fn empty(m: usize, sampling: bool) -> Self {
        Trace {
            m,
            events: Vec::new(),
            samples: sampling.then(Vec::new),
            end_time: 0.0,
        }
    }
}

/// A run that stopped on an error; `trace` holds everything before it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error} (after {} events)", trace.events.len())]
pub struct RunFailure {
    pub trace: Box<Trace>,
    #[source]
    pub error: EngineError,
}

/// Simulator bound to one network.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    cfg: &'a NetworkConfig,
    thetas: Vec<f64>,
    tie_window: f64,
    assertion_r: Option<usize>,
}

impl<'a> Engine<'a> {
    pub fn new(cfg: &'a NetworkConfig) -> Self {
        let assertion_r = if cfg.m() >= 2 && cfg.is_cooperative() {
            cfg.r_value().ok()
        } else {
            None
        };
        Engine {
            cfg,
            thetas: cfg.thetas().collect(),
            tie_window: TIE_REL * cfg.waiting_bound(),
            assertion_r,
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        self.cfg
    }

    pub fn tie_window(&self) -> f64 {
        self.tie_window
    }

    fn units(&self) -> &[Model] {
        self.cfg.units()
    }

    /// Earliest crossing time and the units crossing within the tie window.
    pub fn next_spiking_instant(&self, s: &SimState) -> Result<(f64, Vec<usize>), EngineError> {
        let times = self
            .units()
            .iter()
            .zip(&s.states)
            .enumerate()
            .map(|(i, (u, x))| u.time_to_threshold(x).map_err(|e| EngineError::from_model(i, s.t, e)))
            .collect::<Result<Vec<f64>, _>>()?;
        let first = times.iter().copied().fold(f64::INFINITY, f64::min);
        let initiators = times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t <= first + self.tie_window)
            .map(|(i, _)| i)
            .collect();
        Ok((s.t + first, initiators))
    }

    fn flow_all(&self, states: &[State], dt: f64, t_end: f64) -> Result<Vec<State>, EngineError> {
        self.units()
            .iter()
            .zip(states)
            .enumerate()
            .map(|(i, (u, x))| u.flow(x, dt).map_err(|e| EngineError::from_model(i, t_end, e)))
            .collect()
    }

    /// Applies the instant at `t` to states already flowed up to `t^-`.
    fn fire(
        &self,
        n: usize,
        t: f64,
        flowed: Vec<State>,
        initiators: &[usize],
    ) -> Result<(SpikeEvent, Vec<State>), EngineError> {
        let units = self.units();
        let pre: Vec<f64> = units.iter().zip(&flowed).map(|(u, x)| u.satisfaction(x)).collect();
        let cascade = resolve_cascade(self.cfg.weights(), &self.thetas, &pre, initiators)?;
        let mut member = vec![false; pre.len()];
        cascade.coalition.iter().for_each(|&i| member[i] = true);
        let states = flowed
            .iter()
            .enumerate()
            .map(|(j, x)| {
                if member[j] {
                    units[j].reset(x)
                } else {
                    units[j].perturb(x, cascade.received[j])
                }
            })
            .collect();
        let event = SpikeEvent {
            n,
            t,
            coalition: cascade.coalition,
            waves: cascade.waves,
            pre,
            post: cascade.post,
        };
        self.check_assertion_b(&event)?;
        Ok((event, states))
    }

    /// Cooperative networks with a positive minimum weight can only produce
    /// coalitions smaller than `r` or the grand coalition.
    fn check_assertion_b(&self, event: &SpikeEvent) -> Result<(), EngineError> {
        let m = self.cfg.m();
        match self.assertion_r {
            Some(r) if event.size() >= r && event.size() < m => Err(EngineError::AssertionB {
                n: event.n,
                size: event.size(),
                r,
                m,
            }),
            _ => Ok(()),
        }
    }

    fn advance(&self, s: &SimState, t_next: f64, initiators: &[usize]) -> Result<(SpikeEvent, SimState), EngineError> {
        let flowed = self.flow_all(&s.states, t_next - s.t, t_next)?;
        let (event, states) = self.fire(s.event_count, t_next, flowed, initiators)?;
        Ok((
            event,
            SimState {
                t: t_next,
                states,
                event_count: s.event_count + 1,
            },
        ))
    }

    /// Moves to the next spiking instant.
    pub fn step(&self, s: &SimState) -> Result<(SpikeEvent, SimState), EngineError> {
        let (t_next, initiators) = self.next_spiking_instant(s)?;
        self.advance(s, t_next, &initiators)
    }

    fn push_samples(
        &self,
        s: &SimState,
        step: f64,
        next_k: &mut usize,
        before: impl Fn(f64) -> bool,
        rows: &mut Vec<SampleRow>,
    ) -> Result<(), EngineError> {
        loop {
            let t = *next_k as f64 * step;
            if !before(t) {
                return Ok(());
            }
            let states = self.flow_all(&s.states, (t - s.t).max(0.0), t)?;
            rows.push(SampleRow {
                t,
                satisfactions: SimState { t, states, event_count: 0 }.satisfactions(self.cfg),
            });
            *next_k += 1;
        }
    }

    /// Simulates until `stop`, optionally recording satisfactions every
    /// `sampling` time units.
    pub fn run(&self, stop: Stop, sampling: Option<f64>) -> Result<Trace, RunFailure> {
        let mut trace = Trace::empty(self.cfg.m(), sampling.is_some());
        let fail = |mut trace: Trace, t: f64, error| {
            trace.end_time = t;
            Err(RunFailure { trace: Box::new(trace), error })
        };
        if let Err(error) = stop.validate() {
            return fail(trace, 0.0, error);
        }
        if let Some(step) = sampling {
            if !(step.is_finite() && step > 0.0) {
                let error = EngineError::InvalidArgument(format!("sampling step must be positive, got {step}"));
                return fail(trace, 0.0, error);
            }
        }
        let mut s = SimState::initial(self.cfg);
        let mut next_k = 0usize;
        let mut rows = Vec::new();
        loop {
            if let Stop::MaxEvents(k) = stop {
                if trace.events.len() >= k {
                    break;
                }
            }
            let (t_next, initiators) = match self.next_spiking_instant(&s) {
                Ok(next) => next,
                Err(e) => return fail(trace, s.t, e),
            };
            if !stop.admits(t_next) {
                break;
            }
            if let Some(step) = sampling {
                if let Err(e) = self.push_samples(&s, step, &mut next_k, |t| t < t_next, &mut rows) {
                    return fail(trace, s.t, e);
                }
            }
            match self.advance(&s, t_next, &initiators) {
                Ok((event, next)) => {
                    trace.events.push(event);
                    s = next;
                }
                Err(e) => return fail(trace, s.t, e),
            }
        }
        trace.end_time = match stop {
            Stop::MaxTime(limit) => limit,
            Stop::MaxEvents(_) => s.t,
        };
        if let Some(step) = sampling {
            let end = trace.end_time;
            if let Err(e) = self.push_samples(&s, step, &mut next_k, |t| t <= end, &mut rows) {
                return fail(trace, s.t, e);
            }
            trace.samples = Some(rows);
        }
        Ok(trace)
    }
}

/// Event-driven run of `cfg`.
pub fn run(cfg: &NetworkConfig, stop: Stop, sampling: Option<f64>) -> Result<Trace, RunFailure> {
    Engine::new(cfg).run(stop, sampling)
}

/// Fixed-step run of `cfg` with step `dt`, for cross-checking [`run`].
pub fn run_oracle(cfg: &NetworkConfig, stop: Stop, dt: f64) -> Result<Trace, RunFailure> {
    Engine::new(cfg).run_oracle(stop, dt)
}
