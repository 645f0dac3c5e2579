//! Event-driven simulation of networks of pulse-coupled dynamical units and
//! empirical checks of their synchronization properties.
//!
//! A unit carries a satisfaction coordinate `S` that grows under its own flow
//! until it reaches the goal `theta`; it then resets to zero and pulses the
//! other units through the weight matrix, possibly setting off an avalanche.
//! [`engine::run`] produces a [`engine::Trace`] of spiking instants and
//! [`analysis`] turns a trace into verdicts.

pub mod analysis;
pub mod batch;
pub mod config;
pub mod engine;
pub mod models;
pub mod network;
pub mod output;
pub mod par;
pub mod sweep;

pub use analysis::{Verdict, VerificationReport};
pub use batch::{run_trials, trial_rng, TrialPlan, TrialRun};
pub use config::{load_config, parse_config, ConfigError, NetworkTemplate};
pub use engine::{run, run_oracle, Engine, EngineError, RunFailure, SpikeEvent, Stop, Trace};
pub use models::{Model, ModelError, ModelKind, State};
pub use network::{NetworkConfig, NetworkError, Predicates, WeightMatrix};
pub use par::Execution;
