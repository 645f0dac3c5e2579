//! JSON network description and per-trial instantiation.
//!
//! ```json
//! {
//!   "m": 19,
//!   "theta": 1.0,
//!   "units": {"kind": "linear", "v": 1.0},
//!   "weights": 0.3,
//!   "initial": "random"
//! }
//! ```
//!
//! `units` is one unit spec broadcast to `m` units, or a list whose entries may
//! carry a `count`. `weights` is a scalar put on every off-diagonal entry, a
//! full matrix, or `{"sparse": [[i, j, w], ...]}` with 1-based indices.
//! `initial` is `"random"`, `"zero"` or one entry per unit, either a
//! satisfaction value or a full state vector.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{Dynamics, GeneralOde, Model, ModelError, State};
use crate::network::{NetworkConfig, NetworkError, WeightMatrix};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unit #{}: {source}", unit + 1)]
    Model {
        unit: usize,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Goal shared by every unit that does not set its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub units: UnitsSection,
    pub weights: WeightsSpec,
    #[serde(default = "InitialSpec::random")]
    pub initial: InitialSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UnitsSection {
    Many(Vec<UnitSpec>),
    One(UnitSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSpec {
    #[serde(flatten)]
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Linear {
        v: f64,
    },
    Saturating {
        gamma: f64,
        s_sat: f64,
    },
    Planar {
        v0: f64,
        eps: f64,
        omega: f64,
    },
    /// Right-hand side as one expression per coordinate in `x0, x1, ...`.
    Ode {
        rhs: Vec<String>,
        #[serde(default)]
        sat_index: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightsSpec {
    Uniform(f64),
    Matrix(Vec<Vec<f64>>),
    Sparse { sparse: Vec<(usize, usize, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Keyword(InitialKeyword),
    States(Vec<StateSpec>),
}

impl InitialSpec {
    fn random() -> Self {
        InitialSpec::Keyword(InitialKeyword::Random)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKeyword {
    Random,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Satisfaction(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightLayout {
    Uniform(f64),
    Explicit(WeightMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    /// Satisfaction uniform in `[0, theta)`, other coordinates as the model
    /// draws them.
    Random,
    Zero,
    States(Vec<State>),
}

/// A validated network whose initial states may still be random.
#[derive(Debug, Clone)]
pub struct NetworkTemplate {
    units: Vec<Model>,
    weights: WeightLayout,
    initial: Initial,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<NetworkTemplate, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<NetworkTemplate, ConfigError> {
    let file: ConfigFile = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    NetworkTemplate::from_file(&file)
}

fn build_model(spec: &ModelSpec, theta: f64) -> Result<Model, ModelError> {
    match spec {
        ModelSpec::Linear { v } => Model::linear(theta, *v),
        ModelSpec::Saturating { gamma, s_sat } => Model::saturating(theta, *gamma, *s_sat),
        ModelSpec::Planar { v0, eps, omega } => Model::planar(theta, *v0, *eps, *omega),
        ModelSpec::Ode {
            rhs,
            sat_index,
            base,
        } => {
            let mut ode = GeneralOde::from_expressions(rhs, *sat_index)?;
            if let Some(base) = base {
                ode = ode.with_base(base.clone())?;
            }
            Model::general(theta, ode)
        }
    }
}

fn model_spec(model: &Model) -> Result<ModelSpec, ConfigError> {
    Ok(match model.dynamics() {
        Dynamics::Linear { v } => ModelSpec::Linear { v: *v },
        Dynamics::Saturating { gamma, s_sat } => ModelSpec::Saturating {
            gamma: *gamma,
            s_sat: *s_sat,
        },
        Dynamics::Planar { v0, eps, omega } => ModelSpec::Planar {
            v0: *v0,
            eps: *eps,
            omega: *omega,
        },
        Dynamics::General(ode) => ModelSpec::Ode {
            rhs: ode
                .expressions()
                .ok_or_else(|| {
                    ConfigError::Invalid("a vector field given as a closure cannot be written out".into())
                })?
                .to_vec(),
            sat_index: ode.sat_index(),
            base: Some(ode.base().to_vec()),
        },
    })
}

impl NetworkTemplate {
    pub fn new(units: Vec<Model>, weights: WeightLayout, initial: Initial) -> Result<Self, ConfigError> {
        let t = NetworkTemplate {
            units,
            weights,
            initial,
        };
        t.check()?;
        Ok(t)
    }

    pub fn from_file(file: &ConfigFile) -> Result<Self, ConfigError> {
        let entries: Vec<&UnitSpec> = match &file.units {
            UnitsSection::One(spec) => {
                let m = file.m.ok_or_else(|| {
                    ConfigError::Invalid("a single unit spec needs a top-level `m`".into())
                })?;
                if spec.count.is_some_and(|c| c != m) {
                    return Err(ConfigError::Invalid("unit `count` disagrees with `m`".into()));
                }
                vec![spec; m]
            }
            UnitsSection::Many(list) => list
                .iter()
                .flat_map(|spec| std::iter::repeat_n(spec, spec.count.unwrap_or(1)))
                .collect(),
        };
        if let Some(m) = file.m {
            if m != entries.len() {
                return Err(ConfigError::Invalid(format!(
                    "`m` is {m} but the unit list describes {} units",
                    entries.len()
                )));
            }
        }
        let units = entries
            .iter()
            .enumerate()
            .map(|(unit, spec)| {
                let theta = spec.theta.or(file.theta).ok_or_else(|| {
                    ConfigError::Invalid(format!("unit #{} has no theta", unit + 1))
                })?;
                build_model(&spec.model, theta).map_err(|source| ConfigError::Model { unit, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let m = units.len();

        let weights = match &file.weights {
            WeightsSpec::Uniform(delta) => WeightLayout::Uniform(*delta),
            WeightsSpec::Matrix(rows) => WeightLayout::Explicit(WeightMatrix::from_rows(rows.clone())?),
            WeightsSpec::Sparse { sparse } => {
                let entries = sparse
                    .iter()
                    .map(|&(i, j, w)| {
                        if i == 0 || j == 0 {
                            Err(ConfigError::Invalid("sparse weight indices start at 1".into()))
                        } else {
                            Ok((i - 1, j - 1, w))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                WeightLayout::Explicit(WeightMatrix::from_sparse(m, &entries)?)
            }
        };

        let initial = match &file.initial {
            InitialSpec::Keyword(InitialKeyword::Random) => Initial::Random,
            InitialSpec::Keyword(InitialKeyword::Zero) => Initial::Zero,
            InitialSpec::States(list) => {
                if list.len() != m {
                    return Err(NetworkError::InitialCountMismatch {
                        units: m,
                        states: list.len(),
                    }
                    .into());
                }
                Initial::States(
                    list.iter()
                        .zip(&units)
                        .map(|(s, model)| match s {
                            StateSpec::Satisfaction(s) => model.state_with_satisfaction(*s),
                            StateSpec::Vector(x) => x.clone(),
                        })
                        .collect(),
                )
            }
        };
        NetworkTemplate::new(units, weights, initial)
    }

    /// Runs every check that does not depend on the random draw.
    fn check(&self) -> Result<(), ConfigError> {
        let weights = self.weight_matrix()?;
        let states = match &self.initial {
            Initial::States(states) => states.clone(),
            _ => self.units.iter().map(|u| u.state_with_satisfaction(0.0)).collect(),
        };
        NetworkConfig::new(self.units.clone(), weights, states)?;
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.units.len()
    }

    pub fn units(&self) -> &[Model] {
        &self.units
    }

    pub fn weights(&self) -> &WeightLayout {
        &self.weights
    }

    pub fn initial(&self) -> &Initial {
        &self.initial
    }

    pub fn weight_matrix(&self) -> Result<WeightMatrix, NetworkError> {
        match &self.weights {
            WeightLayout::Uniform(delta) => WeightMatrix::uniform(self.m(), *delta),
            WeightLayout::Explicit(w) => Ok(w.clone()),
        }
    }

    /// Draws the initial states (when random) and builds the network.
    pub fn instantiate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<NetworkConfig, ConfigError> {
        let states = match &self.initial {
            Initial::Random => self.units.iter().map(|u| u.random_state(rng)).collect(),
            Initial::Zero => self.units.iter().map(|u| u.state_with_satisfaction(0.0)).collect(),
            Initial::States(states) => states.clone(),
        };
        Ok(NetworkConfig::new(self.units.clone(), self.weight_matrix()?, states)?)
    }

    /// Normalized file form: explicit per-unit goals and full state vectors.
    pub fn to_file(&self) -> Result<ConfigFile, ConfigError> {
        let units = self
            .units
            .iter()
            .map(|u| {
                Ok(UnitSpec {
                    model: model_spec(u)?,
                    theta: Some(u.theta()),
                    count: None,
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let weights = match &self.weights {
            WeightLayout::Uniform(delta) => WeightsSpec::Uniform(*delta),
            WeightLayout::Explicit(w) => WeightsSpec::Matrix(w.rows()),
        };
        let initial = match &self.initial {
            Initial::Random => InitialSpec::Keyword(InitialKeyword::Random),
            Initial::Zero => InitialSpec::Keyword(InitialKeyword::Zero),
            Initial::States(states) => {
                InitialSpec::States(states.iter().cloned().map(StateSpec::Vector).collect())
            }
        };
        Ok(ConfigFile {
            m: Some(self.m()),
            theta: None,
            units: UnitsSection::Many(units),
            weights,
            initial,
        })
    }

    pub fn to_json(&self) -> Result<String, ConfigError> {
        serde_json::to_string_pretty(&self.to_file()?)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Resizes the network by cycling through the unit list. Needs uniform
    /// weights and non-explicit initial states.
    pub fn with_unit_count(&self, m: usize) -> Result<Self, ConfigError> {
        if m == 0 {
            return Err(NetworkError::Empty.into());
        }
        if m == self.m() {
            return Ok(self.clone());
        }
        if matches!(self.weights, WeightLayout::Explicit(_)) {
            return Err(ConfigError::Invalid(
                "changing the unit count needs uniform weights".into(),
            ));
        }
        if matches!(self.initial, Initial::States(_)) {
            return Err(ConfigError::Invalid(
                "changing the unit count needs `random` or `zero` initial states".into(),
            ));
        }
        let units = self.units.iter().cycle().take(m).cloned().collect();
        NetworkTemplate::new(units, self.weights.clone(), self.initial.clone())
    }

    pub fn with_uniform_weight(&self, delta: f64) -> Result<Self, ConfigError> {
        NetworkTemplate::new(self.units.clone(), WeightLayout::Uniform(delta), self.initial.clone())
    }

    /// Sets every goal to `theta`; explicit initial states are kept as given.
    pub fn with_theta(&self, theta: f64) -> Result<Self, ConfigError> {
        let units = self
            .units
            .iter()
            .enumerate()
            .map(|(unit, u)| u.with_theta(theta).map_err(|source| ConfigError::Model { unit, source }))
            .collect::<Result<Vec<_>, _>>()?;
        NetworkTemplate::new(units, self.weights.clone(), self.initial.clone())
    }

    /// Slows unit `i` down by the factor `1 - spread * i / (m - 1)`, so speeds
    /// fan out linearly from the base speed to `1 - spread` times it.
    pub fn with_velocity_spread(&self, spread: f64) -> Result<Self, ConfigError> {
        if !(0.0..1.0).contains(&spread) {
            return Err(ConfigError::Invalid(format!(
                "velocity spread must lie in [0, 1), got {spread}"
            )));
        }
        let m = self.m();
        let units = self
            .units
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let factor = if m > 1 {
                    1.0 - spread * i as f64 / (m - 1) as f64
                } else {
                    1.0
                };
                u.time_scaled(factor)
                    .map_err(|source| ConfigError::Model { unit: i, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        NetworkTemplate::new(units, self.weights.clone(), self.initial.clone())
    }
}
