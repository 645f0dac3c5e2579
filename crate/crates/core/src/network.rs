//! Interaction graph, unit roster and the static predicates used by the
//! synchronization results (cooperativity, completeness, weak interactions,
//! largeness, similarity).

use thiserror::Error;

use crate::models::{Model, ModelError, State};

/// Default ratio below which interactions count as weak.
pub const WEAK_RATIO_DEFAULT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("unit index {index} out of range for {m} units (zero-based)")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("weight matrix must be square: row {row} has {len} entries, expected {m}")]
    NotSquare { row: usize, len: usize, m: usize },
    #[error("nonzero diagonal: weight ({u},{u}) is {value}", u = unit + 1)]
    NonzeroDiagonal { unit: usize, value: f64 },
    #[error("weight ({},{}) is not finite", from + 1, to + 1)]
    NonFiniteWeight { from: usize, to: usize },
    #[error("network must contain at least one unit")]
    Empty,
    #[error("{units} units but a {weights}x{weights} weight matrix")]
    SizeMismatch { units: usize, weights: usize },
    #[error("{units} units but {states} initial states")]
    InitialCountMismatch { units: usize, states: usize },
    #[error("initial state of unit #{}: {source}", unit + 1)]
    InitialState { unit: usize, source: ModelError },
    #[error("initial state not in Q: unit #{} has S = {satisfaction}, outside [0, {theta})", unit + 1)]
    InitialNotInQ {
        unit: usize,
        satisfaction: f64,
        theta: f64,
    },
    #[error("unit #{} is not cooperative", unit + 1)]
    NotCooperative { unit: usize },
    #[error("the minimum off-diagonal weight is not positive")]
    NoPositiveMinimum,
}

/// `m x m` interaction weights; entry `(i, j)` is the pulse unit `j` receives
/// when unit `i` spikes.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    m: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, NetworkError> {
        let m = rows.len();
        let mut data = Vec::with_capacity(m * m);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != m {
                return Err(NetworkError::NotSquare { row, len: r.len(), m });
            }
            data.extend(r);
        }
        Self::validated(m, data)
    }

    /// `delta` on every off-diagonal entry.
    pub fn uniform(m: usize, delta: f64) -> Result<Self, NetworkError> {
        let data = (0..m * m)
            .map(|k| if k / m == k % m { 0.0 } else { delta })
            .collect();
        Self::validated(m, data)
    }

    /// Zero everywhere except the listed `(from, to, weight)` triples.
    pub fn from_sparse(m: usize, entries: &[(usize, usize, f64)]) -> Result<Self, NetworkError> {
        let mut data = vec![0.0; m * m];
        for &(i, j, w) in entries {
            for index in [i, j] {
                if index >= m {
                    return Err(NetworkError::IndexOutOfRange { index, m });
                }
            }
            data[i * m + j] = w;
        }
        Self::validated(m, data)
    }

    fn validated(m: usize, data: Vec<f64>) -> Result<Self, NetworkError> {
        for i in 0..m {
            for j in 0..m {
                let w = data[i * m + j];
                if !w.is_finite() {
                    return Err(NetworkError::NonFiniteWeight { from: i, to: j });
                }
                if i == j && w != 0.0 {
                    return Err(NetworkError::NonzeroDiagonal { unit: i, value: w });
                }
            }
        }
        Ok(WeightMatrix { m, data })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.m + to]
    }

    /// Outgoing weights of `from`.
    pub fn row(&self, from: usize) -> &[f64] {
        &self.data[from * self.m..(from + 1) * self.m]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.m.max(1)).map(<[f64]>::to_vec).collect()
    }

    fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.m;
        self.data
            .iter()
            .enumerate()
            .filter(move |(k, _)| k / m != k % m)
            .map(|(_, &w)| w)
    }

    /// `max_{i != j} |w_ij|`, zero when there are no pairs.
    pub fn max_abs_off_diagonal(&self) -> f64 {
        self.off_diagonal().map(f64::abs).fold(0.0, f64::max)
    }

    /// `min_{i != j} w_ij`, `None` when there are no pairs.
    pub fn min_off_diagonal(&self) -> Option<f64> {
        self.off_diagonal().reduce(f64::min)
    }

    /// Relabels units: entry `(perm[i], perm[j])` of the result is `(i, j)`.
    pub fn permuted(&self, perm: &[usize]) -> WeightMatrix {
        let m = self.m;
        let mut data = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                data[perm[i] * m + perm[j]] = self.get(i, j);
            }
        }
        WeightMatrix { m, data }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    Cooperative,
    Antagonist,
    Mixed,
}

/// Sign class of a unit's outgoing weights. An all-zero row satisfies both
/// the cooperative and the antagonist inequalities and is reported as
/// cooperative; see [`is_zero_row`].
pub fn classify_cell(w: &WeightMatrix, i: usize) -> Result<CellClass, NetworkError> {
    if i >= w.m() {
        return Err(NetworkError::IndexOutOfRange { index: i, m: w.m() });
    }
    let row = w.row(i);
    let others = || row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &v)| v);
    Ok(if others().all(|v| v >= 0.0) {
        CellClass::Cooperative
    } else if others().all(|v| v <= 0.0) {
        CellClass::Antagonist
    } else {
        CellClass::Mixed
    })
}

pub fn is_zero_row(w: &WeightMatrix, i: usize) -> Result<bool, NetworkError> {
    if i >= w.m() {
        return Err(NetworkError::IndexOutOfRange { index: i, m: w.m() });
    }
    Ok(w.row(i).iter().all(|&v| v == 0.0))
}

/// Every off-diagonal weight is nonzero. Vacuously true for a single unit.
pub fn is_complete(w: &WeightMatrix) -> bool {
    w.off_diagonal().all(|v| v != 0.0)
}

/// Unit roster, interaction weights and initial states of one network.
#[derive(Debug, Clone)]
pub struct NetworkConfig {
    units: Vec<Model>,
    weights: WeightMatrix,
    initial_states: Vec<State>,
}

impl NetworkConfig {
    /// Validates sizes, state dimensions and `S_i(x_i(0)) in [0, theta_i)`.
    pub fn new(
        units: Vec<Model>,
        weights: WeightMatrix,
        initial_states: Vec<State>,
    ) -> Result<Self, NetworkError> {
        if units.is_empty() {
            return Err(NetworkError::Empty);
        }
        if weights.m() != units.len() {
            return Err(NetworkError::SizeMismatch {
                units: units.len(),
                weights: weights.m(),
            });
        }
        if initial_states.len() != units.len() {
            return Err(NetworkError::InitialCountMismatch {
                units: units.len(),
                states: initial_states.len(),
            });
        }
        for (unit, (model, x)) in units.iter().zip(&initial_states).enumerate() {
            model
                .check_state(x)
                .map_err(|source| NetworkError::InitialState { unit, source })?;
            let s = model.satisfaction(x);
            if !(0.0..model.theta()).contains(&s) {
                return Err(NetworkError::InitialNotInQ {
                    unit,
                    satisfaction: s,
                    theta: model.theta(),
                });
            }
        }
        Ok(NetworkConfig {
            units,
            weights,
            initial_states,
        })
    }

    pub fn m(&self) -> usize {
        self.units.len()
    }

    pub fn units(&self) -> &[Model] {
        &self.units
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn initial_states(&self) -> &[State] {
        &self.initial_states
    }

    pub fn thetas(&self) -> impl Iterator<Item = f64> + '_ {
        self.units.iter().map(Model::theta)
    }

    pub fn max_theta(&self) -> f64 {
        self.thetas().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_theta(&self) -> f64 {
        self.thetas().fold(f64::INFINITY, f64::min)
    }

    pub fn with_initial_states(&self, states: Vec<State>) -> Result<Self, NetworkError> {
        NetworkConfig::new(self.units.clone(), self.weights.clone(), states)
    }

    pub fn classify(&self, i: usize) -> Result<CellClass, NetworkError> {
        classify_cell(&self.weights, i)
    }

    pub fn is_cooperative(&self) -> bool {
        (0..self.m()).all(|i| matches!(self.classify(i), Ok(CellClass::Cooperative)))
    }

    fn require_cooperative(&self) -> Result<(), NetworkError> {
        match (0..self.m()).find(|&i| !matches!(self.classify(i), Ok(CellClass::Cooperative))) {
            Some(unit) => Err(NetworkError::NotCooperative { unit }),
            None => Ok(()),
        }
    }

    /// `max_{i != j} |w_ij| / min_i theta_i < ratio_threshold`.
    pub fn is_weak(&self, ratio_threshold: f64) -> bool {
        self.weights.max_abs_off_diagonal() / self.min_theta() < ratio_threshold
    }

    /// `sqrt(m) >= 1 + max theta / min_{i != j} w_ij`. False when the minimum
    /// weight is zero or there are no pairs.
    pub fn is_large(&self) -> Result<bool, NetworkError> {
        self.require_cooperative()?;
        Ok(match self.weights.min_off_diagonal() {
            Some(min) if min > 0.0 => (self.m() as f64).sqrt() >= 1.0 + self.max_theta() / min,
            _ => false,
        })
    }

    /// `r = 1 + floor(max theta / min_{i != j} w_ij)`.
    pub fn r_value(&self) -> Result<usize, NetworkError> {
        self.require_cooperative()?;
        match self.weights.min_off_diagonal() {
            Some(min) if min > 0.0 => Ok(1 + (self.max_theta() / min).floor() as usize),
            _ => Err(NetworkError::NoPositiveMinimum),
        }
    }

    /// `min_i(theta_i / v_max_i) / max_i(theta_i / v_min_i)`.
    pub fn similarity_lhs(&self) -> f64 {
        let fastest = self
            .units
            .iter()
            .map(|u| u.theta() / u.velocity_bounds().max)
            .fold(f64::INFINITY, f64::min);
        fastest / self.waiting_bound()
    }

    /// Similarity inequality
    /// `similarity_lhs >= 1 - min_{i != j} w_ij / max theta`.
    pub fn is_similar(&self) -> bool {
        let min = self.weights.min_off_diagonal().unwrap_or(0.0);
        self.similarity_lhs() >= 1.0 - min / self.max_theta()
    }

    /// Whether any predicate relying on velocity bounds uses sampled
    /// estimates.
    pub fn bounds_are_estimates(&self) -> bool {
        self.units.iter().any(|u| u.velocity_bounds().is_estimate())
    }

    /// `max_i theta_i / v_min_i`, the waiting-time bound.
    pub fn waiting_bound(&self) -> f64 {
        self.units
            .iter()
            .map(|u| u.theta() / u.velocity_bounds().min)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn predicates(&self) -> Predicates {
        let cooperative = self.is_cooperative();
        Predicates {
            m: self.m(),
            is_cooperative: cooperative,
            is_complete: is_complete(&self.weights),
            is_large: cooperative && self.is_large().unwrap_or(false),
            is_weak: self.is_weak(WEAK_RATIO_DEFAULT),
            is_similar: self.is_similar(),
            similarity_lhs: self.similarity_lhs(),
            r_value: self.r_value().ok(),
            waiting_bound: self.waiting_bound(),
            bounds_estimated: self.bounds_are_estimates(),
        }
    }
}

/// Snapshot of all static predicates of a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Predicates {
    pub m: usize,
    pub is_cooperative: bool,
    pub is_complete: bool,
    pub is_large: bool,
    pub is_weak: bool,
    pub is_similar: bool,
    pub similarity_lhs: f64,
    pub r_value: Option<usize>,
    pub waiting_bound: f64,
    pub bounds_estimated: bool,
}
