//! Free dynamics of a single unit.
//!
//! A [`Model`] bundles a goal `theta` with a concrete vector field on a
//! coordinate chart. The satisfaction observable `S` is always one designated
//! coordinate of the state, which makes the reset map (`S -> 0`) and the pulse
//! map (`S -> S + delta`) exact.
//!
//! Three families have closed-form flows (`Linear`, `Saturating`, `Planar`);
//! [`GeneralOde`] integrates a user-supplied field with a fixed-step
//! fourth-order Runge-Kutta scheme.

mod general;

use std::f64::consts::TAU;
use std::fmt;

use rand::Rng;
use thiserror::Error;

pub use general::{GeneralOde, VectorField, MIN_BOUND_SAMPLES};

/// State vector of one unit.
pub type State = Vec<f64>;

/// Relative width of the bisection window for crossing times.
const CROSSING_TIME_REL_TOL: f64 = 1e-12;

/// Satisfaction tolerance at a detected crossing, relative to `theta`.
pub const CROSSING_SAT_REL_TOL: f64 = 1e-9;

/// How many times the upper end of the crossing bracket may be doubled.
const MAX_BRACKET_INFLATIONS: u32 = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("state has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite state produced by the free dynamics")]
    NonFinite,
    #[error("satisfaction {satisfaction} is not below the goal {theta}")]
    AtOrAboveGoal { satisfaction: f64, theta: f64 },
    #[error("model contract violation: {0}")]
    ContractViolation(String),
    #[error("cannot parse expression `{expr}`: {message}")]
    Expression { expr: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Linear,
    Saturating,
    Planar,
    GeneralOde,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::Saturating => "saturating",
            ModelKind::Planar => "planar",
            ModelKind::GeneralOde => "ode",
        })
    }
}

/// Bounds of the satisfaction velocity `dS/dt` over `S^-1([0, theta])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityBounds {
    pub min: f64,
    pub max: f64,
    /// Number of sampled states when the bounds are an estimate rather than
    /// exact closed-form extrema.
    pub sampled: Option<usize>,
}

impl VelocityBounds {
    fn exact(min: f64, max: f64) -> Self {
        VelocityBounds { min, max, sampled: None }
    }

    pub fn is_estimate(&self) -> bool {
        self.sampled.is_some()
    }
}

/// Kind-specific parameters.
#[derive(Debug, Clone)]
pub enum Dynamics {
    /// `dS/dt = v`.
    Linear { v: f64 },
    /// `dS/dt = gamma (s_sat - S)`, with `s_sat > theta`.
    Saturating { gamma: f64, s_sat: f64 },
    /// State `(a, b)`, `S = a`, `da/dt = v0 + eps sin b`, `db/dt = omega`.
    Planar { v0: f64, eps: f64, omega: f64 },
    General(GeneralOde),
}

/// One unit's free dynamics together with its goal.
#[derive(Debug, Clone)]
pub struct Model {
    theta: f64,
    dynamics: Dynamics,
    bounds: VelocityBounds,
}

fn check_positive(name: &str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// `sin(u) / u`, continuous at zero.
fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-6 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

impl Model {
    pub fn linear(theta: f64, v: f64) -> Result<Self, ModelError> {
        check_positive("theta", theta)?;
        check_positive("v", v)?;
        Ok(Model {
            theta,
            dynamics: Dynamics::Linear { v },
            bounds: VelocityBounds::exact(v, v),
        })
    }

    pub fn saturating(theta: f64, gamma: f64, s_sat: f64) -> Result<Self, ModelError> {
        check_positive("theta", theta)?;
        check_positive("gamma", gamma)?;
        if !(s_sat.is_finite() && s_sat > theta) {
            return Err(ModelError::InvalidParameter(format!(
                "s_sat must exceed theta ({theta}), got {s_sat}"
            )));
        }
        Ok(Model {
            theta,
            dynamics: Dynamics::Saturating { gamma, s_sat },
            bounds: VelocityBounds::exact(gamma * (s_sat - theta), gamma * s_sat),
        })
    }

    pub fn planar(theta: f64, v0: f64, eps: f64, omega: f64) -> Result<Self, ModelError> {
        check_positive("theta", theta)?;
        if !(eps.is_finite() && eps >= 0.0 && v0.is_finite() && v0 > eps) {
            return Err(ModelError::InvalidParameter(format!(
                "planar model needs v0 > eps >= 0, got v0 = {v0}, eps = {eps}"
            )));
        }
        if !omega.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "omega must be finite, got {omega}"
            )));
        }
        Ok(Model {
            theta,
            dynamics: Dynamics::Planar { v0, eps, omega },
            bounds: VelocityBounds::exact(v0 - eps, v0 + eps),
        })
    }

    /// Builds a model from a user-supplied vector field. The velocity bounds
    /// are estimated by sampling trajectories that start on the reset set of
    /// the field's base state.
    pub fn general(theta: f64, ode: GeneralOde) -> Result<Self, ModelError> {
        check_positive("theta", theta)?;
        let (ode, bounds) = ode.calibrate(theta)?;
        Ok(Model {
            theta,
            dynamics: Dynamics::General(ode),
            bounds,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn kind(&self) -> ModelKind {
        match self.dynamics {
            Dynamics::Linear { .. } => ModelKind::Linear,
            Dynamics::Saturating { .. } => ModelKind::Saturating,
            Dynamics::Planar { .. } => ModelKind::Planar,
            Dynamics::General(_) => ModelKind::GeneralOde,
        }
    }

    pub fn state_dim(&self) -> usize {
        match &self.dynamics {
            Dynamics::Linear { .. } | Dynamics::Saturating { .. } => 1,
            Dynamics::Planar { .. } => 2,
            Dynamics::General(ode) => ode.dim(),
        }
    }

    fn sat_index(&self) -> usize {
        match &self.dynamics {
            Dynamics::General(ode) => ode.sat_index(),
            _ => 0,
        }
    }

    pub fn check_state(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.state_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.state_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(())
    }

    pub fn satisfaction(&self, x: &[f64]) -> f64 {
        x[self.sat_index()]
    }

    /// Satisfaction velocity `grad S . f` at `x`.
    pub fn velocity(&self, x: &[f64]) -> f64 {
        match &self.dynamics {
            Dynamics::Linear { v } => *v,
            Dynamics::Saturating { gamma, s_sat } => gamma * (s_sat - x[0]),
            Dynamics::Planar { v0, eps, .. } => v0 + eps * x[1].sin(),
            Dynamics::General(ode) => ode.velocity(x),
        }
    }

    pub fn velocity_bounds(&self) -> VelocityBounds {
        self.bounds
    }

    /// Free evolution of `x` over `dt`. No threshold or reset is applied.
    pub fn flow(&self, x: &[f64], dt: f64) -> Result<State, ModelError> {
        debug_assert!(dt >= 0.0, "negative flow time {dt}");
        if dt == 0.0 {
            return Ok(x.to_vec());
        }
        let out = match &self.dynamics {
            Dynamics::Linear { v } => vec![x[0] + v * dt],
            Dynamics::Saturating { gamma, s_sat } => {
                vec![s_sat - (s_sat - x[0]) * (-gamma * dt).exp()]
            }
            Dynamics::Planar { v0, eps, omega } => {
                let (a, b) = (x[0], x[1]);
                let half = 0.5 * omega * dt;
                // integral of eps sin(b + omega s) over [0, dt]
                let drift = eps * dt * (b + half).sin() * sinc(half);
                vec![a + v0 * dt + drift, (b + omega * dt).rem_euclid(TAU)]
            }
            Dynamics::General(ode) => ode.integrate(x, dt),
        };
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(ModelError::NonFinite)
        }
    }

    /// Time until the free flow from `x` first reaches `S = theta`.
    ///
    /// Bisection on the monotone map `dt -> S(flow(x, dt))`, started from the
    /// bracket `[(theta - S)/v_max, (theta - S)/v_min]`.
    pub fn time_to_threshold(&self, x: &[f64]) -> Result<f64, ModelError> {
        let s = self.satisfaction(x);
        if s.is_nan() || s >= self.theta {
            return Err(ModelError::AtOrAboveGoal {
                satisfaction: s,
                theta: self.theta,
            });
        }
        let gap = self.theta - s;
        let lo = gap / self.bounds.max;
        let hi = gap / self.bounds.min;
        match &self.dynamics {
            Dynamics::General(ode) => ode.time_to_level(x, self.theta, hi),
            _ => self.bisect_crossing(x, lo, hi),
        }
    }

    fn bisect_crossing(&self, x: &[f64], mut lo: f64, mut hi: f64) -> Result<f64, ModelError> {
        // Constant velocity: the bracket has collapsed onto the exact root.
        if hi <= lo {
            return Ok(hi);
        }
        let theta = self.theta;
        let sat_after = |dt: f64| -> Result<f64, ModelError> {
            Ok(self.satisfaction(&self.flow(x, dt)?))
        };
        // Below S = 0 the velocity bounds need not hold; fall back to the
        // trivially valid lower end.
        if sat_after(lo)? >= theta {
            lo = 0.0;
        }
        let mut inflations = 0;
        while sat_after(hi)? < theta {
            if inflations == MAX_BRACKET_INFLATIONS {
                return Err(ModelError::ContractViolation(format!(
                    "goal {theta} not reached within {hi} time units; \
                     the satisfaction velocity is not bounded away from zero"
                )));
            }
            lo = hi;
            hi *= 2.0;
            inflations += 1;
        }
        let tol = CROSSING_TIME_REL_TOL * (1.0 + (hi - lo));
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sat_after(mid)? >= theta {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Update rule: satisfaction drops to exactly zero, other coordinates kept.
    pub fn reset(&self, x: &[f64]) -> State {
        let mut out = x.to_vec();
        out[self.sat_index()] = 0.0;
        out
    }

    /// Interaction rule: shifts the satisfaction coordinate by `delta`.
    pub fn perturb(&self, x: &[f64], delta: f64) -> State {
        let mut out = x.to_vec();
        out[self.sat_index()] += delta;
        out
    }

    /// A state with the given satisfaction; auxiliary coordinates come from
    /// the model's base state (zero phase for `Planar`).
    pub fn state_with_satisfaction(&self, s: f64) -> State {
        let mut out = match &self.dynamics {
            Dynamics::General(ode) => ode.base().to_vec(),
            _ => vec![0.0; self.state_dim()],
        };
        out[self.sat_index()] = s;
        out
    }

    /// Draws `S` uniformly in `[0, theta)`. `Planar` also draws its phase
    /// uniformly in `[0, 2 pi)`.
    pub fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        let s = rng.random_range(0.0..self.theta);
        let mut out = self.state_with_satisfaction(s);
        if let Dynamics::Planar { .. } = self.dynamics {
            out[1] = rng.random_range(0.0..TAU);
        }
        out
    }

    /// Same model with every velocity multiplied by `factor` (a uniform
    /// rescaling of time).
    pub fn time_scaled(&self, factor: f64) -> Result<Model, ModelError> {
        check_positive("time scale", factor)?;
        match &self.dynamics {
            Dynamics::Linear { v } => Model::linear(self.theta, v * factor),
            Dynamics::Saturating { gamma, s_sat } => {
                Model::saturating(self.theta, gamma * factor, *s_sat)
            }
            Dynamics::Planar { v0, eps, omega } => {
                Model::planar(self.theta, v0 * factor, eps * factor, omega * factor)
            }
            Dynamics::General(ode) => Model::general(self.theta, ode.time_scaled(factor)),
        }
    }

    /// Same dynamics with a different goal.
    pub fn with_theta(&self, theta: f64) -> Result<Model, ModelError> {
        match &self.dynamics {
            Dynamics::Linear { v } => Model::linear(theta, *v),
            Dynamics::Saturating { gamma, s_sat } => Model::saturating(theta, *gamma, *s_sat),
            Dynamics::Planar { v0, eps, omega } => Model::planar(theta, *v0, *eps, *omega),
            Dynamics::General(ode) => Model::general(theta, ode.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn sat() -> Model {
        Model::saturating(1.0, 1.0, 2.0).unwrap()
    }

    fn planar() -> Model {
        Model::planar(1.0, 1.0, 0.2, 1.0).unwrap()
    }

    #[test]
    fn linear_flow_is_a_ramp() {
        let m = Model::linear(1.0, 1.0).unwrap();
        assert!(close(m.flow(&[0.2], 0.5).unwrap()[0], 0.7, 1e-15));
    }

    #[test]
    fn zero_flow_is_identity() {
        for m in [Model::linear(1.0, 1.0).unwrap(), sat(), planar()] {
            let x = m.state_with_satisfaction(0.3);
            assert_eq!(m.flow(&x, 0.0).unwrap(), x);
        }
    }

    #[test]
    fn saturating_flow_closed_form() {
        let x = sat().flow(&[0.0], 2f64.ln()).unwrap();
        assert!(close(x[0], 1.0, 1e-15));
    }

    #[test]
    fn satisfaction_reads_the_designated_coordinate() {
        assert_eq!(Model::linear(1.0, 1.0).unwrap().satisfaction(&[0.7]), 0.7);
        assert_eq!(planar().satisfaction(&[0.3, 1.2]), 0.3);
        assert_eq!(sat().satisfaction(&[0.0]), 0.0);
    }

    #[test]
    fn crossing_times_for_closed_form_families() {
        let lin = Model::linear(1.0, 1.0).unwrap();
        assert_eq!(lin.time_to_threshold(&[0.4]).unwrap(), 0.6);
        let t = sat().time_to_threshold(&[0.0]).unwrap();
        assert!(close(t, 2f64.ln(), 1e-11), "{t}");
        let t = planar().time_to_threshold(&[0.0, 0.0]).unwrap();
        assert!((1.0 / 1.2..=1.0 / 0.8).contains(&t));
    }

    #[test]
    fn crossing_requires_state_below_goal() {
        let lin = Model::linear(1.0, 1.0).unwrap();
        assert!(matches!(
            lin.time_to_threshold(&[1.0]),
            Err(ModelError::AtOrAboveGoal { .. })
        ));
    }

    #[test]
    fn negative_satisfaction_still_crosses() {
        // Saturating velocity exceeds its [0, theta] bound below zero.
        let m = sat();
        let t = m.time_to_threshold(&[-3.0]).unwrap();
        let exact = (5.0f64 / 1.0).ln();
        assert!(close(t, exact, 1e-10), "{t} vs {exact}");
    }

    #[test]
    fn reset_and_perturb() {
        let lin = Model::linear(1.0, 1.0).unwrap();
        assert_eq!(lin.reset(&[1.0]), vec![0.0]);
        assert_eq!(sat().reset(&[1.3]), vec![0.0]);
        assert_eq!(planar().reset(&[1.0, 2.7]), vec![0.0, 2.7]);
        assert!(close(lin.perturb(&[0.5], 0.3)[0], 0.8, 1e-15));
        assert!(close(lin.perturb(&[0.5], -0.7)[0], -0.2, 1e-15));
        let p = planar().perturb(&[0.5, 1.0], 0.2);
        assert!(close(p[0], 0.7, 1e-15));
        assert_eq!(p[1], 1.0);
    }

    #[test]
    fn velocity_bounds_closed_form() {
        assert_eq!(
            Model::linear(1.0, 1.0).unwrap().velocity_bounds(),
            VelocityBounds::exact(1.0, 1.0)
        );
        assert_eq!(sat().velocity_bounds(), VelocityBounds::exact(1.0, 2.0));
        let b = planar().velocity_bounds();
        assert!(close(b.min, 0.8, 1e-15) && close(b.max, 1.2, 1e-15));
        assert!(!b.is_estimate());
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(Model::linear(0.0, 1.0).is_err());
        assert!(Model::linear(1.0, -1.0).is_err());
        assert!(Model::saturating(1.0, 1.0, 1.0).is_err());
        assert!(Model::planar(1.0, 0.2, 0.2, 1.0).is_err());
        assert!(Model::planar(1.0, 1.0, -0.1, 1.0).is_err());
    }

    #[test]
    fn planar_without_rotation_is_linear() {
        let m = Model::planar(1.0, 1.0, 0.5, 0.0).unwrap();
        let x = m.flow(&[0.0, std::f64::consts::FRAC_PI_2], 0.4).unwrap();
        assert!(close(x[0], 0.6, 1e-15));
    }

    #[test]
    fn time_scaling_scales_crossing_times() {
        let m = planar();
        let fast = m.time_scaled(2.0).unwrap();
        let x = [0.1, 0.3];
        let t = m.time_to_threshold(&x).unwrap();
        let tf = fast.time_to_threshold(&x).unwrap();
        assert!(close(t, 2.0 * tf, 1e-10));
    }
}
