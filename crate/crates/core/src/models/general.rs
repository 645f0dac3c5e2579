use std::fmt;
use std::sync::Arc;

use evalexpr::error::EvalexprResultValue;
use evalexpr::{
    build_operator_tree, Context, DefaultNumericTypes, EvalexprError, EvalexprResult, Node, Value,
};

use super::{ModelError, State, VelocityBounds, CROSSING_TIME_REL_TOL};

/// Right-hand side `f(x)` written into the output slice.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Minimum number of states visited when estimating velocity bounds.
pub const MIN_BOUND_SAMPLES: usize = 10_000;

const MAX_STEP: f64 = 1e-3;
const STEP_FRACTION_OF_GOAL: f64 = 0.01;
const MAX_CALIBRATION_STEPS: usize = 1_000_000;
/// Slack factor on `(theta - S) / v_min` before a crossing search gives up.
const SEARCH_INFLATION: f64 = 4.0;

/// Autonomous ODE `dx/dt = f(x)` whose satisfaction is coordinate
/// `sat_index` of the state.
#[derive(Clone)]
pub struct GeneralOde {
    dim: usize,
    sat_index: usize,
    field: VectorField,
    base: State,
    expressions: Option<Vec<String>>,
    step: f64,
}

impl fmt::Debug for GeneralOde {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralOde")
            .field("dim", &self.dim)
            .field("sat_index", &self.sat_index)
            .field("base", &self.base)
            .field("expressions", &self.expressions)
            .field("step", &self.step)
            .finish()
    }
}

/// Resolves `x0 .. x{d-1}` to the current state.
struct StateContext {
    values: Vec<Value<DefaultNumericTypes>>,
}

impl Context for StateContext {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, identifier: &str) -> Option<&Value<DefaultNumericTypes>> {
        let index: usize = identifier.strip_prefix('x')?.parse().ok()?;
        self.values.get(index)
    }

    fn call_function(
        &self,
        identifier: &str,
        _argument: &Value<DefaultNumericTypes>,
    ) -> EvalexprResultValue<DefaultNumericTypes> {
        Err(EvalexprError::FunctionIdentifierNotFound(identifier.to_string()))
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(
        &mut self,
        disabled: bool,
    ) -> EvalexprResult<(), DefaultNumericTypes> {
        if disabled {
            Err(EvalexprError::BuiltinFunctionsCannotBeDisabled)
        } else {
            Ok(())
        }
    }
}

impl GeneralOde {
    pub fn new<F>(dim: usize, sat_index: usize, field: F) -> Result<Self, ModelError>
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self::from_field(dim, sat_index, Arc::new(field), None)
    }

    fn from_field(
        dim: usize,
        sat_index: usize,
        field: VectorField,
        expressions: Option<Vec<String>>,
    ) -> Result<Self, ModelError> {
        if dim == 0 || sat_index >= dim {
            return Err(ModelError::InvalidParameter(format!(
                "satisfaction index {sat_index} outside a {dim}-dimensional state"
            )));
        }
        Ok(GeneralOde {
            dim,
            sat_index,
            field,
            base: vec![0.0; dim],
            expressions,
            step: MAX_STEP,
        })
    }

    /// One expression per state coordinate, in the variables `x0, x1, ...`.
    /// Builtins use the `math::` prefix, e.g. `1.0 + 0.2 * math::sin(x1)`.
    pub fn from_expressions(expressions: &[String], sat_index: usize) -> Result<Self, ModelError> {
        let dim = expressions.len();
        let mut nodes: Vec<Node<DefaultNumericTypes>> = Vec::with_capacity(dim);
        for expr in expressions {
            let node = build_operator_tree::<DefaultNumericTypes>(expr).map_err(|e| {
                ModelError::Expression {
                    expr: expr.clone(),
                    message: e.to_string(),
                }
            })?;
            for ident in node.iter_variable_identifiers() {
                let known = ident
                    .strip_prefix('x')
                    .and_then(|k| k.parse::<usize>().ok())
                    .is_some_and(|k| k < dim);
                if !known {
                    return Err(ModelError::Expression {
                        expr: expr.clone(),
                        message: format!("unknown variable `{ident}` (expected x0..x{})", dim - 1),
                    });
                }
            }
            nodes.push(node);
        }
        let field = move |x: &[f64], out: &mut [f64]| {
            let ctx = StateContext {
                values: x.iter().map(|&v| Value::Float(v)).collect(),
            };
            for (o, node) in out.iter_mut().zip(&nodes) {
                *o = node.eval_number_with_context(&ctx).unwrap_or(f64::NAN);
            }
        };
        Self::from_field(dim, sat_index, Arc::new(field), Some(expressions.to_vec()))
    }

    /// Template for auxiliary coordinates of initial and reset states.
    pub fn with_base(mut self, base: State) -> Result<Self, ModelError> {
        if base.len() != self.dim || base.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "base state must have {} finite entries",
                self.dim
            )));
        }
        self.base = base;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sat_index(&self) -> usize {
        self.sat_index
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn expressions(&self) -> Option<&[String]> {
        self.expressions.as_deref()
    }

    /// Integration step in use.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub(super) fn velocity(&self, x: &[f64]) -> f64 {
        let mut out = vec![0.0; self.dim];
        (self.field)(x, &mut out);
        out[self.sat_index]
    }

    pub(super) fn time_scaled(&self, factor: f64) -> GeneralOde {
        let inner = Arc::clone(&self.field);
        let field = move |x: &[f64], out: &mut [f64]| {
            inner(x, out);
            out.iter_mut().for_each(|v| *v *= factor);
        };
        GeneralOde {
            field: Arc::new(field),
            expressions: self
                .expressions
                .as_ref()
                .map(|es| es.iter().map(|e| format!("({e}) * {factor:?}")).collect()),
            ..self.clone()
        }
    }

    fn rk4_step(&self, x: &mut [f64], h: f64) {
        let d = self.dim;
        let mut k1 = vec![0.0; d];
        let mut k2 = vec![0.0; d];
        let mut k3 = vec![0.0; d];
        let mut k4 = vec![0.0; d];
        let mut tmp = vec![0.0; d];
        (self.field)(x, &mut k1);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        (self.field)(&tmp, &mut k2);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        (self.field)(&tmp, &mut k3);
        for i in 0..d {
            tmp[i] = x[i] + h * k3[i];
        }
        (self.field)(&tmp, &mut k4);
        for i in 0..d {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// Whole steps of the calibrated size followed by one partial step.
    pub(super) fn integrate(&self, x: &[f64], dt: f64) -> State {
        let mut out = x.to_vec();
        let whole = (dt / self.step).floor();
        for _ in 0..whole as usize {
            self.rk4_step(&mut out, self.step);
        }
        let rest = dt - whole * self.step;
        if rest > 0.0 {
            self.rk4_step(&mut out, rest);
        }
        out
    }

    /// Steps forward until the satisfaction coordinate reaches `level`, then
    /// bisects inside the bracketing step.
    pub(super) fn time_to_level(
        &self,
        x: &[f64],
        level: f64,
        nominal_upper: f64,
    ) -> Result<f64, ModelError> {
        let h = self.step;
        let limit = SEARCH_INFLATION * nominal_upper + h;
        let k = self.sat_index;
        let mut current = x.to_vec();
        let mut steps = 0usize;
        loop {
            let mut next = current.clone();
            self.rk4_step(&mut next, h);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite);
            }
            if next[k] >= level {
                let (mut lo, mut hi) = (0.0, h);
                let tol = CROSSING_TIME_REL_TOL * (1.0 + h);
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let mut probe = current.clone();
                    self.rk4_step(&mut probe, mid);
                    if probe[k] >= level {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Ok(steps as f64 * h + hi);
            }
            steps += 1;
            current = next;
            if steps as f64 * h > limit {
                return Err(ModelError::ContractViolation(format!(
                    "satisfaction did not reach {level} within {limit} time units"
                )));
            }
        }
    }

    /// Samples `dS/dt` along trajectories started on the reset set and sets
    /// the integration step from the sampled maximum.
    pub(super) fn calibrate(mut self, theta: f64) -> Result<(GeneralOde, VelocityBounds), ModelError> {
        let k = self.sat_index;
        let mut x = self.base.clone();
        x[k] = 0.0;
        let pilot = self.velocity(&x);
        if !(pilot.is_finite() && pilot > 0.0) {
            return Err(ModelError::ContractViolation(format!(
                "satisfaction velocity {pilot} at the reset state is not positive"
            )));
        }
        let h = MAX_STEP.min(STEP_FRACTION_OF_GOAL * theta / pilot);
        let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut samples = 0usize;
        let mut steps = 0usize;
        let mut crossings = 0usize;
        while samples < MIN_BOUND_SAMPLES || crossings == 0 {
            if (0.0..=theta).contains(&x[k]) {
                let v = self.velocity(&x);
                vmin = vmin.min(v);
                vmax = vmax.max(v);
                samples += 1;
            }
            self.rk4_step(&mut x, h);
            steps += 1;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite);
            }
            if x[k] >= theta {
                x[k] = 0.0;
                crossings += 1;
            }
            if steps > MAX_CALIBRATION_STEPS {
                return Err(ModelError::ContractViolation(
                    "satisfaction does not advance toward the goal".into(),
                ));
            }
        }
        if !(vmin.is_finite() && vmin > 0.0) {
            return Err(ModelError::ContractViolation(format!(
                "sampled minimum satisfaction velocity {vmin} is not positive"
            )));
        }
        self.step = MAX_STEP.min(STEP_FRACTION_OF_GOAL * theta / vmax);
        let bounds = VelocityBounds {
            min: vmin,
            max: vmax,
            sampled: Some(samples),
        };
        Ok((self, bounds))
    }
}
