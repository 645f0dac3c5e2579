//! Grid sweeps over network size, uniform weight, goal and velocity spread.

use std::str::FromStr;

use crate::analysis::first_grand_coalition;
use crate::batch::{run_trials, TrialPlan};
use crate::config::{ConfigError, NetworkTemplate, WeightLayout};
use crate::network::Predicates;
use crate::par::{map_indexed, Execution};

#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    M(Vec<usize>),
    Delta(Vec<f64>),
    Theta(Vec<f64>),
    Spread(Vec<f64>),
}

impl Axis {
    pub fn len(&self) -> usize {
        match self {
            Axis::M(v) => v.len(),
            Axis::Delta(v) | Axis::Theta(v) | Axis::Spread(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn name(&self) -> &'static str {
        match self {
            Axis::M(_) => "m",
            Axis::Delta(_) => "delta",
            Axis::Theta(_) => "theta",
            Axis::Spread(_) => "spread",
        }
    }
}

fn parse_values<T: FromStr>(name: &str, values: &str) -> Result<Vec<T>, ConfigError> {
    values
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| ConfigError::Invalid(format!("axis {name}: cannot parse `{s}`")))
        })
        .collect()
}

/// `a..b` (inclusive) or a comma list.
fn parse_sizes(values: &str) -> Result<Vec<usize>, ConfigError> {
    match values.split_once("..") {
        Some((a, b)) => {
            let lo: usize = a.trim().parse().map_err(|_| bad_range(values))?;
            let hi: usize = b.trim().parse().map_err(|_| bad_range(values))?;
            Ok((lo..=hi).collect())
        }
        None => parse_values("m", values),
    }
}

fn bad_range(values: &str) -> ConfigError {
    ConfigError::Invalid(format!("axis m: cannot parse range `{values}`"))
}

/// Parses `name=values`, e.g. `m=10..25` or `delta=0.2,0.3,0.5`. An axis
/// without values is an error.
impl FromStr for Axis {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, values) = s
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("axis `{s}` is not of the form name=values")))?;
        let axis = match name.trim() {
            "m" => Axis::M(parse_sizes(values)?),
            "delta" => Axis::Delta(parse_values("delta", values)?),
            "theta" => Axis::Theta(parse_values("theta", values)?),
            "spread" => Axis::Spread(parse_values("spread", values)?),
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown axis `{other}` (expected m, delta, theta or spread)"
                )))
            }
        };
        if axis.is_empty() {
            return Err(ConfigError::Invalid(format!("axis {} is empty", axis.name())));
        }
        Ok(axis)
    }
}

/// Sweep axes; an unset axis keeps the base network's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grid {
    pub m: Option<Vec<usize>>,
    pub delta: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub spread: Option<Vec<f64>>,
}

impl Grid {
    pub fn from_axes(axes: Vec<Axis>) -> Result<Self, ConfigError> {
        if axes.is_empty() {
            return Err(ConfigError::Invalid("a sweep needs at least one axis".into()));
        }
        let mut grid = Grid::default();
        for axis in axes {
            if axis.is_empty() {
                return Err(ConfigError::Invalid(format!("axis {} is empty", axis.name())));
            }
            let name = axis.name();
            let taken = match axis {
                Axis::M(v) => grid.m.replace(v).is_some(),
                Axis::Delta(v) => grid.delta.replace(v).is_some(),
                Axis::Theta(v) => grid.theta.replace(v).is_some(),
                Axis::Spread(v) => grid.spread.replace(v).is_some(),
            };
            if taken {
                return Err(ConfigError::Invalid(format!("axis {name} given twice")));
            }
        }
        Ok(grid)
    }

    /// Cartesian product in the order m, delta, theta, spread.
    fn points(&self) -> Vec<GridPoint> {
        fn opts<T: Copy>(v: &Option<Vec<T>>) -> Vec<Option<T>> {
            match v {
                Some(v) => v.iter().copied().map(Some).collect(),
                None => vec![None],
            }
        }
        let mut out = Vec::new();
        for m in opts(&self.m) {
            for delta in opts(&self.delta) {
                for theta in opts(&self.theta) {
                    for spread in opts(&self.spread) {
                        out.push(GridPoint {
                            m,
                            delta,
                            theta,
                            spread,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct GridPoint {
    m: Option<usize>,
    delta: Option<f64>,
    theta: Option<f64>,
    spread: Option<f64>,
}

impl GridPoint {
    fn apply(&self, base: &NetworkTemplate) -> Result<NetworkTemplate, ConfigError> {
        let mut t = base.clone();
        if let Some(delta) = self.delta {
            t = t.with_uniform_weight(delta)?;
        }
        if let Some(m) = self.m {
            t = t.with_unit_count(m)?;
        }
        if let Some(theta) = self.theta {
            t = t.with_theta(theta)?;
        }
        if let Some(spread) = self.spread {
            t = t.with_velocity_spread(spread)?;
        }
        Ok(t)
    }
}

/// Predicates and empirical statistics of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub m: usize,
    /// Uniform weight, absent for an explicit matrix.
    pub delta: Option<f64>,
    /// Largest goal.
    pub theta: f64,
    pub spread: f64,
    pub predicates: Predicates,
    pub trials: usize,
    /// Trials stopped by an engine error.
    pub failures: usize,
    /// Trials with at least one grand coalition.
    pub gc_found: usize,
    pub wait_mean: Option<f64>,
    pub wait_max: Option<f64>,
    /// Fraction of events at or after the first grand coalition that are
    /// grand, pooled over trials.
    pub purity: Option<f64>,
    /// Trials with at least one VIOLATED verdict.
    pub violations: usize,
}

/// Runs `plan` in every cell of `grid`. Cells run one after another; the
/// trials inside each cell follow `exec`.
pub fn run_sweep(
    base: &NetworkTemplate,
    grid: &Grid,
    plan: &TrialPlan,
    min_recurrences: usize,
    exec: Execution,
) -> Result<Vec<SweepCell>, ConfigError> {
    let points = grid.points();
    let templates = points
        .iter()
        .map(|p| p.apply(base))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cells = Vec::with_capacity(points.len());
    for (point, template) in points.iter().zip(&templates) {
        let runs = run_trials(template, plan, exec)?;
        let reports = map_indexed(exec, runs.len(), |k| runs[k].report(min_recurrences));
        let waits: Vec<f64> = runs
            .iter()
            .filter(|r| r.outcome.is_ok())
            .filter_map(|r| first_grand_coalition(r.trace()))
            .collect();
        let (mut grand, mut after) = (0usize, 0usize);
        for run in runs.iter().filter(|r| r.outcome.is_ok()) {
            let events = &run.trace().events;
            if let Some(first) = events.iter().position(|e| e.is_grand()) {
                after += events.len() - first;
                grand += events[first..].iter().filter(|e| e.is_grand()).count();
            }
        }
        let predicates = runs[0].config.predicates();
        cells.push(SweepCell {
            m: template.m(),
            delta: match template.weights() {
                WeightLayout::Uniform(d) => Some(*d),
                WeightLayout::Explicit(_) => None,
            },
            theta: runs[0].config.max_theta(),
            spread: point.spread.unwrap_or(0.0),
            predicates,
            trials: runs.len(),
            failures: runs.iter().filter(|r| r.outcome.is_err()).count(),
            gc_found: waits.len(),
            wait_mean: (!waits.is_empty()).then(|| waits.iter().sum::<f64>() / waits.len() as f64),
            wait_max: waits.iter().copied().reduce(f64::max),
            purity: (after > 0).then(|| grand as f64 / after as f64),
            violations: reports.iter().flatten().filter(|r| r.has_violation()).count(),
        });
    }
    Ok(cells)
}
