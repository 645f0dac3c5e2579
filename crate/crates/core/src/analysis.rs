//! Coalition statistics and trace-level checks of the synchronization
//! results.
//!
//! Every verifier first evaluates the hypotheses of the result it checks. A
//! check is `VIOLATED` only when all hypotheses hold with certified (not
//! sampled) bounds and the trace contradicts the conclusion; otherwise it is
//! `CONFIRMED` or `VACUOUS` with a reason.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::engine::Trace;
use crate::network::{NetworkConfig, Predicates};

/// Grand coalitions required before recurrence counts as confirmed.
pub const DEFAULT_MIN_RECURRENCES: usize = 10;

/// Relative tolerance on the waiting-time bound.
pub const WAITING_TOL_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VacuousReason {
    HypothesesUnmet,
    /// The horizon is too short for the conclusion to be forced.
    ShortHorizon,
    /// Fewer events than the check needs.
    ShortTrace,
    /// Hypotheses hold only with sampled velocity bounds.
    EstimatedBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Confirmed,
    Vacuous(VacuousReason),
    Violated,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Confirmed => "CONFIRMED",
            Verdict::Vacuous(_) => "VACUOUS",
            Verdict::Violated => "VIOLATED",
        }
    }

    pub fn detail(&self) -> &'static str {
        match self {
            Verdict::Confirmed | Verdict::Violated => "",
            Verdict::Vacuous(VacuousReason::HypothesesUnmet) => "hypotheses-unmet",
            Verdict::Vacuous(VacuousReason::ShortHorizon) => "inconclusive-horizon",
            Verdict::Vacuous(VacuousReason::ShortTrace) => "inconclusive-trace",
            Verdict::Vacuous(VacuousReason::EstimatedBounds) => "estimated-bounds",
        }
    }

    pub fn is_violated(&self) -> bool {
        matches!(self, Verdict::Violated)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Vacuous(_) => write!(f, "{}({})", self.label(), self.detail()),
            _ => f.write_str(self.label()),
        }
    }
}

/// Earliest instant at which all `m` units spike together.
pub fn first_grand_coalition(trace: &Trace) -> Option<f64> {
    trace.events.iter().find(|e| e.is_grand()).map(|e| e.t)
}

pub fn grand_coalition_count(trace: &Trace) -> usize {
    trace.events.iter().filter(|e| e.is_grand()).count()
}

/// Number of instants per coalition size.
pub fn coalition_histogram(trace: &Trace) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for e in &trace.events {
        *hist.entry(e.size()).or_insert(0) += 1;
    }
    hist
}

/// Whether every instant from the first grand coalition on is grand; `None`
/// without a grand coalition.
pub fn grand_only_after_first(trace: &Trace) -> Option<bool> {
    let first = trace.events.iter().position(|e| e.is_grand())?;
    Some(trace.events[first..].iter().all(|e| e.is_grand()))
}

/// A failed conclusion under hypotheses that rest on sampled bounds is not
/// reported as a violation.
fn failed(p: &Predicates) -> Verdict {
    if p.bounds_estimated {
        Verdict::Vacuous(VacuousReason::EstimatedBounds)
    } else {
        Verdict::Violated
    }
}

fn theorem1(p: &Predicates, trace: &Trace, min_recurrences: usize) -> Verdict {
    if !(p.is_cooperative && p.is_large) {
        return Verdict::Vacuous(VacuousReason::HypothesesUnmet);
    }
    if grand_coalition_count(trace) >= min_recurrences {
        Verdict::Confirmed
    } else if trace.end_time < min_recurrences as f64 * p.waiting_bound {
        Verdict::Vacuous(VacuousReason::ShortHorizon)
    } else {
        failed(p)
    }
}

fn waiting_bound(p: &Predicates, trace: &Trace) -> Verdict {
    if !(p.is_cooperative && p.is_large) {
        return Verdict::Vacuous(VacuousReason::HypothesesUnmet);
    }
    let bound = p.waiting_bound;
    match first_grand_coalition(trace) {
        Some(t) if t <= bound + WAITING_TOL_REL * bound.max(1.0) => Verdict::Confirmed,
        Some(_) => failed(p),
        None if trace.end_time < bound => Verdict::Vacuous(VacuousReason::ShortHorizon),
        None => failed(p),
    }
}

fn theorem2(p: &Predicates, trace: &Trace) -> Verdict {
    if !(p.is_cooperative && p.is_large && p.is_similar) {
        return Verdict::Vacuous(VacuousReason::HypothesesUnmet);
    }
    match grand_only_after_first(trace) {
        Some(true) => Verdict::Confirmed,
        Some(false) => failed(p),
        None if trace.end_time < p.waiting_bound => Verdict::Vacuous(VacuousReason::ShortHorizon),
        None => failed(p),
    }
}

fn assertion_a(p: &Predicates, trace: &Trace) -> Verdict {
    if p.m == 1 {
        return if trace.events.is_empty() {
            Verdict::Vacuous(VacuousReason::ShortTrace)
        } else {
            Verdict::Confirmed
        };
    }
    let r = match p.r_value {
        Some(r) if p.is_cooperative && p.is_large => r,
        _ => return Verdict::Vacuous(VacuousReason::HypothesesUnmet),
    };
    if trace.events.len() < r {
        return Verdict::Vacuous(VacuousReason::ShortTrace);
    }
    let spiked: BTreeSet<usize> = trace.events[..r]
        .iter()
        .flat_map(|e| e.coalition.iter().copied())
        .collect();
    if spiked.len() == p.m {
        Verdict::Confirmed
    } else {
        Verdict::Violated
    }
}

fn assertion_b(p: &Predicates, trace: &Trace) -> Verdict {
    if p.m == 1 {
        return Verdict::Confirmed;
    }
    let r = match p.r_value {
        Some(r) if p.is_cooperative => r,
        _ => return Verdict::Vacuous(VacuousReason::HypothesesUnmet),
    };
    if trace.events.iter().any(|e| e.size() >= r && e.size() < p.m) {
        Verdict::Violated
    } else {
        Verdict::Confirmed
    }
}

/// Recurrence of the grand coalition: at least `min_recurrences` grand
/// coalitions, given a horizon of at least `min_recurrences` waiting bounds.
pub fn verify_theorem1(cfg: &NetworkConfig, trace: &Trace, min_recurrences: usize) -> Verdict {
    theorem1(&cfg.predicates(), trace, min_recurrences)
}

/// The first grand coalition occurs no later than `max_i theta_i / v_min_i`.
pub fn verify_waiting_bound(cfg: &NetworkConfig, trace: &Trace) -> Verdict {
    waiting_bound(&cfg.predicates(), trace)
}

/// For similar cells every instant after the first grand coalition is grand.
pub fn verify_theorem2(cfg: &NetworkConfig, trace: &Trace) -> Verdict {
    theorem2(&cfg.predicates(), trace)
}

/// Every unit spikes during the first `r` instants.
pub fn verify_assertion_a(cfg: &NetworkConfig, trace: &Trace) -> Verdict {
    assertion_a(&cfg.predicates(), trace)
}

/// No coalition has between `r` and `m - 1` members.
pub fn verify_assertion_b(cfg: &NetworkConfig, trace: &Trace) -> Verdict {
    assertion_b(&cfg.predicates(), trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub n_events: usize,
    pub end_time: f64,
    pub first_grand_coalition: Option<f64>,
    pub grand_coalition_count: usize,
    pub post_gc_pure: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdicts {
    pub theorem1: Verdict,
    pub waiting_bound: Verdict,
    pub theorem2: Verdict,
    pub assertion_a: Verdict,
    pub assertion_b: Verdict,
}

impl Verdicts {
    pub fn all(&self) -> [Verdict; 5] {
        [
            self.theorem1,
            self.waiting_bound,
            self.theorem2,
            self.assertion_a,
            self.assertion_b,
        ]
    }
}

/// Predicates, trace statistics and verdicts for one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub predicates: Predicates,
    pub summary: TraceSummary,
    pub verdicts: Verdicts,
}

impl VerificationReport {
    pub fn new(cfg: &NetworkConfig, trace: &Trace, min_recurrences: usize) -> Self {
        let p = cfg.predicates();
        let summary = TraceSummary {
            n_events: trace.events.len(),
            end_time: trace.end_time,
            first_grand_coalition: first_grand_coalition(trace),
            grand_coalition_count: grand_coalition_count(trace),
            post_gc_pure: grand_only_after_first(trace),
        };
        let verdicts = Verdicts {
            theorem1: theorem1(&p, trace, min_recurrences),
            waiting_bound: waiting_bound(&p, trace),
            theorem2: theorem2(&p, trace),
            assertion_a: assertion_a(&p, trace),
            assertion_b: assertion_b(&p, trace),
        };
        VerificationReport {
            predicates: p,
            summary,
            verdicts,
        }
    }

    pub fn has_violation(&self) -> bool {
        self.verdicts.all().iter().any(Verdict::is_violated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, SpikeEvent, Stop};
    use crate::models::Model;
    use crate::network::WeightMatrix;

    fn linear_net(m: usize, delta: f64, velocities: &[f64], s0: &[f64]) -> NetworkConfig {
        NetworkConfig::new(
            (0..m)
                .map(|i| Model::linear(1.0, velocities[i % velocities.len()]).unwrap())
                .collect(),
            WeightMatrix::uniform(m, delta).unwrap(),
            (0..m).map(|i| vec![s0[i % s0.len()]]).collect(),
        )
        .unwrap()
    }

    fn event(n: usize, t: f64, m: usize, coalition: Vec<usize>) -> SpikeEvent {
        SpikeEvent {
            n,
            t,
            waves: vec![coalition.clone()],
            coalition,
            pre: vec![0.0; m],
            post: vec![0.0; m],
        }
    }

    fn hand_trace(m: usize, sizes: &[usize]) -> Trace {
        Trace {
            m,
            events: sizes
                .iter()
                .enumerate()
                .map(|(n, &k)| event(n, (n + 1) as f64 * 0.1, m, (0..k).collect()))
                .collect(),
            samples: None,
            end_time: sizes.len() as f64 * 0.1,
        }
    }

    #[test]
    fn e1_from_rest() {
        let cfg = linear_net(19, 0.3, &[1.0], &[0.0]);
        let trace = run(&cfg, Stop::MaxTime(20.0), None).unwrap();
        assert_eq!(first_grand_coalition(&trace), Some(1.0));
        assert_eq!(coalition_histogram(&trace), BTreeMap::from([(19, 20)]));
        assert_eq!(verify_theorem1(&cfg, &trace, 10), Verdict::Confirmed);
        assert_eq!(verify_waiting_bound(&cfg, &trace), Verdict::Confirmed);
        assert_eq!(verify_theorem2(&cfg, &trace), Verdict::Confirmed);
        assert_eq!(verify_assertion_a(&cfg, &trace), Verdict::Confirmed);
        assert_eq!(verify_assertion_b(&cfg, &trace), Verdict::Confirmed);
    }

    #[test]
    fn no_grand_coalition() {
        assert_eq!(first_grand_coalition(&hand_trace(3, &[1, 2, 1])), None);
        assert!(coalition_histogram(&hand_trace(3, &[])).is_empty());
    }

    #[test]
    fn singleton_is_grand_for_one_unit() {
        let cfg = linear_net(1, 0.0, &[1.0], &[0.0]);
        let trace = run(&cfg, Stop::MaxEvents(3), None).unwrap();
        assert_eq!(first_grand_coalition(&trace), Some(1.0));
        assert_eq!(
            verify_theorem1(&cfg, &trace, 1),
            Verdict::Vacuous(VacuousReason::HypothesesUnmet)
        );
        assert_eq!(verify_assertion_a(&cfg, &trace), Verdict::Confirmed);
        assert_eq!(verify_assertion_b(&cfg, &trace), Verdict::Confirmed);
    }

    #[test]
    fn small_network_is_vacuous() {
        let cfg = linear_net(4, 0.3, &[1.0], &[0.0]);
        let trace = run(&cfg, Stop::MaxTime(20.0), None).unwrap();
        let vacuous = Verdict::Vacuous(VacuousReason::HypothesesUnmet);
        assert_eq!(verify_theorem1(&cfg, &trace, 10), vacuous);
        assert_eq!(verify_waiting_bound(&cfg, &trace), vacuous);
        assert_eq!(verify_assertion_a(&cfg, &trace), vacuous);
    }

    #[test]
    fn dissimilar_cells_leave_theorem2_vacuous() {
        let cfg = linear_net(19, 0.3, &[1.0, 0.5], &[0.0]);
        let trace = run(&cfg, Stop::MaxTime(10.0), None).unwrap();
        assert_eq!(
            verify_theorem2(&cfg, &trace),
            Verdict::Vacuous(VacuousReason::HypothesesUnmet)
        );
    }

    #[test]
    fn short_horizon_is_inconclusive() {
        let cfg = linear_net(19, 0.3, &[1.0], &[0.0]);
        let trace = run(&cfg, Stop::MaxTime(5.0), None).unwrap();
        assert_eq!(
            verify_theorem1(&cfg, &trace, 10),
            Verdict::Vacuous(VacuousReason::ShortHorizon)
        );
        let cut = run(&cfg, Stop::MaxTime(0.5), None).unwrap();
        assert_eq!(
            verify_waiting_bound(&cfg, &cut),
            Verdict::Vacuous(VacuousReason::ShortHorizon)
        );
        assert_eq!(
            verify_assertion_a(&cfg, &cut),
            Verdict::Vacuous(VacuousReason::ShortTrace)
        );
    }

    #[test]
    fn engineered_violations_are_detected() {
        let cfg = linear_net(19, 0.3, &[1.0], &[0.0]);
        // r = 4: a coalition of 3 is allowed, 4 is not
        assert_eq!(verify_assertion_b(&cfg, &hand_trace(19, &[3, 1, 19])), Verdict::Confirmed);
        assert_eq!(verify_assertion_b(&cfg, &hand_trace(19, &[4, 19])), Verdict::Violated);
        assert_eq!(verify_assertion_a(&cfg, &hand_trace(19, &[1, 1, 1, 1, 19])), Verdict::Violated);
        let mut late = hand_trace(19, &[1, 1, 19]);
        late.events[2].t = 1.5;
        late.end_time = 2.0;
        assert_eq!(verify_waiting_bound(&cfg, &late), Verdict::Violated);
        assert_eq!(verify_theorem2(&cfg, &hand_trace(19, &[19, 2])), Verdict::Violated);
        let mut sparse = hand_trace(19, &[19, 1, 19]);
        sparse.end_time = 20.0;
        assert_eq!(verify_theorem1(&cfg, &sparse, 10), Verdict::Violated);
        let report = VerificationReport::new(&cfg, &sparse, 10);
        assert!(report.has_violation());
    }

    #[test]
    fn verdict_labels() {
        assert_eq!(Verdict::Confirmed.to_string(), "CONFIRMED");
        assert_eq!(
            Verdict::Vacuous(VacuousReason::ShortHorizon).to_string(),
            "VACUOUS(inconclusive-horizon)"
        );
        assert_eq!(Verdict::Violated.label(), "VIOLATED");
    }
}
