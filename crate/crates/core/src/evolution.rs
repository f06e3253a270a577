//! Evolution rules: situation, receptivity evaluation, enabling and firing.
//!
//! Everything here is a pure function of its arguments. The scan engine
//! composes these into a cyclic executor.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::chart::{Chart, Receptivity};
use crate::io::IoImage;
use crate::time::SimTime;

/// The situation: active steps with the clock reading at which each one
/// was (last) activated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Marking {
    activated_at: BTreeMap<String, SimTime>,
}

impl Marking {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rule 1: every initial step active, all activated at `t0`.
    pub fn initial(chart: &Chart, t0: SimTime) -> Self {
        Marking { activated_at: chart.initial_steps().map(|s| (s.id.clone(), t0)).collect() }
    }

    pub fn from_steps<'a>(steps: impl IntoIterator<Item = &'a str>, at: SimTime) -> Self {
        Marking { activated_at: steps.into_iter().map(|s| (s.to_owned(), at)).collect() }
    }

    pub fn activate(&mut self, step: &str, at: SimTime) {
        self.activated_at.insert(step.to_owned(), at);
    }

    pub fn is_active(&self, step: &str) -> bool {
        self.activated_at.contains_key(step)
    }

    pub fn activated_at(&self, step: &str) -> Option<SimTime> {
        self.activated_at.get(step).copied()
    }

    /// Active step ids, sorted by id.
    pub fn active(&self) -> impl Iterator<Item = &str> {
        self.activated_at.keys().map(String::as_str)
    }

    pub fn active_set(&self) -> BTreeSet<String> {
        self.activated_at.keys().cloned().collect()
    }

    /// Active step ids in the chart's declaration order.
    pub fn active_in_order<'c>(&self, chart: &'c Chart) -> Vec<&'c str> {
        chart.steps.iter().filter(|s| self.is_active(&s.id)).map(|s| s.id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.activated_at.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activated_at.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
}

/// Evaluates a receptivity against the current and previous input images.
///
/// `prev_io` only matters for rising edges: `re(x)` is `x` now and not `x`
/// before.
pub fn eval_receptivity(
    expr: &Receptivity,
    io: &IoImage,
    prev_io: &IoImage,
    marking: &Marking,
    now: SimTime,
) -> Result<bool, EvalError> {
    let bool_of =
        |image: &IoImage, name: &str| image.bool(name).ok_or_else(|| EvalError::UnknownSignal(name.to_owned()));
    Ok(match expr {
        Receptivity::Const(v) => *v,
        Receptivity::Signal(s) => bool_of(io, s)?,
        Receptivity::Compare { signal, op, value } => {
            let x = io.analog(signal).ok_or_else(|| EvalError::UnknownSignal(signal.clone()))?;
            op.apply(x, *value)
        }
        Receptivity::Not(inner) => !eval_receptivity(inner, io, prev_io, marking, now)?,
        Receptivity::And(l, r) => {
            // both sides are evaluated so that unknown signals surface
            // regardless of short-circuiting
            let a = eval_receptivity(l, io, prev_io, marking, now)?;
            let b = eval_receptivity(r, io, prev_io, marking, now)?;
            a && b
        }
        Receptivity::Or(l, r) => {
            let a = eval_receptivity(l, io, prev_io, marking, now)?;
            let b = eval_receptivity(r, io, prev_io, marking, now)?;
            a || b
        }
        Receptivity::Rising(s) => bool_of(io, s)? && !bool_of(prev_io, s)?,
        Receptivity::StepActive(s) => marking.is_active(s),
        Receptivity::Timer { step, seconds } => match marking.activated_at(step) {
            Some(since) => {
                // validated charts only carry representable durations
                let threshold = SimTime::from_secs(*seconds).unwrap_or(SimTime::from_nanos(u64::MAX));
                now.saturating_sub(since) >= threshold
            }
            None => false,
        },
    })
}

/// A transition is enabled when all its upstream steps are active.
pub fn is_enabled(chart: &Chart, transition: usize, marking: &Marking) -> bool {
    chart.transitions[transition].upstream.iter().all(|s| marking.is_active(s))
}

/// Ids of the transitions that are enabled and whose receptivity holds, in
/// declaration order.
pub fn fireable_transitions(
    chart: &Chart,
    marking: &Marking,
    io: &IoImage,
    prev_io: &IoImage,
    now: SimTime,
) -> Result<Vec<String>, EvalError> {
    let mut out = Vec::new();
    for (i, t) in chart.transitions.iter().enumerate() {
        if is_enabled(chart, i, marking) && eval_receptivity(&t.receptivity, io, prev_io, marking, now)? {
            out.push(t.id.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FireError {
    #[error("transition `{0}` is not part of the chart")]
    UnknownTransition(String),
    #[error("transition `{0}` is not enabled by the current situation")]
    NotFireable(String),
}

/// What a single firing did to the situation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FireOutcome {
    pub marking: Marking,
    /// Steps that received an activation, in declaration order. Includes
    /// steps both deactivated and reactivated by the same firing.
    pub activated: Vec<String>,
    /// Steps that received a deactivation, in declaration order.
    pub deactivated: Vec<String>,
}

/// Fires a set of transitions simultaneously.
///
/// Upstream steps of all transitions are deactivated and downstream steps
/// activated. A step in both sets stays active and its activation time is
/// refreshed to `now`.
pub fn fire_set<'a>(
    marking: &Marking,
    transitions: impl IntoIterator<Item = &'a str>,
    chart: &Chart,
    now: SimTime,
) -> Result<Marking, FireError> {
    fire_set_detailed(marking, transitions, chart, now).map(|o| o.marking)
}

pub fn fire_set_detailed<'a>(
    marking: &Marking,
    transitions: impl IntoIterator<Item = &'a str>,
    chart: &Chart,
    now: SimTime,
) -> Result<FireOutcome, FireError> {
    let mut leaving: BTreeSet<&str> = BTreeSet::new();
    let mut entering: BTreeSet<&str> = BTreeSet::new();
    for id in transitions {
        let (index, t) = chart
            .transitions
            .iter()
            .enumerate()
            .find(|(_, t)| t.id == id)
            .ok_or_else(|| FireError::UnknownTransition(id.to_owned()))?;
        if !is_enabled(chart, index, marking) {
            return Err(FireError::NotFireable(id.to_owned()));
        }
        leaving.extend(t.upstream.iter().map(String::as_str));
        entering.extend(t.downstream.iter().map(String::as_str));
    }

    let mut next = marking.clone();
    for s in &leaving {
        next.activated_at.remove(*s);
    }
    for s in &entering {
        next.activated_at.insert((*s).to_owned(), now);
    }

    let in_order = |set: &BTreeSet<&str>| {
        chart.steps.iter().filter(|s| set.contains(s.id.as_str())).map(|s| s.id.clone()).collect()
    };
    Ok(FireOutcome { marking: next, activated: in_order(&entering), deactivated: in_order(&leaving) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{CmpOp, Step, Transition};

    fn t(secs: u64) -> SimTime {
        SimTime::from_whole_secs(secs)
    }

    fn chain() -> Chart {
        Chart {
            name: "chain".into(),
            signals: vec![],
            steps: vec![Step::initial("S1"), Step::new("S2"), Step::initial("S3"), Step::new("S4")],
            transitions: vec![
                Transition::new("T1", &["S1"], &["S2"], Receptivity::Const(true)),
                Transition::new("T2", &["S3"], &["S4"], Receptivity::Const(true)),
                Transition::new("T3", &["S1", "S2"], &["S4"], Receptivity::Const(true)),
                Transition::new("L", &["S1"], &["S1"], Receptivity::Const(true)),
            ],
        }
    }

    #[test]
    fn comparison_and_edges() {
        let io = IoImage::new().with_analog("P", 1.5).with_bool("b", true);
        let prev = IoImage::new().with_analog("P", 1.5).with_bool("b", true);
        let m = Marking::new();
        let lt = Receptivity::compare("P", CmpOp::Lt, 2.0);
        assert!(eval_receptivity(&lt, &io, &prev, &m, t(0)).unwrap());
        let edge = Receptivity::rising("b");
        assert!(!eval_receptivity(&edge, &io, &prev, &m, t(0)).unwrap());
        let prev_low = prev.clone().with_bool("b", false);
        assert!(eval_receptivity(&edge, &io, &prev_low, &m, t(0)).unwrap());
    }

    #[test]
    fn timer_threshold() {
        let m = Marking::from_steps(["S2"], t(10));
        let tmr = Receptivity::timer("S2", 5.0);
        let io = IoImage::new();
        assert!(!eval_receptivity(&tmr, &io, &io, &m, t(14)).unwrap());
        assert!(eval_receptivity(&tmr, &io, &io, &m, t(15)).unwrap());
        assert!(!eval_receptivity(&Receptivity::timer("S1", 0.0), &io, &io, &m, t(15)).unwrap());
    }

    #[test]
    fn unknown_signal_is_an_error() {
        let io = IoImage::new();
        let e = eval_receptivity(&Receptivity::signal("ghost"), &io, &io, &Marking::new(), t(0));
        assert_eq!(e, Err(EvalError::UnknownSignal("ghost".into())));
    }

    #[test]
    fn enabling_requires_all_upstream() {
        let chart = chain();
        let io = IoImage::new();
        let m = Marking::from_steps(["S1"], t(0));
        assert_eq!(fireable_transitions(&chart, &m, &io, &io, t(0)).unwrap(), vec!["T1", "L"]);
        let m2 = Marking::from_steps(["S2"], t(0));
        assert!(fireable_transitions(&chart, &m2, &io, &io, t(0)).unwrap().is_empty());
    }

    #[test]
    fn simple_and_simultaneous_firing() {
        let chart = chain();
        let m = Marking::from_steps(["S1"], t(0));
        let next = fire_set(&m, ["T1"], &chart, t(3)).unwrap();
        assert_eq!(next.active_set(), BTreeSet::from(["S2".to_string()]));
        assert_eq!(next.activated_at("S2"), Some(t(3)));

        let m = Marking::from_steps(["S1", "S3"], t(0));
        let next = fire_set(&m, ["T1", "T2"], &chart, t(1)).unwrap();
        assert_eq!(next.active().collect::<Vec<_>>(), vec!["S2", "S4"]);
    }

    #[test]
    fn self_loop_refreshes_activation() {
        let chart = chain();
        let m = Marking::from_steps(["S1"], t(2));
        let out = fire_set_detailed(&m, ["L"], &chart, t(7)).unwrap();
        assert!(out.marking.is_active("S1"));
        assert_eq!(out.marking.activated_at("S1"), Some(t(7)));
        assert_eq!(out.activated, vec!["S1"]);
        assert_eq!(out.deactivated, vec!["S1"]);
    }

    #[test]
    fn untouched_steps_keep_their_time() {
        let chart = chain();
        let mut m = Marking::from_steps(["S1"], t(1));
        m.activate("S3", t(0));
        let next = fire_set(&m, ["T1"], &chart, t(5)).unwrap();
        assert_eq!(next.activated_at("S3"), Some(t(0)));
    }

    #[test]
    fn firing_disabled_transition_fails() {
        let chart = chain();
        let m = Marking::from_steps(["S1"], t(0));
        assert_eq!(fire_set(&m, ["T3"], &chart, t(1)), Err(FireError::NotFireable("T3".into())));
        assert_eq!(fire_set(&m, ["nope"], &chart, t(1)), Err(FireError::UnknownTransition("nope".into())));
    }
}
