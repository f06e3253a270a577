//! Reference model of chart evolution for boolean charts, written against
//! bitmasks and sharing no code with the engine.
//!
//! A scan fires, round after round, the one subset of transitions that
//! contains exactly the enabled transitions whose receptivity holds. The
//! subset is found by enumerating all `2^n` candidates.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use grafcet_core::{Chart, Receptivity, SignalDecl, Step, Transition};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum BExpr {
    Const(bool),
    Input(usize),
    Step(usize),
    Not(Box<BExpr>),
    And(Box<BExpr>, Box<BExpr>),
    Or(Box<BExpr>, Box<BExpr>),
}

impl BExpr {
    fn eval(&self, inputs: u32, marking: u32) -> bool {
        match self {
            BExpr::Const(b) => *b,
            BExpr::Input(i) => inputs >> i & 1 == 1,
            BExpr::Step(s) => marking >> s & 1 == 1,
            BExpr::Not(e) => !e.eval(inputs, marking),
            BExpr::And(a, b) => a.eval(inputs, marking) && b.eval(inputs, marking),
            BExpr::Or(a, b) => a.eval(inputs, marking) || b.eval(inputs, marking),
        }
    }

    fn to_receptivity(&self) -> Receptivity {
        match self {
            BExpr::Const(b) => Receptivity::Const(*b),
            BExpr::Input(i) => Receptivity::signal(input_name(*i)),
            BExpr::Step(s) => Receptivity::step_active(step_name(*s)),
            BExpr::Not(e) => e.to_receptivity().not(),
            BExpr::And(a, b) => a.to_receptivity().and(b.to_receptivity()),
            BExpr::Or(a, b) => a.to_receptivity().or(b.to_receptivity()),
        }
    }
}

pub fn input_name(i: usize) -> String {
    format!("i{i}")
}

pub fn step_name(s: usize) -> String {
    format!("S{s}")
}

#[derive(Debug, Clone)]
pub struct BitChart {
    pub steps: usize,
    pub inputs: usize,
    pub initial: u32,
    /// (upstream mask, downstream mask, receptivity)
    pub transitions: Vec<(u32, u32, BExpr)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Stable(u32),
    Unstable,
}

fn mask_steps(mask: u32, n: usize) -> Vec<String> {
    (0..n).filter(|s| mask >> s & 1 == 1).map(step_name).collect()
}

impl BitChart {
    pub fn random(rng: &mut impl Rng, max_steps: usize, max_transitions: usize, inputs: usize) -> Self {
        let steps = rng.random_range(1..=max_steps);
        let full = (1u32 << steps) - 1;
        let nonempty = |rng: &mut _| loop {
            let m = Rng::random_range(rng, 1..=full);
            // favour small step sets
            if m.count_ones() <= 2 || Rng::random_range(rng, 0..3) == 0 {
                return m;
            }
        };
        let initial = nonempty(rng);
        let n_trans = rng.random_range(1..=max_transitions);
        let transitions =
            (0..n_trans).map(|_| (nonempty(rng), nonempty(rng), random_expr(rng, steps, inputs, 3))).collect();
        BitChart { steps, inputs, initial, transitions }
    }

    pub fn to_chart(&self) -> Chart {
        Chart {
            name: "oracle".into(),
            signals: (0..self.inputs).map(|i| SignalDecl::bool_input(input_name(i))).collect(),
            steps: (0..self.steps)
                .map(|s| if self.initial >> s & 1 == 1 { Step::initial(step_name(s)) } else { Step::new(step_name(s)) })
                .collect(),
            transitions: self
                .transitions
                .iter()
                .enumerate()
                .map(|(k, (up, down, e))| Transition {
                    id: format!("T{k}"),
                    upstream: mask_steps(*up, self.steps),
                    downstream: mask_steps(*down, self.steps),
                    receptivity: e.to_receptivity(),
                })
                .collect(),
        }
    }

    fn fired_subset(&self, marking: u32, inputs: u32) -> u32 {
        let n = self.transitions.len();
        let fireable = |t: usize| {
            let (up, _, e) = &self.transitions[t];
            up & marking == *up && e.eval(inputs, marking)
        };
        let mut found = None;
        for candidate in 0u32..(1 << n) {
            if (0..n).all(|t| (candidate >> t & 1 == 1) == fireable(t)) {
                assert!(found.is_none(), "two subsets match");
                found = Some(candidate);
            }
        }
        found.expect("exactly one subset matches")
    }

    /// One scan: fire rounds until nothing is fireable, giving up after
    /// `transitions + 1` rounds.
    pub fn scan(&self, marking: u32, inputs: u32) -> Outcome {
        let cap = self.transitions.len() + 1;
        let mut m = marking;
        for round in 0..=cap {
            let fired = self.fired_subset(m, inputs);
            if fired == 0 {
                return Outcome::Stable(m);
            }
            if round == cap {
                break;
            }
            let (mut leave, mut enter) = (0, 0);
            for (t, (up, down, _)) in self.transitions.iter().enumerate() {
                if fired >> t & 1 == 1 {
                    leave |= up;
                    enter |= down;
                }
            }
            m = (m & !leave) | enter;
        }
        Outcome::Unstable
    }

    /// Successor relation over every reachable situation and every input
    /// vector.
    pub fn reachable(&self) -> BTreeMap<(u32, u32), Outcome> {
        explore(self.initial, 1 << self.inputs, |m, i| self.scan(m, i))
    }
}

/// Breadth-first exploration of a scan function from `start`.
pub fn explore(
    start: u32,
    input_vectors: u32,
    mut step: impl FnMut(u32, u32) -> Outcome,
) -> BTreeMap<(u32, u32), Outcome> {
    let mut relation = BTreeMap::new();
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(m) = queue.pop_front() {
        for i in 0..input_vectors {
            let out = step(m, i);
            if let Outcome::Stable(next) = out {
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
            relation.insert((m, i), out);
        }
    }
    relation
}

fn random_expr(rng: &mut impl Rng, steps: usize, inputs: usize, depth: u32) -> BExpr {
    if depth == 0 || rng.random_range(0..3) == 0 {
        return match rng.random_range(0..8) {
            0 => BExpr::Const(rng.random()),
            1 => BExpr::Step(rng.random_range(0..steps)),
            _ => BExpr::Input(rng.random_range(0..inputs)),
        };
    }
    let op = rng.random_range(0..3);
    let mut sub = || Box::new(random_expr(rng, steps, inputs, depth - 1));
    match op {
        0 => BExpr::Not(sub()),
        1 => {
            let a = sub();
            BExpr::And(a, sub())
        }
        _ => {
            let a = sub();
            BExpr::Or(a, sub())
        }
    }
}
