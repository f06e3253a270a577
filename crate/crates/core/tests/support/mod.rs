//! Generators and reference models shared by the integration tests.
#![allow(dead_code)]

pub mod oracle;

use grafcet_core::chart::{is_valid_identifier, Action, CmpOp, Trigger};
use grafcet_core::{validate_chart, Chart, Receptivity, SignalDecl, SignalKind, Step, Transition};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

fn identifier(rng: &mut impl Rng, taken: &mut Vec<String>) -> String {
    const FIRST: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_";
    const REST: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_0123456789";
    loop {
        let len = rng.random_range(0..8);
        let mut s = String::new();
        s.push(*FIRST.choose(rng).unwrap() as char);
        for _ in 0..len {
            s.push(*REST.choose(rng).unwrap() as char);
        }
        if is_valid_identifier(&s) && !taken.contains(&s) {
            taken.push(s.clone());
            return s;
        }
    }
}

fn text(rng: &mut impl Rng) -> String {
    const POOL: &[&str] = &["", "bar", "kPa", "m³/h", "pump room 2", "état", "a#b", "x;y", "{ }"];
    POOL.choose(rng).unwrap().to_string()
}

fn real(rng: &mut impl Rng) -> f64 {
    match rng.random_range(0..6) {
        0 => 0.0,
        1 => rng.random_range(-10..10) as f64,
        2 => rng.random_range(-100.0..100.0),
        3 => rng.random_range(0.0..1.0) * 1e-6,
        4 => rng.random_range(1.0..10.0) * 1e12,
        _ => (rng.random_range(-1000..1000) as f64) / 8.0,
    }
}

fn duration(rng: &mut impl Rng) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(0..3600) as f64,
        1 => rng.random_range(0..100) as f64 / 10.0,
        2 => rng.random_range(0.0..100.0),
        _ => 0.0,
    }
}

fn subset<T: Clone>(rng: &mut impl Rng, pool: &[T], max: usize) -> Vec<T> {
    let n = rng.random_range(1..=max.min(pool.len()));
    let mut picked: Vec<usize> = (0..pool.len()).collect();
    picked.shuffle(rng);
    picked.truncate(n);
    picked.into_iter().map(|i| pool[i].clone()).collect()
}

fn receptivity<R: Rng>(rng: &mut R, chart: &Chart, depth: u32) -> Receptivity {
    let bools: Vec<&str> = chart.signals_of(SignalKind::BoolInput).map(|s| s.name.as_str()).collect();
    let analogs: Vec<&str> = chart.signals_of(SignalKind::AnalogInput).map(|s| s.name.as_str()).collect();
    let steps: Vec<&str> = chart.steps.iter().map(|s| s.id.as_str()).collect();
    let leaf = |rng: &mut R| -> Receptivity {
        match rng.random_range(0..6) {
            0 if !bools.is_empty() => Receptivity::signal(*bools.choose(rng).unwrap()),
            1 if !bools.is_empty() => Receptivity::rising(*bools.choose(rng).unwrap()),
            2 if !analogs.is_empty() => {
                let op = *[CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge].choose(rng).unwrap();
                Receptivity::compare(*analogs.choose(rng).unwrap(), op, real(rng))
            }
            3 => Receptivity::step_active(*steps.choose(rng).unwrap()),
            4 => Receptivity::timer(*steps.choose(rng).unwrap(), duration(rng)),
            _ => Receptivity::Const(rng.random()),
        }
    };
    if depth == 0 || rng.random_range(0..3) == 0 {
        return leaf(rng);
    }
    match rng.random_range(0..3) {
        0 => receptivity(rng, chart, depth - 1).not(),
        1 => receptivity(rng, chart, depth - 1).and(receptivity(rng, chart, depth - 1)),
        _ => receptivity(rng, chart, depth - 1).or(receptivity(rng, chart, depth - 1)),
    }
}

/// A structurally valid chart exercising every construct of the text
/// format.
pub fn random_valid_chart(rng: &mut impl Rng) -> Chart {
    let mut names = Vec::new();
    let mut chart = Chart::new(if rng.random_range(0..4) == 0 { String::new() } else { text(rng) });
    for _ in 0..rng.random_range(0..=6) {
        let name = identifier(rng, &mut names);
        chart.signals.push(match rng.random_range(0..3) {
            0 => SignalDecl::bool_input(name),
            1 => SignalDecl::bool_output(name),
            _ => {
                let unit = rng.random::<bool>().then(|| text(rng));
                SignalDecl::analog_input(name, unit.as_deref())
            }
        });
    }
    let outputs: Vec<String> = chart.signals_of(SignalKind::BoolOutput).map(|s| s.name.clone()).collect();
    let mut ids = Vec::new();
    for _ in 0..rng.random_range(1..=6) {
        let mut step = Step::new(identifier(rng, &mut ids));
        step.initial = rng.random_range(0..3) == 0;
        if !outputs.is_empty() {
            for _ in 0..rng.random_range(0..3) {
                let target = outputs.choose(rng).unwrap().clone();
                let trigger = if rng.random() { Trigger::OnActivation } else { Trigger::OnDeactivation };
                step = step.with_action(match rng.random_range(0..3) {
                    0 => Action::continuous(target),
                    1 => Action::set(target, trigger),
                    _ => Action::reset(target, trigger),
                });
            }
        }
        chart.steps.push(step);
    }
    if !chart.steps.iter().any(|s| s.initial) {
        let i = rng.random_range(0..chart.steps.len());
        chart.steps[i].initial = true;
    }
    let step_ids: Vec<String> = chart.steps.iter().map(|s| s.id.clone()).collect();
    let mut tids = Vec::new();
    for _ in 0..rng.random_range(0..=6) {
        let id = identifier(rng, &mut tids);
        let up = subset(rng, &step_ids, 3);
        let down = subset(rng, &step_ids, 3);
        let r = receptivity(rng, &chart, 3);
        chart.transitions.push(Transition { id, upstream: up, downstream: down, receptivity: r });
    }
    debug_assert!(validate_chart(&chart).is_empty(), "{}", validate_chart(&chart));
    chart
}
