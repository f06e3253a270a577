use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use grafcet_core::alternation::{build_alternation_chart, AlternationParams, ClosedLoop, SignalBinding};
use grafcet_core::{engine_reset, EngineState, IoImage, PlantParams, SimTime};
use proptest::prelude::*;

/// Active step and time since its activation. Every clock value is a whole
/// number of seconds, so two states with the same key react identically to
/// every input as long as the elapsed time is capped past the longest timer.
type Key = (String, SimTime);

fn key(state: &EngineState, cap: SimTime) -> Key {
    let step = state.marking().active().next().expect("single-token chart").to_owned();
    let since = state.marking().activated_at(&step).unwrap();
    (step.clone(), (state.clock() - since).min(cap))
}

/// Every sensor vector the plant can produce. The switch dead bands are
/// disjoint, so `p_low` and `p_high` are never on together.
fn input_vectors() -> Vec<IoImage> {
    let mut all = Vec::new();
    for bits in (0..16u8).filter(|b| b & 3 != 3) {
        for pressure in [-1.0, 3.0] {
            all.push(
                IoImage::new()
                    .with_bool("p_low", bits & 1 != 0)
                    .with_bool("p_high", bits & 2 != 0)
                    .with_bool("fault_A", bits & 4 != 0)
                    .with_bool("fault_B", bits & 8 != 0)
                    .with_analog("pressure", pressure),
            );
        }
    }
    all
}

struct Exploration {
    edges: BTreeMap<Key, BTreeSet<Key>>,
    both_commanded: Vec<Key>,
}

/// Explores every reachable state of the alternation chart under every
/// input vector, with scan periods of 1 s and 100 s.
fn explore(params: &AlternationParams) -> Exploration {
    let chart = Arc::new(build_alternation_chart(params).unwrap());
    let cap = SimTime::from_secs(params.t_alt).unwrap() + SimTime::from_whole_secs(1);
    let inputs = input_vectors();
    let initial = engine_reset(chart, SimTime::ZERO).unwrap();
    let mut reps = BTreeMap::from([(key(&initial, cap), initial.clone())]);
    let mut queue = VecDeque::from([key(&initial, cap)]);
    let mut edges: BTreeMap<Key, BTreeSet<Key>> = BTreeMap::new();
    let mut both_commanded = Vec::new();
    while let Some(k) = queue.pop_front() {
        let state = reps[&k].clone();
        for io in &inputs {
            for dt in [SimTime::from_whole_secs(1), SimTime::from_whole_secs(100)] {
                let out = state.scan(io, dt).expect("alternation chart is stable under every input");
                if out.outputs.bool("cmd_A") == Some(true) && out.outputs.bool("cmd_B") == Some(true) {
                    both_commanded.push(k.clone());
                }
                let next = key(&out.state, cap);
                edges.entry(k.clone()).or_default().insert(next.clone());
                if !reps.contains_key(&next) {
                    reps.insert(next.clone(), out.state);
                    queue.push_back(next);
                }
            }
        }
    }
    Exploration { edges, both_commanded }
}

#[test]
fn alternation_never_commands_both_pumps_in_any_reachable_state() {
    let x = explore(&AlternationParams::default());
    assert!(x.edges.len() > 100, "explored only {} states", x.edges.len());
    assert!(x.both_commanded.is_empty(), "{:?}", x.both_commanded);
}

#[test]
fn every_reachable_state_can_return_to_the_initial_step() {
    for params in [AlternationParams::default(), AlternationParams { t_alt: 5.0, start_delay: 0.0 }] {
        let x = explore(&params);
        let mut reverse: BTreeMap<&Key, Vec<&Key>> = BTreeMap::new();
        for (from, tos) in &x.edges {
            for to in tos {
                reverse.entry(to).or_default().push(from);
            }
        }
        let mut back: BTreeSet<&Key> = x.edges.keys().filter(|(s, _)| s == "S1").collect();
        let mut queue: VecDeque<&Key> = back.iter().copied().collect();
        while let Some(k) = queue.pop_front() {
            for &prev in reverse.get(k).into_iter().flatten() {
                if back.insert(prev) {
                    queue.push_back(prev);
                }
            }
        }
        let stuck: Vec<&Key> = x.edges.keys().filter(|k| !back.contains(k)).collect();
        assert!(stuck.is_empty(), "{params:?}: no way back to S1 from {stuck:?}");
        let steps: BTreeSet<&str> = x.edges.keys().map(|(s, _)| s.as_str()).collect();
        assert_eq!(steps, BTreeSet::from(["S1", "S2", "S3", "S4", "S5"]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn both_pumps_run_within_two_alternation_periods(demand in 0.1f64..3.0, seed in any::<u64>()) {
        let params = AlternationParams::default();
        let chart = Arc::new(build_alternation_chart(&params).unwrap());
        let mut sim = ClosedLoop::new(chart, PlantParams::default(), SignalBinding::default(), seed).unwrap();
        let dt = SimTime::from_millis(100);
        let horizon = SimTime::from_whole_secs(5) + SimTime::from_secs(2.0 * params.t_alt).unwrap();
        let mut driven = [false; 2];
        while sim.clock() < horizon {
            let tick = sim.tick(demand, dt, None).unwrap();
            driven[0] |= tick.pump_cmd[0];
            driven[1] |= tick.pump_cmd[1];
        }
        prop_assert_eq!(driven, [true, true]);
    }
}
