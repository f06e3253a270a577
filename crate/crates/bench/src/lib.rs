//! Workloads shared by the benchmarks.

use grafcet_core::{Chart, IoImage, Receptivity, SignalDecl, Step, Transition};

/// A ring of `n` steps where each transition fires on its own input, with
/// `n / 4` tokens circulating.
pub fn ring_chart(n: usize) -> Chart {
    let mut chart = Chart::new(format!("ring_{n}"));
    for i in 0..n {
        chart.signals.push(SignalDecl::bool_input(format!("x{i}")));
        chart.steps.push(if i % 4 == 0 { Step::initial(format!("S{i}")) } else { Step::new(format!("S{i}")) });
        let up = format!("S{i}");
        let down = format!("S{}", (i + 1) % n);
        chart.transitions.push(Transition::new(
            format!("T{i}"),
            &[up.as_str()],
            &[down.as_str()],
            Receptivity::signal(format!("x{i}")),
        ));
    }
    chart
}

/// Input images for [`ring_chart`] that alternately release even and odd
/// transitions.
pub fn ring_inputs(n: usize) -> [IoImage; 2] {
    let phase = |odd: bool| (0..n).fold(IoImage::new(), |io, i| io.with_bool(&format!("x{i}"), (i % 2 == 1) == odd));
    [phase(false), phase(true)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use grafcet_core::{engine_reset, validate_chart, SimTime};
    use std::sync::Arc;

    #[test]
    fn ring_is_valid_and_moves() {
        let chart = ring_chart(8);
        assert!(validate_chart(&chart).is_empty());
        let [even, _] = ring_inputs(8);
        let s = engine_reset(Arc::new(chart), SimTime::ZERO).unwrap();
        let out = s.scan(&even, SimTime::from_millis(100)).unwrap();
        assert_eq!(out.state.marking().active().collect::<Vec<_>>(), ["S1", "S5"]);
    }
}
