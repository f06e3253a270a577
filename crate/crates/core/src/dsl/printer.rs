use std::fmt::Write;

use crate::chart::{ActionKind, Chart, Receptivity, Trigger};

use super::SourceText;

const OR: u8 = 1;
const AND: u8 = 2;
const UNARY: u8 = 3;

/// Real literal that reparses to the same `f64`; always carries a decimal
/// point so it reads as a real.
pub(crate) fn real(v: f64) -> String {
    let s = v.to_string();
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

fn expr(out: &mut String, e: &Receptivity, ctx: u8) {
    match e {
        Receptivity::Const(v) => out.push_str(if *v { "true" } else { "false" }),
        Receptivity::Signal(s) => out.push_str(s),
        Receptivity::Compare { signal, op, value } => {
            let _ = write!(out, "{signal} {} {}", op.symbol(), real(*value));
        }
        Receptivity::Rising(s) => {
            let _ = write!(out, "re({s})");
        }
        Receptivity::StepActive(s) => {
            let _ = write!(out, "X({s})");
        }
        Receptivity::Timer { step, seconds } => {
            let _ = write!(out, "tmr({step}, {seconds}s)");
        }
        Receptivity::Not(inner) => {
            out.push('!');
            if matches!(**inner, Receptivity::Compare { .. }) {
                out.push('(');
                expr(out, inner, OR);
                out.push(')');
            } else {
                expr(out, inner, UNARY);
            }
        }
        Receptivity::And(l, r) => binary(out, l, " & ", r, AND, ctx),
        Receptivity::Or(l, r) => binary(out, l, " | ", r, OR, ctx),
    }
}

// Binary operators parse left-associative, so a right operand of the same
// precedence needs parentheses to keep its shape.
fn binary(out: &mut String, l: &Receptivity, op: &str, r: &Receptivity, prec: u8, ctx: u8) {
    let paren = ctx > prec;
    if paren {
        out.push('(');
    }
    expr(out, l, prec);
    out.push_str(op);
    expr(out, r, prec + 1);
    if paren {
        out.push(')');
    }
}

pub(crate) fn receptivity(e: &Receptivity) -> String {
    let mut s = String::new();
    expr(&mut s, e, OR);
    s
}

/// Canonical text of a chart: name, signals, steps, transitions, each
/// group in declaration order and separated by one blank line.
pub fn print_chart(chart: &Chart) -> SourceText {
    let mut groups: Vec<String> = Vec::new();

    if !chart.name.is_empty() {
        groups.push(format!("chart \"{}\"\n", chart.name));
    }

    if !chart.signals.is_empty() {
        let mut g = String::new();
        for sig in &chart.signals {
            let _ = write!(g, "signal {} : {}", sig.name, sig.kind.keyword());
            if let Some(unit) = &sig.unit {
                let _ = write!(g, " unit \"{unit}\"");
            }
            g.push('\n');
        }
        groups.push(g);
    }

    if !chart.steps.is_empty() {
        let mut g = String::new();
        for step in &chart.steps {
            let _ = write!(g, "step {}", step.id);
            if step.initial {
                g.push_str(" initial");
            }
            if step.actions.is_empty() {
                g.push_str(" {}\n");
                continue;
            }
            g.push_str(" {\n");
            for a in &step.actions {
                let kw = match a.kind {
                    ActionKind::Continuous => "do",
                    ActionKind::StoredSet => "set",
                    ActionKind::StoredReset => "reset",
                };
                let _ = write!(g, "  {kw} {}", a.target);
                if a.kind != ActionKind::Continuous && a.trigger == Trigger::OnDeactivation {
                    g.push_str(" on_deactivate");
                }
                g.push_str(";\n");
            }
            g.push_str("}\n");
        }
        groups.push(g);
    }

    if !chart.transitions.is_empty() {
        let mut g = String::new();
        for t in &chart.transitions {
            let _ = writeln!(
                g,
                "trans {} : {} -> {} when {};",
                t.id,
                t.upstream.join(", "),
                t.downstream.join(", "),
                receptivity(&t.receptivity)
            );
        }
        groups.push(g);
    }

    SourceText::new(&groups.join("\n"))
}
