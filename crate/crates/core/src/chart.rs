//! Chart domain model and structural validation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

/// Words the textual format reserves; they can't be used as identifiers.
pub const RESERVED_WORDS: &[&str] = &[
    "chart",
    "signal",
    "step",
    "trans",
    "initial",
    "do",
    "set",
    "reset",
    "when",
    "unit",
    "true",
    "false",
    "re",
    "X",
    "tmr",
    "bool_in",
    "bool_out",
    "analog_in",
    "on_activate",
    "on_deactivate",
];

/// `[A-Za-z_][A-Za-z0-9_]*`, excluding reserved words.
pub fn is_valid_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !RESERVED_WORDS.contains(&s)
}

/// Free text that the textual format can carry inside a quoted string.
pub fn is_valid_text(s: &str) -> bool {
    !s.chars().any(|c| c == '"' || c == '\\' || c.is_control())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    BoolInput,
    BoolOutput,
    AnalogInput,
}

impl SignalKind {
    pub fn keyword(self) -> &'static str {
        match self {
            SignalKind::BoolInput => "bool_in",
            SignalKind::BoolOutput => "bool_out",
            SignalKind::AnalogInput => "analog_in",
        }
    }

    pub fn is_input(self) -> bool {
        !matches!(self, SignalKind::BoolOutput)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalDecl {
    pub name: String,
    pub kind: SignalKind,
    pub unit: Option<String>,
}

impl SignalDecl {
    pub fn bool_input(name: impl Into<String>) -> Self {
        SignalDecl { name: name.into(), kind: SignalKind::BoolInput, unit: None }
    }

    pub fn bool_output(name: impl Into<String>) -> Self {
        SignalDecl { name: name.into(), kind: SignalKind::BoolOutput, unit: None }
    }

    pub fn analog_input(name: impl Into<String>, unit: Option<&str>) -> Self {
        SignalDecl { name: name.into(), kind: SignalKind::AnalogInput, unit: unit.map(str::to_owned) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

/// Transition condition.
#[derive(Debug, Clone, PartialEq)]
pub enum Receptivity {
    Const(bool),
    /// Level of a boolean input.
    Signal(String),
    /// Analog input compared against a constant threshold.
    Compare {
        signal: String,
        op: CmpOp,
        value: f64,
    },
    Not(Box<Receptivity>),
    And(Box<Receptivity>, Box<Receptivity>),
    Or(Box<Receptivity>, Box<Receptivity>),
    /// True on the scan where a boolean input goes from false to true.
    Rising(String),
    /// `X(step)`: the step is active.
    StepActive(String),
    /// True once `step` has been continuously active for `seconds`.
    Timer {
        step: String,
        seconds: f64,
    },
}

impl Receptivity {
    pub fn signal(name: impl Into<String>) -> Self {
        Receptivity::Signal(name.into())
    }

    pub fn compare(signal: impl Into<String>, op: CmpOp, value: f64) -> Self {
        Receptivity::Compare { signal: signal.into(), op, value }
    }

    pub fn rising(name: impl Into<String>) -> Self {
        Receptivity::Rising(name.into())
    }

    pub fn step_active(step: impl Into<String>) -> Self {
        Receptivity::StepActive(step.into())
    }

    pub fn timer(step: impl Into<String>, seconds: f64) -> Self {
        Receptivity::Timer { step: step.into(), seconds }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Receptivity::Not(Box::new(self))
    }

    pub fn and(self, rhs: Receptivity) -> Self {
        Receptivity::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Receptivity) -> Self {
        Receptivity::Or(Box::new(self), Box::new(rhs))
    }

    /// Visits every node in pre-order. The index passed to `f` is the
    /// node's pre-order position, which validation reports as a location.
    pub fn visit_preorder<'a>(&'a self, f: &mut impl FnMut(usize, &'a Receptivity)) {
        fn go<'a>(node: &'a Receptivity, next: &mut usize, f: &mut impl FnMut(usize, &'a Receptivity)) {
            f(*next, node);
            *next += 1;
            match node {
                Receptivity::Not(inner) => go(inner, next, f),
                Receptivity::And(l, r) | Receptivity::Or(l, r) => {
                    go(l, next, f);
                    go(r, next, f);
                }
                _ => {}
            }
        }
        let mut next = 0;
        go(self, &mut next, f);
    }

    /// Names of every signal referenced anywhere in the expression.
    pub fn signals(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_preorder(&mut |_, node| match node {
            Receptivity::Signal(s) | Receptivity::Rising(s) => out.push(s.as_str()),
            Receptivity::Compare { signal, .. } => out.push(signal.as_str()),
            _ => {}
        });
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionKind {
    Continuous,
    StoredSet,
    StoredReset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trigger {
    OnActivation,
    OnDeactivation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub kind: ActionKind,
    pub target: String,
    /// Only meaningful for stored actions; continuous actions carry
    /// `OnActivation`.
    pub trigger: Trigger,
}

impl Action {
    pub fn continuous(target: impl Into<String>) -> Self {
        Action { kind: ActionKind::Continuous, target: target.into(), trigger: Trigger::OnActivation }
    }

    pub fn set(target: impl Into<String>, trigger: Trigger) -> Self {
        Action { kind: ActionKind::StoredSet, target: target.into(), trigger }
    }

    pub fn reset(target: impl Into<String>, trigger: Trigger) -> Self {
        Action { kind: ActionKind::StoredReset, target: target.into(), trigger }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub id: String,
    pub initial: bool,
    pub actions: Vec<Action>,
}

impl Step {
    pub fn new(id: impl Into<String>) -> Self {
        Step { id: id.into(), initial: false, actions: Vec::new() }
    }

    pub fn initial(id: impl Into<String>) -> Self {
        Step { id: id.into(), initial: true, actions: Vec::new() }
    }

    pub fn with_action(mut self, action: Action) -> Self {
        self.actions.push(action);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub id: String,
    pub upstream: Vec<String>,
    pub downstream: Vec<String>,
    pub receptivity: Receptivity,
}

impl Transition {
    pub fn new(id: impl Into<String>, upstream: &[&str], downstream: &[&str], receptivity: Receptivity) -> Self {
        Transition {
            id: id.into(),
            upstream: upstream.iter().map(|s| s.to_string()).collect(),
            downstream: downstream.iter().map(|s| s.to_string()).collect(),
            receptivity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Chart {
    pub name: String,
    pub signals: Vec<SignalDecl>,
    pub steps: Vec<Step>,
    pub transitions: Vec<Transition>,
}

impl Chart {
    pub fn new(name: impl Into<String>) -> Self {
        Chart { name: name.into(), ..Default::default() }
    }

    pub fn signal(&self, name: &str) -> Option<&SignalDecl> {
        self.signals.iter().find(|s| s.name == name)
    }

    pub fn step(&self, id: &str) -> Option<&Step> {
        self.steps.iter().find(|s| s.id == id)
    }

    pub fn step_position(&self, id: &str) -> Option<usize> {
        self.steps.iter().position(|s| s.id == id)
    }

    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.id == id)
    }

    pub fn signals_of(&self, kind: SignalKind) -> impl Iterator<Item = &SignalDecl> {
        self.signals.iter().filter(move |s| s.kind == kind)
    }

    pub fn initial_steps(&self) -> impl Iterator<Item = &Step> {
        self.steps.iter().filter(|s| s.initial)
    }
}

/// Where in a chart a validation error was found. Indices are declaration
/// positions; `node` is a receptivity pre-order index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Location {
    Chart,
    Signal(usize),
    Step(usize),
    Action { step: usize, action: usize },
    Transition(usize),
    Upstream { transition: usize, index: usize },
    Downstream { transition: usize, index: usize },
    Receptivity { transition: usize, node: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValidationCode {
    InvalidIdentifier,
    InvalidText,
    DuplicateSignal,
    DuplicateStep,
    DuplicateTransition,
    NoInitialStep,
    DanglingStepRef,
    EmptyUpstream,
    EmptyDownstream,
    UndeclaredSignal,
    SignalKindMismatch,
    AnalogActionTarget,
    InvalidDuration,
    NonFiniteConstant,
}

impl ValidationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidationCode::InvalidIdentifier => "invalid-identifier",
            ValidationCode::InvalidText => "invalid-text",
            ValidationCode::DuplicateSignal => "duplicate-signal",
            ValidationCode::DuplicateStep => "duplicate-step",
            ValidationCode::DuplicateTransition => "duplicate-transition",
            ValidationCode::NoInitialStep => "no-initial-step",
            ValidationCode::DanglingStepRef => "dangling-step-ref",
            ValidationCode::EmptyUpstream => "empty-upstream",
            ValidationCode::EmptyDownstream => "empty-downstream",
            ValidationCode::UndeclaredSignal => "undeclared-signal",
            ValidationCode::SignalKindMismatch => "signal-kind-mismatch",
            ValidationCode::AnalogActionTarget => "analog-action-target",
            ValidationCode::InvalidDuration => "invalid-duration",
            ValidationCode::NonFiniteConstant => "non-finite-constant",
        }
    }
}

impl fmt::Display for ValidationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError {
    pub code: ValidationCode,
    pub location: Location,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub errors: Vec<ValidationError>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn codes(&self) -> Vec<ValidationCode> {
        self.errors.iter().map(|e| e.code).collect()
    }

    fn push(&mut self, code: ValidationCode, location: Location, message: String) {
        self.errors.push(ValidationError { code, location, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", e.code, e.message)?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of a chart and reports all violations.
pub fn validate_chart(chart: &Chart) -> ValidationReport {
    use ValidationCode as C;
    let mut report = ValidationReport::default();

    if !is_valid_text(&chart.name) {
        report.push(
            C::InvalidText,
            Location::Chart,
            "chart name contains a quote, backslash or control character".into(),
        );
    }

    let mut signal_kinds: HashMap<&str, SignalKind> = HashMap::new();
    for (i, sig) in chart.signals.iter().enumerate() {
        if !is_valid_identifier(&sig.name) {
            report.push(
                C::InvalidIdentifier,
                Location::Signal(i),
                format!("`{}` is not a valid signal name", sig.name),
            );
        }
        if let Some(unit) = &sig.unit {
            if !is_valid_text(unit) {
                report.push(C::InvalidText, Location::Signal(i), format!("unit of `{}` is not printable", sig.name));
            }
        }
        if signal_kinds.insert(&sig.name, sig.kind).is_some() {
            report.push(
                C::DuplicateSignal,
                Location::Signal(i),
                format!("signal `{}` declared more than once", sig.name),
            );
        }
    }

    let mut step_ids: HashSet<&str> = HashSet::new();
    for (i, step) in chart.steps.iter().enumerate() {
        if !is_valid_identifier(&step.id) {
            report.push(C::InvalidIdentifier, Location::Step(i), format!("`{}` is not a valid step id", step.id));
        }
        if !step_ids.insert(&step.id) {
            report.push(C::DuplicateStep, Location::Step(i), format!("step `{}` declared more than once", step.id));
        }
    }
    if !chart.steps.iter().any(|s| s.initial) {
        report.push(C::NoInitialStep, Location::Chart, "chart has no initial step".into());
    }

    for (si, step) in chart.steps.iter().enumerate() {
        for (ai, action) in step.actions.iter().enumerate() {
            let loc = Location::Action { step: si, action: ai };
            match signal_kinds.get(action.target.as_str()) {
                None => {
                    report.push(C::UndeclaredSignal, loc, format!("action target `{}` is not declared", action.target))
                }
                Some(SignalKind::AnalogInput) => report.push(
                    C::AnalogActionTarget,
                    loc,
                    format!("analog signal `{}` can't be an action target", action.target),
                ),
                Some(SignalKind::BoolInput) => report.push(
                    C::SignalKindMismatch,
                    loc,
                    format!("action target `{}` is an input, not a bool_out", action.target),
                ),
                Some(SignalKind::BoolOutput) => {}
            }
        }
    }

    let mut transition_ids: HashSet<&str> = HashSet::new();
    for (ti, t) in chart.transitions.iter().enumerate() {
        if !is_valid_identifier(&t.id) {
            report.push(
                C::InvalidIdentifier,
                Location::Transition(ti),
                format!("`{}` is not a valid transition id", t.id),
            );
        }
        if !transition_ids.insert(&t.id) {
            report.push(
                C::DuplicateTransition,
                Location::Transition(ti),
                format!("transition `{}` declared more than once", t.id),
            );
        }
        if t.upstream.is_empty() {
            report.push(
                C::EmptyUpstream,
                Location::Transition(ti),
                format!("transition `{}` has no upstream step", t.id),
            );
        }
        if t.downstream.is_empty() {
            report.push(
                C::EmptyDownstream,
                Location::Transition(ti),
                format!("transition `{}` has no downstream step", t.id),
            );
        }
        for (index, s) in t.upstream.iter().enumerate() {
            if !step_ids.contains(s.as_str()) {
                report.push(
                    C::DanglingStepRef,
                    Location::Upstream { transition: ti, index },
                    format!("transition `{}` references undeclared step `{s}`", t.id),
                );
            }
        }
        for (index, s) in t.downstream.iter().enumerate() {
            if !step_ids.contains(s.as_str()) {
                report.push(
                    C::DanglingStepRef,
                    Location::Downstream { transition: ti, index },
                    format!("transition `{}` references undeclared step `{s}`", t.id),
                );
            }
        }
        t.receptivity.visit_preorder(&mut |node, expr| {
            let loc = Location::Receptivity { transition: ti, node };
            let mut expect = |name: &str, want: SignalKind, what: &str| match signal_kinds.get(name) {
                None => report.push(C::UndeclaredSignal, loc, format!("signal `{name}` is not declared")),
                Some(&k) if k != want => report.push(
                    C::SignalKindMismatch,
                    loc,
                    format!("{what} needs a {} signal but `{name}` is {}", want.keyword(), k.keyword()),
                ),
                Some(_) => {}
            };
            match expr {
                Receptivity::Signal(s) => expect(s, SignalKind::BoolInput, "a level test"),
                Receptivity::Rising(s) => expect(s, SignalKind::BoolInput, "an edge test"),
                Receptivity::Compare { signal, value, .. } => {
                    expect(signal, SignalKind::AnalogInput, "a comparison");
                    if !value.is_finite() {
                        report.push(C::NonFiniteConstant, loc, format!("comparison constant {value} is not finite"));
                    }
                }
                Receptivity::StepActive(s) => {
                    if !step_ids.contains(s.as_str()) {
                        report.push(C::DanglingStepRef, loc, format!("X({s}) references an undeclared step"));
                    }
                }
                Receptivity::Timer { step, seconds } => {
                    if !step_ids.contains(step.as_str()) {
                        report.push(C::DanglingStepRef, loc, format!("tmr({step}) references an undeclared step"));
                    }
                    if !seconds.is_finite() || *seconds < 0.0 || crate::SimTime::from_secs(*seconds).is_none() {
                        report.push(
                            C::InvalidDuration,
                            loc,
                            format!("timer duration {seconds} must be finite and non-negative"),
                        );
                    }
                }
                Receptivity::Const(_) | Receptivity::Not(_) | Receptivity::And(..) | Receptivity::Or(..) => {}
            }
        });
    }

    report
}

/// Count of references per signal, used for unused-declaration warnings.
pub fn signal_usage(chart: &Chart) -> BTreeMap<&str, usize> {
    let mut usage: BTreeMap<&str, usize> = chart.signals.iter().map(|s| (s.name.as_str(), 0)).collect();
    for step in &chart.steps {
        for a in &step.actions {
            if let Some(n) = usage.get_mut(a.target.as_str()) {
                *n += 1;
            }
        }
    }
    for t in &chart.transitions {
        for s in t.receptivity.signals() {
            if let Some(n) = usage.get_mut(s) {
                *n += 1;
            }
        }
    }
    usage
}
