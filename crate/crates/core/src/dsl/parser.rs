use crate::chart::{
    signal_usage, validate_chart, Action, Chart, CmpOp, Location, Receptivity, SignalDecl, SignalKind, Step,
    Transition, Trigger, ValidationCode, RESERVED_WORDS,
};

use super::lexer::{tokenize, Tok, Token};
use super::{ParseDiagnostic, Parsed, Pos, Severity, SourceText};

/// Spans of the nodes of one receptivity, in pre-order.
struct SpanTree {
    pos: Pos,
    children: Vec<SpanTree>,
}

impl SpanTree {
    fn leaf(pos: Pos) -> Self {
        SpanTree { pos, children: Vec::new() }
    }

    fn flatten(self, out: &mut Vec<Pos>) {
        out.push(self.pos);
        for c in self.children {
            c.flatten(out);
        }
    }
}

#[derive(Default)]
struct Spans {
    chart: Option<Pos>,
    signals: Vec<Pos>,
    steps: Vec<Pos>,
    actions: Vec<Vec<Pos>>,
    transitions: Vec<Pos>,
    upstream: Vec<Vec<Pos>>,
    downstream: Vec<Vec<Pos>>,
    receptivity: Vec<Vec<Pos>>,
}

/// Marker for a syntax error that has already been reported.
struct Reported;

type PResult<T> = Result<T, Reported>;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<ParseDiagnostic>,
    chart: Chart,
    spans: Spans,
    saw_chart_directive: bool,
}

const TOP_LEVEL: &[&str] = &["chart", "signal", "step", "trans"];

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(x) if x == w)
    }

    fn at_top_level(&self) -> bool {
        matches!(&self.peek().tok, Tok::Word(x) if TOP_LEVEL.contains(&x.as_str())) || self.peek().tok == Tok::Eof
    }

    fn error(&mut self, pos: Pos, code: &str, message: impl Into<String>) -> Reported {
        self.diags.push(ParseDiagnostic::error(pos, code, message));
        Reported
    }

    fn unexpected(&mut self, expected: &str) -> Reported {
        let t = self.peek().clone();
        self.error(t.pos, "unexpected-token", format!("expected {expected}, found {}", t.tok.describe()))
    }

    fn expect(&mut self, tok: Tok) -> PResult<Pos> {
        if self.peek().tok == tok {
            Ok(self.advance().pos)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<Pos> {
        if self.at_word(w) {
            Ok(self.advance().pos)
        } else {
            Err(self.unexpected(&format!("`{w}`")))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Pos)> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Word(w) if RESERVED_WORDS.contains(&w.as_str()) => {
                Err(self.error(t.pos, "reserved-word", format!("expected {what}, found reserved word `{w}`")))
            }
            Tok::Word(w) => {
                self.advance();
                Ok((w, t.pos))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn string(&mut self) -> PResult<(String, Pos)> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Str(s) => {
                self.advance();
                Ok((s, t.pos))
            }
            _ => Err(self.unexpected("a quoted string")),
        }
    }

    /// Skips to the next top-level keyword, always consuming at least one
    /// token when called at a non-keyword.
    fn synchronize(&mut self) {
        while !self.at_top_level() {
            self.advance();
        }
    }

    fn file(&mut self) {
        while self.peek().tok != Tok::Eof {
            let start = self.pos;
            let result = match &self.peek().tok {
                Tok::Word(w) if w == "chart" => self.chart_directive(),
                Tok::Word(w) if w == "signal" => self.signal(),
                Tok::Word(w) if w == "step" => self.step(),
                Tok::Word(w) if w == "trans" => self.transition(),
                _ => Err(self.unexpected("`chart`, `signal`, `step` or `trans`")),
            };
            if result.is_err() {
                if self.pos == start {
                    self.advance();
                }
                self.synchronize();
            }
        }
    }

    fn chart_directive(&mut self) -> PResult<()> {
        let kw = self.advance().pos;
        let (name, pos) = self.string()?;
        if self.saw_chart_directive {
            return Err(self.error(kw, "duplicate-chart-directive", "chart name given more than once"));
        }
        self.saw_chart_directive = true;
        self.chart.name = name;
        self.spans.chart = Some(pos);
        Ok(())
    }

    fn signal(&mut self) -> PResult<()> {
        self.advance();
        let (name, pos) = self.ident("a signal name")?;
        self.expect(Tok::Colon)?;
        let kind = match &self.peek().tok {
            Tok::Word(w) if w == "bool_in" => SignalKind::BoolInput,
            Tok::Word(w) if w == "bool_out" => SignalKind::BoolOutput,
            Tok::Word(w) if w == "analog_in" => SignalKind::AnalogInput,
            _ => return Err(self.unexpected("`bool_in`, `bool_out` or `analog_in`")),
        };
        self.advance();
        let unit = if self.at_word("unit") {
            let at = self.advance().pos;
            let (u, _) = self.string()?;
            if kind != SignalKind::AnalogInput {
                return Err(self.error(at, "unit-on-bool", "only analog signals carry a unit"));
            }
            Some(u)
        } else {
            None
        };
        self.chart.signals.push(SignalDecl { name, kind, unit });
        self.spans.signals.push(pos);
        Ok(())
    }

    fn step(&mut self) -> PResult<()> {
        self.advance();
        let (id, pos) = self.ident("a step id")?;
        let initial = if self.at_word("initial") {
            self.advance();
            true
        } else {
            false
        };
        let mut actions = Vec::new();
        let mut action_spans = Vec::new();
        let mut block_ok = true;
        if self.peek().tok == Tok::LBrace {
            self.advance();
            loop {
                match &self.peek().tok {
                    Tok::RBrace => {
                        self.advance();
                        break;
                    }
                    Tok::Eof => {
                        block_ok = false;
                        self.unexpected("`}`");
                        break;
                    }
                    _ if self.at_top_level() => {
                        block_ok = false;
                        self.unexpected("an action or `}`");
                        break;
                    }
                    _ => match self.action() {
                        Ok((a, p)) => {
                            actions.push(a);
                            action_spans.push(p);
                        }
                        Err(Reported) => {
                            // resume at the next action boundary
                            while !matches!(self.peek().tok, Tok::Semi | Tok::RBrace) && !self.at_top_level() {
                                self.advance();
                            }
                            if self.peek().tok == Tok::Semi {
                                self.advance();
                            }
                        }
                    },
                }
            }
        }
        // keep the step even if its block was cut short so that references
        // to it still resolve
        self.chart.steps.push(Step { id, initial, actions });
        self.spans.steps.push(pos);
        self.spans.actions.push(action_spans);
        if block_ok {
            Ok(())
        } else {
            Err(Reported)
        }
    }

    fn action(&mut self) -> PResult<(Action, Pos)> {
        let kw = self.peek().clone();
        let kind = match &kw.tok {
            Tok::Word(w) if w == "do" => 0,
            Tok::Word(w) if w == "set" => 1,
            Tok::Word(w) if w == "reset" => 2,
            _ => return Err(self.unexpected("`do`, `set`, `reset` or `}`")),
        };
        self.advance();
        let (target, pos) = self.ident("an output signal")?;
        let trigger = if self.at_word("on_activate") || self.at_word("on_deactivate") {
            let t = self.advance();
            if kind == 0 {
                return Err(self.error(t.pos, "trigger-on-continuous", "continuous actions take no trigger"));
            }
            if matches!(&t.tok, Tok::Word(w) if w == "on_deactivate") {
                Trigger::OnDeactivation
            } else {
                Trigger::OnActivation
            }
        } else {
            Trigger::OnActivation
        };
        self.expect(Tok::Semi)?;
        let action = match kind {
            0 => Action::continuous(target),
            1 => Action::set(target, trigger),
            _ => Action::reset(target, trigger),
        };
        Ok((action, pos))
    }

    fn step_list(&mut self) -> PResult<(Vec<String>, Vec<Pos>)> {
        let mut ids = Vec::new();
        let mut spans = Vec::new();
        loop {
            let (id, pos) = self.ident("a step id")?;
            ids.push(id);
            spans.push(pos);
            if self.peek().tok == Tok::Comma {
                self.advance();
            } else {
                return Ok((ids, spans));
            }
        }
    }

    fn transition(&mut self) -> PResult<()> {
        self.advance();
        let (id, pos) = self.ident("a transition id")?;
        self.expect(Tok::Colon)?;
        let (upstream, up_spans) = self.step_list()?;
        self.expect(Tok::Arrow)?;
        let (downstream, down_spans) = self.step_list()?;
        self.expect_word("when")?;
        let (receptivity, tree) = self.expr()?;
        self.expect(Tok::Semi)?;

        let mut node_spans = Vec::new();
        tree.flatten(&mut node_spans);
        self.chart.transitions.push(Transition { id, upstream, downstream, receptivity });
        self.spans.transitions.push(pos);
        self.spans.upstream.push(up_spans);
        self.spans.downstream.push(down_spans);
        self.spans.receptivity.push(node_spans);
        Ok(())
    }

    fn expr(&mut self) -> PResult<(Receptivity, SpanTree)> {
        let (mut lhs, mut lt) = self.conjunction()?;
        while self.peek().tok == Tok::Pipe {
            let op = self.advance().pos;
            let (rhs, rt) = self.conjunction()?;
            lhs = lhs.or(rhs);
            lt = SpanTree { pos: op, children: vec![lt, rt] };
        }
        Ok((lhs, lt))
    }

    fn conjunction(&mut self) -> PResult<(Receptivity, SpanTree)> {
        let (mut lhs, mut lt) = self.unary()?;
        while self.peek().tok == Tok::Amp {
            let op = self.advance().pos;
            let (rhs, rt) = self.unary()?;
            lhs = lhs.and(rhs);
            lt = SpanTree { pos: op, children: vec![lt, rt] };
        }
        Ok((lhs, lt))
    }

    fn unary(&mut self) -> PResult<(Receptivity, SpanTree)> {
        if self.peek().tok == Tok::Bang {
            let pos = self.advance().pos;
            let (inner, it) = self.unary()?;
            return Ok((inner.not(), SpanTree { pos, children: vec![it] }));
        }
        self.primary()
    }

    fn call_arg(&mut self, what: &str) -> PResult<(String, Pos)> {
        self.expect(Tok::LParen)?;
        self.ident(what)
    }

    fn primary(&mut self) -> PResult<(Receptivity, SpanTree)> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Word(w) if w == "true" || w == "false" => {
                self.advance();
                Ok((Receptivity::Const(w == "true"), SpanTree::leaf(t.pos)))
            }
            Tok::Word(w) if w == "re" => {
                self.advance();
                let (s, pos) = self.call_arg("a bool_in signal")?;
                self.expect(Tok::RParen)?;
                Ok((Receptivity::Rising(s), SpanTree::leaf(pos)))
            }
            Tok::Word(w) if w == "X" => {
                self.advance();
                let (s, pos) = self.call_arg("a step id")?;
                self.expect(Tok::RParen)?;
                Ok((Receptivity::StepActive(s), SpanTree::leaf(pos)))
            }
            Tok::Word(w) if w == "tmr" => {
                self.advance();
                let (step, pos) = self.call_arg("a step id")?;
                self.expect(Tok::Comma)?;
                let d = self.peek().clone();
                let seconds = match d.tok {
                    Tok::Duration(v) => v,
                    Tok::Number(_) => {
                        return Err(self.error(
                            d.pos,
                            "missing-duration-unit",
                            "timer durations need an `s` suffix, e.g. `5s`",
                        ))
                    }
                    _ => return Err(self.unexpected("a duration such as `5s`")),
                };
                self.advance();
                self.expect(Tok::RParen)?;
                Ok((Receptivity::Timer { step, seconds }, SpanTree::leaf(pos)))
            }
            Tok::Word(_) => {
                let (name, pos) = self.ident("a signal name")?;
                let op = match self.peek().tok {
                    Tok::Lt => Some(CmpOp::Lt),
                    Tok::Le => Some(CmpOp::Le),
                    Tok::Gt => Some(CmpOp::Gt),
                    Tok::Ge => Some(CmpOp::Ge),
                    _ => None,
                };
                match op {
                    None => Ok((Receptivity::Signal(name), SpanTree::leaf(pos))),
                    Some(op) => {
                        self.advance();
                        let value = self.number()?;
                        Ok((Receptivity::Compare { signal: name, op, value }, SpanTree::leaf(pos)))
                    }
                }
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        let negative = if self.peek().tok == Tok::Minus {
            self.advance();
            true
        } else {
            false
        };
        let t = self.peek().clone();
        match t.tok {
            Tok::Number(v) => {
                self.advance();
                Ok(if negative { -v } else { v })
            }
            Tok::Duration(_) => {
                Err(self.error(t.pos, "unexpected-duration", "comparison thresholds are plain numbers"))
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    fn location_pos(&self, loc: Location) -> Pos {
        let start = Pos { line: 1, column: 1 };
        let s = &self.spans;
        match loc {
            Location::Chart => s.chart.unwrap_or(start),
            Location::Signal(i) => s.signals[i],
            Location::Step(i) => s.steps[i],
            Location::Action { step, action } => s.actions[step][action],
            Location::Transition(i) => s.transitions[i],
            Location::Upstream { transition, index } => s.upstream[transition][index],
            Location::Downstream { transition, index } => s.downstream[transition][index],
            Location::Receptivity { transition, node } => s.receptivity[transition][node],
        }
    }

    fn semantic_pass(&mut self, had_syntax_errors: bool) {
        let report = validate_chart(&self.chart);
        for e in report.errors {
            let pos = match (e.code, e.location) {
                // a broken declaration may have been the initial step
                (ValidationCode::NoInitialStep, _) if had_syntax_errors => continue,
                (ValidationCode::NoInitialStep, _) => {
                    self.spans.steps.first().copied().unwrap_or(Pos { line: 1, column: 1 })
                }
                (_, loc) => self.location_pos(loc),
            };
            self.diags.push(ParseDiagnostic::error(pos, e.code.as_str(), e.message));
        }
        let usage = signal_usage(&self.chart);
        for (i, sig) in self.chart.signals.iter().enumerate() {
            if usage.get(sig.name.as_str()) == Some(&0) {
                self.diags.push(ParseDiagnostic {
                    severity: Severity::Warning,
                    line: self.spans.signals[i].line,
                    column: self.spans.signals[i].column,
                    message: format!("signal `{}` is never used", sig.name),
                    code: "unused-signal".into(),
                });
            }
        }
    }
}

/// Parses `.gft` source into a validated chart, or returns every
/// diagnostic found (sorted by position).
pub fn parse_chart(src: &SourceText) -> Result<Parsed, Vec<ParseDiagnostic>> {
    let mut diags = Vec::new();
    let tokens = tokenize(src.as_str(), &mut diags);
    let mut p =
        Parser { tokens, pos: 0, diags, chart: Chart::default(), spans: Spans::default(), saw_chart_directive: false };
    p.file();
    let had_syntax_errors = !p.diags.is_empty();
    p.semantic_pass(had_syntax_errors);

    let mut diags = p.diags;
    diags.sort_by_key(|d| (d.line, d.column));
    if diags.iter().any(|d| d.severity == Severity::Error) {
        Err(diags)
    } else {
        Ok(Parsed { chart: p.chart, warnings: diags })
    }
}
