//! Concrete syntax: parsers and pretty-printers for model files (`*.rtn`),
//! run files (`*.run`), and MITL formula strings.

use std::fmt;

use num::Zero;

use crate::mitl::{Interval, MitlFormula};
use crate::model::{
    ActionLabel, Atom, ClockConstraint, ClockUpdate, Edge, Location, Network, NetworkAction,
    Polarity, Rel, TimedAutomaton,
};
use crate::rational::{format_rational, parse_rational, Rational};
use crate::runs::{LassoRun, ParsedRun, ParsedTail, RunShape, RunStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A parser or validation message anchored to a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {}: {}", self.line, self.column, sev, self.message)
    }
}

pub type Diagnostics = Vec<ParseDiagnostic>;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(Rational),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, Diagnostics> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut column = 1usize;
    let mut chars = src.chars().peekable();
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else if c.is_some() {
                column += 1;
            }
            c
        }};
    }
    loop {
        let (l, c) = (line, column);
        let Some(&ch) = chars.peek() else {
            out.push(Token { tok: Tok::Eof, line, column });
            return Ok(out);
        };
        if ch.is_whitespace() {
            bump!();
            continue;
        }
        if ch == '/' {
            // Comment `// …` or the fraction slash (handled inside numbers);
            // a lone slash elsewhere is an error.
            let mut clone = chars.clone();
            clone.next();
            if clone.peek() == Some(&'/') {
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    bump!();
                }
                continue;
            }
            return Err(vec![ParseDiagnostic {
                line: l,
                column: c,
                message: "unexpected `/`".into(),
                severity: Severity::Error,
            }]);
        }
        if ch.is_ascii_alphabetic() || ch == '_' {
            let mut s = String::new();
            while let Some(&n) = chars.peek() {
                if n.is_ascii_alphanumeric() || n == '_' {
                    s.push(n);
                    bump!();
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Ident(s), line: l, column: c });
            continue;
        }
        if ch.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&n) = chars.peek() {
                if n.is_ascii_digit() {
                    s.push(n);
                    bump!();
                } else {
                    break;
                }
            }
            if let Some(&sep) = chars.peek() {
                if sep == '.' || sep == '/' {
                    // Only when followed by a digit; `3.` alone is an error,
                    // and `3//` would be a comment start.
                    let mut clone = chars.clone();
                    clone.next();
                    if clone.peek().is_some_and(|d| d.is_ascii_digit()) {
                        s.push(sep);
                        bump!();
                        while let Some(&n) = chars.peek() {
                            if n.is_ascii_digit() {
                                s.push(n);
                                bump!();
                            } else {
                                break;
                            }
                        }
                    }
                }
            }
            match parse_rational(&s) {
                Ok(r) => out.push(Token { tok: Tok::Number(r), line: l, column: c }),
                Err(e) => {
                    return Err(vec![ParseDiagnostic {
                        line: l,
                        column: c,
                        message: e.to_string(),
                        severity: Severity::Error,
                    }])
                }
            }
            continue;
        }
        let two: Option<&'static str> = {
            let mut clone = chars.clone();
            let a = clone.next();
            let b = clone.peek().copied();
            match (a, b) {
                (Some('-'), Some('>')) => Some("->"),
                (Some(':'), Some('=')) => Some(":="),
                (Some('<'), Some('=')) => Some("<="),
                (Some('>'), Some('=')) => Some(">="),
                (Some('='), Some('=')) => Some("=="),
                (Some('&'), Some('&')) => Some("&&"),
                (Some('|'), Some('|')) => Some("||"),
                _ => None,
            }
        };
        if let Some(sym) = two {
            bump!();
            bump!();
            out.push(Token { tok: Tok::Sym(sym), line: l, column: c });
            continue;
        }
        let one: Option<&'static str> = match ch {
            '{' => Some("{"),
            '}' => Some("}"),
            '(' => Some("("),
            ')' => Some(")"),
            '[' => Some("["),
            ']' => Some("]"),
            ';' => Some(";"),
            ',' => Some(","),
            '!' => Some("!"),
            '?' => Some("?"),
            '<' => Some("<"),
            '>' => Some(">"),
            '=' => Some("="),
            '-' => Some("-"),
            '@' => Some("@"),
            _ => None,
        };
        match one {
            Some(sym) => {
                bump!();
                out.push(Token { tok: Tok::Sym(sym), line: l, column: c });
            }
            None => {
                return Err(vec![ParseDiagnostic {
                    line: l,
                    column: c,
                    message: format!("unexpected character `{ch}`"),
                    severity: Severity::Error,
                }])
            }
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos.min(self.tokens.len() - 1)].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek().tok, Tok::Eof)
    }

    fn error(&self, message: impl Into<String>) -> Diagnostics {
        let t = self.peek();
        vec![ParseDiagnostic {
            line: t.line,
            column: t.column,
            message: message.into(),
            severity: Severity::Error,
        }]
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), Diagnostics> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`")))
        }
    }

    fn at_sym(&self, sym: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(s) if *s == sym)
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.at_sym(sym) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), Diagnostics> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{sym}`")))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, usize, usize), Diagnostics> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Ident(s) => {
                self.advance();
                Ok((s, t.line, t.column))
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn expect_number(&mut self) -> Result<Rational, Diagnostics> {
        let negative = self.eat_sym("-");
        let t = self.peek().clone();
        match t.tok {
            Tok::Number(r) => {
                self.advance();
                Ok(if negative { -r } else { r })
            }
            _ => Err(self.error("expected a rational number")),
        }
    }
}

/// Parses a model file into a network, running all semantic checks (unknown
/// clocks, duplicate locations, labels reused across components, …).
pub fn parse_model(src: &str) -> Result<Network, Diagnostics> {
    let mut p = Parser::new(lex(src)?);
    let mut clocks: Vec<(String, usize, usize)> = Vec::new();
    let mut data_clocks: Vec<String> = Vec::new();
    let mut automata: Vec<TimedAutomaton> = Vec::new();
    let mut positions: Vec<(String, usize, usize)> = Vec::new();
    let mut system: Option<Vec<(String, usize, usize)>> = None;
    let mut diags: Diagnostics = Vec::new();
    while !p.at_eof() {
        if p.at_kw("clock") || p.at_kw("data") {
            let data = p.eat_kw("data");
            p.expect_kw("clock")?;
            loop {
                let (name, l, c) = p.expect_ident("clock name")?;
                if clocks.iter().any(|(n, _, _)| n == &name) {
                    diags.push(ParseDiagnostic {
                        line: l,
                        column: c,
                        message: format!("clock `{name}` declared twice"),
                        severity: Severity::Error,
                    });
                } else {
                    clocks.push((name.clone(), l, c));
                    if data {
                        data_clocks.push(name);
                    }
                }
                if !p.eat_sym(",") {
                    break;
                }
            }
            p.expect_sym(";")?;
        } else if p.at_kw("automaton") {
            let declared: Vec<String> = clocks.iter().map(|(n, _, _)| n.clone()).collect();
            let (a, l, c) = parse_automaton(&mut p, &declared, &mut diags)?;
            if automata.iter().any(|x| x.name == a.name) {
                diags.push(ParseDiagnostic {
                    line: l,
                    column: c,
                    message: format!("automaton `{}` declared twice", a.name),
                    severity: Severity::Error,
                });
            }
            positions.push((a.name.clone(), l, c));
            automata.push(a);
        } else if p.at_kw("system") {
            p.advance();
            let mut names = Vec::new();
            loop {
                names.push(p.expect_ident("automaton name")?);
                if !p.eat_sym(",") {
                    break;
                }
            }
            p.expect_sym(";")?;
            if system.is_some() {
                return Err(p.error("duplicate `system` declaration"));
            }
            system = Some(names);
        } else {
            return Err(p.error("expected `clock`, `data clock`, `automaton`, or `system`"));
        }
    }
    let Some(system) = system else {
        diags.push(ParseDiagnostic {
            line: 1,
            column: 1,
            message: "missing `system` declaration".into(),
            severity: Severity::Error,
        });
        return Err(diags);
    };
    let mut components = Vec::new();
    for (name, l, c) in &system {
        match automata.iter().find(|a| &a.name == name) {
            Some(a) => components.push(a.clone()),
            None => diags.push(ParseDiagnostic {
                line: *l,
                column: *c,
                message: format!("system references undefined automaton `{name}`"),
                severity: Severity::Error,
            }),
        }
    }
    for (name, l, c) in &positions {
        if !system.iter().any(|(n, _, _)| n == name) {
            diags.push(ParseDiagnostic {
                line: *l,
                column: *c,
                message: format!("automaton `{name}` is not part of the system"),
                severity: Severity::Warning,
            });
        }
    }
    // Location labels are propositions of the network signal; sharing one
    // label across components would make effects ambiguous.
    let mut seen_labels: Vec<(String, usize)> = Vec::new();
    for (i, comp) in components.iter().enumerate() {
        for loc in &comp.locations {
            for lab in &loc.labels {
                match seen_labels.iter().find(|(l, _)| l == lab) {
                    Some((_, j)) if *j != i => diags.push(ParseDiagnostic {
                        line: 1,
                        column: 1,
                        message: format!(
                            "label `{lab}` is used by both `{}` and `{}`",
                            components[*j].name, comp.name
                        ),
                        severity: Severity::Error,
                    }),
                    Some(_) => {}
                    None => seen_labels.push((lab.clone(), i)),
                }
            }
        }
    }
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(diags);
    }
    Ok(Network {
        components,
        global_clocks: clocks.into_iter().map(|(n, _, _)| n).collect(),
        data_clocks,
    })
}

fn parse_automaton(
    p: &mut Parser,
    declared_clocks: &[String],
    diags: &mut Diagnostics,
) -> Result<(TimedAutomaton, usize, usize), Diagnostics> {
    p.expect_kw("automaton")?;
    let (name, line, column) = p.expect_ident("automaton name")?;
    p.expect_sym("{")?;
    let mut locations: Vec<Location> = Vec::new();
    let mut initial: Option<String> = None;
    let mut edges: Vec<Edge> = Vec::new();
    let mut used_clocks: Vec<String> = Vec::new();
    while !p.eat_sym("}") {
        if p.at_kw("init") || p.at_kw("location") {
            let is_init = p.eat_kw("init");
            p.expect_kw("location")?;
            let (lname, ll, lc) = p.expect_ident("location name")?;
            if locations.iter().any(|l| l.name == lname) {
                diags.push(ParseDiagnostic {
                    line: ll,
                    column: lc,
                    message: format!("duplicate location `{lname}` in automaton `{name}`"),
                    severity: Severity::Error,
                });
            }
            let mut loc = Location::new(lname.clone());
            p.expect_sym("{")?;
            while !p.eat_sym("}") {
                if p.eat_kw("invariant") {
                    loc.invariant = parse_constraint(p, declared_clocks, &mut used_clocks, diags)?;
                    p.expect_sym(";")?;
                } else if p.eat_kw("label") {
                    loop {
                        let (lab, _, _) = p.expect_ident("label")?;
                        loc.labels.push(lab);
                        if !p.eat_sym(",") {
                            break;
                        }
                    }
                    p.expect_sym(";")?;
                } else {
                    return Err(p.error("expected `invariant`, `label`, or `}`"));
                }
            }
            if is_init {
                if initial.is_some() {
                    diags.push(ParseDiagnostic {
                        line: ll,
                        column: lc,
                        message: format!("automaton `{name}` has more than one init location"),
                        severity: Severity::Error,
                    });
                }
                initial = Some(lname);
            }
            locations.push(loc);
        } else if p.at_kw("edge") {
            p.advance();
            let (src, sl, sc) = p.expect_ident("source location")?;
            p.expect_sym("->")?;
            let (dst, dl, dc) = p.expect_ident("target location")?;
            p.expect_kw("on")?;
            let (aname, _, _) = p.expect_ident("action label")?;
            let polarity = if p.eat_sym("!") {
                Polarity::Send
            } else if p.eat_sym("?") {
                Polarity::Receive
            } else {
                Polarity::Internal
            };
            let guard = if p.eat_kw("when") {
                parse_constraint(p, declared_clocks, &mut used_clocks, diags)?
            } else {
                ClockConstraint::top()
            };
            let mut update = ClockUpdate::none();
            if p.eat_kw("do") {
                loop {
                    let (cl, ul, uc) = p.expect_ident("clock")?;
                    p.expect_sym(":=")?;
                    let v = p.expect_number()?;
                    if !declared_clocks.contains(&cl) {
                        diags.push(ParseDiagnostic {
                            line: ul,
                            column: uc,
                            message: format!("update references undeclared clock `{cl}`"),
                            severity: Severity::Error,
                        });
                    }
                    if !used_clocks.contains(&cl) {
                        used_clocks.push(cl.clone());
                    }
                    update.assignments.push((cl, v));
                    if !p.eat_sym(",") {
                        break;
                    }
                }
            }
            p.expect_sym(";")?;
            for (n, l, c) in [(&src, sl, sc), (&dst, dl, dc)] {
                if !locations.iter().any(|loc| &loc.name == n) {
                    diags.push(ParseDiagnostic {
                        line: l,
                        column: c,
                        message: format!("edge references undeclared location `{n}`"),
                        severity: Severity::Error,
                    });
                }
            }
            edges.push(Edge {
                src,
                guard,
                action: ActionLabel { name: aname, polarity },
                update,
                dst,
            });
        } else {
            return Err(p.error("expected `location`, `init location`, `edge`, or `}`"));
        }
    }
    let initial = match initial {
        Some(i) => i,
        None => {
            diags.push(ParseDiagnostic {
                line,
                column,
                message: format!("automaton `{name}` has no init location"),
                severity: Severity::Error,
            });
            locations.first().map(|l| l.name.clone()).unwrap_or_default()
        }
    };
    Ok((
        TimedAutomaton { name, locations, initial, clocks: used_clocks, edges },
        line,
        column,
    ))
}

fn parse_constraint(
    p: &mut Parser,
    declared: &[String],
    used: &mut Vec<String>,
    diags: &mut Diagnostics,
) -> Result<ClockConstraint, Diagnostics> {
    if p.eat_kw("true") {
        return Ok(ClockConstraint::top());
    }
    let mut atoms = Vec::new();
    loop {
        let (clock, l, c) = p.expect_ident("clock")?;
        let minus = if p.eat_sym("-") {
            let (m, ml, mc) = p.expect_ident("clock")?;
            if !declared.contains(&m) {
                diags.push(ParseDiagnostic {
                    line: ml,
                    column: mc,
                    message: format!("constraint references undeclared clock `{m}`"),
                    severity: Severity::Error,
                });
            }
            if !used.contains(&m) {
                used.push(m.clone());
            }
            Some(m)
        } else {
            None
        };
        let rel = if p.eat_sym("<=") {
            Rel::Le
        } else if p.eat_sym("<") {
            Rel::Lt
        } else if p.eat_sym(">=") {
            Rel::Ge
        } else if p.eat_sym(">") {
            Rel::Gt
        } else if p.eat_sym("==") || p.eat_sym("=") {
            Rel::Eq
        } else {
            return Err(p.error("expected a relation (<, <=, ==, >=, >)"));
        };
        let bound = p.expect_number()?;
        if !declared.contains(&clock) {
            diags.push(ParseDiagnostic {
                line: l,
                column: c,
                message: format!("constraint references undeclared clock `{clock}`"),
                severity: Severity::Error,
            });
        }
        if !used.contains(&clock) {
            used.push(clock.clone());
        }
        atoms.push(Atom { clock, minus, rel, bound });
        if !p.eat_sym("&&") {
            break;
        }
    }
    Ok(ClockConstraint { atoms })
}

/// Parses a run file against a network (component names must resolve). The
/// tail is mandatory: `loop { … }` for lassos, `idle;` or `stuck;` for runs
/// that are maximal without further actions.
pub fn parse_run(src: &str, network: &Network) -> Result<ParsedRun, Diagnostics> {
    let mut p = Parser::new(lex(src)?);
    let mut prefix = Vec::new();
    let mut tail: Option<ParsedTail> = None;
    while !p.at_eof() {
        if p.at_kw("step") {
            prefix.push(parse_step(&mut p, network)?);
        } else if p.at_kw("loop") {
            p.advance();
            p.expect_sym("{")?;
            let mut steps = Vec::new();
            while !p.eat_sym("}") {
                if !p.at_kw("step") {
                    return Err(p.error("expected `step` or `}` in loop"));
                }
                steps.push(parse_step(&mut p, network)?);
            }
            if steps.is_empty() {
                return Err(p.error("loop must contain at least one step"));
            }
            tail = Some(ParsedTail::Loop(steps));
            break;
        } else if p.at_kw("idle") {
            p.advance();
            p.expect_sym(";")?;
            tail = Some(ParsedTail::Idle);
            break;
        } else if p.at_kw("stuck") {
            p.advance();
            p.expect_sym(";")?;
            tail = Some(ParsedTail::Stuck);
            break;
        } else {
            return Err(p.error("expected `step`, `loop`, `idle`, or `stuck`"));
        }
    }
    if !p.at_eof() {
        return Err(p.error("unexpected input after the run tail"));
    }
    match tail {
        Some(tail) => Ok(ParsedRun { prefix, tail }),
        None => Err(p.error(
            "run has no tail: runs are infinite, end with `loop { … }`, `idle;`, or `stuck;`",
        )),
    }
}

fn parse_step(p: &mut Parser, network: &Network) -> Result<RunStep, Diagnostics> {
    p.expect_kw("step")?;
    let t = p.peek().clone();
    let delay = p.expect_number()?;
    if delay < Rational::zero() {
        return Err(vec![ParseDiagnostic {
            line: t.line,
            column: t.column,
            message: "negative delay".into(),
            severity: Severity::Error,
        }]);
    }
    let (label, _, _) = p.expect_ident("action label")?;
    p.expect_sym("@")?;
    let (first, fl, fc) = p.expect_ident("component name")?;
    let first = network.component_index(&first).map_err(|e| {
        vec![ParseDiagnostic {
            line: fl,
            column: fc,
            message: e.to_string(),
            severity: Severity::Error,
        }]
    })?;
    let action = if p.eat_sym("->") {
        let (second, sl, sc) = p.expect_ident("component name")?;
        let second = network.component_index(&second).map_err(|e| {
            vec![ParseDiagnostic {
                line: sl,
                column: sc,
                message: e.to_string(),
                severity: Severity::Error,
            }]
        })?;
        NetworkAction::synchronized(first, second, ActionLabel::send(label))
    } else {
        NetworkAction::internal(first, ActionLabel::internal(label))
    };
    p.expect_sym(";")?;
    Ok(RunStep { delay, action })
}

/// Parses an MITL formula; precedence `!` > `&&` > `||`, with `U` binding
/// loosest. When a network is given, propositions are checked against its
/// location labels.
pub fn parse_formula(src: &str, network: Option<&Network>) -> Result<MitlFormula, Diagnostics> {
    let mut p = Parser::new(lex(src)?);
    let f = parse_until(&mut p)?;
    if !p.at_eof() {
        return Err(p.error("unexpected input after formula"));
    }
    if let Some(net) = network {
        let known: Vec<String> =
            net.components.iter().flat_map(|c| c.locations.iter()).flat_map(|l| l.labels.clone()).collect();
        for prop in f.props() {
            if !known.iter().any(|k| k == prop) {
                return Err(vec![ParseDiagnostic {
                    line: 1,
                    column: 1,
                    message: format!("unknown proposition `{prop}`: not a location label"),
                    severity: Severity::Error,
                }]);
            }
        }
    }
    Ok(f)
}

fn parse_until(p: &mut Parser) -> Result<MitlFormula, Diagnostics> {
    let lhs = parse_or(p)?;
    if p.at_kw("U") {
        p.advance();
        let interval = parse_optional_interval(p)?;
        let rhs = parse_or(p)?;
        return Ok(MitlFormula::Until(interval, Box::new(lhs), Box::new(rhs)));
    }
    Ok(lhs)
}

fn parse_or(p: &mut Parser) -> Result<MitlFormula, Diagnostics> {
    let mut f = parse_and(p)?;
    while p.eat_sym("||") {
        let rhs = parse_and(p)?;
        f = MitlFormula::Or(Box::new(f), Box::new(rhs));
    }
    Ok(f)
}

fn parse_and(p: &mut Parser) -> Result<MitlFormula, Diagnostics> {
    let mut f = parse_unary(p)?;
    while p.eat_sym("&&") {
        let rhs = parse_unary(p)?;
        f = MitlFormula::And(Box::new(f), Box::new(rhs));
    }
    Ok(f)
}

fn parse_unary(p: &mut Parser) -> Result<MitlFormula, Diagnostics> {
    if p.eat_sym("!") {
        return Ok(parse_unary(p)?.not());
    }
    if p.at_kw("G") {
        p.advance();
        let interval = parse_optional_interval(p)?;
        return Ok(MitlFormula::Globally(interval, Box::new(parse_unary(p)?)));
    }
    if p.at_kw("F") {
        p.advance();
        let interval = parse_optional_interval(p)?;
        return Ok(MitlFormula::Eventually(interval, Box::new(parse_unary(p)?)));
    }
    if p.eat_sym("(") {
        let f = parse_until(p)?;
        p.expect_sym(")")?;
        return Ok(f);
    }
    let (name, _, _) = p.expect_ident("proposition")?;
    Ok(MitlFormula::Prop(name))
}

fn parse_optional_interval(p: &mut Parser) -> Result<Interval, Diagnostics> {
    let lo_strict = if p.at_sym("[") {
        false
    } else if p.at_sym("(") {
        // `(` here could also open a parenthesized operand; an interval is
        // only assumed when a number follows directly.
        let next = &p.tokens[(p.pos + 1).min(p.tokens.len() - 1)].tok;
        if !matches!(next, Tok::Number(_)) {
            return Ok(Interval::full());
        }
        true
    } else {
        return Ok(Interval::full());
    };
    let t = p.peek().clone();
    p.advance();
    let lo = p.expect_number()?;
    p.expect_sym(",")?;
    let (hi, hi_strict) = if p.eat_kw("inf") {
        p.expect_sym(")")?;
        (None, true)
    } else {
        let h = p.expect_number()?;
        let strict = if p.eat_sym(")") {
            true
        } else {
            p.expect_sym("]")?;
            false
        };
        (Some(h), strict)
    };
    Interval::new(lo, lo_strict, hi, hi_strict).map_err(|e| {
        vec![ParseDiagnostic {
            line: t.line,
            column: t.column,
            message: e.to_string(),
            severity: Severity::Error,
        }]
    })
}

/// Pretty-prints a network in the model grammar; `parse_model` round-trips it.
pub fn emit_model(network: &Network) -> String {
    let mut out = String::new();
    let plain: Vec<&String> = network
        .global_clocks
        .iter()
        .filter(|c| !network.data_clocks.contains(c))
        .collect();
    if !plain.is_empty() {
        out.push_str(&format!(
            "clock {};\n",
            plain.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        ));
    }
    if !network.data_clocks.is_empty() {
        out.push_str(&format!("data clock {};\n", network.data_clocks.join(", ")));
    }
    out.push('\n');
    for a in &network.components {
        out.push_str(&emit_automaton(a));
        out.push('\n');
    }
    out.push_str(&format!(
        "system {};\n",
        network.components.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(", ")
    ));
    out
}

pub fn emit_automaton(a: &TimedAutomaton) -> String {
    let mut out = format!("automaton {} {{\n", a.name);
    for loc in &a.locations {
        let init = if loc.name == a.initial { "init " } else { "" };
        out.push_str(&format!("  {}location {} {{", init, loc.name));
        let mut body = String::new();
        if !loc.invariant.is_top() {
            body.push_str(&format!(" invariant {};", loc.invariant));
        }
        if !loc.labels.is_empty() {
            body.push_str(&format!(" label {};", loc.labels.join(", ")));
        }
        out.push_str(&body);
        out.push_str(" }\n");
    }
    for e in &a.edges {
        out.push_str(&format!("  edge {} -> {} on {}", e.src, e.dst, e.action));
        if !e.guard.is_top() {
            out.push_str(&format!(" when {}", e.guard));
        }
        if !e.update.assignments.is_empty() {
            let parts: Vec<String> = e
                .update
                .assignments
                .iter()
                .map(|(c, v)| format!("{} := {}", c, format_rational(v)))
                .collect();
            out.push_str(&format!(" do {}", parts.join(", ")));
        }
        out.push_str(";\n");
    }
    out.push_str("}\n");
    out
}

/// Serializes a validated run back to the run grammar.
pub fn emit_run(run: &LassoRun, network: &Network) -> String {
    let mut out = String::new();
    let loop_start = run.loop_start().unwrap_or(run.len());
    for step in &run.steps[..loop_start] {
        out.push_str(&emit_step(step, network, ""));
    }
    match run.shape {
        RunShape::Lasso { .. } => {
            out.push_str("loop {\n");
            for step in &run.steps[loop_start..] {
                out.push_str(&emit_step(step, network, "  "));
            }
            out.push_str("}\n");
        }
        RunShape::Idle => out.push_str("idle;\n"),
        RunShape::Stuck => out.push_str("stuck;\n"),
    }
    out
}

/// Serializes an unvalidated run (e.g. a checker witness) to the run grammar.
pub fn emit_parsed_run(run: &ParsedRun, network: &Network) -> String {
    let mut out = String::new();
    for step in &run.prefix {
        out.push_str(&emit_step(step, network, ""));
    }
    match &run.tail {
        ParsedTail::Loop(steps) => {
            out.push_str("loop {\n");
            for step in steps {
                out.push_str(&emit_step(step, network, "  "));
            }
            out.push_str("}\n");
        }
        ParsedTail::Idle => out.push_str("idle;\n"),
        ParsedTail::Stuck => out.push_str("stuck;\n"),
    }
    out
}

fn emit_step(step: &RunStep, network: &Network, indent: &str) -> String {
    let comp = |i: usize| {
        network
            .components
            .get(i)
            .map(|c| c.name.clone())
            .unwrap_or_else(|| format!("#{i}"))
    };
    let target = if step.action.is_internal() {
        comp(step.action.first)
    } else {
        format!("{} -> {}", comp(step.action.first), comp(step.action.second))
    };
    format!(
        "{}step {} {} @ {};\n",
        indent,
        format_rational(&step.delay),
        step.action.label.name,
        target
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_running_example() {
        let net = parse_model(include_str!("../../../benchmarks/running-example-n2.rtn")).unwrap();
        assert_eq!(net.components.len(), 2);
        assert_eq!(net.components[0].name, "A1");
        assert_eq!(net.components[0].locations.len(), 2);
        assert_eq!(net.components[0].initial, "init");
        assert_eq!(net.global_clocks, vec!["x1".to_string(), "x2".to_string()]);
    }

    #[test]
    fn parses_minimal_model() {
        let net = parse_model("clock x; automaton A { init location l { } } system A;").unwrap();
        assert_eq!(net.components.len(), 1);
        assert_eq!(net.components[0].locations.len(), 1);
    }

    #[test]
    fn undeclared_clock_is_diagnosed_with_position() {
        let src = "clock x;\nautomaton A { init location l { }\n  edge l -> l on a when y > 1;\n}\nsystem A;";
        let diags = parse_model(src).unwrap_err();
        assert!(diags.iter().any(|d| d.message.contains("undeclared clock `y`")));
        let d = diags.iter().find(|d| d.message.contains('y')).unwrap();
        assert_eq!(d.line, 3);
    }

    #[test]
    fn label_reuse_across_components_is_rejected() {
        let src = "automaton A { init location l { label p; } }\n\
                   automaton B { init location m { label p; } }\n\
                   system A, B;";
        let diags = parse_model(src).unwrap_err();
        assert!(diags.iter().any(|d| d.message.contains("label `p`")));
    }

    #[test]
    fn parses_fig1b_run() {
        let net = parse_model(include_str!("../../../benchmarks/running-example-n2.rtn")).unwrap();
        let run = parse_run(include_str!("../../../benchmarks/fig1b.run"), &net).unwrap();
        assert_eq!(run.prefix.len(), 4);
        match &run.tail {
            ParsedTail::Loop(l) => assert_eq!(l.len(), 1),
            other => panic!("expected loop tail, got {other:?}"),
        }
    }

    #[test]
    fn empty_prefix_lasso_is_valid() {
        let net = parse_model("clock x; automaton A { init location l { } edge l -> l on a; } system A;")
            .unwrap();
        let run = parse_run("loop { step 1.0 a @ A; }", &net).unwrap();
        assert!(run.prefix.is_empty());
    }

    #[test]
    fn tailless_run_is_rejected() {
        let net = parse_model("clock x; automaton A { init location l { } edge l -> l on a; } system A;")
            .unwrap();
        let err = parse_run("step 1.0 a @ A;", &net).unwrap_err();
        assert!(err[0].message.contains("tail"));
    }

    #[test]
    fn negative_delay_is_rejected() {
        let net = parse_model("clock x; automaton A { init location l { } edge l -> l on a; } system A;")
            .unwrap();
        let err = parse_run("step -1.0 a @ A; idle;", &net).unwrap_err();
        assert!(err[0].message.contains("negative"));
    }

    #[test]
    fn parses_mutual_exclusion_formula() {
        let f = parse_formula("G[0,inf)(!crit1 || !crit2)", None).unwrap();
        match f {
            MitlFormula::Globally(i, inner) => {
                assert!(i.is_full());
                assert!(inner.is_boolean());
                assert_eq!(inner.props(), vec!["crit1", "crit2"]);
            }
            other => panic!("expected G, got {other:?}"),
        }
        assert!(matches!(
            parse_formula("F crit1", None).unwrap(),
            MitlFormula::Eventually(_, _)
        ));
    }

    #[test]
    fn singleton_interval_is_rejected() {
        let err = parse_formula("G[2,2] p", None).unwrap_err();
        assert!(err[0].message.contains("singleton"));
    }

    #[test]
    fn unknown_proposition_is_flagged_against_network() {
        let net = parse_model(include_str!("../../../benchmarks/running-example-n2.rtn")).unwrap();
        assert!(parse_formula("G !crit1", Some(&net)).is_ok());
        let err = parse_formula("G !nosuch", Some(&net)).unwrap_err();
        assert!(err[0].message.contains("nosuch"));
    }

    #[test]
    fn model_round_trips_through_emit() {
        let net = parse_model(include_str!("../../../benchmarks/running-example-n2.rtn")).unwrap();
        let emitted = emit_model(&net);
        let reparsed = parse_model(&emitted).unwrap();
        let re_emitted = emit_model(&reparsed);
        assert_eq!(emitted, re_emitted);
        assert_eq!(net.components.len(), reparsed.components.len());
        for (a, b) in net.components.iter().zip(&reparsed.components) {
            assert_eq!(a.locations, b.locations);
            assert_eq!(a.edges, b.edges);
            assert_eq!(a.initial, b.initial);
        }
    }
}
