//! Data model and operational semantics for updatable timed automata and
//! networks of components synchronizing on complementary action labels.

use std::collections::BTreeMap;
use std::fmt;

use num::Zero;
use thiserror::Error;

use crate::rational::{format_rational, Rational};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("component {0} does not participate in the action")]
    UndefinedParticipation(usize),
    #[error("delay of {0} is inadmissible: invariant violated within the window")]
    InadmissibleDelay(String),
    #[error("synchronized edges assign conflicting constants to clock `{0}`")]
    ConflictingUpdate(String),
    #[error("negative delay")]
    NegativeDelay,
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
}

/// Relation symbol of an atomic clock constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rel {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Rel {
    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Rel::Lt => lhs < rhs,
            Rel::Le => lhs <= rhs,
            Rel::Eq => lhs == rhs,
            Rel::Ge => lhs >= rhs,
            Rel::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Eq => "==",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        }
    }
}

/// One atomic constraint: `clock ~ bound` or `clock - minus ~ bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub clock: String,
    pub minus: Option<String>,
    pub rel: Rel,
    pub bound: Rational,
}

impl Atom {
    pub fn single(clock: impl Into<String>, rel: Rel, bound: Rational) -> Self {
        Atom { clock: clock.into(), minus: None, rel, bound }
    }

    pub fn difference(
        clock: impl Into<String>,
        minus: impl Into<String>,
        rel: Rel,
        bound: Rational,
    ) -> Self {
        Atom { clock: clock.into(), minus: Some(minus.into()), rel, bound }
    }

    pub fn holds(&self, val: &ClockValuation) -> bool {
        let lhs = match &self.minus {
            None => val.get(&self.clock),
            Some(y) => val.get(&self.clock) - val.get(y),
        };
        self.rel.holds(&lhs, &self.bound)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.minus {
            None => write!(f, "{} {} {}", self.clock, self.rel.symbol(), format_rational(&self.bound)),
            Some(y) => write!(
                f,
                "{} - {} {} {}",
                self.clock,
                y,
                self.rel.symbol(),
                format_rational(&self.bound)
            ),
        }
    }
}

/// A conjunction of atomic constraints; the empty conjunction is ⊤.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ClockConstraint {
    pub atoms: Vec<Atom>,
}

impl ClockConstraint {
    pub fn top() -> Self {
        ClockConstraint { atoms: Vec::new() }
    }

    pub fn is_top(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn and(mut self, other: &ClockConstraint) -> Self {
        self.atoms.extend(other.atoms.iter().cloned());
        self
    }

    pub fn holds(&self, val: &ClockValuation) -> bool {
        self.atoms.iter().all(|a| a.holds(val))
    }

    /// All clock names mentioned by the constraint.
    pub fn clocks(&self) -> impl Iterator<Item = &str> {
        self.atoms
            .iter()
            .flat_map(|a| std::iter::once(a.clock.as_str()).chain(a.minus.as_deref()))
    }
}

impl fmt::Display for ClockConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return write!(f, "true");
        }
        let parts: Vec<String> = self.atoms.iter().map(|a| a.to_string()).collect();
        write!(f, "{}", parts.join(" && "))
    }
}

/// Resets of clocks to rational constants, applied atomically on an edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ClockUpdate {
    pub assignments: Vec<(String, Rational)>,
}

impl ClockUpdate {
    pub fn none() -> Self {
        ClockUpdate { assignments: Vec::new() }
    }

    pub fn reset(clock: impl Into<String>) -> Self {
        ClockUpdate { assignments: vec![(clock.into(), Rational::zero())] }
    }

    pub fn set(clock: impl Into<String>, value: Rational) -> Self {
        ClockUpdate { assignments: vec![(clock.into(), value)] }
    }

    pub fn value_of(&self, clock: &str) -> Option<&Rational> {
        self.assignments.iter().find(|(c, _)| c == clock).map(|(_, v)| v)
    }

    /// Unions two updates; synchronized pairs must not disagree on any clock.
    pub fn union(&self, other: &ClockUpdate) -> Result<ClockUpdate, ModelError> {
        let mut merged = self.assignments.clone();
        for (c, v) in &other.assignments {
            match merged.iter().find(|(mc, _)| mc == c) {
                Some((_, mv)) if mv != v => return Err(ModelError::ConflictingUpdate(c.clone())),
                Some(_) => {}
                None => merged.push((c.clone(), *v)),
            }
        }
        Ok(ClockUpdate { assignments: merged })
    }

    pub fn apply(&self, val: &mut ClockValuation) {
        for (c, v) in &self.assignments {
            val.values.insert(c.clone(), *v);
        }
    }
}

/// Direction of an action label: plain internal, sender `α!`, or receiver `α?`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Internal,
    Send,
    Receive,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionLabel {
    pub name: String,
    pub polarity: Polarity,
}

impl ActionLabel {
    pub fn internal(name: impl Into<String>) -> Self {
        ActionLabel { name: name.into(), polarity: Polarity::Internal }
    }

    pub fn send(name: impl Into<String>) -> Self {
        ActionLabel { name: name.into(), polarity: Polarity::Send }
    }

    pub fn receive(name: impl Into<String>) -> Self {
        ActionLabel { name: name.into(), polarity: Polarity::Receive }
    }

    /// The complementary label: `α!` pairs with `α?` and vice versa.
    pub fn complement(&self) -> Option<ActionLabel> {
        match self.polarity {
            Polarity::Internal => None,
            Polarity::Send => Some(ActionLabel::receive(self.name.clone())),
            Polarity::Receive => Some(ActionLabel::send(self.name.clone())),
        }
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.polarity {
            Polarity::Internal => write!(f, "{}", self.name),
            Polarity::Send => write!(f, "{}!", self.name),
            Polarity::Receive => write!(f, "{}?", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: String,
    pub guard: ClockConstraint,
    pub action: ActionLabel,
    pub update: ClockUpdate,
    pub dst: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub name: String,
    pub invariant: ClockConstraint,
    pub labels: Vec<String>,
}

impl Location {
    pub fn new(name: impl Into<String>) -> Self {
        Location { name: name.into(), invariant: ClockConstraint::top(), labels: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedAutomaton {
    pub name: String,
    pub locations: Vec<Location>,
    pub initial: String,
    pub clocks: Vec<String>,
    pub edges: Vec<Edge>,
}

impl TimedAutomaton {
    pub fn location(&self, name: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.name == name)
    }

    pub fn invariant(&self, name: &str) -> &ClockConstraint {
        static TOP: ClockConstraint = ClockConstraint { atoms: Vec::new() };
        self.location(name).map(|l| &l.invariant).unwrap_or(&TOP)
    }

    pub fn labels(&self, name: &str) -> &[String] {
        self.location(name).map(|l| l.labels.as_slice()).unwrap_or(&[])
    }

    pub fn edges_from<'a>(&'a self, src: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.src == src)
    }

    /// The set of action labels appearing on this automaton's edges.
    pub fn alphabet(&self) -> Vec<ActionLabel> {
        let mut seen = Vec::new();
        for e in &self.edges {
            if !seen.contains(&e.action) {
                seen.push(e.action.clone());
            }
        }
        seen.sort();
        seen
    }
}

/// A network action `⟨A_first, A_second, label⟩`; internal iff `first == second`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkAction {
    pub first: usize,
    pub second: usize,
    pub label: ActionLabel,
}

impl NetworkAction {
    pub fn internal(component: usize, label: ActionLabel) -> Self {
        NetworkAction { first: component, second: component, label }
    }

    pub fn synchronized(sender: usize, receiver: usize, label: ActionLabel) -> Self {
        NetworkAction { first: sender, second: receiver, label }
    }

    pub fn is_internal(&self) -> bool {
        self.first == self.second
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    pub components: Vec<TimedAutomaton>,
    pub global_clocks: Vec<String>,
    /// Clocks that encode discrete shared data (e.g. a lock id as a clock
    /// pair); contingencies never reset them to run valuations.
    pub data_clocks: Vec<String>,
}

impl Network {
    pub fn component_index(&self, name: &str) -> Result<usize, ModelError> {
        self.components
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| ModelError::UnknownComponent(name.to_string()))
    }

    pub fn initial_state(&self) -> State {
        let locs = self.components.iter().map(|c| c.initial.clone()).collect();
        let mut values = BTreeMap::new();
        for c in &self.global_clocks {
            values.insert(c.clone(), Rational::zero());
        }
        State { locs, vals: ClockValuation { values } }
    }

    /// Labels of the given location vector, unified across components.
    pub fn labels_of(&self, locs: &[String]) -> Vec<String> {
        let mut labels = Vec::new();
        for (c, l) in self.components.iter().zip(locs) {
            labels.extend(c.labels(l).iter().cloned());
        }
        labels
    }
}

/// A total map from clocks to nonnegative rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockValuation {
    pub values: BTreeMap<String, Rational>,
}

impl ClockValuation {
    pub fn zero(clocks: &[String]) -> Self {
        ClockValuation {
            values: clocks.iter().map(|c| (c.clone(), Rational::zero())).collect(),
        }
    }

    pub fn get(&self, clock: &str) -> Rational {
        self.values.get(clock).copied().unwrap_or_else(Rational::zero)
    }

    pub fn advance(&self, delta: &Rational) -> ClockValuation {
        ClockValuation {
            values: self.values.iter().map(|(c, v)| (c.clone(), v + delta)).collect(),
        }
    }
}

impl fmt::Display for ClockValuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .values
            .iter()
            .map(|(c, v)| format!("{}={}", c, format_rational(v)))
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// A concrete network state: one location per component plus a valuation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub locs: Vec<String>,
    pub vals: ClockValuation,
}

/// `participates(A_i, ⟨A_j, A_k, α⟩) := (i = j) ∨ (i = k)`.
pub fn participates(component: usize, action: &NetworkAction) -> bool {
    component == action.first || component == action.second
}

/// The local action label seen by a participating component: `α` on the first
/// slot and the complementary label on the second.
pub fn action_of(component: usize, action: &NetworkAction) -> Result<ActionLabel, ModelError> {
    if component == action.first {
        Ok(action.label.clone())
    } else if component == action.second {
        action
            .label
            .complement()
            .ok_or(ModelError::UndefinedParticipation(component))
    } else {
        Err(ModelError::UndefinedParticipation(component))
    }
}

/// Delay transition of the network semantics. Admissible iff every component
/// invariant holds throughout the window; for conjunctive constraints checking
/// both endpoints suffices, except for convex equalities which we check as
/// written at both ends as well.
pub fn delay_successor(
    state: &State,
    delta: &Rational,
    network: &Network,
) -> Result<State, ModelError> {
    if delta < &Rational::zero() {
        return Err(ModelError::NegativeDelay);
    }
    let end = state.vals.advance(delta);
    for (c, l) in network.components.iter().zip(&state.locs) {
        let inv = c.invariant(l);
        if !inv.holds(&state.vals) || !inv.holds(&end) {
            return Err(ModelError::InadmissibleDelay(format!(
                "invariant {} of {}.{} fails",
                inv, c.name, l
            )));
        }
    }
    Ok(State { locs: state.locs.clone(), vals: end })
}

/// All enabled action transitions from `state`: internal edges plus all `α!/α?`
/// pairings across distinct components. The invariants of every component are
/// re-checked at the new location vector under the updated valuation.
pub fn action_successors(
    state: &State,
    network: &Network,
) -> Result<Vec<(NetworkAction, State)>, ModelError> {
    let mut out = Vec::new();
    let n = network.components.len();
    for (i, comp) in network.components.iter().enumerate() {
        for e in comp.edges_from(&state.locs[i]) {
            match e.action.polarity {
                Polarity::Internal => {
                    if !e.guard.holds(&state.vals) {
                        continue;
                    }
                    let mut vals = state.vals.clone();
                    e.update.apply(&mut vals);
                    let mut locs = state.locs.clone();
                    locs[i] = e.dst.clone();
                    if invariants_hold(network, &locs, &vals) {
                        out.push((
                            NetworkAction::internal(i, e.action.clone()),
                            State { locs, vals },
                        ));
                    }
                }
                Polarity::Send => {
                    let recv = ActionLabel::receive(e.action.name.clone());
                    for j in 0..n {
                        if j == i {
                            continue;
                        }
                        for f in network.components[j].edges_from(&state.locs[j]) {
                            if f.action != recv {
                                continue;
                            }
                            if !e.guard.holds(&state.vals) || !f.guard.holds(&state.vals) {
                                continue;
                            }
                            let update = e.update.union(&f.update)?;
                            let mut vals = state.vals.clone();
                            update.apply(&mut vals);
                            let mut locs = state.locs.clone();
                            locs[i] = e.dst.clone();
                            locs[j] = f.dst.clone();
                            if invariants_hold(network, &locs, &vals) {
                                out.push((
                                    NetworkAction::synchronized(i, j, e.action.clone()),
                                    State { locs, vals },
                                ));
                            }
                        }
                    }
                }
                Polarity::Receive => {}
            }
        }
    }
    Ok(out)
}

fn invariants_hold(network: &Network, locs: &[String], vals: &ClockValuation) -> bool {
    network
        .components
        .iter()
        .zip(locs)
        .all(|(c, l)| c.invariant(l).holds(vals))
}

/// Joins a pair of location names into a product location name; stays a
/// valid identifier so emitted products parse back through the grammar.
pub fn pair_name(a: &str, b: &str) -> String {
    format!("{a}_{b}")
}

/// Synchronous product on identical action labels. Labels come from the first
/// (component) operand; the trace operand must be label-free. Guards and
/// invariants are conjoined, updates unioned. Only locations reachable from
/// the initial pair are kept.
pub fn intersect_trace(component: &TimedAutomaton, trace: &TimedAutomaton) -> TimedAutomaton {
    let initial = pair_name(&component.initial, &trace.initial);
    let mut locations: Vec<Location> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut stack = vec![(component.initial.clone(), trace.initial.clone())];
    let mut seen = vec![(component.initial.clone(), trace.initial.clone())];
    while let Some((cl, tl)) = stack.pop() {
        let name = pair_name(&cl, &tl);
        let invariant = component.invariant(&cl).clone().and(trace.invariant(&tl));
        let labels = component.labels(&cl).to_vec();
        locations.push(Location { name: name.clone(), invariant, labels });
        for ce in component.edges_from(&cl) {
            for te in trace.edges_from(&tl) {
                if ce.action != te.action {
                    continue;
                }
                let update = ce
                    .update
                    .union(&te.update)
                    .expect("trace automata only reset fresh clocks");
                edges.push(Edge {
                    src: name.clone(),
                    guard: ce.guard.clone().and(&te.guard),
                    action: ce.action.clone(),
                    update,
                    dst: pair_name(&ce.dst, &te.dst),
                });
                let pair = (ce.dst.clone(), te.dst.clone());
                if !seen.contains(&pair) {
                    seen.push(pair.clone());
                    stack.push(pair);
                }
            }
        }
    }
    let mut clocks = component.clocks.clone();
    for c in &trace.clocks {
        if !clocks.contains(c) {
            clocks.push(c.clone());
        }
    }
    TimedAutomaton {
        name: format!("{}&{}", component.name, trace.name),
        locations,
        initial,
        clocks,
        edges,
    }
}
