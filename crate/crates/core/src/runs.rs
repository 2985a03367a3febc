//! Lasso-shaped runs: validation against a network, local projections,
//! event extraction, signals, and MITL evaluation on concrete runs.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use num::Zero;
use thiserror::Error;

use crate::mitl::{MitlError, MitlFormula};
use crate::model::{
    action_of, action_successors, delay_successor, participates, ActionLabel, Atom, Network,
    NetworkAction, Rel, State,
};
use crate::rational::{format_rational, Rational};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RunError {
    #[error("step {step}: invalid transition: {reason}")]
    InvalidTransition { step: usize, reason: String },
    #[error("lasso does not close: {0}")]
    LoopMismatch(String),
    #[error("loop section is empty")]
    EmptyLoop,
    #[error("loop has zero total delay (zeno lasso)")]
    ZenoLoop,
    #[error("idle tail is not admissible: invariant of `{0}` bounds time")]
    IdleBounded(String),
    #[error("stuck tail is not admissible: action `{0}` stays enabled")]
    NotStuck(String),
    #[error("run needs a loop, idle, or stuck tail")]
    MissingTail,
    #[error(transparent)]
    Mitl(#[from] MitlError),
    #[error("index {0} out of range")]
    IndexOutOfRange(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunStep {
    pub delay: Rational,
    pub action: NetworkAction,
}

/// A parsed run before validation: delays and actions only, no states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRun {
    pub prefix: Vec<RunStep>,
    pub tail: ParsedTail,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedTail {
    Loop(Vec<RunStep>),
    Idle,
    Stuck,
}

/// How a validated run continues after its listed steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunShape {
    /// Steps from `loop_start` repeat forever.
    Lasso { loop_start: usize },
    /// The final state delays forever without further actions.
    Idle,
    /// No further action ever becomes enabled; time freezes at the final
    /// invariant bound.
    Stuck,
}

/// A validated run: steps (prefix followed by the loop, if any), shape, and
/// the reconstructed state at every position (`states[k]` is reached after
/// `k` steps).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LassoRun {
    pub steps: Vec<RunStep>,
    pub shape: RunShape,
    pub states: Vec<State>,
}

impl LassoRun {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn loop_start(&self) -> Option<usize> {
        match self.shape {
            RunShape::Lasso { loop_start } => Some(loop_start),
            _ => None,
        }
    }

    /// `dst(k) = k` for `k ≠ p` and `dst(p) = n` on lasso runs; the identity
    /// (capped at `p`) on finite runs.
    pub fn dst_index(&self, k: usize) -> Result<usize, RunError> {
        let p = self.len();
        if k == 0 || k > p {
            return Err(RunError::IndexOutOfRange(k));
        }
        Ok(match self.shape {
            RunShape::Lasso { loop_start } if k == p => loop_start,
            _ => k,
        })
    }

    /// Total delay of one loop traversal.
    pub fn period(&self) -> Option<Rational> {
        self.loop_start()
            .map(|n| self.steps[n..].iter().map(|s| s.delay).sum())
    }

    /// Absolute time after `k` steps of the first unfolding.
    pub fn time_at(&self, k: usize) -> Rational {
        self.steps[..k].iter().map(|s| s.delay).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceShape {
    Lasso { loop_start: usize },
    Finite,
}

/// A per-component trace: local delays (cumulated between the component's
/// own actions) and local action labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalTrace {
    pub steps: Vec<(Rational, ActionLabel)>,
    pub shape: TraceShape,
}

impl LocalTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn dst_index(&self, k: usize) -> Result<usize, RunError> {
        let p = self.len();
        if k == 0 || k > p {
            return Err(RunError::IndexOutOfRange(k));
        }
        Ok(match self.shape {
            TraceShape::Lasso { loop_start } if k == p => loop_start,
            TraceShape::Lasso { .. } | TraceShape::Finite => k,
        })
    }
}

impl fmt::Display for LocalTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (d, a)) in self.steps.iter().enumerate() {
            if let TraceShape::Lasso { loop_start } = self.shape {
                if i == loop_start {
                    write!(f, "(")?;
                }
            }
            write!(f, "<{},{}>", format_rational(d), a)?;
        }
        match self.shape {
            TraceShape::Lasso { .. } => write!(f, ")^w"),
            TraceShape::Finite => Ok(()),
        }
    }
}

/// A single cause atom: a delay value or action label at a local index of a
/// component.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Delay(Rational),
    Action(ActionLabel),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub component: usize,
    pub index: usize,
    pub kind: EventKind,
}

impl Event {
    pub fn delay(component: usize, index: usize, value: Rational) -> Self {
        Event { component, index, kind: EventKind::Delay(value) }
    }

    pub fn action(component: usize, index: usize, label: ActionLabel) -> Self {
        Event { component, index, kind: EventKind::Action(label) }
    }
}

pub type EventSet = BTreeSet<Event>;

/// Renders an event in the CLI literal syntax: `label@index:comp` for actions
/// and `delay@index:comp=value` for delays.
pub fn format_event(event: &Event, network: &Network) -> String {
    let comp = network
        .components
        .get(event.component)
        .map(|c| c.name.clone())
        .unwrap_or_else(|| format!("#{}", event.component));
    match &event.kind {
        EventKind::Action(label) => format!("{}@{}:{}", label, event.index, comp),
        EventKind::Delay(value) => {
            format!("delay@{}:{}={}", event.index, comp, format_rational(value))
        }
    }
}

/// Simulates a parsed run on the network, reconstructing states, and checks
/// the tail: loop closure (with the drift tolerance described below), an
/// unbounded invariant for `idle`, or permanently disabled actions for
/// `stuck`.
///
/// Loop closure tolerance: a clock whose value differs between the start and
/// the end of the loop is accepted iff the loop never observes it (in a taken
/// guard or an occupied location invariant) before resetting it. Such drift
/// cannot influence any future transition, so the lasso still denotes a real
/// run even though the printed valuations do not stabilize.
pub fn validate_run(network: &Network, parsed: &ParsedRun) -> Result<LassoRun, RunError> {
    let loop_steps: &[RunStep] = match &parsed.tail {
        ParsedTail::Loop(l) => l,
        _ => &[],
    };
    for (i, s) in parsed.prefix.iter().chain(loop_steps).enumerate() {
        if s.delay < Rational::zero() {
            return Err(RunError::InvalidTransition {
                step: i + 1,
                reason: "negative delay".into(),
            });
        }
    }
    match &parsed.tail {
        ParsedTail::Idle => {
            let states = find_path(network, &parsed.prefix, &mut |path| {
                check_idle(network, path.last().unwrap())
            })?;
            Ok(LassoRun { steps: parsed.prefix.clone(), shape: RunShape::Idle, states })
        }
        ParsedTail::Stuck => {
            let states = find_path(network, &parsed.prefix, &mut |path| {
                check_stuck(network, path.last().unwrap())
            })?;
            Ok(LassoRun { steps: parsed.prefix.clone(), shape: RunShape::Stuck, states })
        }
        ParsedTail::Loop(loop_steps) => {
            if loop_steps.is_empty() {
                return Err(RunError::EmptyLoop);
            }
            let period: Rational = loop_steps.iter().map(|s| s.delay).sum();
            if period.is_zero() {
                return Err(RunError::ZenoLoop);
            }
            let n = parsed.prefix.len();
            let l = loop_steps.len();
            // Simulate the loop twice so closure is checked from the
            // (possibly drifted) state after the first traversal as well.
            let mut all: Vec<RunStep> = parsed.prefix.clone();
            all.extend(loop_steps.iter().cloned());
            all.extend(loop_steps.iter().cloned());
            let states = find_path(network, &all, &mut |path| {
                check_loop_closure(network, path, loop_steps, n, l)
            })?;
            let mut steps = parsed.prefix.clone();
            steps.extend(loop_steps.iter().cloned());
            Ok(LassoRun {
                steps,
                shape: RunShape::Lasso { loop_start: n },
                states: states[..=n + l].to_vec(),
            })
        }
    }
}

/// Depth-first search over the (possibly ambiguous) matching edges of every
/// step; returns the states of the first full path accepted by `accept`.
fn find_path(
    network: &Network,
    steps: &[RunStep],
    accept: &mut dyn FnMut(&[State]) -> Result<(), RunError>,
) -> Result<Vec<State>, RunError> {
    let mut path = vec![network.initial_state()];
    let mut deepest: (usize, String) = (0, "no transition attempted".into());
    let mut accept_err: Option<RunError> = None;
    if search(network, steps, &mut path, &mut deepest, &mut accept_err, accept) {
        Ok(path)
    } else if let Some(e) = accept_err {
        Err(e)
    } else {
        Err(RunError::InvalidTransition { step: deepest.0 + 1, reason: deepest.1 })
    }
}

fn search(
    network: &Network,
    steps: &[RunStep],
    path: &mut Vec<State>,
    deepest: &mut (usize, String),
    accept_err: &mut Option<RunError>,
    accept: &mut dyn FnMut(&[State]) -> Result<(), RunError>,
) -> bool {
    let k = path.len() - 1;
    if k == steps.len() {
        return match accept(path) {
            Ok(()) => true,
            Err(e) => {
                *accept_err = Some(e);
                false
            }
        };
    }
    match step_successors(network, path.last().unwrap(), &steps[k]) {
        Err(reason) => {
            if k >= deepest.0 {
                *deepest = (k, reason);
            }
            false
        }
        Ok(succs) => {
            for s in succs {
                path.push(s);
                if search(network, steps, path, deepest, accept_err, accept) {
                    return true;
                }
                path.pop();
            }
            false
        }
    }
}

fn step_successors(network: &Network, state: &State, step: &RunStep) -> Result<Vec<State>, String> {
    let delayed = delay_successor(state, &step.delay, network).map_err(|e| e.to_string())?;
    let succs = action_successors(&delayed, network).map_err(|e| e.to_string())?;
    let matching: Vec<State> = succs
        .into_iter()
        .filter(|(a, _)| a == &step.action)
        .map(|(_, s)| s)
        .collect();
    if matching.is_empty() {
        Err(format!(
            "action {} by component {} is not enabled after delaying {}",
            step.action.label,
            network
                .components
                .get(step.action.first)
                .map(|c| c.name.as_str())
                .unwrap_or("?"),
            format_rational(&step.delay)
        ))
    } else {
        Ok(matching)
    }
}

/// Accepts a doubly-unrolled loop path iff locations close and every drifting
/// clock is unobserved (guards and occupied invariants) before its first reset
/// in the loop. Drift of such clocks cannot influence any later transition.
fn check_loop_closure(
    network: &Network,
    path: &[State],
    loop_steps: &[RunStep],
    n: usize,
    l: usize,
) -> Result<(), RunError> {
    let entry = &path[n];
    let after_one = &path[n + l];
    let after_two = &path[n + 2 * l];
    if after_one.locs != entry.locs || after_two.locs != entry.locs {
        return Err(RunError::LoopMismatch(format!(
            "locations at loop close ({}) differ from loop start ({})",
            after_one.locs.join(","),
            entry.locs.join(",")
        )));
    }
    let observed = loop_observations(network, path, loop_steps, n);
    for (clock, v0) in &entry.vals.values {
        let v1 = after_one.vals.get(clock);
        let v2 = after_two.vals.get(clock);
        if (&v1 != v0 || v2 != v1) && observed.contains(clock) {
            return Err(RunError::LoopMismatch(format!(
                "clock `{clock}` drifts from {} to {} and is observed in the loop before \
                 being reset",
                format_rational(v0),
                format_rational(&v1)
            )));
        }
    }
    Ok(())
}

/// Clocks read (via a taken guard or an occupied location invariant) in the
/// first loop traversal before their first reset there.
fn loop_observations(
    network: &Network,
    path: &[State],
    loop_steps: &[RunStep],
    n: usize,
) -> HashSet<String> {
    let mut reset: HashSet<String> = HashSet::new();
    let mut observed: HashSet<String> = HashSet::new();
    let observe = |clock: &str, reset: &HashSet<String>, observed: &mut HashSet<String>| {
        if !reset.contains(clock) {
            observed.insert(clock.to_string());
        }
    };
    for (j, step) in loop_steps.iter().enumerate() {
        let before = &path[n + j];
        let after = &path[n + j + 1];
        for (c, loc) in network.components.iter().zip(&before.locs) {
            for clock in c.invariant(loc).clocks() {
                observe(clock, &reset, &mut observed);
            }
        }
        let delayed = before.vals.advance(&step.delay);
        let comps: &[usize] = if step.action.is_internal() {
            &[step.action.first]
        } else {
            &[step.action.first, step.action.second]
        };
        // Resets count only if every edge consistent with the observed
        // source/target pair performs them.
        let mut step_resets: Option<HashSet<String>> = None;
        for &i in comps {
            let Ok(local) = action_of(i, &step.action) else { continue };
            let comp = &network.components[i];
            let mut comp_resets: Option<HashSet<String>> = None;
            for e in comp.edges_from(&before.locs[i]) {
                if e.action == local
                    && e.dst == after.locs[i]
                    && e.guard.holds(&delayed)
                {
                    for clock in e.guard.clocks() {
                        observe(clock, &reset, &mut observed);
                    }
                    let r: HashSet<String> =
                        e.update.assignments.iter().map(|(c, _)| c.clone()).collect();
                    comp_resets = Some(match comp_resets {
                        None => r,
                        Some(acc) => acc.intersection(&r).cloned().collect(),
                    });
                }
            }
            if let Some(r) = comp_resets {
                step_resets = Some(match step_resets {
                    None => r,
                    Some(acc) => acc.union(&r).cloned().collect(),
                });
            }
        }
        if let Some(r) = step_resets {
            reset.extend(r);
        }
    }
    for (c, loc) in network.components.iter().zip(&path[n + loop_steps.len()].locs) {
        for clock in c.invariant(loc).clocks() {
            observe(clock, &reset, &mut observed);
        }
    }
    observed
}

fn check_idle(network: &Network, state: &State) -> Result<(), RunError> {
    for (c, l) in network.components.iter().zip(&state.locs) {
        for atom in &c.invariant(l).atoms {
            if atom.minus.is_none() && matches!(atom.rel, Rel::Lt | Rel::Le | Rel::Eq) {
                return Err(RunError::IdleBounded(format!("{}.{}", c.name, l)));
            }
        }
    }
    Ok(())
}

fn check_stuck(network: &Network, state: &State) -> Result<(), RunError> {
    // The maximal admissible delay window at `state`.
    let window = invariant_window(network, state);
    let n = network.components.len();
    for (i, comp) in network.components.iter().enumerate() {
        for e in comp.edges_from(&state.locs[i]) {
            match e.action.polarity {
                crate::model::Polarity::Internal => {
                    let mut w = window.clone();
                    constrain_by_atoms(&mut w, &e.guard.atoms, &state.vals, None);
                    constrain_target_invariant(&mut w, network, state, &[(i, e)]);
                    if !w.is_empty() {
                        return Err(RunError::NotStuck(e.action.name.clone()));
                    }
                }
                crate::model::Polarity::Send => {
                    let recv = ActionLabel::receive(e.action.name.clone());
                    for j in 0..n {
                        if j == i {
                            continue;
                        }
                        for f in network.components[j].edges_from(&state.locs[j]) {
                            if f.action != recv {
                                continue;
                            }
                            let mut w = window.clone();
                            constrain_by_atoms(&mut w, &e.guard.atoms, &state.vals, None);
                            constrain_by_atoms(&mut w, &f.guard.atoms, &state.vals, None);
                            constrain_target_invariant(&mut w, network, state, &[(i, e), (j, f)]);
                            if !w.is_empty() {
                                return Err(RunError::NotStuck(e.action.name.clone()));
                            }
                        }
                    }
                }
                crate::model::Polarity::Receive => {}
            }
        }
    }
    Ok(())
}

/// A δ-interval `[lo, hi]` with strictness flags; used to decide whether a
/// guard can ever fire within the invariant window of a state.
#[derive(Debug, Clone)]
pub(crate) struct DeltaWindow {
    lo: Rational,
    lo_strict: bool,
    hi: Option<Rational>,
    hi_strict: bool,
    empty: bool,
}

impl DeltaWindow {
    pub(crate) fn nonneg() -> Self {
        DeltaWindow {
            lo: Rational::zero(),
            lo_strict: false,
            hi: None,
            hi_strict: false,
            empty: false,
        }
    }

    pub(crate) fn is_empty(&self) -> bool {
        if self.empty {
            return true;
        }
        match &self.hi {
            None => false,
            Some(h) => {
                !(self.lo < *h || (self.lo == *h && !self.lo_strict && !self.hi_strict))
            }
        }
    }

    fn require_lower(&mut self, b: Rational, strict: bool) {
        if b > self.lo || (b == self.lo && strict) {
            self.lo = b;
            self.lo_strict = strict;
        }
    }

    fn require_upper(&mut self, b: Rational, strict: bool) {
        match &self.hi {
            None => {
                self.hi = Some(b);
                self.hi_strict = strict;
            }
            Some(h) => {
                if b < *h || (b == *h && strict) {
                    self.hi = Some(b);
                    self.hi_strict = strict;
                }
            }
        }
    }

    fn require_const(&mut self, holds: bool) {
        if !holds {
            self.empty = true;
        }
    }
}

/// Constrains the δ-window by atoms evaluated at `vals + δ`, where clocks in
/// `updated` have been replaced by constants (used for target invariants).
pub(crate) fn constrain_by_atoms(
    w: &mut DeltaWindow,
    atoms: &[Atom],
    vals: &crate::model::ClockValuation,
    updated: Option<&crate::model::ClockUpdate>,
) {
    for atom in atoms {
        let value_of = |clock: &str| -> (Rational, bool) {
            // Returns (base value, advances with δ).
            if let Some(u) = updated {
                if let Some(v) = u.value_of(clock) {
                    return (*v, false);
                }
            }
            (vals.get(clock), true)
        };
        let (v1, adv1) = value_of(&atom.clock);
        match &atom.minus {
            None => {
                // v1 (+δ) rel bound
                if adv1 {
                    let b = atom.bound - v1;
                    match atom.rel {
                        Rel::Lt => w.require_upper(b, true),
                        Rel::Le => w.require_upper(b, false),
                        Rel::Eq => {
                            w.require_lower(b, false);
                            w.require_upper(b, false);
                        }
                        Rel::Ge => w.require_lower(b, false),
                        Rel::Gt => w.require_lower(b, true),
                    }
                } else {
                    w.require_const(atom.rel.holds(&v1, &atom.bound));
                }
            }
            Some(y) => {
                let (v2, adv2) = value_of(y);
                if adv1 == adv2 {
                    w.require_const(atom.rel.holds(&(v1 - v2), &atom.bound));
                } else if adv1 {
                    // (v1 + δ) - v2 rel bound  →  δ rel bound - v1 + v2
                    let b = atom.bound - v1 + v2;
                    match atom.rel {
                        Rel::Lt => w.require_upper(b, true),
                        Rel::Le => w.require_upper(b, false),
                        Rel::Eq => {
                            w.require_lower(b, false);
                            w.require_upper(b, false);
                        }
                        Rel::Ge => w.require_lower(b, false),
                        Rel::Gt => w.require_lower(b, true),
                    }
                } else {
                    // v1 - (v2 + δ) rel bound  →  δ inv-rel v1 - v2 - bound
                    let b = v1 - v2 - atom.bound;
                    match atom.rel {
                        Rel::Lt => w.require_lower(b, true),
                        Rel::Le => w.require_lower(b, false),
                        Rel::Eq => {
                            w.require_lower(b, false);
                            w.require_upper(b, false);
                        }
                        Rel::Ge => w.require_upper(b, false),
                        Rel::Gt => w.require_upper(b, true),
                    }
                }
            }
        }
    }
}

fn invariant_window(network: &Network, state: &State) -> DeltaWindow {
    let mut w = DeltaWindow::nonneg();
    for (c, l) in network.components.iter().zip(&state.locs) {
        constrain_by_atoms(&mut w, &c.invariant(l).atoms, &state.vals, None);
    }
    w
}

fn constrain_target_invariant(
    w: &mut DeltaWindow,
    network: &Network,
    state: &State,
    taken: &[(usize, &crate::model::Edge)],
) {
    let mut update = crate::model::ClockUpdate::none();
    for (_, e) in taken {
        match update.union(&e.update) {
            Ok(u) => update = u,
            Err(_) => {
                w.require_const(false);
                return;
            }
        }
    }
    for (i, comp) in network.components.iter().enumerate() {
        let loc = taken
            .iter()
            .find(|(j, _)| *j == i)
            .map(|(_, e)| e.dst.as_str())
            .unwrap_or(state.locs[i].as_str());
        constrain_by_atoms(w, &comp.invariant(loc).atoms, &state.vals, Some(&update));
    }
}

/// Local projection of a validated run onto component `k`.
///
/// Delays cumulate the global delays since the component's previous action
/// (with the `j0 := 1` convention for the first one). Steps inside the loop
/// use the periodic reading: their delay is measured from the previous loop
/// participation, wrapping around the loop — this matches the trace the
/// intervention automaton enforces at every iteration.
pub fn local_projection(run: &LassoRun, k: usize) -> LocalTrace {
    let parts: Vec<usize> = (1..=run.len())
        .filter(|j| participates(k, &run.steps[j - 1].action))
        .collect();
    let times: Vec<Rational> = (0..=run.len()).map(|j| run.time_at(j)).collect();
    let loop_start_global = run.loop_start();
    let local_loop_start = loop_start_global.and_then(|n| {
        let idx = parts.iter().position(|&j| j > n);
        idx
    });
    let mut steps = Vec::new();
    for (m, &j) in parts.iter().enumerate() {
        let label = action_of(k, &run.steps[j - 1].action).expect("participant");
        let delay = match (local_loop_start, loop_start_global) {
            (Some(ls), Some(n)) if m >= ls => {
                // Periodic reading: previous participation inside the loop,
                // wrapping by one period for the first loop participation.
                let period = times[run.len()] - times[n];
                if m == ls {
                    let last = *parts.last().unwrap();
                    times[j] - (times[last] - period)
                } else {
                    times[j] - times[parts[m - 1]]
                }
            }
            _ => {
                if m == 0 {
                    times[j]
                } else {
                    times[j] - times[parts[m - 1]]
                }
            }
        };
        steps.push((delay, label));
    }
    let shape = match local_loop_start {
        Some(ls) => TraceShape::Lasso { loop_start: ls },
        None => TraceShape::Finite,
    };
    LocalTrace { steps, shape }
}

/// The sequence of local locations of component `k`: the location before any
/// action, then after each participation. For lasso-shaped projections the
/// sequence is truncated to one unfolding (`p` entries, wrapping via `dst`);
/// finite projections have `m + 1` entries.
pub fn local_locations(run: &LassoRun, k: usize) -> Vec<String> {
    let parts: Vec<usize> = (1..=run.len())
        .filter(|j| participates(k, &run.steps[j - 1].action))
        .collect();
    let mut seq = vec![run.states[0].locs[k].clone()];
    for &j in &parts {
        seq.push(run.states[j].locs[k].clone());
    }
    let trace = local_projection(run, k);
    match trace.shape {
        TraceShape::Lasso { .. } => {
            // One entry per unfolded position 0..p-1; entry p coincides with
            // entry dst(p) by loop closure.
            seq.truncate(trace.len());
            seq
        }
        TraceShape::Finite => seq,
    }
}

/// All events of a validated run: delay and action events of every local
/// projection, with indices over one prefix+loop unfolding.
pub fn events_of_run(run: &LassoRun, network: &Network) -> EventSet {
    let mut out = EventSet::new();
    for k in 0..network.components.len() {
        let trace = local_projection(run, k);
        for (i, (d, a)) in trace.steps.iter().enumerate() {
            out.insert(Event::delay(k, i + 1, *d));
            out.insert(Event::action(k, i + 1, a.clone()));
        }
    }
    out
}

/// `C` filtered to the events of component `k`, dropping the component tag.
pub fn filter_component(set: &EventSet, k: usize) -> Vec<(usize, EventKind)> {
    set.iter()
        .filter(|e| e.component == k)
        .map(|e| (e.index, e.kind.clone()))
        .collect()
}

/// `ρ ⊨ C` iff `C` is a subset of the events on `ρ`.
pub fn satisfies_events(run: &LassoRun, network: &Network, set: &EventSet) -> bool {
    let events = events_of_run(run, network);
    set.is_subset(&events)
}

/// One piecewise-constant signal segment `[start, end)`; `end == None` means
/// the segment extends forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub start: Rational,
    pub end: Option<Rational>,
    pub labels: Vec<String>,
}

/// The signal segments of the run up to (at least) the horizon, unrolling the
/// loop as needed; finite-tail runs end with an infinite segment (a stuck
/// run's final labels persist after time freezes).
pub fn signal_segments(run: &LassoRun, network: &Network, horizon: &Rational) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut t = Rational::zero();
    for (j, step) in run.steps.iter().enumerate() {
        let end = t + step.delay;
        segments.push(Segment {
            start: t,
            end: Some(end),
            labels: network.labels_of(&run.states[j].locs),
        });
        t = end;
    }
    match run.shape {
        RunShape::Idle | RunShape::Stuck => {
            segments.push(Segment {
                start: t,
                end: None,
                labels: network.labels_of(&run.states[run.len()].locs),
            });
        }
        RunShape::Lasso { loop_start } => {
            let period: Rational = run.steps[loop_start..].iter().map(|s| s.delay).sum();
            let mut base = t;
            while &base <= horizon {
                let mut local = base;
                for (j, step) in run.steps.iter().enumerate().skip(loop_start) {
                    let end = local + step.delay;
                    segments.push(Segment {
                        start: local,
                        end: Some(end),
                        labels: network.labels_of(&run.states[j].locs),
                    });
                    local = end;
                }
                base = base + period;
            }
        }
    }
    segments
}

/// Labels holding at time `t` (left-closed right-open semantics).
pub fn signal_at(run: &LassoRun, network: &Network, t: &Rational) -> Vec<String> {
    let horizon = *t + Rational::from_integer(1);
    for seg in signal_segments(run, network, &horizon) {
        let in_seg = &seg.start <= t
            && match &seg.end {
                None => true,
                Some(e) => t < e,
            };
        if in_seg {
            return seg.labels;
        }
    }
    Vec::new()
}

/// Evaluates an MITL formula of the supported fragment (boolean combinations
/// of propositions closed under top-level `G_I`/`F_I` over boolean operands)
/// on the eventually-periodic signal of the run.
pub fn evaluate_mitl_on_lasso(
    run: &LassoRun,
    network: &Network,
    formula: &MitlFormula,
) -> Result<bool, MitlError> {
    let horizon = evaluation_horizon(run, formula);
    let segments = signal_segments(run, network, &horizon);
    eval_at_zero(run, network, formula, &segments, &horizon)
}

fn evaluation_horizon(run: &LassoRun, formula: &MitlFormula) -> Rational {
    let mut bound = Rational::zero();
    collect_bounds(formula, &mut bound);
    let prefix_end = run.time_at(run.len());
    let period = run.period().unwrap_or_else(Rational::zero);
    prefix_end + bound + period + period + Rational::from_integer(1)
}

fn collect_bounds(f: &MitlFormula, acc: &mut Rational) {
    match f {
        MitlFormula::Prop(_) => {}
        MitlFormula::Not(g) => collect_bounds(g, acc),
        MitlFormula::And(a, b) | MitlFormula::Or(a, b) => {
            collect_bounds(a, acc);
            collect_bounds(b, acc);
        }
        MitlFormula::Globally(i, g) | MitlFormula::Eventually(i, g) => {
            if let Some(h) = &i.hi {
                *acc = *acc + *h;
            } else {
                *acc = *acc + i.lo;
            }
            collect_bounds(g, acc);
        }
        MitlFormula::Until(i, a, b) => {
            if let Some(h) = &i.hi {
                *acc = *acc + *h;
            }
            collect_bounds(a, acc);
            collect_bounds(b, acc);
        }
    }
}

fn eval_at_zero(
    run: &LassoRun,
    network: &Network,
    f: &MitlFormula,
    segments: &[Segment],
    horizon: &Rational,
) -> Result<bool, MitlError> {
    match f {
        MitlFormula::Prop(_) => {
            let labels = signal_at(run, network, &Rational::zero());
            Ok(f.eval_boolean(&labels).unwrap())
        }
        MitlFormula::Not(g) => Ok(!eval_at_zero(run, network, g, segments, horizon)?),
        MitlFormula::And(a, b) => Ok(eval_at_zero(run, network, a, segments, horizon)?
            && eval_at_zero(run, network, b, segments, horizon)?),
        MitlFormula::Or(a, b) => Ok(eval_at_zero(run, network, a, segments, horizon)?
            || eval_at_zero(run, network, b, segments, horizon)?),
        MitlFormula::Eventually(interval, inner) => {
            let Some(check) = BooleanCheck::new(inner) else {
                return Err(MitlError::UnsupportedFragment(f.to_string()));
            };
            if interval.hi.is_none() && !covers_horizon(run, interval, horizon) {
                return Err(MitlError::UnsupportedFragment(f.to_string()));
            }
            for seg in segments {
                if check.holds(&seg.labels) && interval.meets_segment(&seg.start, seg.end.as_ref())
                {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        MitlFormula::Globally(interval, inner) => {
            let Some(check) = BooleanCheck::new(inner) else {
                return Err(MitlError::UnsupportedFragment(f.to_string()));
            };
            if interval.hi.is_none() && !covers_horizon(run, interval, horizon) {
                return Err(MitlError::UnsupportedFragment(f.to_string()));
            }
            for seg in segments {
                if !check.holds(&seg.labels)
                    && interval.meets_segment(&seg.start, seg.end.as_ref())
                {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        MitlFormula::Until(..) => Err(MitlError::UnsupportedFragment(f.to_string())),
    }
}

/// For unbounded intervals the generated segments must reach past the prefix
/// plus one full period (so the periodic part is fully sampled); the horizon
/// construction guarantees that, this is a defensive check.
fn covers_horizon(run: &LassoRun, _interval: &crate::mitl::Interval, horizon: &Rational) -> bool {
    horizon >= &run.time_at(run.len())
}

struct BooleanCheck<'a>(&'a MitlFormula);

impl<'a> BooleanCheck<'a> {
    fn new(f: &'a MitlFormula) -> Option<Self> {
        f.is_boolean().then_some(BooleanCheck(f))
    }

    fn holds(&self, labels: &[String]) -> bool {
        self.0.eval_boolean(labels).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_formula, parse_model, parse_run};

    fn rat(s: &str) -> Rational {
        crate::rational::parse_rational(s).unwrap()
    }

    fn running_example() -> (Network, LassoRun) {
        let net = parse_model(include_str!("../../../benchmarks/running-example-n2.rtn")).unwrap();
        let parsed = parse_run(include_str!("../../../benchmarks/fig1b.run"), &net).unwrap();
        let run = validate_run(&net, &parsed).unwrap();
        (net, run)
    }

    fn fischer(model: &str, run: &str) -> (Network, LassoRun) {
        let net = parse_model(model).unwrap();
        let parsed = parse_run(run, &net).unwrap();
        let run = validate_run(&net, &parsed).unwrap();
        (net, run)
    }

    #[test]
    fn validates_running_example_run() {
        let (_, run) = running_example();
        assert_eq!(run.len(), 5);
        assert_eq!(run.shape, RunShape::Lasso { loop_start: 4 });
        assert_eq!(run.dst_index(5).unwrap(), 4);
        assert_eq!(run.dst_index(3).unwrap(), 3);
        assert_eq!(run.states[1].locs, vec!["crit".to_string(), "init".to_string()]);
        assert_eq!(run.states[2].locs, vec!["crit".to_string(), "crit".to_string()]);
        assert_eq!(run.states[4].locs, vec!["init".to_string(), "init".to_string()]);
    }

    #[test]
    fn rejects_disabled_action() {
        let net = parse_model(include_str!("../../../benchmarks/running-example-n2.rtn")).unwrap();
        // A1's exit beta requires x1 == 3; after 1.0+1.0 it is not enabled.
        let parsed = parse_run("step 1.0 beta @ A1; step 1.0 beta @ A1; idle;", &net).unwrap();
        let err = validate_run(&net, &parsed).unwrap_err();
        assert!(matches!(err, RunError::InvalidTransition { step: 2, .. }));
    }

    #[test]
    fn rejects_non_closing_loop() {
        let net = parse_model(include_str!("../../../benchmarks/running-example-n2.rtn")).unwrap();
        // One beta inside the loop flips A1 between init and crit.
        let parsed = parse_run("loop { step 1.0 beta @ A1; }", &net).unwrap();
        assert!(matches!(
            validate_run(&net, &parsed),
            Err(RunError::LoopMismatch(_)) | Err(RunError::InvalidTransition { .. })
        ));
    }

    #[test]
    fn rejects_zeno_loop() {
        let net = parse_model(include_str!("../../../benchmarks/running-example-n2.rtn")).unwrap();
        let parsed = parse_run("loop { step 0.0 alpha @ A1; }", &net).unwrap();
        assert_eq!(validate_run(&net, &parsed), Err(RunError::ZenoLoop));
    }

    #[test]
    fn projects_running_example_onto_components() {
        let (_, run) = running_example();
        let beta = ActionLabel::internal("beta");
        let alpha = ActionLabel::internal("alpha");
        let a1 = local_projection(&run, 0);
        assert_eq!(
            a1.steps,
            vec![(rat("1.0"), beta.clone()), (rat("3.0"), beta.clone()), (rat("2.0"), alpha)]
        );
        assert_eq!(a1.shape, TraceShape::Lasso { loop_start: 2 });
        assert_eq!(a1.dst_index(3).unwrap(), 2);
        let a2 = local_projection(&run, 1);
        assert_eq!(a2.steps, vec![(rat("2.0"), beta.clone()), (rat("3.0"), beta)]);
        assert_eq!(a2.shape, TraceShape::Finite);
    }

    #[test]
    fn projection_delays_cover_global_time_on_the_prefix() {
        let (_, run) = running_example();
        // Prefix participations of A2 at global times 2 and 5: local delays
        // cumulate exactly the global delays in between.
        let a2 = local_projection(&run, 1);
        let total: Rational = a2.steps.iter().map(|(d, _)| *d).sum();
        assert_eq!(total, rat("5.0"));
        // Loop-part delays of A1 sum to the loop period.
        let a1 = local_projection(&run, 0);
        let loop_sum: Rational = a1.steps[2..].iter().map(|(d, _)| *d).sum();
        assert_eq!(loop_sum, run.period().unwrap());
    }

    #[test]
    fn local_locations_of_running_example() {
        let (_, run) = running_example();
        assert_eq!(local_locations(&run, 0), vec!["init", "crit", "init"]);
        assert_eq!(local_locations(&run, 1), vec!["init", "crit", "init"]);
    }

    #[test]
    fn events_of_running_example() {
        let (net, run) = running_example();
        let events = events_of_run(&run, &net);
        assert_eq!(events.len(), 10);
        let beta = ActionLabel::internal("beta");
        assert!(events.contains(&Event::delay(0, 1, rat("1.0"))));
        assert!(events.contains(&Event::delay(1, 1, rat("2.0"))));
        assert!(events.contains(&Event::action(0, 1, beta.clone())));
        assert!(events.contains(&Event::action(1, 2, beta)));
        assert!(events.contains(&Event::delay(0, 3, rat("2.0"))));
        let sub: EventSet = [Event::delay(0, 1, rat("1.0"))].into_iter().collect();
        assert!(satisfies_events(&run, &net, &sub));
        let bad: EventSet = [Event::delay(0, 1, rat("7.0"))].into_iter().collect();
        assert!(!satisfies_events(&run, &net, &bad));
    }

    #[test]
    fn signal_of_running_example() {
        let (net, run) = running_example();
        assert_eq!(signal_at(&run, &net, &rat("0.5")), vec!["init1", "init2"]);
        assert_eq!(signal_at(&run, &net, &rat("1.0")), vec!["crit1", "init2"]);
        assert_eq!(signal_at(&run, &net, &rat("3.5")), vec!["crit1", "crit2"]);
        assert_eq!(signal_at(&run, &net, &rat("6.0")), vec!["init1", "init2"]);
        // Deep into the loop the signal stays at the loop labels.
        assert_eq!(signal_at(&run, &net, &rat("100.5")), vec!["init1", "init2"]);
    }

    #[test]
    fn evaluates_mitl_on_running_example() {
        let (net, run) = running_example();
        let safe = parse_formula("G(!crit1 || !crit2)", Some(&net)).unwrap();
        assert!(!evaluate_mitl_on_lasso(&run, &net, &safe).unwrap());
        let effect = safe.not();
        assert!(evaluate_mitl_on_lasso(&run, &net, &effect).unwrap());
        let f = parse_formula("F crit1", Some(&net)).unwrap();
        assert!(evaluate_mitl_on_lasso(&run, &net, &f).unwrap());
        let f = parse_formula("F[4,5] crit2", Some(&net)).unwrap();
        assert!(evaluate_mitl_on_lasso(&run, &net, &f).unwrap());
        // crit2 is left exactly at 5, so it is still observed at that instant.
        let f = parse_formula("G[5,inf) !crit2", Some(&net)).unwrap();
        assert!(!evaluate_mitl_on_lasso(&run, &net, &f).unwrap());
        let f = parse_formula("G(5,inf) !crit2", Some(&net)).unwrap();
        assert!(evaluate_mitl_on_lasso(&run, &net, &f).unwrap());
        // At instant 2 the state just before A2's entry is observed too, so
        // crit2 fails there; strictly inside the dwell both conjuncts hold.
        let f = parse_formula("G[2,4) crit1 && G[2,4) crit2", Some(&net)).unwrap();
        assert!(!evaluate_mitl_on_lasso(&run, &net, &f).unwrap());
        let f = parse_formula("G(2,4) crit1 && G(2,4) crit2", Some(&net)).unwrap();
        assert!(evaluate_mitl_on_lasso(&run, &net, &f).unwrap());
    }

    #[test]
    fn validates_fischer_runs_with_unobserved_drift() {
        let (_, rho1) = fischer(
            include_str!("../../../benchmarks/fischer-n2.rtn"),
            include_str!("../../../benchmarks/fischer-rho1.run"),
        );
        assert_eq!(rho1.shape, RunShape::Lasso { loop_start: 0 });
        let (_, rho2) = fischer(
            include_str!("../../../benchmarks/fischer-n2.rtn"),
            include_str!("../../../benchmarks/fischer-rho2.run"),
        );
        assert_eq!(rho2.shape, RunShape::Lasso { loop_start: 1 });
        assert_eq!(rho2.len(), 7);
    }

    #[test]
    fn projects_fischer_rho1() {
        let (_, run) = fischer(
            include_str!("../../../benchmarks/fischer-n2.rtn"),
            include_str!("../../../benchmarks/fischer-rho1.run"),
        );
        let a1 = local_projection(&run, 0);
        let delays: Vec<Rational> = a1.steps.iter().map(|(d, _)| *d).collect();
        assert_eq!(delays, vec![rat("1.0"), rat("1.0"), rat("4.0"), rat("2.0")]);
        assert_eq!(a1.shape, TraceShape::Lasso { loop_start: 0 });
        let a2 = local_projection(&run, 1);
        assert!(a2.is_empty());
        assert_eq!(a2.shape, TraceShape::Finite);
    }

    #[test]
    fn projects_fischer_rho2() {
        let (_, run) = fischer(
            include_str!("../../../benchmarks/fischer-n2.rtn"),
            include_str!("../../../benchmarks/fischer-rho2.run"),
        );
        let a1 = local_projection(&run, 0);
        let d1: Vec<Rational> = a1.steps.iter().map(|(d, _)| *d).collect();
        assert_eq!(d1, vec![rat("2.0"), rat("2.0"), rat("3.0"), rat("1.0")]);
        assert_eq!(a1.shape, TraceShape::Lasso { loop_start: 0 });
        let a2 = local_projection(&run, 1);
        let d2: Vec<Rational> = a2.steps.iter().map(|(d, _)| *d).collect();
        assert_eq!(d2, vec![rat("1.0"), rat("2.0"), rat("6.0")]);
        assert_eq!(a2.shape, TraceShape::Lasso { loop_start: 1 });
    }

    #[test]
    fn validates_idle_tail_and_freezes_signal() {
        let net = parse_model(include_str!("../../../benchmarks/reorder.rtn")).unwrap();
        let parsed = parse_run(include_str!("../../../benchmarks/reorder.run"), &net).unwrap();
        let run = validate_run(&net, &parsed).unwrap();
        assert_eq!(run.shape, RunShape::Idle);
        assert_eq!(signal_at(&run, &net, &rat("50.0")), vec!["boom1", "done2"]);
        let f = parse_formula("F boom1", Some(&net)).unwrap();
        assert!(evaluate_mitl_on_lasso(&run, &net, &f).unwrap());
        let f = parse_formula("F good1", Some(&net)).unwrap();
        assert!(!evaluate_mitl_on_lasso(&run, &net, &f).unwrap());
    }

    #[test]
    fn idle_tail_rejected_under_bounded_invariant() {
        let net = parse_model(
            "clock x; automaton A { init location l { invariant x <= 5; } } system A;",
        )
        .unwrap();
        let parsed = parse_run("idle;", &net).unwrap();
        assert!(matches!(validate_run(&net, &parsed), Err(RunError::IdleBounded(_))));
    }

    #[test]
    fn stuck_tail_requires_permanently_disabled_actions() {
        // After the guard window x in [1,2] has passed, `a` can never fire.
        let src = "clock x; automaton A { init location l { } location m { } \
                   edge l -> m on a when x >= 1 && x <= 2; } system A;";
        let net = parse_model(src).unwrap();
        let parsed = parse_run("stuck;", &net).unwrap();
        assert!(matches!(validate_run(&net, &parsed), Err(RunError::NotStuck(_))));
    }
}
