//! Counterfactual trace automata and the intervened (but-for) network.

use thiserror::Error;

use crate::model::{
    intersect_trace, ActionLabel, Atom, ClockConstraint, ClockUpdate, Edge, Location, Network,
    Rel, TimedAutomaton,
};
use crate::runs::{local_projection, EventKind, EventSet, LassoRun, LocalTrace, TraceShape};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CtaError {
    #[error("intervention at position {0} is outside the trace (|π| = {1})")]
    PositionOutOfTrace(usize, usize),
    #[error("intervention at position {0} does not match the trace event there")]
    EventMismatch(usize),
}

/// Input of the CTA construction: one component's local trace, the
/// interventions restricted to that component, its local alphabet, and a
/// fresh clock name.
#[derive(Debug, Clone)]
pub struct CtaSpec {
    pub trace: LocalTrace,
    pub interventions: Vec<(usize, EventKind)>,
    pub alphabet: Vec<ActionLabel>,
    pub fresh_clock: String,
}

/// The name of the fresh CTA clock for a component; namespaced so the clocks
/// of different components never collide.
pub fn cta_clock(component_name: &str) -> String {
    format!("_d_{component_name}")
}

fn position_name(i: usize) -> String {
    format!("t{i}")
}

/// Builds the counterfactual trace automaton of a local trace for a set of
/// interventions. Per position, membership of the delay/action event in the
/// interventions selects one of the four rule families: fixed or free delay
/// (guard `d = δ_i` vs ⊤) crossed with fixed or free action (the traced label
/// vs every label of the alphabet). Every edge resets `d := 0`; location
/// `q` carries invariant `d ≤ δ_{q+1}` unless that delay is intervened.
/// Finite traces end in a terminal ⊤ location without outgoing edges.
pub fn build_cta(spec: &CtaSpec) -> Result<TimedAutomaton, CtaError> {
    let p = spec.trace.len();
    for (i, kind) in &spec.interventions {
        if *i == 0 || *i > p {
            return Err(CtaError::PositionOutOfTrace(*i, p));
        }
        let (delay, action) = &spec.trace.steps[*i - 1];
        let matches = match kind {
            EventKind::Delay(v) => v == delay,
            EventKind::Action(a) => a == action,
        };
        if !matches {
            return Err(CtaError::EventMismatch(*i));
        }
    }
    let delay_free = |i: usize| {
        spec.interventions
            .iter()
            .any(|(j, k)| *j == i && matches!(k, EventKind::Delay(_)))
    };
    let action_free = |i: usize| {
        spec.interventions
            .iter()
            .any(|(j, k)| *j == i && matches!(k, EventKind::Action(_)))
    };
    let d = spec.fresh_clock.clone();
    let num_locations = match spec.trace.shape {
        TraceShape::Lasso { .. } => p,
        TraceShape::Finite => p + 1,
    };
    let mut locations = Vec::new();
    for q in 0..num_locations {
        let mut loc = Location::new(position_name(q));
        if q + 1 <= p && !delay_free(q + 1) {
            let (delta, _) = &spec.trace.steps[q];
            loc.invariant = ClockConstraint {
                atoms: vec![Atom::single(d.clone(), Rel::Le, *delta)],
            };
        }
        locations.push(loc);
    }
    let mut edges = Vec::new();
    for i in 1..=p {
        let (delta, action) = &spec.trace.steps[i - 1];
        let src = position_name(i - 1);
        let dst = position_name(spec.trace.dst_index(i).unwrap());
        let guard = if delay_free(i) {
            ClockConstraint::top()
        } else {
            ClockConstraint { atoms: vec![Atom::single(d.clone(), Rel::Eq, *delta)] }
        };
        let actions: Vec<ActionLabel> = if action_free(i) {
            spec.alphabet.clone()
        } else {
            vec![action.clone()]
        };
        for a in actions {
            edges.push(Edge {
                src: src.clone(),
                guard: guard.clone(),
                action: a,
                update: ClockUpdate::reset(d.clone()),
                dst: dst.clone(),
            });
        }
    }
    Ok(TimedAutomaton {
        name: "cta".into(),
        locations,
        initial: position_name(0),
        clocks: vec![d],
        edges,
    })
}

/// The intervened network `(A1 ∩ A^{C|1}) || … || (An ∩ A^{C|n})`: each
/// component is intersected with the CTA of its local projection under the
/// component's share of `C`.
pub fn build_but_for_network(
    network: &Network,
    run: &LassoRun,
    cause: &EventSet,
) -> Result<Network, CtaError> {
    let mut components = Vec::new();
    let mut global_clocks = network.global_clocks.clone();
    for (k, comp) in network.components.iter().enumerate() {
        let spec = CtaSpec {
            trace: local_projection(run, k),
            interventions: crate::runs::filter_component(cause, k),
            alphabet: comp.alphabet(),
            fresh_clock: cta_clock(&comp.name),
        };
        let cta = build_cta(&spec)?;
        global_clocks.push(spec.fresh_clock.clone());
        let mut product = intersect_trace(comp, &cta);
        product.name = comp.name.clone();
        components.push(product);
    }
    Ok(Network {
        components,
        global_clocks,
        data_clocks: network.data_clocks.clone(),
    })
}
