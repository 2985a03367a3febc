//! Location and clock contingency automata, and assembly of the network used
//! for actual (contingency-based) causality.

use crate::counterfactual::{build_cta, cta_clock, CtaError, CtaSpec};
use crate::model::{
    intersect_trace, ClockUpdate, ClockValuation, Edge, Location, Network, TimedAutomaton,
};
use crate::runs::{local_locations, local_projection, EventSet, LassoRun, RunShape};

/// Name of the copy `⟨base, i⟩` of a location.
pub fn indexed_name(base: &str, i: usize) -> String {
    format!("{base}_c{i}")
}

/// Builds the location contingency automaton of component `k`: the automaton
/// copied once per entry of `locations(ρ, A_k)`, where each original edge
/// `q → q′` at position `i` yields a normal edge `⟨q,i−1⟩ → ⟨q′,dst(i)⟩` and
/// a contingency edge `⟨q,i−1⟩ → ⟨locations(ρ,A_k)[dst(i)], dst(i)⟩` with the
/// same guard, action, and update.
pub fn build_location_contingency(
    component: &TimedAutomaton,
    run: &LassoRun,
    k: usize,
) -> TimedAutomaton {
    let trace = local_projection(run, k);
    let loc_seq = local_locations(run, k);
    let copies = loc_seq.len();
    let mut locations = Vec::new();
    for i in 0..copies {
        for q in &component.locations {
            locations.push(Location {
                name: indexed_name(&q.name, i),
                invariant: q.invariant.clone(),
                labels: q.labels.clone(),
            });
        }
    }
    // Finite traces have copies 0..=m but only m position advances; the CTA
    // blocks all actions beyond the m-th anyway.
    let last_position = trace.len();
    let mut edges = Vec::new();
    for i in 1..=last_position {
        let target = trace.dst_index(i).unwrap();
        for e in &component.edges {
            edges.push(Edge {
                src: indexed_name(&e.src, i - 1),
                guard: e.guard.clone(),
                action: e.action.clone(),
                update: e.update.clone(),
                dst: indexed_name(&e.dst, target),
            });
            if loc_seq[target] != e.dst {
                edges.push(Edge {
                    src: indexed_name(&e.src, i - 1),
                    guard: e.guard.clone(),
                    action: e.action.clone(),
                    update: e.update.clone(),
                    dst: indexed_name(&loc_seq[target], target),
                });
            }
        }
    }
    TimedAutomaton {
        name: format!("{}_loc", component.name),
        locations,
        initial: indexed_name(&component.initial, 0),
        clocks: component.clocks.clone(),
        edges,
    }
}

/// The clock contingency data of a run: one reconstructed valuation per run
/// position, restricted to the non-data global clocks. Contingency variants
/// of network edges may replace their update by one of these valuations;
/// data clocks and fresh construction clocks keep their regular updates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockContingency {
    pub valuations: Vec<ClockValuation>,
    pub loop_start: Option<usize>,
}

impl ClockContingency {
    pub fn from_run(network: &Network, run: &LassoRun) -> Self {
        let keep: Vec<&String> = network
            .global_clocks
            .iter()
            .filter(|c| !network.data_clocks.contains(c))
            .collect();
        let valuations = run
            .states
            .iter()
            .map(|s| ClockValuation {
                values: s
                    .vals
                    .values
                    .iter()
                    .filter(|(c, _)| keep.iter().any(|k| *k == *c))
                    .map(|(c, v)| (c.clone(), *v))
                    .collect(),
            })
            .collect();
        ClockContingency {
            valuations,
            loop_start: match run.shape {
                RunShape::Lasso { loop_start } => Some(loop_start),
                _ => None,
            },
        }
    }

    /// Number of run positions (|ρ|).
    pub fn len(&self) -> usize {
        self.valuations.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position reached by taking the `i`-th action from position `i − 1`;
    /// wraps to the loop start at `i = |ρ|` on lassos, saturates at `|ρ|` on
    /// finite-tail runs.
    pub fn dst(&self, i: usize) -> usize {
        match self.loop_start {
            Some(n) if i >= self.len() => {
                if i == self.len() {
                    n
                } else {
                    i
                }
            }
            Some(_) => i,
            None => i.min(self.len()),
        }
    }

    /// The update of the contingency variant of an edge at target position
    /// `to`: every tracked clock is set to its reconstructed value; clocks
    /// outside the tracked set keep the original edge assignments.
    pub fn contingency_update(&self, original: &ClockUpdate, to: usize) -> ClockUpdate {
        let vals = &self.valuations[to];
        let mut assignments: Vec<(String, crate::rational::Rational)> =
            vals.values.iter().map(|(c, v)| (c.clone(), *v)).collect();
        for (c, v) in &original.assignments {
            if !vals.values.contains_key(c) {
                assignments.push((c.clone(), *v));
            }
        }
        ClockUpdate { assignments }
    }
}

/// Explicitly wraps a (composed) automaton with the clock contingency: the
/// locations gain a run-position index advanced by every action, and each
/// edge gets a contingency variant whose update is replaced per
/// [`ClockContingency::contingency_update`]. Intended for dumps and tests;
/// the checker tracks the position on the fly instead.
pub fn build_clock_contingency_wrapper(
    composed: &TimedAutomaton,
    cc: &ClockContingency,
) -> TimedAutomaton {
    let p = cc.len();
    let positions = if cc.loop_start.is_some() { p.max(1) } else { p + 1 };
    let mut locations = Vec::new();
    for i in 0..positions {
        for q in &composed.locations {
            locations.push(Location {
                name: indexed_name(&q.name, i),
                invariant: q.invariant.clone(),
                labels: q.labels.clone(),
            });
        }
    }
    let mut edges = Vec::new();
    for i in 0..positions {
        let target = cc.dst(i + 1);
        for e in &composed.edges {
            edges.push(Edge {
                src: indexed_name(&e.src, i),
                guard: e.guard.clone(),
                action: e.action.clone(),
                update: e.update.clone(),
                dst: indexed_name(&e.dst, target),
            });
            edges.push(Edge {
                src: indexed_name(&e.src, i),
                guard: e.guard.clone(),
                action: e.action.clone(),
                update: cc.contingency_update(&e.update, target),
                dst: indexed_name(&e.dst, target),
            });
        }
    }
    TimedAutomaton {
        name: format!("{}_clk", composed.name),
        locations,
        initial: indexed_name(&composed.initial, 0),
        clocks: composed.clocks.clone(),
        edges,
    }
}

/// The assembled network for actual causality: per component the location
/// contingency automaton intersected with the component's CTA, plus the
/// clock contingency applied across the composition.
#[derive(Debug, Clone)]
pub struct ActualNetwork {
    pub network: Network,
    pub clocks: ClockContingency,
}

pub fn build_actual_network(
    network: &Network,
    run: &LassoRun,
    cause: &EventSet,
) -> Result<ActualNetwork, CtaError> {
    let mut components = Vec::new();
    let mut global_clocks = network.global_clocks.clone();
    for (k, comp) in network.components.iter().enumerate() {
        let loc_cont = build_location_contingency(comp, run, k);
        let spec = CtaSpec {
            trace: local_projection(run, k),
            interventions: crate::runs::filter_component(cause, k),
            alphabet: comp.alphabet(),
            fresh_clock: cta_clock(&comp.name),
        };
        let cta = build_cta(&spec)?;
        global_clocks.push(spec.fresh_clock.clone());
        let mut product = intersect_trace(&loc_cont, &cta);
        product.name = comp.name.clone();
        components.push(product);
    }
    Ok(ActualNetwork {
        network: Network {
            components,
            global_clocks,
            data_clocks: network.data_clocks.clone(),
        },
        clocks: ClockContingency::from_run(network, run),
    })
}
