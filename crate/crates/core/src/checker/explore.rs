//! Depth-first zone-graph search for maximal runs satisfying a goal.
//!
//! Acceptance follows the maximal-run semantics: a lasso whose loop takes
//! positive time, a state that can delay forever, or a state from which no
//! action can ever fire (the signal freezes on its labels). States whose
//! labels violate a globally-goal may only be occupied, even momentarily,
//! outside the goal interval.

use std::collections::{HashMap, HashSet};

use crate::mitl::MitlFormula;
use crate::rational::Rational;

use super::dbm::Dbm;
use super::goal::GoalFormula;
use super::sys::{CheckSystem, SysState};
use super::witness::{build_witness, Acceptance, Dwell, PathEdge, Witness};
use super::{CheckError, CheckOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Phase {
    /// Globally goals: a single phase.
    Unit,
    /// Eventually goals: before the required visit.
    Waiting,
    /// Eventually goals: after the visit; any divergence completes the run.
    Done,
}

struct Node {
    state: SysState,
    phase: Phase,
    zone: Dbm,
    parent: Option<(usize, PathEdge)>,
    on_stack: bool,
}

#[derive(Clone)]
struct Child {
    state: SysState,
    phase: Phase,
    zone: Dbm,
    edge: PathEdge,
}

struct Frame {
    id: usize,
    succs: Vec<Child>,
    next: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SearchStats {
    /// Zone nodes created during the search.
    pub nodes: usize,
}

/// Restrictions a globally goal puts on nodes violating ψ.
struct GloballyBounds {
    /// ¬ψ nodes may be occupied until this absolute time (strict flag).
    depart_le: Option<(Rational, bool)>,
    /// ¬ψ nodes may be entered from this absolute time on (strict flag).
    enter_after: Option<(Rational, bool)>,
}

pub(super) fn search(
    sys: &CheckSystem,
    goal: &GoalFormula,
    opts: &CheckOptions,
) -> Result<(Option<Witness>, SearchStats), CheckError> {
    let psi = goal.psi().clone();
    let (init_phase, gb) = match goal {
        GoalFormula::ExistsRunGlobally(_) => {
            (Phase::Unit, GloballyBounds { depart_le: None, enter_after: None })
        }
        GoalFormula::ExistsRunGloballyBounded(_, i) => (
            Phase::Unit,
            GloballyBounds {
                depart_le: Some((i.lo, !i.lo_strict)),
                enter_after: i.hi.map(|h| (h, !i.hi_strict)),
            },
        ),
        GoalFormula::ExistsRunEventually(_, _) => {
            (Phase::Waiting, GloballyBounds { depart_le: None, enter_after: None })
        }
    };

    let mut stats = SearchStats::default();
    let zone0 = sys.initial_zone();
    if zone0.is_empty() {
        return Ok((None, stats));
    }
    let mut nodes: Vec<Node> = vec![Node {
        state: sys.initial_state(),
        phase: init_phase,
        zone: zone0,
        parent: None,
        on_stack: true,
    }];
    stats.nodes = 1;
    let mut index: HashMap<(SysState, Phase), Vec<usize>> = HashMap::new();
    index.insert((nodes[0].state.clone(), init_phase), vec![0]);
    let mut failed_cycles: HashSet<(usize, usize)> = HashSet::new();

    if let Some(w) = try_tail_accept(sys, goal, &psi, &gb, &nodes, 0, opts) {
        return Ok((Some(w), stats));
    }
    let succs = successors(sys, goal, &psi, &gb, &nodes[0]);
    let mut frames = vec![Frame { id: 0, succs, next: 0 }];

    while let Some(frame) = frames.last_mut() {
        if frame.next >= frame.succs.len() {
            let id = frame.id;
            nodes[id].on_stack = false;
            frames.pop();
            continue;
        }
        let child = frame.succs[frame.next].clone();
        let parent_id = frame.id;
        frame.next += 1;

        let key = (child.state.clone(), child.phase);
        let mut skip = false;
        if let Some(ids) = index.get(&key) {
            for &id in ids {
                if nodes[id].zone == child.zone {
                    if nodes[id].on_stack
                        && child.phase != Phase::Waiting
                        && !failed_cycles.contains(&(id, parent_id))
                    {
                        let path = path_to(&nodes, parent_id, Some(child.edge.clone()));
                        let len = distance(&nodes, parent_id, id) + 1;
                        if let Some(w) = build_witness(
                            sys,
                            goal,
                            &path,
                            &Acceptance::Cycle { len },
                            None,
                            opts,
                        ) {
                            return Ok((Some(w), stats));
                        }
                        failed_cycles.insert((id, parent_id));
                    }
                    skip = true;
                    break;
                }
                if opts.subsumption && !nodes[id].on_stack && nodes[id].zone.includes(&child.zone)
                {
                    skip = true;
                    break;
                }
            }
        }
        if skip {
            continue;
        }

        if nodes.len() >= opts.node_limit {
            return Err(CheckError::BudgetExceeded(opts.node_limit));
        }
        let id = nodes.len();
        nodes.push(Node {
            state: child.state,
            phase: child.phase,
            zone: child.zone,
            parent: Some((parent_id, child.edge)),
            on_stack: true,
        });
        stats.nodes += 1;
        index.entry(key).or_default().push(id);
        if let Some(w) = try_tail_accept(sys, goal, &psi, &gb, &nodes, id, opts) {
            return Ok((Some(w), stats));
        }
        let succs = successors(sys, goal, &psi, &gb, &nodes[id]);
        frames.push(Frame { id, succs, next: 0 });
    }
    Ok((None, stats))
}

fn psi_holds(sys: &CheckSystem, psi: &MitlFormula, state: &SysState) -> bool {
    psi.eval_boolean(&sys.labels(state)).unwrap_or(false)
}

/// The edges from the root to `id`, optionally extended by one more edge.
fn path_to(nodes: &[Node], id: usize, extra: Option<PathEdge>) -> Vec<PathEdge> {
    let mut out = Vec::new();
    let mut cur = id;
    while let Some((p, e)) = &nodes[cur].parent {
        out.push(e.clone());
        cur = *p;
    }
    out.reverse();
    out.extend(extra);
    out
}

/// Number of tree edges from ancestor `to` down to `from`.
fn distance(nodes: &[Node], from: usize, to: usize) -> usize {
    let mut n = 0;
    let mut cur = from;
    while cur != to {
        let (p, _) = nodes[cur].parent.as_ref().expect("ancestor chain broken");
        cur = *p;
        n += 1;
    }
    n
}

/// The delay closure of a zone under the node's invariants.
fn delay_zone(sys: &CheckSystem, state: &SysState, zone: &Dbm) -> Dbm {
    let mut d = zone.clone();
    d.up();
    sys.constrain_atoms(&mut d, sys.invariant_atoms(state));
    d
}

/// Tail acceptance at a node: idling forever, or being stuck with the labels
/// frozen. Only allowed where the goal tolerates the node's labels for the
/// rest of time.
fn try_tail_accept(
    sys: &CheckSystem,
    goal: &GoalFormula,
    psi: &MitlFormula,
    gb: &GloballyBounds,
    nodes: &[Node],
    id: usize,
    opts: &CheckOptions,
) -> Option<Witness> {
    let node = &nodes[id];
    let (zone, final_entry): (Dbm, Option<(Rational, bool)>) = match node.phase {
        Phase::Waiting => return None,
        Phase::Done => (node.zone.clone(), None),
        Phase::Unit => {
            if psi_holds(sys, psi, &node.state) {
                (node.zone.clone(), None)
            } else if let Some((b, strict)) = &gb.enter_after {
                let mut z = node.zone.clone();
                sys.constrain_observer(&mut z, b, *strict, true);
                if z.is_empty() {
                    return None;
                }
                (z, Some((*b, *strict)))
            } else {
                return None;
            }
        }
    };
    let dz = delay_zone(sys, &node.state, &zone);
    if dz.is_empty() {
        return None;
    }
    let path = path_to(nodes, id, None);
    if dz.time_unbounded() {
        if let Some(w) =
            build_witness(sys, goal, &path, &Acceptance::Idle, final_entry, opts)
        {
            return Some(w);
        }
    }
    // Stuck: no transition variant can ever fire from the delay closure.
    let firable = sys.transitions(&node.state).iter().any(|t| {
        let variants = std::iter::once((&t.update, ()))
            .chain(t.contingency_update.as_ref().map(|u| (u, ())));
        variants.into_iter().any(|(u, _)| {
            let mut y = dz.clone();
            sys.constrain_atoms(&mut y, &t.guard);
            if y.is_empty() {
                return false;
            }
            sys.apply_update(&mut y, u);
            let dst = SysState { locs: t.dst.clone(), pos: t.dst_pos };
            sys.constrain_atoms(&mut y, sys.invariant_atoms(&dst));
            !y.is_empty()
        })
    });
    if !firable {
        return build_witness(sys, goal, &path, &Acceptance::Stuck, final_entry, opts);
    }
    None
}

fn successors(
    sys: &CheckSystem,
    goal: &GoalFormula,
    psi: &MitlFormula,
    gb: &GloballyBounds,
    node: &Node,
) -> Vec<Child> {
    let state = &node.state;
    let psi_ok = psi_holds(sys, psi, state);
    let mut families: Vec<(Dwell, Dbm)> = Vec::new();
    match node.phase {
        Phase::Waiting | Phase::Done => {
            families.push((Dwell::Free, delay_zone(sys, state, &node.zone)));
        }
        Phase::Unit => {
            if psi_ok {
                families.push((Dwell::Free, delay_zone(sys, state, &node.zone)));
            } else {
                // ¬ψ nodes are observed at every instant of their dwell, even
                // a zero-length one, so the dwell must lie outside the goal
                // interval entirely.
                if let Some((a, strict)) = &gb.depart_le {
                    let mut d = delay_zone(sys, state, &node.zone);
                    sys.constrain_observer(&mut d, a, *strict, false);
                    if !d.is_empty() {
                        families.push((Dwell::DepartLe(*a, *strict), d));
                    }
                }
                if let Some((b, strict)) = &gb.enter_after {
                    let mut z = node.zone.clone();
                    sys.constrain_observer(&mut z, b, *strict, true);
                    if !z.is_empty() {
                        families.push((Dwell::EnterAfter(*b, *strict), delay_zone(sys, state, &z)));
                    }
                }
            }
        }
    }

    let mut out = Vec::new();
    let transitions = sys.transitions(state);
    for (dwell, dz) in &families {
        if dz.is_empty() {
            continue;
        }
        for t in &transitions {
            let mut variants = vec![false];
            if t.contingency_update.is_some() {
                variants.push(true);
            }
            for contingent in variants {
                let mut y = dz.clone();
                sys.constrain_atoms(&mut y, &t.guard);
                if y.is_empty() {
                    continue;
                }
                let update = if contingent {
                    t.contingency_update.as_ref().unwrap()
                } else {
                    &t.update
                };
                sys.apply_update(&mut y, update);
                let dst = SysState { locs: t.dst.clone(), pos: t.dst_pos };
                sys.constrain_atoms(&mut y, sys.invariant_atoms(&dst));
                if y.is_empty() {
                    continue;
                }
                sys.extrapolate(&mut y);
                out.push(Child {
                    state: dst,
                    phase: node.phase,
                    zone: y,
                    edge: PathEdge::Step {
                        trans: t.clone(),
                        contingent,
                        dwell: dwell.clone(),
                    },
                });
            }
        }
    }

    // Eventually goals: pin the ψ-visit during this node's dwell.
    if node.phase == Phase::Waiting && psi_ok {
        if let GoalFormula::ExistsRunEventually(_, i) = goal {
            let mut v = delay_zone(sys, state, &node.zone);
            sys.constrain_observer(&mut v, &i.lo, i.lo_strict, true);
            if let Some(h) = &i.hi {
                sys.constrain_observer(&mut v, h, i.hi_strict, false);
            }
            if !v.is_empty() {
                sys.extrapolate(&mut v);
                out.push(Child {
                    state: state.clone(),
                    phase: Phase::Done,
                    zone: v,
                    edge: PathEdge::Visit(i.clone()),
                });
            }
        }
    }
    out
}
