//! Integer-time digitization oracle: an explicit-state search over clock
//! valuations capped above the maximal constants. Only valid for models with
//! closed (non-strict), integer, difference-free constraints, where integral
//! runs are sufficient; used to cross-validate the zone-based search.

use std::collections::{HashMap, HashSet};

use crate::contingency::ClockContingency;
use crate::mitl::Interval;
use crate::model::{Network, Rel};
use crate::rational::Rational;

use super::goal::GoalFormula;
use super::sys::{CheckSystem, SysState};
use super::{CheckError, CheckOptions};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct DState {
    sys: SysState,
    /// Clock values, capped at one past the clock's maximal constant.
    vals: Vec<i64>,
    /// Absolute time, capped at one past the largest interval bound.
    time: i64,
    /// 0 = globally / waiting-free, 1 = waiting (F), 2 = done (F).
    phase: u8,
}

/// Decides run existence for the goal under integer-time semantics. Errors
/// with `UnsupportedGoal` when the model falls outside the digitizable
/// fragment (strict, non-integer, or difference constraints).
pub fn discrete_exists_run(
    net: &Network,
    cc: Option<&ClockContingency>,
    goal: &GoalFormula,
    opts: &CheckOptions,
) -> Result<bool, CheckError> {
    let interval = match goal {
        GoalFormula::ExistsRunGlobally(_) => Interval::full(),
        GoalFormula::ExistsRunEventually(_, i) | GoalFormula::ExistsRunGloballyBounded(_, i) => {
            i.clone()
        }
    };
    if interval.lo_strict || (interval.hi.is_some() && interval.hi_strict) {
        return Err(CheckError::UnsupportedGoal("strict interval bound".into()));
    }
    let sys = CheckSystem::new(net, cc, false, &[])?;
    if sys.scale != 1 {
        return Err(CheckError::UnsupportedGoal("non-integer constants".into()));
    }
    for comp in &net.components {
        let atoms = comp
            .locations
            .iter()
            .flat_map(|l| l.invariant.atoms.iter())
            .chain(comp.edges.iter().flat_map(|e| e.guard.atoms.iter()));
        for a in atoms {
            if a.minus.is_some() {
                return Err(CheckError::UnsupportedGoal("difference constraint".into()));
            }
            if matches!(a.rel, Rel::Lt | Rel::Gt) {
                return Err(CheckError::UnsupportedGoal("strict constraint".into()));
            }
        }
    }

    // Per-clock caps: one past the largest constant the clock is compared to.
    let mut cap: HashMap<&str, i64> = sys.clocks.iter().map(|c| (c.as_str(), 1)).collect();
    for comp in &net.components {
        let atoms = comp
            .locations
            .iter()
            .flat_map(|l| l.invariant.atoms.iter())
            .chain(comp.edges.iter().flat_map(|e| e.guard.atoms.iter()));
        for a in atoms {
            let b = a.bound.to_integer() + 1;
            let e = cap.get_mut(a.clock.as_str()).expect("declared clock");
            *e = (*e).max(b);
        }
    }
    let caps: Vec<i64> = sys.clocks.iter().map(|c| cap[c.as_str()]).collect();
    let time_cap = interval
        .hi
        .map(|h| h.to_integer())
        .unwrap_or_else(|| interval.lo.to_integer())
        + 1;

    let is_f = matches!(goal, GoalFormula::ExistsRunEventually(_, _));
    let psi = goal.psi();
    let psi_at = |s: &SysState| psi.eval_boolean(&sys.labels(s)).unwrap_or(false);
    let as_valuation = |vals: &[i64]| crate::model::ClockValuation {
        values: sys
            .clocks
            .iter()
            .zip(vals)
            .map(|(c, v)| (c.clone(), Rational::from_integer(*v)))
            .collect(),
    };
    let inv_ok = |s: &SysState, vals: &[i64]| {
        let v = as_valuation(vals);
        sys.invariant_atoms(s).iter().all(|a| a.holds(&v))
    };
    // Globally goals: a ¬ψ state occupied at an instant of the interval —
    // even for zero time — already violates the goal.
    let viable = |s: &SysState, time: i64| {
        is_f || psi_at(s) || !interval.contains(&Rational::from_integer(time))
    };

    // Successor enumeration: tick edges (advancing one time unit) and action
    // edges (network transitions plus contingency variants).
    let successors = |d: &DState| -> Vec<(DState, bool)> {
        let mut out = Vec::new();
        let here_psi = psi_at(&d.sys);
        let t = Rational::from_integer(d.time);
        let dwell_meets = interval.meets_segment(&t, Some(&(t + Rational::from_integer(1))));
        let tick_ok = match d.phase {
            1 | 2 => true,
            _ => here_psi || !dwell_meets,
        };
        if tick_ok {
            let next: Vec<i64> =
                d.vals.iter().zip(&caps).map(|(v, c)| (v + 1).min(*c)).collect();
            if inv_ok(&d.sys, &next) {
                let nt = (d.time + 1).min(time_cap);
                out.push((DState { sys: d.sys.clone(), vals: next, time: nt, phase: d.phase }, true));
            }
        }
        // Visit at the current instant.
        if d.phase == 1 && here_psi && interval.contains(&t) {
            out.push((
                DState { sys: d.sys.clone(), vals: d.vals.clone(), time: d.time, phase: 2 },
                false,
            ));
        }
        let v = as_valuation(&d.vals);
        for tr in sys.transitions(&d.sys) {
            if !tr.guard.iter().all(|a| a.holds(&v)) {
                continue;
            }
            let apply = |update: &crate::model::ClockUpdate, out: &mut Vec<(DState, bool)>| {
                let vals: Vec<i64> = sys
                    .clocks
                    .iter()
                    .zip(&d.vals)
                    .zip(&caps)
                    .map(|((c, old), cp)| match update.value_of(c) {
                        Some(nv) => nv.to_integer().min(*cp),
                        None => *old,
                    })
                    .collect();
                let dst = SysState { locs: tr.dst.clone(), pos: tr.dst_pos };
                if inv_ok(&dst, &vals) && viable(&dst, d.time) {
                    out.push((DState { sys: dst, vals, time: d.time, phase: d.phase }, false));
                }
            };
            apply(&tr.update, &mut out);
            if let Some(cu) = &tr.contingency_update {
                apply(cu, &mut out);
            }
        }
        out
    };
    let accept_dead_end = |d: &DState| -> bool {
        let t = Rational::from_integer(d.time);
        match d.phase {
            2 => true,
            1 => psi_at(&d.sys) && interval.meets_segment(&t, None),
            _ => psi_at(&d.sys) || !interval.meets_segment(&t, None),
        }
    };
    let accepting_phase = |d: &DState| -> bool { !is_f || d.phase == 2 };

    // DFS with on-stack cycle detection; accept a cycle containing a tick in
    // an accepting phase, or an accepted dead end.
    let init = DState {
        sys: sys.initial_state(),
        vals: vec![0; sys.clocks.len()],
        time: 0,
        phase: if is_f { 1 } else { 0 },
    };
    if !inv_ok(&init.sys, &init.vals) || !viable(&init.sys, 0) {
        return Ok(false);
    }
    let mut depth_ticks: HashMap<DState, i64> = HashMap::new();
    let mut on_stack: HashSet<DState> = HashSet::new();
    let mut done: HashSet<DState> = HashSet::new();
    struct Frame {
        state: DState,
        ticks: i64,
        succs: Vec<(DState, bool)>,
        next: usize,
    }
    let succs0 = successors(&init);
    if succs0.is_empty() && accept_dead_end(&init) {
        return Ok(true);
    }
    depth_ticks.insert(init.clone(), 0);
    on_stack.insert(init.clone());
    let mut frames = vec![Frame { state: init, ticks: 0, succs: succs0, next: 0 }];
    while let Some(f) = frames.last_mut() {
        if f.next >= f.succs.len() {
            on_stack.remove(&f.state);
            done.insert(f.state.clone());
            frames.pop();
            continue;
        }
        let (child, is_tick) = f.succs[f.next].clone();
        f.next += 1;
        let child_ticks = f.ticks + i64::from(is_tick);
        if on_stack.contains(&child) {
            if accepting_phase(&child) && child_ticks - depth_ticks[&child] > 0 {
                return Ok(true);
            }
            continue;
        }
        if done.contains(&child) {
            continue;
        }
        if depth_ticks.len() >= opts.node_limit {
            return Err(CheckError::BudgetExceeded(opts.node_limit));
        }
        let succs = successors(&child);
        if succs.is_empty() && accept_dead_end(&child) {
            return Ok(true);
        }
        depth_ticks.insert(child.clone(), child_ticks);
        on_stack.insert(child.clone());
        frames.push(Frame { state: child, ticks: child_ticks, succs, next: 0 });
    }
    Ok(false)
}
