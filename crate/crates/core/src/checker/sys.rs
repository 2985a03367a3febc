//! The transition system a check runs over: a network, optionally decorated
//! on the fly with a clock contingency and an observer clock, with all
//! constants scaled to integers for the DBM layer.

use std::collections::HashMap;

use num::Zero;

use crate::contingency::ClockContingency;
use crate::model::{
    ActionLabel, Atom, ClockUpdate, ClockValuation, Network, NetworkAction, Polarity, Rel,
};
use crate::rational::{denominator_lcm, scale_to_integer, Rational};
use crate::runs::{constrain_by_atoms, DeltaWindow};

use super::dbm::{Bound, Dbm};
use super::CheckError;

/// Absolute-time clock appended by the checker for interval goals.
pub const OBSERVER_CLOCK: &str = "_obs";

/// Discrete part of a zone node: one location index per component plus the
/// clock-contingency position (0 when no contingency is attached).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SysState {
    pub locs: Vec<usize>,
    pub pos: usize,
}

/// One network transition from a fixed location vector, with guards and
/// updates of the participating edges combined. `contingency_update` is the
/// variant that restores the run valuation at the target position.
#[derive(Debug, Clone)]
pub struct SysTransition {
    pub action: NetworkAction,
    pub guard: Vec<Atom>,
    pub update: ClockUpdate,
    pub contingency_update: Option<ClockUpdate>,
    pub dst: Vec<usize>,
    pub dst_pos: usize,
}

/// A concrete state used for witness replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteState {
    pub state: SysState,
    pub vals: ClockValuation,
}

pub struct CheckSystem<'a> {
    pub net: &'a Network,
    pub cc: Option<&'a ClockContingency>,
    /// Clock order for the DBM; index `i` maps to DBM row `i + 1`.
    pub clocks: Vec<String>,
    clock_idx: HashMap<String, usize>,
    /// DBM row of the observer clock, if attached.
    pub observer: Option<usize>,
    pub scale: i64,
    max_const: Vec<Option<i64>>,
    loc_index: Vec<HashMap<String, usize>>,
}

impl<'a> CheckSystem<'a> {
    pub fn new(
        net: &'a Network,
        cc: Option<&'a ClockContingency>,
        with_observer: bool,
        interval_bounds: &[Rational],
    ) -> Result<CheckSystem<'a>, CheckError> {
        let mut clocks = net.global_clocks.clone();
        for comp in &net.components {
            for c in &comp.clocks {
                if !clocks.contains(c) {
                    clocks.push(c.clone());
                }
            }
        }
        if clocks.iter().any(|c| c == OBSERVER_CLOCK) {
            return Err(CheckError::ReservedClock(OBSERVER_CLOCK.into()));
        }
        let observer = if with_observer {
            clocks.push(OBSERVER_CLOCK.into());
            Some(clocks.len())
        } else {
            None
        };

        let mut constants: Vec<Rational> = interval_bounds.to_vec();
        for comp in &net.components {
            for l in &comp.locations {
                constants.extend(l.invariant.atoms.iter().map(|a| a.bound));
            }
            for e in &comp.edges {
                constants.extend(e.guard.atoms.iter().map(|a| a.bound));
                constants.extend(e.update.assignments.iter().map(|(_, v)| *v));
            }
        }
        if let Some(cc) = cc {
            for v in &cc.valuations {
                constants.extend(v.values.values().copied());
            }
        }
        let scale = denominator_lcm(constants.iter());

        // Per-clock maximal constants; clocks in difference atoms are exempt
        // from extrapolation.
        let clock_idx: HashMap<String, usize> =
            clocks.iter().enumerate().map(|(i, c)| (c.clone(), i + 1)).collect();
        let mut max_const: Vec<Option<i64>> = vec![Some(0); clocks.len()];
        let bump = |mc: &mut Vec<Option<i64>>, name: &str, v: i64| {
            if let Some(i) = clock_idx.get(name) {
                if let Some(m) = &mut mc[i - 1] {
                    *m = (*m).max(v);
                }
            }
        };
        for comp in &net.components {
            let atoms = comp
                .locations
                .iter()
                .flat_map(|l| l.invariant.atoms.iter())
                .chain(comp.edges.iter().flat_map(|e| e.guard.atoms.iter()));
            for a in atoms {
                let v = scale_to_integer(&a.bound, scale).max(0);
                if let Some(y) = &a.minus {
                    if let Some(i) = clock_idx.get(&a.clock) {
                        max_const[i - 1] = None;
                    }
                    if let Some(i) = clock_idx.get(y) {
                        max_const[i - 1] = None;
                    }
                } else {
                    bump(&mut max_const, &a.clock, v);
                }
            }
        }
        if let Some(obs) = observer {
            let m = interval_bounds
                .iter()
                .map(|b| scale_to_integer(b, scale))
                .max()
                .unwrap_or(0);
            max_const[obs - 1] = Some(m.max(1));
        }

        let loc_index = net
            .components
            .iter()
            .map(|c| {
                c.locations
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.name.clone(), i))
                    .collect()
            })
            .collect();

        Ok(CheckSystem { net, cc, clocks, clock_idx, observer, scale, max_const, loc_index })
    }

    pub fn clock_count(&self) -> usize {
        self.clocks.len()
    }

    fn idx(&self, clock: &str) -> usize {
        self.clock_idx[clock]
    }

    pub fn initial_state(&self) -> SysState {
        let locs = self
            .net
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| self.loc_index[i][&c.initial])
            .collect();
        SysState { locs, pos: 0 }
    }

    pub fn location_name(&self, comp: usize, loc: usize) -> &str {
        &self.net.components[comp].locations[loc].name
    }

    pub fn labels(&self, state: &SysState) -> Vec<String> {
        let mut out = Vec::new();
        for (i, comp) in self.net.components.iter().enumerate() {
            out.extend(comp.locations[state.locs[i]].labels.iter().cloned());
        }
        out
    }

    pub fn invariant_atoms(&self, state: &SysState) -> Vec<&Atom> {
        self.net
            .components
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.locations[state.locs[i]].invariant.atoms.iter())
            .collect()
    }

    /// Applies `x_i - x_j rel bound` to the zone.
    fn constrain_atom(&self, z: &mut Dbm, atom: &Atom) {
        let i = self.idx(&atom.clock);
        let j = atom.minus.as_deref().map(|y| self.idx(y)).unwrap_or(0);
        let b = scale_to_integer(&atom.bound, self.scale);
        match atom.rel {
            Rel::Lt => z.constrain(i, j, Bound::lt(b)),
            Rel::Le => z.constrain(i, j, Bound::le(b)),
            Rel::Eq => {
                z.constrain(i, j, Bound::le(b));
                z.constrain(j, i, Bound::le(-b));
            }
            Rel::Ge => z.constrain(j, i, Bound::le(-b)),
            Rel::Gt => z.constrain(j, i, Bound::lt(-b)),
        }
    }

    pub fn constrain_atoms<'b>(&self, z: &mut Dbm, atoms: impl IntoIterator<Item = &'b Atom>) {
        for a in atoms {
            self.constrain_atom(z, a);
            if z.is_empty() {
                return;
            }
        }
    }

    pub fn apply_update(&self, z: &mut Dbm, update: &ClockUpdate) {
        for (c, v) in &update.assignments {
            z.assign(self.idx(c), scale_to_integer(v, self.scale));
        }
    }

    /// Constrains the observer clock by `rel`-style bounds; `lower` is
    /// `obs ≥/> b`, otherwise `obs ≤/< b`.
    pub fn constrain_observer(&self, z: &mut Dbm, b: &Rational, strict: bool, lower: bool) {
        let obs = self.observer.expect("observer clock not attached");
        let v = scale_to_integer(b, self.scale);
        if lower {
            z.constrain(0, obs, if strict { Bound::lt(-v) } else { Bound::le(-v) });
        } else {
            z.constrain(obs, 0, if strict { Bound::lt(v) } else { Bound::le(v) });
        }
    }

    pub fn extrapolate(&self, z: &mut Dbm) {
        z.extrapolate(&self.max_const);
    }

    pub fn initial_zone(&self) -> Dbm {
        let mut z = Dbm::zero(self.clock_count());
        let st = self.initial_state();
        self.constrain_atoms(&mut z, self.invariant_atoms(&st));
        z
    }

    /// All combined network transitions leaving the location vector of
    /// `state`: internal edges plus sender/receiver pairings.
    pub fn transitions(&self, state: &SysState) -> Vec<SysTransition> {
        let mut out = Vec::new();
        let comps = &self.net.components;
        let dst_pos = self.cc.map(|c| c.dst(state.pos + 1)).unwrap_or(0);
        for (i, comp) in comps.iter().enumerate() {
            let src = &comp.locations[state.locs[i]].name;
            for e in comp.edges_from(src) {
                match e.action.polarity {
                    Polarity::Internal => {
                        let mut dst = state.locs.clone();
                        dst[i] = self.loc_index[i][&e.dst];
                        self.push_transition(
                            &mut out,
                            NetworkAction::internal(i, e.action.clone()),
                            e.guard.atoms.clone(),
                            e.update.clone(),
                            dst,
                            dst_pos,
                        );
                    }
                    Polarity::Send => {
                        let recv = ActionLabel::receive(e.action.name.clone());
                        for (j, other) in comps.iter().enumerate() {
                            if j == i {
                                continue;
                            }
                            let osrc = &other.locations[state.locs[j]].name;
                            for f in other.edges_from(osrc) {
                                if f.action != recv {
                                    continue;
                                }
                                let Ok(update) = e.update.union(&f.update) else {
                                    continue;
                                };
                                let mut guard = e.guard.atoms.clone();
                                guard.extend(f.guard.atoms.iter().cloned());
                                let mut dst = state.locs.clone();
                                dst[i] = self.loc_index[i][&e.dst];
                                dst[j] = self.loc_index[j][&f.dst];
                                self.push_transition(
                                    &mut out,
                                    NetworkAction::synchronized(i, j, e.action.clone()),
                                    guard,
                                    update,
                                    dst,
                                    dst_pos,
                                );
                            }
                        }
                    }
                    Polarity::Receive => {}
                }
            }
        }
        out
    }

    fn push_transition(
        &self,
        out: &mut Vec<SysTransition>,
        action: NetworkAction,
        guard: Vec<Atom>,
        update: ClockUpdate,
        dst: Vec<usize>,
        dst_pos: usize,
    ) {
        let contingency_update = self.cc.map(|cc| cc.contingency_update(&update, dst_pos));
        out.push(SysTransition { action, guard, update, contingency_update, dst, dst_pos });
    }

    // ---- concrete semantics (witness replay) ----

    pub fn concrete_initial(&self) -> ConcreteState {
        ConcreteState {
            state: self.initial_state(),
            vals: ClockValuation::zero(&self.clocks),
        }
    }

    fn invariants_hold(&self, locs: &[usize], vals: &ClockValuation) -> bool {
        self.net
            .components
            .iter()
            .enumerate()
            .all(|(i, c)| c.locations[locs[i]].invariant.holds(vals))
    }

    /// Delay then fire one transition variant, checking invariants at both
    /// ends of the dwell, the guard at firing time, and the target invariant.
    pub fn concrete_step(
        &self,
        cur: &ConcreteState,
        delay: &Rational,
        t: &SysTransition,
        contingent: bool,
    ) -> Result<ConcreteState, String> {
        if delay < &Rational::zero() {
            return Err("negative delay".into());
        }
        let end = cur.vals.advance(delay);
        if !self.invariants_hold(&cur.state.locs, &cur.vals)
            || !self.invariants_hold(&cur.state.locs, &end)
        {
            return Err("invariant violated during delay".into());
        }
        if !t.guard.iter().all(|a| a.holds(&end)) {
            return Err(format!("guard fails for {}", t.action.label));
        }
        let update = if contingent {
            t.contingency_update.as_ref().ok_or("no contingency variant")?
        } else {
            &t.update
        };
        let mut vals = end;
        update.apply(&mut vals);
        if !self.invariants_hold(&t.dst, &vals) {
            return Err("target invariant violated".into());
        }
        Ok(ConcreteState { state: SysState { locs: t.dst.clone(), pos: t.dst_pos }, vals })
    }

    /// True iff the occupied invariants place no upper bound on any clock, so
    /// the state can delay forever.
    pub fn can_idle(&self, state: &SysState) -> bool {
        self.invariant_atoms(state).iter().all(|a| {
            a.minus.is_some() || matches!(a.rel, Rel::Ge | Rel::Gt)
        })
    }

    /// True iff no transition variant can ever fire from the concrete state,
    /// for any admissible delay.
    pub fn is_stuck(&self, cs: &ConcreteState) -> bool {
        let mut base = DeltaWindow::nonneg();
        for a in self.invariant_atoms(&cs.state) {
            constrain_by_atoms(&mut base, std::slice::from_ref(a), &cs.vals, None);
        }
        for t in self.transitions(&cs.state) {
            for update in std::iter::once(&t.update).chain(t.contingency_update.as_ref()) {
                let mut w = base.clone();
                constrain_by_atoms(&mut w, &t.guard, &cs.vals, None);
                for (i, comp) in self.net.components.iter().enumerate() {
                    constrain_by_atoms(
                        &mut w,
                        &comp.locations[t.dst[i]].invariant.atoms,
                        &cs.vals,
                        Some(update),
                    );
                }
                if !w.is_empty() {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;

    fn running_example() -> Network {
        parse_model(include_str!("../../../../benchmarks/running-example-n2.rtn")).unwrap()
    }

    #[test]
    fn scaling_and_clock_layout() {
        let net = running_example();
        let sys = CheckSystem::new(&net, None, true, &[]).unwrap();
        assert_eq!(sys.scale, 1);
        assert_eq!(sys.clocks.last().map(String::as_str), Some(OBSERVER_CLOCK));
        assert_eq!(sys.observer, Some(sys.clocks.len()));
    }

    #[test]
    fn transitions_match_concrete_successors() {
        let net = running_example();
        let sys = CheckSystem::new(&net, None, false, &[]).unwrap();
        let init = sys.initial_state();
        let ts = sys.transitions(&init);
        // Both components can enter crit on beta or take their alpha self-loop.
        assert_eq!(ts.len(), 4);
        assert_eq!(ts.iter().filter(|t| t.action.label.name == "beta").count(), 2);
        assert_eq!(ts.iter().filter(|t| t.action.label.name == "alpha").count(), 2);
    }

    #[test]
    fn symbolic_guard_application_narrows_the_zone() {
        let net = running_example();
        let sys = CheckSystem::new(&net, None, false, &[]).unwrap();
        let mut z = Dbm::zero(sys.clock_count());
        z.up();
        // crit's invariant x1 <= 3 bounds the zone.
        let mut st = sys.initial_state();
        st.locs[0] = sys.loc_index[0]["crit"];
        sys.constrain_atoms(&mut z, sys.invariant_atoms(&st));
        let i = sys.idx("x1");
        assert_eq!(z.at(i, 0), Bound::le(3));
    }

    #[test]
    fn concrete_step_enforces_guards() {
        let net = running_example();
        let sys = CheckSystem::new(&net, None, false, &[]).unwrap();
        let init = sys.concrete_initial();
        let ts = sys.transitions(&init.state);
        let beta1 = ts.iter().find(|t| t.action.first == 0).unwrap();
        let next = sys.concrete_step(&init, &Rational::from_integer(1), beta1, false).unwrap();
        assert_eq!(sys.location_name(0, next.state.locs[0]), "crit");
        assert_eq!(next.vals.get("x1"), Rational::zero());
        // crit's exit beta needs x1 == 3.
        let ts2 = sys.transitions(&next.state);
        let exit = ts2.iter().find(|t| t.action.first == 0).unwrap();
        assert!(sys.concrete_step(&next, &Rational::from_integer(1), exit, false).is_err());
        assert!(sys.concrete_step(&next, &Rational::from_integer(3), exit, false).is_ok());
    }

    #[test]
    fn idle_and_stuck_classification() {
        let net = running_example();
        let sys = CheckSystem::new(&net, None, false, &[]).unwrap();
        let init = sys.concrete_initial();
        // init locations carry no invariants: idling is allowed, not stuck.
        assert!(sys.can_idle(&init.state));
        assert!(!sys.is_stuck(&init));
        let mut crit = init.clone();
        crit.state.locs[0] = sys.loc_index[0]["crit"];
        assert!(!sys.can_idle(&crit.state));
    }
}
