//! Witness construction: turning a symbolic path through the zone graph into
//! a concrete run, gated by replay under the concrete semantics.

use std::collections::{HashMap, HashSet};

use num::{Signed, Zero};

use crate::mitl::Interval;
use crate::model::{Atom, NetworkAction, Rel};
use crate::rational::{scale_to_integer, Rational};
use crate::runs::{ParsedRun, ParsedTail, RunStep};

use super::dbm::Bound;
use super::goal::GoalFormula;
use super::sys::{CheckSystem, ConcreteState, SysState, SysTransition};
use super::CheckOptions;

/// One step of a checker witness; `contingent` marks the clock-contingency
/// variant of the transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessStep {
    pub delay: Rational,
    pub action: NetworkAction,
    pub contingent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessTail {
    /// Steps from the given index repeat forever.
    Loop(usize),
    Idle,
    Stuck,
}

/// A concrete run of the analyzed system satisfying the goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub steps: Vec<WitnessStep>,
    pub tail: WitnessTail,
}

impl Witness {
    /// The witness as a parseable run over the analyzed network; contingency
    /// markers are dropped.
    pub fn to_parsed_run(&self) -> ParsedRun {
        let to_step = |s: &WitnessStep| RunStep { delay: s.delay, action: s.action.clone() };
        match self.tail {
            WitnessTail::Loop(start) => ParsedRun {
                prefix: self.steps[..start].iter().map(to_step).collect(),
                tail: ParsedTail::Loop(self.steps[start..].iter().map(to_step).collect()),
            },
            WitnessTail::Idle => ParsedRun {
                prefix: self.steps.iter().map(to_step).collect(),
                tail: ParsedTail::Idle,
            },
            WitnessTail::Stuck => ParsedRun {
                prefix: self.steps.iter().map(to_step).collect(),
                tail: ParsedTail::Stuck,
            },
        }
    }
}

/// Dwell discipline of the node a path edge leaves, fixed during the search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dwell {
    Free,
    /// The node is left no later than the absolute time bound (strict flag).
    DepartLe(Rational, bool),
    /// The node was entered after the absolute time bound.
    EnterAfter(Rational, bool),
}

/// An edge of the search tree: a transition variant, or the pseudo-step that
/// pins the visit instant of an eventually goal.
#[derive(Debug, Clone)]
pub enum PathEdge {
    Step { trans: SysTransition, contingent: bool, dwell: Dwell },
    Visit(Interval),
}

/// How the path is closed off into a maximal run.
#[derive(Debug, Clone)]
pub enum Acceptance {
    /// The trailing `len` edges of the path form one cycle traversal.
    Cycle { len: usize },
    Idle,
    Stuck,
}

/// Attempts to concretize the path into a witness. Cycles are unrolled, the
/// resulting candidate loop delays are replayed until the loop boundary state
/// repeats, and the goal formula is finally evaluated on the signal of the
/// candidate run. Idle and stuck tails are verified against the concrete
/// semantics. Returning `None` here never makes the search unsound, only
/// incomplete.
pub(super) fn build_witness(
    sys: &CheckSystem,
    goal: &GoalFormula,
    path: &[PathEdge],
    accept: &Acceptance,
    final_entry: Option<(Rational, bool)>,
    opts: &CheckOptions,
) -> Option<Witness> {
    match accept {
        Acceptance::Cycle { len } => {
            let min_periods: &[Bound] = if opts.allow_zeno {
                &[Bound::le(-1), Bound::lt(0), Bound::le(0)]
            } else {
                &[Bound::le(-1), Bound::lt(0)]
            };
            for unroll in 2..=opts.unroll_limit.max(2) {
                for &mp in min_periods {
                    if let Some(w) = try_cycle(sys, goal, path, *len, unroll, mp) {
                        return Some(w);
                    }
                }
            }
            None
        }
        Acceptance::Idle | Acceptance::Stuck => {
            let times = solve_times(sys, path, None, final_entry)?;
            let steps = concrete_steps(path, &times)?;
            let end = replay_prefix(sys, &steps)?;
            let tail = match accept {
                Acceptance::Idle => {
                    if !sys.can_idle(&end.state) {
                        return None;
                    }
                    WitnessTail::Idle
                }
                _ => {
                    if !sys.is_stuck(&end) {
                        return None;
                    }
                    WitnessTail::Stuck
                }
            };
            let witness = assemble(&steps, tail);
            goal_holds(sys, goal, &steps, tail).then_some(witness)
        }
    }
}

fn try_cycle(
    sys: &CheckSystem,
    goal: &GoalFormula,
    path: &[PathEdge],
    cycle_len: usize,
    unroll: usize,
    min_period: Bound,
) -> Option<Witness> {
    let expanded = expand_cycle(path, cycle_len, unroll);
    let times = solve_times(sys, &expanded, Some((cycle_len, min_period)), None)?;
    let steps = concrete_steps(&expanded, &times)?;
    // Cycle edges are always concrete steps, so counts line up one to one.
    let body: Vec<TimedStep> = steps[steps.len() - cycle_len..].to_vec();
    let prefix: Vec<TimedStep> = steps[..steps.len() - cycle_len].to_vec();

    // Iterate the candidate loop until a boundary state repeats. The observer
    // clock and clocks the body never observes before resetting are allowed
    // to drift: their values cannot influence any later transition, and the
    // final goal evaluation re-simulates every iteration anyway.
    let mut cur = replay_prefix(sys, &prefix)?;
    let tolerant = drift_tolerant_clocks(sys, &cur.state, &body);
    let mut boundaries = vec![cur.clone()];
    for _ in 0..8 {
        for s in &body {
            cur = sys.concrete_step(&cur, &s.delay, &s.trans, s.contingent).ok()?;
        }
        if let Some(i) =
            boundaries.iter().position(|b| boundary_matches(sys, b, &cur, &tolerant))
        {
            let copies = boundaries.len() - i; // loop spans this many body copies
            let mut all = prefix;
            for _ in 0..i {
                all.extend(body.iter().cloned());
            }
            let start = all.len();
            for _ in 0..copies {
                all.extend(body.iter().cloned());
            }
            let tail = WitnessTail::Loop(start);
            let witness = assemble(&all, tail);
            return goal_holds(sys, goal, &all, tail).then_some(witness);
        }
        boundaries.push(cur.clone());
    }
    None
}

/// Clocks the loop body never observes (in a guard or an occupied location's
/// invariant) before their first reset within the body. Their boundary values
/// are free to drift without affecting any behavior of the loop.
fn drift_tolerant_clocks(
    sys: &CheckSystem,
    start: &SysState,
    body: &[TimedStep],
) -> HashSet<String> {
    // `pending`: neither observed nor reset yet while walking the body.
    let mut pending: HashSet<&str> = sys.clocks.iter().map(String::as_str).collect();
    let mut tolerant: HashSet<String> = HashSet::new();
    let mut state = start.clone();
    fn observe<'a>(pending: &mut HashSet<&'a str>, atoms: impl IntoIterator<Item = &'a Atom>) {
        for a in atoms {
            pending.remove(a.clock.as_str());
            if let Some(y) = &a.minus {
                pending.remove(y.as_str());
            }
        }
    }
    for s in body {
        observe(&mut pending, sys.invariant_atoms(&state));
        observe(&mut pending, s.trans.guard.iter());
        let update = if s.contingent {
            s.trans.contingency_update.as_ref()
        } else {
            Some(&s.trans.update)
        };
        for (c, _) in update.iter().flat_map(|u| u.assignments.iter()) {
            if pending.remove(c.as_str()) {
                tolerant.insert(c.clone());
            }
        }
        state = SysState { locs: s.trans.dst.clone(), pos: s.trans.dst_pos };
        observe(&mut pending, sys.invariant_atoms(&state));
    }
    // Never observed and never reset: pure drift.
    tolerant.extend(pending.into_iter().map(String::from));
    tolerant
}

fn boundary_matches(
    sys: &CheckSystem,
    a: &ConcreteState,
    b: &ConcreteState,
    tolerant: &HashSet<String>,
) -> bool {
    if a.state != b.state {
        return false;
    }
    sys.clocks.iter().enumerate().all(|(i, c)| {
        Some(i + 1) == sys.observer || tolerant.contains(c) || a.vals.get(c) == b.vals.get(c)
    })
}

/// A fully resolved step: delay plus the transition to fire.
#[derive(Debug, Clone)]
struct TimedStep {
    delay: Rational,
    trans: SysTransition,
    contingent: bool,
}

fn expand_cycle(path: &[PathEdge], cycle_len: usize, unroll: usize) -> Vec<PathEdge> {
    let mut out: Vec<PathEdge> = path.to_vec();
    for _ in 1..unroll {
        out.extend(path[path.len() - cycle_len..].iter().cloned());
    }
    out
}

fn concrete_steps(edges: &[PathEdge], times: &[Rational]) -> Option<Vec<TimedStep>> {
    let mut out = Vec::new();
    let mut last = Rational::zero();
    for (e, t) in edges.iter().zip(times) {
        match e {
            PathEdge::Step { trans, contingent, .. } => {
                let delay = t - last;
                if delay.is_negative() {
                    return None;
                }
                out.push(TimedStep { delay, trans: trans.clone(), contingent: *contingent });
                last = *t;
            }
            PathEdge::Visit(_) => {}
        }
    }
    Some(out)
}

fn replay_prefix(sys: &CheckSystem, steps: &[TimedStep]) -> Option<ConcreteState> {
    let mut cur = sys.concrete_initial();
    for s in steps {
        cur = sys.concrete_step(&cur, &s.delay, &s.trans, s.contingent).ok()?;
    }
    Some(cur)
}

fn assemble(steps: &[TimedStep], tail: WitnessTail) -> Witness {
    Witness {
        steps: steps
            .iter()
            .map(|s| WitnessStep {
                delay: s.delay,
                action: s.trans.action.clone(),
                contingent: s.contingent,
            })
            .collect(),
        tail,
    }
}

// ---- final gate: evaluate the goal on the candidate run's signal ----

/// Simulates the candidate and checks the goal against the label signal. For
/// loops the signal is unrolled past every interval bound plus two periods;
/// idle and stuck tails freeze the final labels forever.
fn goal_holds(
    sys: &CheckSystem,
    goal: &GoalFormula,
    steps: &[TimedStep],
    tail: WitnessTail,
) -> bool {
    let psi = goal.psi();
    let mut segments: Vec<(Rational, bool)> = Vec::new(); // (start, ψ holds)
    let mut cur = sys.concrete_initial();
    let mut t = Rational::zero();
    let push = |segments: &mut Vec<(Rational, bool)>, t: Rational, cur: &ConcreteState| {
        let holds = psi.eval_boolean(&sys.labels(&cur.state)).unwrap_or(false);
        segments.push((t, holds));
    };
    push(&mut segments, t, &cur);
    let apply = |cur: &mut ConcreteState, t: &mut Rational, s: &TimedStep| -> bool {
        match sys.concrete_step(cur, &s.delay, &s.trans, s.contingent) {
            Ok(next) => {
                *t += s.delay;
                *cur = next;
                true
            }
            Err(_) => false,
        }
    };
    for s in steps {
        if !apply(&mut cur, &mut t, s) {
            return false;
        }
        push(&mut segments, t, &cur);
    }
    let bounds: Rational = match goal {
        GoalFormula::ExistsRunGlobally(_) => Rational::zero(),
        GoalFormula::ExistsRunEventually(_, i) | GoalFormula::ExistsRunGloballyBounded(_, i) => {
            i.lo + i.hi.unwrap_or_else(Rational::zero)
        }
    };
    let open_end = match tail {
        WitnessTail::Loop(start) => {
            let body = &steps[start..];
            let period: Rational = body.iter().map(|s| s.delay).sum();
            let horizon = t + bounds + period * Rational::from_integer(2) + Rational::from_integer(1);
            let mut iterations = 0;
            while t < horizon && iterations < 1000 {
                for s in body {
                    if !apply(&mut cur, &mut t, s) {
                        return false;
                    }
                    push(&mut segments, t, &cur);
                }
                iterations += 1;
            }
            // A Zeno loop never reaches the horizon; the signal simply stops.
            period.is_positive()
        }
        WitnessTail::Idle | WitnessTail::Stuck => true,
    };

    let ends = |k: usize| -> Option<&Rational> {
        match segments.get(k + 1) {
            Some((s, _)) => Some(s),
            None if open_end => None,
            None => Some(&segments[k].0),
        }
    };
    match goal {
        GoalFormula::ExistsRunGlobally(_) => {
            let full = Interval::full();
            segments
                .iter()
                .enumerate()
                .all(|(k, (s, holds))| *holds || !full.meets_segment(s, ends(k)))
        }
        GoalFormula::ExistsRunGloballyBounded(_, i) => segments
            .iter()
            .enumerate()
            .all(|(k, (s, holds))| *holds || !i.meets_segment(s, ends(k))),
        GoalFormula::ExistsRunEventually(_, i) => segments
            .iter()
            .enumerate()
            .any(|(k, (s, holds))| *holds && i.meets_segment(s, ends(k))),
    }
}

// ---- difference-constraint solving over absolute transition times ----

struct TimeSolver {
    n: usize,
    m: Vec<Bound>,
}

impl TimeSolver {
    fn new(vars: usize) -> Self {
        let n = vars + 1;
        let mut m = vec![Bound::Inf; n * n];
        for i in 0..n {
            m[i * n + i] = Bound::ZERO;
        }
        let mut s = TimeSolver { n, m };
        for i in 1..n {
            s.tighten(0, i, Bound::ZERO); // times are nonnegative
        }
        s
    }

    fn tighten(&mut self, i: usize, j: usize, b: Bound) {
        let e = &mut self.m[i * self.n + j];
        if b < *e {
            *e = b;
        }
    }

    fn close(&mut self) -> bool {
        for k in 0..self.n {
            for i in 0..self.n {
                let dik = self.m[i * self.n + k];
                if dik == Bound::Inf {
                    continue;
                }
                for j in 0..self.n {
                    let cand = dik.add(self.m[k * self.n + j]);
                    if cand < self.m[i * self.n + j] {
                        self.m[i * self.n + j] = cand;
                    }
                }
            }
        }
        (0..self.n).all(|i| self.m[i * self.n + i] >= Bound::ZERO)
    }

    /// Greedy assignment in variable order, preferring the smallest
    /// admissible integer and falling back to interval midpoints. Closure
    /// guarantees every per-variable window is nonempty.
    fn assign(&self) -> Option<Vec<Rational>> {
        let mut vals = vec![Rational::zero(); self.n];
        for i in 1..self.n {
            let mut lo = (Rational::zero(), false);
            let mut hi: Option<(Rational, bool)> = None;
            for j in 0..i {
                // v_i - v_j <= m[i][j]
                if let Bound::B(b, s) = self.m[i * self.n + j] {
                    let cand = (vals[j] + Rational::from_integer(b), s);
                    hi = Some(match hi {
                        None => cand,
                        Some(cur) if cand.0 < cur.0 || (cand.0 == cur.0 && cand.1) => cand,
                        Some(cur) => cur,
                    });
                }
                // v_j - v_i <= m[j][i]
                if let Bound::B(b, s) = self.m[j * self.n + i] {
                    let cand = (vals[j] - Rational::from_integer(b), s);
                    if cand.0 > lo.0 || (cand.0 == lo.0 && cand.1) {
                        lo = cand;
                    }
                }
            }
            vals[i] = pick(lo, hi)?;
        }
        Some(vals)
    }
}

fn pick(lo: (Rational, bool), hi: Option<(Rational, bool)>) -> Option<Rational> {
    let mut int = lo.0.ceil();
    if int < lo.0 || (int == lo.0 && lo.1) {
        int += Rational::from_integer(1);
    }
    match hi {
        None => Some(int),
        Some((h, hs)) => {
            if lo.0 > h || (lo.0 == h && (lo.1 || hs)) {
                return None;
            }
            if int < h || (int == h && !hs) {
                Some(int)
            } else if lo.0 == h {
                Some(lo.0)
            } else {
                Some((lo.0 + h) / Rational::from_integer(2))
            }
        }
    }
}

/// Solves the difference-constraint system of the edge list: guard atoms,
/// invariants at both dwell ends, dwell disciplines, visit constraints, and —
/// when `cycle` is given — a positive total duration of the trailing cycle
/// copy. Returns the absolute time of every edge, unscaled.
fn solve_times(
    sys: &CheckSystem,
    edges: &[PathEdge],
    cycle: Option<(usize, Bound)>,
    final_entry: Option<(Rational, bool)>,
) -> Option<Vec<Rational>> {
    let mut solver = TimeSolver::new(edges.len());
    let scale = sys.scale;
    let sb = |r: &Rational| scale_to_integer(r, scale);

    // Reset bookkeeping: clock -> (variable of last assignment, value).
    let mut track: HashMap<&str, (usize, Rational)> =
        sys.clocks.iter().map(|c| (c.as_str(), (0usize, Rational::zero()))).collect();

    fn emit(
        solver: &mut TimeSolver,
        track: &HashMap<&str, (usize, Rational)>,
        scale: i64,
        atom: &Atom,
        at: usize,
    ) {
        let (rx, cx) = track[atom.clock.as_str()];
        let (i, j, base) = match &atom.minus {
            // c_x + (T_at - T_rx) rel b  →  T_at - T_rx rel b - c_x
            None => (at, rx, atom.bound - cx),
            Some(y) => {
                let (ry, cy) = track[y.as_str()];
                // (c_x - c_y) + (T_ry - T_rx) rel b  →  T_ry - T_rx rel b - c_x + c_y
                (ry, rx, atom.bound - cx + cy)
            }
        };
        let b = scale_to_integer(&base, scale);
        match atom.rel {
            Rel::Lt => solver.tighten(i, j, Bound::lt(b)),
            Rel::Le => solver.tighten(i, j, Bound::le(b)),
            Rel::Eq => {
                solver.tighten(i, j, Bound::le(b));
                solver.tighten(j, i, Bound::le(-b));
            }
            Rel::Ge => solver.tighten(j, i, Bound::le(-b)),
            Rel::Gt => solver.tighten(j, i, Bound::lt(-b)),
        }
    }

    let mut state = sys.initial_state();
    let mut prev = 0usize;
    for (k, edge) in edges.iter().enumerate() {
        let v = k + 1;
        solver.tighten(prev, v, Bound::le(0));
        match edge {
            PathEdge::Step { trans, contingent, dwell } => {
                match dwell {
                    Dwell::Free => {}
                    Dwell::DepartLe(a, strict) => {
                        let ab = sb(a);
                        solver.tighten(v, 0, if *strict { Bound::lt(ab) } else { Bound::le(ab) });
                    }
                    Dwell::EnterAfter(b, strict) => {
                        let bb = sb(b);
                        solver.tighten(
                            0,
                            prev,
                            if *strict { Bound::lt(-bb) } else { Bound::le(-bb) },
                        );
                    }
                }
                // Exit invariant of the occupied node and the guard, at time v.
                for a in sys.invariant_atoms(&state) {
                    emit(&mut solver, &track, scale, a, v);
                }
                for a in &trans.guard {
                    emit(&mut solver, &track, scale, a, v);
                }
                let update = if *contingent {
                    trans.contingency_update.as_ref()?
                } else {
                    &trans.update
                };
                for (c, val) in &update.assignments {
                    if let Some(slot) = track.get_mut(c.as_str()) {
                        *slot = (v, *val);
                    }
                }
                state = SysState { locs: trans.dst.clone(), pos: trans.dst_pos };
                // Entry invariant of the new node, at time v after the update.
                for a in sys.invariant_atoms(&state) {
                    emit(&mut solver, &track, scale, a, v);
                }
                prev = v;
            }
            PathEdge::Visit(i) => {
                // The visit instant: inside the interval.
                let lo = sb(&i.lo);
                solver.tighten(0, v, if i.lo_strict { Bound::lt(-lo) } else { Bound::le(-lo) });
                if let Some(h) = &i.hi {
                    let hb = sb(h);
                    solver.tighten(v, 0, if i.hi_strict { Bound::lt(hb) } else { Bound::le(hb) });
                }
                prev = v;
            }
        }
    }

    if let Some((b, strict)) = final_entry {
        let bb = sb(&b);
        solver.tighten(0, prev, if strict { Bound::lt(-bb) } else { Bound::le(-bb) });
    }
    if let Some((len, min_period)) = cycle {
        // Total duration of the trailing cycle copy.
        let end = edges.len();
        let start = end - len;
        solver.tighten(start, end, min_period);
    }

    if !solver.close() {
        return None;
    }
    let vals = solver.assign()?;
    Some(vals[1..].iter().map(|v| v / Rational::from_integer(scale)).collect())
}
