//! Checking and computing but-for and actual counterfactual causes.
//!
//! A cause is a subset of the events on the actual run whose intervention
//! admits a counterfactual run avoiding the effect (for actual causes, with
//! the help of contingencies restoring original locations or clock values),
//! and that is minimal with this property.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::checker::{
    exists_run_satisfying, normalize, CheckError, CheckOptions, GoalFormula, Witness,
};
use crate::contingency::build_actual_network;
use crate::counterfactual::{build_but_for_network, CtaError};
use crate::mitl::{MitlError, MitlFormula};
use crate::model::Network;
use crate::runs::{
    evaluate_mitl_on_lasso, events_of_run, satisfies_events, Event, EventSet, LassoRun,
};

/// Which counterfactual relation to use for the `CF` condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Plain interventions on the selected events.
    ButFor,
    /// Interventions plus location and clock contingencies.
    Actual,
}

#[derive(Debug, Error)]
pub enum CauseError {
    #[error("the effect does not hold on the given run")]
    EffectNotObserved,
    #[error("the run carries {0} events; candidate enumeration is limited to 64")]
    TooManyEvents(usize),
    #[error(transparent)]
    Cta(#[from] CtaError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Mitl(#[from] MitlError),
}

/// A causality query: which event sets explain the effect on this run?
pub struct CauseQuery<'a> {
    pub network: &'a Network,
    pub run: &'a LassoRun,
    pub effect: &'a MitlFormula,
    pub mode: Mode,
}

#[derive(Debug, Clone, Default)]
pub struct CauseStats {
    /// Number of events on the run.
    pub events: usize,
    /// Candidate sets whose `CF` condition was model checked.
    pub checked: usize,
    /// Candidate sets skipped thanks to monotonicity pruning.
    pub pruned: usize,
    pub elapsed: Duration,
}

#[derive(Debug)]
pub struct CauseReport {
    pub causes: Vec<EventSet>,
    pub stats: CauseStats,
}

impl<'a> CauseQuery<'a> {
    fn goal(&self) -> Result<GoalFormula, CauseError> {
        Ok(normalize(&self.effect.clone().not())?)
    }

    /// The `CF` condition: the intervened network has a maximal run avoiding
    /// the effect. Returns the avoiding run when one exists.
    pub fn cf_witness(
        &self,
        cause: &EventSet,
        opts: &CheckOptions,
    ) -> Result<Option<Witness>, CauseError> {
        let goal = self.goal()?;
        self.cf_witness_for_goal(cause, &goal, opts)
    }

    fn cf_witness_for_goal(
        &self,
        cause: &EventSet,
        goal: &GoalFormula,
        opts: &CheckOptions,
    ) -> Result<Option<Witness>, CauseError> {
        let (w, _) = match self.mode {
            Mode::ButFor => {
                let net = build_but_for_network(self.network, self.run, cause)?;
                exists_run_satisfying(&net, None, goal, opts)?
            }
            Mode::Actual => {
                let an = build_actual_network(self.network, self.run, cause)?;
                exists_run_satisfying(&an.network, Some(&an.clocks), goal, opts)?
            }
        };
        Ok(w)
    }

    fn cf_holds(
        &self,
        cause: &EventSet,
        goal: &GoalFormula,
        opts: &CheckOptions,
    ) -> Result<bool, CauseError> {
        Ok(self.cf_witness_for_goal(cause, goal, opts)?.is_some())
    }

    fn effect_observed(&self) -> Result<bool, CauseError> {
        Ok(evaluate_mitl_on_lasso(self.run, self.network, self.effect)?)
    }
}

/// Decides whether `cause` is a cause for the queried effect: `SAT` (run
/// satisfies cause and effect), `CF`, and minimality. By monotonicity of `CF`
/// it suffices to check the subsets with one element removed.
pub fn check_cause(
    query: &CauseQuery,
    cause: &EventSet,
    opts: &CheckOptions,
) -> Result<bool, CauseError> {
    if !query.effect_observed()? || !satisfies_events(query.run, query.network, cause) {
        return Ok(false);
    }
    let goal = query.goal()?;
    if !query.cf_holds(cause, &goal, opts)? {
        return Ok(false);
    }
    for e in cause {
        let mut smaller = cause.clone();
        smaller.remove(e);
        if query.cf_holds(&smaller, &goal, opts)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All subsets of `n` elements with exactly `k` bits set, as bitmasks.
fn masks_of_size(n: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::new();
    let mut stack = vec![(0u64, 0usize, k)];
    while let Some((mask, start, left)) = stack.pop() {
        if left == 0 {
            out.push(mask);
            continue;
        }
        for i in start..=n - left {
            stack.push((mask | 1 << i, i + 1, left - 1));
        }
    }
    out.sort_unstable();
    out
}

fn is_subset(a: u64, b: u64) -> bool {
    a & b == a
}

/// Computes the set of all causes by a bidirectional walk through the powerset
/// of the run's events: candidates of growing size from below and of shrinking
/// size from above in lockstep. Supersets of a set fulfilling `CF` cannot be
/// minimal, and subsets of a set failing `CF` fail it too; both are pruned.
/// Candidates within one tier are independent and checked in parallel.
pub fn compute_causes(query: &CauseQuery, opts: &CheckOptions) -> Result<CauseReport, CauseError> {
    let start = Instant::now();
    if !query.effect_observed()? {
        return Err(CauseError::EffectNotObserved);
    }
    let goal = query.goal()?;
    let events: Vec<Event> = events_of_run(query.run, query.network).into_iter().collect();
    let n = events.len();
    if n > 64 {
        return Err(CauseError::TooManyEvents(n));
    }

    let mut stats = CauseStats { events: n, ..CauseStats::default() };
    // Masks known to fulfill CF (prunes supersets) resp. to fail it (prunes
    // subsets).
    let mut cf_yes: Vec<u64> = Vec::new();
    let mut cf_no: Vec<u64> = Vec::new();
    let mut res_small: Vec<u64> = Vec::new();
    let mut res_large: Vec<u64> = Vec::new();

    let run_tier = |size: usize,
                        from_below: bool,
                        cf_yes: &mut Vec<u64>,
                        cf_no: &mut Vec<u64>,
                        res_small: &mut Vec<u64>,
                        res_large: &mut Vec<u64>,
                        stats: &mut CauseStats|
     -> Result<(), CauseError> {
        let all = masks_of_size(n, size);
        let alive: Vec<u64> = all
            .into_iter()
            .filter(|&m| {
                cf_yes.iter().all(|&c| !is_subset(c, m)) && cf_no.iter().all(|&c| !is_subset(m, c))
            })
            .collect();
        stats.pruned += binomial(n, size).saturating_sub(alive.len());
        stats.checked += alive.len();
        let verdicts: Vec<(u64, bool)> = alive
            .par_iter()
            .map(|&m| {
                let cause: EventSet = events
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| m >> i & 1 == 1)
                    .map(|(_, e)| e.clone())
                    .collect();
                query.cf_holds(&cause, &goal, opts).map(|b| (m, b))
            })
            .collect::<Result<_, _>>()?;
        for (m, holds) in verdicts {
            if holds {
                cf_yes.push(m);
                if from_below {
                    res_small.push(m);
                } else {
                    res_large.push(m);
                }
            } else if !from_below {
                cf_no.push(m);
            }
        }
        Ok(())
    };

    for i in 0..=n / 2 {
        run_tier(i, true, &mut cf_yes, &mut cf_no, &mut res_small, &mut res_large, &mut stats)?;
        let upper = n - i;
        if upper > n / 2 {
            run_tier(
                upper, false, &mut cf_yes, &mut cf_no, &mut res_small, &mut res_large, &mut stats,
            )?;
        }
    }

    // Sets found from below are minimal by construction; sets found from
    // above still need filtering against every other result.
    let mut causes: Vec<u64> = res_small.clone();
    for &m in &res_large {
        let minimal = res_small
            .iter()
            .chain(res_large.iter())
            .all(|&c| c == m || !is_subset(c, m));
        if minimal {
            causes.push(m);
        }
    }
    causes.sort_unstable_by_key(|&m| (m.count_ones(), m));
    let causes = causes
        .into_iter()
        .map(|m| {
            events
                .iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect();
    stats.elapsed = start.elapsed();
    Ok(CauseReport { causes, stats })
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc.min(usize::MAX as u128) as usize
}

/// Reference implementation enumerating the full powerset and applying the
/// cause definition directly: `CF` holds and no strict subset fulfills `CF`.
pub fn naive_compute_causes(
    query: &CauseQuery,
    opts: &CheckOptions,
) -> Result<CauseReport, CauseError> {
    let start = Instant::now();
    if !query.effect_observed()? {
        return Err(CauseError::EffectNotObserved);
    }
    let goal = query.goal()?;
    let events: Vec<Event> = events_of_run(query.run, query.network).into_iter().collect();
    let n = events.len();
    if n > 20 {
        return Err(CauseError::TooManyEvents(n));
    }
    let verdicts: Vec<bool> = (0u64..1 << n)
        .into_par_iter()
        .map(|m| {
            let cause: EventSet = events
                .iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, e)| e.clone())
                .collect();
            query.cf_holds(&cause, &goal, opts)
        })
        .collect::<Result<_, _>>()?;
    let mut causes = Vec::new();
    for m in 0u64..1 << n {
        if !verdicts[m as usize] {
            continue;
        }
        // Walk all strict submasks, including the empty set.
        let mut minimal = !(m > 0 && verdicts[0]);
        let mut s = m.wrapping_sub(1) & m;
        while minimal && s > 0 {
            minimal = !verdicts[s as usize];
            s = s.wrapping_sub(1) & m;
        }
        if minimal {
            causes.push(m);
        }
    }
    causes.sort_unstable_by_key(|&m| (m.count_ones(), m));
    let causes: Vec<EventSet> = causes
        .into_iter()
        .map(|m| {
            events
                .iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect();
    let stats = CauseStats {
        events: n,
        checked: 1 << n,
        pruned: 0,
        elapsed: start.elapsed(),
    };
    Ok(CauseReport { causes, stats })
}
