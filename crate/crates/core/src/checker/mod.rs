//! Zone-based model checking of run-existence goals over networks, with
//! optional on-the-fly clock-contingency decoration.

pub mod dbm;
pub mod goal;

mod discrete;
mod explore;
mod sys;
mod witness;

use thiserror::Error;

use crate::contingency::ClockContingency;
use crate::mitl::MitlFormula;
use crate::model::Network;
use crate::rational::Rational;

pub use discrete::discrete_exists_run;
pub use explore::SearchStats;
pub use goal::{normalize, GoalFormula};
pub use sys::{CheckSystem, OBSERVER_CLOCK};
pub use witness::{Witness, WitnessStep, WitnessTail};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("unsupported goal `{0}`: expected a possibly negated G/F over a boolean combination of propositions")]
    UnsupportedGoal(String),
    #[error("zone node budget of {0} exhausted")]
    BudgetExceeded(usize),
    #[error("clock name `{0}` is reserved by the checker")]
    ReservedClock(String),
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    /// Maximal number of zone nodes before giving up.
    pub node_limit: usize,
    /// Prune nodes whose zone is included in an already-explored one. Off by
    /// default: it can hide cycles from the exact-equality detection.
    pub subsumption: bool,
    /// Accept lassos whose loop takes no time.
    pub allow_zeno: bool,
    /// Maximal cycle unrollings attempted during witness concretization.
    pub unroll_limit: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { node_limit: 200_000, subsumption: false, allow_zeno: false, unroll_limit: 4 }
    }
}

/// Searches for a maximal run of the network satisfying the goal; returns a
/// concrete witness when one is found and concretizes.
pub fn exists_run_satisfying(
    network: &Network,
    contingency: Option<&ClockContingency>,
    goal: &GoalFormula,
    opts: &CheckOptions,
) -> Result<(Option<Witness>, SearchStats), CheckError> {
    let (with_observer, bounds) = match goal {
        GoalFormula::ExistsRunGlobally(_) => (false, Vec::new()),
        GoalFormula::ExistsRunEventually(_, i) | GoalFormula::ExistsRunGloballyBounded(_, i) => {
            let mut b: Vec<Rational> = vec![i.lo];
            b.extend(i.hi);
            (true, b)
        }
    };
    let sys = CheckSystem::new(network, contingency, with_observer, &bounds)?;
    explore::search(&sys, goal, opts)
}

/// Outcome of checking `network ⊨ φ` over all maximal runs.
#[derive(Debug)]
pub struct McOutcome {
    pub holds: bool,
    pub counterexample: Option<Witness>,
    pub stats: SearchStats,
}

/// `φ` holds over all runs iff no run satisfies `¬φ`.
pub fn model_check_all(
    network: &Network,
    formula: &MitlFormula,
    opts: &CheckOptions,
) -> Result<McOutcome, CheckError> {
    let goal = normalize(&formula.clone().not())?;
    let (counterexample, stats) = exists_run_satisfying(network, None, &goal, opts)?;
    Ok(McOutcome { holds: counterexample.is_none(), counterexample, stats })
}
