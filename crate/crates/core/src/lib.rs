//! Checking and computing but-for and actual (contingency-based) counterfactual
//! causes for MITL effects on lasso-shaped runs of networks of timed automata,
//! with a built-in zone-based model checker.

pub mod causes;
pub mod checker;
pub mod contingency;
pub mod counterfactual;
pub mod dsl;
pub mod mitl;
pub mod model;
pub mod rational;
pub mod runs;

pub use causes::{
    check_cause, compute_causes, naive_compute_causes, CauseQuery, CauseReport, Mode,
};
pub use model::{Network, TimedAutomaton};
pub use rational::Rational;
pub use runs::{Event, EventKind, EventSet, LassoRun};
