//! Goal formulas: the run-existence queries the zone search answers.

use crate::mitl::{Interval, MitlFormula};

use super::CheckError;

/// A normalized run-existence query. The operand `ψ` is always a boolean
/// combination of location labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoalFormula {
    /// A run whose signal satisfies `ψ` at every positive instant.
    ExistsRunGlobally(MitlFormula),
    /// A run whose signal satisfies `ψ` at some instant of the interval.
    ExistsRunEventually(MitlFormula, Interval),
    /// A run whose signal satisfies `ψ` throughout the interval.
    ExistsRunGloballyBounded(MitlFormula, Interval),
}

impl GoalFormula {
    pub fn psi(&self) -> &MitlFormula {
        match self {
            GoalFormula::ExistsRunGlobally(f)
            | GoalFormula::ExistsRunEventually(f, _)
            | GoalFormula::ExistsRunGloballyBounded(f, _) => f,
        }
    }

    /// The MITL formula this goal asks a witness run to satisfy.
    pub fn formula(&self) -> MitlFormula {
        match self {
            GoalFormula::ExistsRunGlobally(f) => {
                MitlFormula::Globally(Interval::full(), Box::new(f.clone()))
            }
            GoalFormula::ExistsRunEventually(f, i) => {
                MitlFormula::Eventually(i.clone(), Box::new(f.clone()))
            }
            GoalFormula::ExistsRunGloballyBounded(f, i) => {
                MitlFormula::Globally(i.clone(), Box::new(f.clone()))
            }
        }
    }
}

/// Normalizes a formula into a [`GoalFormula`], pushing negations through the
/// outermost temporal operator. Supported shape: a possibly negated `G_I`/`F_I`
/// over a boolean combination of propositions.
pub fn normalize(formula: &MitlFormula) -> Result<GoalFormula, CheckError> {
    normalize_signed(formula, false)
}

fn normalize_signed(formula: &MitlFormula, negated: bool) -> Result<GoalFormula, CheckError> {
    match formula {
        MitlFormula::Not(inner) => normalize_signed(inner, !negated),
        MitlFormula::Globally(i, inner) if inner.is_boolean() => {
            let psi = if negated { inner.as_ref().clone().not() } else { inner.as_ref().clone() };
            Ok(match (negated, i.is_full()) {
                (false, true) => GoalFormula::ExistsRunGlobally(psi),
                (false, false) => GoalFormula::ExistsRunGloballyBounded(psi, i.clone()),
                (true, _) => GoalFormula::ExistsRunEventually(psi, i.clone()),
            })
        }
        MitlFormula::Eventually(i, inner) if inner.is_boolean() => {
            let psi = if negated { inner.as_ref().clone().not() } else { inner.as_ref().clone() };
            Ok(match (negated, i.is_full()) {
                (false, _) => GoalFormula::ExistsRunEventually(psi, i.clone()),
                (true, true) => GoalFormula::ExistsRunGlobally(psi),
                (true, false) => GoalFormula::ExistsRunGloballyBounded(psi, i.clone()),
            })
        }
        other => Err(CheckError::UnsupportedGoal(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_formula;

    fn goal_of(src: &str) -> GoalFormula {
        normalize(&parse_formula(src, None).unwrap()).unwrap()
    }

    #[test]
    fn plain_globally_normalizes_directly() {
        let g = goal_of("G (!crit1 || !crit2)");
        assert!(matches!(g, GoalFormula::ExistsRunGlobally(_)));
    }

    #[test]
    fn negated_globally_becomes_eventually_of_negation() {
        let g = goal_of("!G[0,5] !boom");
        match g {
            GoalFormula::ExistsRunEventually(psi, i) => {
                assert_eq!(psi.to_string(), "!!boom");
                assert_eq!(i.to_string(), "[0.0,5.0]");
            }
            other => panic!("unexpected goal {other:?}"),
        }
    }

    #[test]
    fn negated_eventually_becomes_bounded_globally() {
        let g = goal_of("!F[1,2] boom");
        match g {
            GoalFormula::ExistsRunGloballyBounded(psi, i) => {
                assert_eq!(psi.to_string(), "!boom");
                assert_eq!(i.to_string(), "[1.0,2.0]");
            }
            other => panic!("unexpected goal {other:?}"),
        }
        assert!(matches!(goal_of("!F boom"), GoalFormula::ExistsRunGlobally(_)));
    }

    #[test]
    fn double_negation_cancels() {
        let g = goal_of("!!G p");
        assert!(matches!(g, GoalFormula::ExistsRunGlobally(MitlFormula::Prop(_))));
    }

    #[test]
    fn nested_temporal_operators_are_rejected() {
        let f = parse_formula("G (F p)", None).unwrap();
        assert!(matches!(normalize(&f), Err(CheckError::UnsupportedGoal(_))));
    }
}
