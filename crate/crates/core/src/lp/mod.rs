//! Exact rational linear programming.
//!
//! [`solve`] runs a two-phase tableau simplex with Bland's rule over
//! [`Rational`] and always returns a certificate:
//! a dual solution for optima, Farkas multipliers for infeasible programs and
//! an improving ray for unbounded ones. [`verify_certificate`] re-checks any
//! of these by substitution only.

mod program;
mod simplex;
mod verify;

pub use program::{Bound, Constraint, LinearProgram, LpError, Relation, Sense};
pub use simplex::solve;
pub use verify::verify_certificate;

use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptimalSolution {
    pub primal: Vec<Rational>,
    pub value: Rational,
    /// One multiplier per constraint. For a minimization, `≥` rows carry
    /// nonnegative and `≤` rows nonpositive multipliers; signs flip for a
    /// maximization. Reduced costs `c - Aᵀy` are absorbed by variable bounds.
    pub dual: Vec<Rational>,
}

/// Nonnegative multipliers on the constraints written in `≤` form (`≥` rows
/// negated, `=` rows free) whose combination `g·x ≤ β` has no solution inside
/// the variable bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FarkasCertificate {
    pub multipliers: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnboundedRay {
    /// A feasible point.
    pub point: Vec<Rational>,
    /// Recession direction along which the objective improves without limit.
    pub ray: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal(OptimalSolution),
    Infeasible(FarkasCertificate),
    Unbounded(UnboundedRay),
}

impl LpOutcome {
    pub fn status(&self) -> LpStatus {
        match self {
            LpOutcome::Optimal(_) => LpStatus::Optimal,
            LpOutcome::Infeasible(_) => LpStatus::Infeasible,
            LpOutcome::Unbounded(_) => LpStatus::Unbounded,
        }
    }

    pub fn optimal(&self) -> Option<&OptimalSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }

    pub fn into_optimal(self) -> Option<OptimalSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}
