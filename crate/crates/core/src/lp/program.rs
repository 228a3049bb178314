use num_traits::Zero;

use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Optional lower and upper bound on one variable. `None` means unbounded on that side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bound {
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

impl Bound {
    pub fn free() -> Self {
        Bound {
            lower: None,
            upper: None,
        }
    }

    pub fn nonnegative() -> Self {
        Bound {
            lower: Some(Rational::zero()),
            upper: None,
        }
    }

    pub fn between(lower: Rational, upper: Rational) -> Self {
        Bound {
            lower: Some(lower),
            upper: Some(upper),
        }
    }

    pub fn contains(&self, value: &Rational) -> bool {
        self.lower.as_ref().is_none_or(|l| value >= l) && self.upper.as_ref().is_none_or(|u| value <= u)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

impl Constraint {
    pub fn is_satisfied(&self, x: &[Rational]) -> bool {
        let lhs: Rational = self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        match self.relation {
            Relation::Le => lhs <= self.rhs,
            Relation::Eq => lhs == self.rhs,
            Relation::Ge => lhs >= self.rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("malformed program: {0}")]
    MalformedProgram(String),
}

/// Dense linear program. Variables default to `x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<Rational>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<Bound>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<Rational>) -> Self {
        let n = objective.len();
        LinearProgram {
            sense,
            objective,
            constraints: Vec::new(),
            bounds: vec![Bound::nonnegative(); n],
        }
    }

    pub fn minimize(objective: Vec<Rational>) -> Self {
        LinearProgram::new(Sense::Minimize, objective)
    }

    pub fn maximize(objective: Vec<Rational>) -> Self {
        LinearProgram::new(Sense::Maximize, objective)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<Rational>, relation: Relation, rhs: Rational) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    /// Adds a row given as `(variable, coefficient)` pairs; repeated indices accumulate.
    pub fn add_sparse(&mut self, terms: &[(usize, Rational)], relation: Relation, rhs: Rational) {
        let mut coeffs = vec![Rational::zero(); self.num_vars()];
        for (j, a) in terms {
            coeffs[*j] += a;
        }
        self.add_constraint(coeffs, relation, rhs);
    }

    pub fn set_bound(&mut self, var: usize, bound: Bound) {
        self.bounds[var] = bound;
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn is_feasible(&self, x: &[Rational]) -> bool {
        x.len() == self.num_vars()
            && self.bounds.iter().zip(x).all(|(b, v)| b.contains(v))
            && self.constraints.iter().all(|c| c.is_satisfied(x))
    }

    pub(crate) fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if n == 0 {
            return Err(LpError::MalformedProgram("no variables".into()));
        }
        if self.bounds.len() != n {
            return Err(LpError::MalformedProgram(format!(
                "{} bounds for {n} variables",
                self.bounds.len()
            )));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::MalformedProgram(format!(
                    "constraint {i} has {} coefficients for {n} variables",
                    c.coeffs.len()
                )));
            }
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if let (Some(l), Some(u)) = (&b.lower, &b.upper) {
                if l > u {
                    return Err(LpError::MalformedProgram(format!(
                        "variable {j} has lower bound above upper bound"
                    )));
                }
            }
        }
        Ok(())
    }
}
