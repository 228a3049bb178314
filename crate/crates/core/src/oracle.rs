//! Brute-force cross-checks that share no code path with the simplex solver:
//! vertex enumeration of measure polytopes by exhaustive basis selection, and
//! certificate verification by direct substitution.

use num_traits::{One, Signed, Zero};

use crate::arbitrage::{ArbitrageCertificate, Certificate, RiskNeutralCertificate};
use crate::expectation::satisfies_pricing_conditions;
use crate::lp::{LinearProgram, Relation, Sense};
use crate::market::{
    is_self_financing, portfolio_value, EventTree, Measure, MeasureFamily, ShortSaleFlags, TradingStrategy,
};
use crate::rational::{dot, Rational};

/// Largest state count accepted by [`enumerate_vertices`].
pub const MAX_STATES: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("{0} states exceeds the enumeration cap of {MAX_STATES}")]
    TooLarge(usize),
    #[error("row of length {found} in a polytope over {expected} states")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no vertices to optimize over")]
    Empty,
}

/// `{q ≥ 0, Σq = 1, A_eq q = b_eq, A_le q ≤ b_le}` over a fixed number of states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polytope {
    num_states: usize,
    equalities: Vec<(Vec<Rational>, Rational)>,
    inequalities: Vec<(Vec<Rational>, Rational)>,
}

impl Polytope {
    /// The probability simplex.
    pub fn simplex(num_states: usize) -> Self {
        Polytope {
            num_states,
            equalities: Vec::new(),
            inequalities: Vec::new(),
        }
    }

    /// Closed set of martingale measures for `tree`, with supermartingale
    /// inequalities for banned assets.
    pub fn pricing(tree: &EventTree, flags: &ShortSaleFlags) -> Self {
        let k = tree.num_leaves();
        let mut polytope = Polytope::simplex(k);
        for node in tree.internal_nodes() {
            for m in 0..tree.num_assets() {
                let mut row = vec![Rational::zero(); k];
                for &child in tree.children(node) {
                    let inc = &tree.discounted(child)[m] - &tree.discounted(node)[m];
                    for state in tree.leaf_range(child) {
                        row[state] = inc.clone();
                    }
                }
                if row.iter().all(Zero::is_zero) {
                    continue;
                }
                if flags.is_banned(m) {
                    polytope.inequalities.push((row, Rational::zero()));
                } else {
                    polytope.equalities.push((row, Rational::zero()));
                }
            }
        }
        polytope
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn with_equality(mut self, row: Vec<Rational>, rhs: Rational) -> Result<Self, OracleError> {
        self.check(&row)?;
        self.equalities.push((row, rhs));
        Ok(self)
    }

    pub fn with_inequality(mut self, row: Vec<Rational>, rhs: Rational) -> Result<Self, OracleError> {
        self.check(&row)?;
        self.inequalities.push((row, rhs));
        Ok(self)
    }

    /// Forces `q(state) = 0` wherever `mask` is unset.
    pub fn restricted_to(mut self, mask: &[bool]) -> Self {
        for (state, &keep) in mask.iter().enumerate() {
            if !keep {
                let mut row = vec![Rational::zero(); self.num_states];
                row[state] = Rational::one();
                self.equalities.push((row, Rational::zero()));
            }
        }
        self
    }

    fn check(&self, row: &[Rational]) -> Result<(), OracleError> {
        if row.len() != self.num_states {
            return Err(OracleError::DimensionMismatch {
                expected: self.num_states,
                found: row.len(),
            });
        }
        Ok(())
    }

    pub fn contains(&self, q: &[Rational]) -> bool {
        q.len() == self.num_states
            && q.iter().all(|w| !w.is_negative())
            && q.iter().sum::<Rational>().is_one()
            && self.equalities.iter().all(|(a, b)| dot(a, q) == *b)
            && self.inequalities.iter().all(|(a, b)| dot(a, q) <= *b)
    }

    /// The same set as a linear program with objective `objective`, for
    /// comparison against [`brute_force_extremum`].
    pub fn to_program(&self, objective: Vec<Rational>, sense: Sense) -> LinearProgram {
        let mut lp = LinearProgram::new(sense, objective);
        lp.add_constraint(vec![Rational::one(); self.num_states], Relation::Eq, Rational::one());
        for (a, b) in &self.equalities {
            lp.add_constraint(a.clone(), Relation::Eq, b.clone());
        }
        for (a, b) in &self.inequalities {
            lp.add_constraint(a.clone(), Relation::Le, b.clone());
        }
        lp
    }
}

/// Row-reduces `[rows | rhs]` in place and returns the pivot columns, or
/// `None` if the system is inconsistent.
fn row_reduce(rows: &mut [Vec<Rational>], rhs: &mut [Rational], ncols: usize) -> Option<Vec<usize>> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        rhs.swap(r, p);
        let inv = rows[r][c].recip();
        for v in rows[r].iter_mut() {
            *v *= &inv;
        }
        rhs[r] *= &inv;
        let pivot = rows[r].clone();
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let factor = rows[i][c].clone();
                for (x, p) in rows[i].iter_mut().zip(&pivot).take(ncols) {
                    *x -= &factor * p;
                }
                let delta = &factor * &rhs[r];
                rhs[i] -= delta;
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    if rhs[r..].iter().any(|v| !v.is_zero()) {
        return None;
    }
    Some(pivots)
}

fn rank(rows: &[(Vec<Rational>, Rational)], ncols: usize) -> usize {
    let mut a: Vec<Vec<Rational>> = rows.iter().map(|(r, _)| r.clone()).collect();
    let mut b = vec![Rational::zero(); a.len()];
    row_reduce(&mut a, &mut b, ncols).map_or(0, |p| p.len())
}

/// Unique solution of the square-or-tall system, if it has one.
fn unique_solution(rows: &[&(Vec<Rational>, Rational)], ncols: usize) -> Option<Vec<Rational>> {
    let mut a: Vec<Vec<Rational>> = rows.iter().map(|(r, _)| r.clone()).collect();
    let mut b: Vec<Rational> = rows.iter().map(|(_, v)| v.clone()).collect();
    let pivots = row_reduce(&mut a, &mut b, ncols)?;
    if pivots.len() != ncols {
        return None;
    }
    Some(b[..ncols].to_vec())
}

/// Number of candidate bases [`enumerate_vertices`] solves, a measure of its
/// cost: `C(n, k − rank(E))` for `n` inequalities (including `q ≥ 0`).
pub fn basis_count(polytope: &Polytope) -> u128 {
    let k = polytope.num_states;
    let mut equalities = polytope.equalities.clone();
    equalities.push((vec![Rational::one(); k], Rational::one()));
    let n = (polytope.inequalities.len() + k) as u128;
    let need = (k - rank(&equalities, k)) as u128;
    if need > n {
        return 0;
    }
    (0..need).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Every vertex of `polytope`, exact and deduplicated, in the order the
/// lexicographic basis enumeration first meets them.
pub fn enumerate_vertices(polytope: &Polytope) -> Result<Vec<Measure>, OracleError> {
    let k = polytope.num_states;
    if k > MAX_STATES {
        return Err(OracleError::TooLarge(k));
    }
    let mut equalities = polytope.equalities.clone();
    equalities.push((vec![Rational::one(); k], Rational::one()));
    let mut inequalities = polytope.inequalities.clone();
    for state in 0..k {
        let mut row = vec![Rational::zero(); k];
        row[state] = -Rational::one();
        inequalities.push((row, Rational::zero()));
    }

    let need = k - rank(&equalities, k);
    let mut vertices: Vec<Measure> = Vec::new();
    let mut chosen: Vec<usize> = (0..need).collect();
    if need > inequalities.len() {
        return Ok(vertices);
    }
    loop {
        let system: Vec<&(Vec<Rational>, Rational)> = equalities
            .iter()
            .chain(chosen.iter().map(|&i| &inequalities[i]))
            .collect();
        if let Some(q) = unique_solution(&system, k) {
            if polytope.contains(&q) {
                let vertex = Measure::new(q).expect("polytope members are probability vectors");
                if !vertices.contains(&vertex) {
                    vertices.push(vertex);
                }
            }
        }
        if !next_combination(&mut chosen, inequalities.len()) {
            break;
        }
    }
    Ok(vertices)
}

fn next_combination(chosen: &mut [usize], n: usize) -> bool {
    let k = chosen.len();
    for i in (0..k).rev() {
        if chosen[i] < n - k + i {
            chosen[i] += 1;
            for j in i + 1..k {
                chosen[j] = chosen[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Max,
    Min,
}

/// Extremal expectation of `rv` over a list of vertices.
pub fn brute_force_extremum(
    vertices: &[Measure],
    rv: &[Rational],
    direction: Direction,
) -> Result<Rational, OracleError> {
    let values = vertices.iter().map(|v| dot(v.weights(), rv));
    match direction {
        Direction::Max => values.max(),
        Direction::Min => values.min(),
    }
    .ok_or(OracleError::Empty)
}

/// Re-checks an arbitrage strategy by evaluating it: zero initial wealth,
/// holdings for every internal node, banned holdings nonnegative,
/// self-financing, terminal value nonnegative on the support and positive on
/// at least one support state.
pub fn verify_arbitrage(
    strategy: &TradingStrategy,
    tree: &EventTree,
    family: &MeasureFamily,
    flags: &ShortSaleFlags,
) -> bool {
    if !strategy.initial_wealth().is_zero() || family.num_states() != tree.num_leaves() {
        return false;
    }
    let bans_respected = tree.internal_nodes().all(|n| match strategy.holdings(n) {
        Some(h) => {
            h.len() == tree.num_assets()
                && h.iter()
                    .enumerate()
                    .all(|(m, v)| !flags.is_banned(m) || !v.is_negative())
        }
        None => false,
    });
    if !bans_respected || !matches!(is_self_financing(tree, strategy), Ok(true)) {
        return false;
    }
    let mask = family.support_mask();
    let mut any_positive = false;
    for (k, &leaf) in tree.leaves().iter().enumerate() {
        if !mask[k] {
            continue;
        }
        let Ok(v) = portfolio_value(tree, strategy, leaf) else {
            return false;
        };
        if v.is_negative() {
            return false;
        }
        any_positive |= v.is_positive();
    }
    any_positive
}

/// Re-checks a risk-neutral certificate: `ε > 0`, every support weight at
/// least `ε`, and the (super)martingale conditions per the flags.
pub fn verify_risk_neutral(
    cert: &RiskNeutralCertificate,
    tree: &EventTree,
    family: &MeasureFamily,
    flags: &ShortSaleFlags,
) -> bool {
    if !cert.epsilon.is_positive()
        || cert.measure.len() != tree.num_leaves()
        || family.num_states() != tree.num_leaves()
    {
        return false;
    }
    let positive = family
        .support_mask()
        .iter()
        .zip(cert.measure.weights())
        .all(|(&charged, w)| !charged || *w >= cert.epsilon);
    positive && satisfies_pricing_conditions(&cert.measure, tree, flags)
}

pub fn verify_certificate(
    cert: &Certificate,
    tree: &EventTree,
    family: &MeasureFamily,
    flags: &ShortSaleFlags,
) -> bool {
    match cert {
        Certificate::Arbitrage(ArbitrageCertificate { strategy, .. }) => {
            verify_arbitrage(strategy, tree, family, flags)
        }
        Certificate::NoArbitrage(c) => verify_risk_neutral(c, tree, family, flags),
    }
}
