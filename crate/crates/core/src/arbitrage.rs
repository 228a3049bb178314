//! Arbitrage detection and risk-neutral certificates.
//!
//! Both searches are linear programs over the same market data, and by LP
//! duality exactly one of them succeeds: either a zero-cost self-financing
//! strategy ends nonnegative on every non-polar state and positive on one,
//! or there is a measure, strictly positive on the non-polar states, under
//! which every discounted price is a martingale (a supermartingale for assets
//! that may not be sold short).

use num_traits::{One, Signed, Zero};

use crate::lp::{self, Bound, LinearProgram, LpError, LpOutcome, Relation};
use crate::market::{
    EventTree, MarketError, Measure, MeasureFamily, NodeId, ShortSaleFlags, SinglePeriodMarket, TradingStrategy,
};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArbitrageError {
    #[error("every state is polar under the actual family")]
    EmptySupport,
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("arbitrage and risk-neutral searches disagree")]
    Inconsistent,
}

/// Zero-cost strategy whose terminal value is nonnegative on the support and
/// positive at `positive_state`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArbitrageCertificate {
    pub strategy: TradingStrategy,
    pub positive_state: usize,
}

/// Pricing measure whose weights on the support are all at least `epsilon > 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiskNeutralCertificate {
    pub measure: Measure,
    pub epsilon: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    Arbitrage(ArbitrageCertificate),
    NoArbitrage(RiskNeutralCertificate),
}

impl Certificate {
    pub fn is_arbitrage(&self) -> bool {
        matches!(self, Certificate::Arbitrage(_))
    }
}

/// Internal nodes with at least one support leaf below them, and the LP column
/// of each `(node, asset)` holding.
pub(crate) struct HoldingColumns {
    pub nodes: Vec<NodeId>,
    index: Vec<Option<usize>>,
    num_assets: usize,
}

impl HoldingColumns {
    pub fn new(tree: &EventTree, mask: &[bool], offset: usize) -> Self {
        let mut index = vec![None; tree.num_nodes()];
        let mut nodes = Vec::new();
        for n in tree.internal_nodes() {
            if mask[tree.leaf_range(n)].iter().any(|&s| s) {
                index[n] = Some(offset + nodes.len() * tree.num_assets());
                nodes.push(n);
            }
        }
        HoldingColumns {
            nodes,
            index,
            num_assets: tree.num_assets(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len() * self.num_assets
    }

    pub fn column(&self, node: NodeId, asset: usize) -> Option<usize> {
        self.index[node].map(|base| base + asset)
    }

    /// Coefficients of the discounted gain at `leaf` in terms of the holding columns.
    pub fn gain_terms(&self, tree: &EventTree, leaf: NodeId) -> Vec<(usize, Rational)> {
        let path = tree.path(leaf);
        let mut terms = Vec::new();
        for pair in path.windows(2) {
            for m in 0..self.num_assets {
                if let Some(col) = self.column(pair[0], m) {
                    let inc = tree.increment(pair[1], m);
                    if !inc.is_zero() {
                        terms.push((col, inc));
                    }
                }
            }
        }
        terms
    }

    /// Rebuilds a strategy from LP values; nodes without a column hold nothing.
    pub fn strategy(&self, tree: &EventTree, x: &[Rational], initial_wealth: Rational) -> TradingStrategy {
        let mut strategy = TradingStrategy::zero(tree, initial_wealth);
        for &n in &self.nodes {
            let h = (0..self.num_assets)
                .map(|m| x[self.column(n, m).expect("active node")].clone())
                .collect();
            strategy.set_holdings(n, h);
        }
        strategy
    }
}

fn support_mask(tree: &EventTree, family: &MeasureFamily) -> Result<Vec<bool>, ArbitrageError> {
    if family.num_states() != tree.num_leaves() {
        return Err(MarketError::DimensionMismatch {
            what: "family",
            expected: tree.num_leaves(),
            found: family.num_states(),
        }
        .into());
    }
    let mask = family.support_mask();
    if !mask.iter().any(|&s| s) {
        return Err(ArbitrageError::EmptySupport);
    }
    Ok(mask)
}

/// One-period arbitrage search; see [`find_arbitrage_multi`].
pub fn find_arbitrage_single(
    market: &SinglePeriodMarket,
    family: &MeasureFamily,
    flags: &ShortSaleFlags,
) -> Result<Option<ArbitrageCertificate>, ArbitrageError> {
    find_arbitrage_multi(market.tree(), family, flags)
}

/// Maximizes the total terminal value over the support, subject to zero cost,
/// nonnegative terminal value on every support leaf and risky holdings in
/// `[-1, 1]` (`[0, 1]` when banned). The bond leg is derived by
/// self-financing. An optimum above zero is an arbitrage.
pub fn find_arbitrage_multi(
    tree: &EventTree,
    family: &MeasureFamily,
    flags: &ShortSaleFlags,
) -> Result<Option<ArbitrageCertificate>, ArbitrageError> {
    flags.check(tree)?;
    let mask = support_mask(tree, family)?;
    let cols = HoldingColumns::new(tree, &mask, 0);
    if cols.len() == 0 {
        return Ok(None);
    }
    let mut objective = vec![Rational::zero(); cols.len()];
    let mut rows = Vec::new();
    for (k, &leaf) in tree.leaves().iter().enumerate() {
        if !mask[k] {
            continue;
        }
        let terms = cols.gain_terms(tree, leaf);
        for (col, a) in &terms {
            objective[*col] += a;
        }
        rows.push(terms);
    }
    let mut lp = LinearProgram::maximize(objective);
    for &n in &cols.nodes {
        for m in 0..tree.num_assets() {
            let lower = if flags.is_banned(m) {
                Rational::zero()
            } else {
                -Rational::one()
            };
            lp.set_bound(cols.column(n, m).unwrap(), Bound::between(lower, Rational::one()));
        }
    }
    for terms in rows {
        lp.add_sparse(&terms, Relation::Ge, Rational::zero());
    }
    let solution = match lp::solve(&lp)? {
        LpOutcome::Optimal(s) => s,
        // The zero strategy is feasible and the box is compact.
        other => unreachable!("arbitrage program is feasible and bounded, got {:?}", other.status()),
    };
    if !solution.value.is_positive() {
        return Ok(None);
    }
    let strategy = cols.strategy(tree, &solution.primal, Rational::zero());
    let positive_state = tree
        .leaves()
        .iter()
        .enumerate()
        .find(|&(k, &leaf)| {
            mask[k]
                && crate::market::portfolio_value(tree, &strategy, leaf)
                    .map(|v| v.is_positive())
                    .unwrap_or(false)
        })
        .map(|(k, _)| k)
        .expect("positive objective implies a positive support leaf");
    Ok(Some(ArbitrageCertificate {
        strategy,
        positive_state,
    }))
}

/// One-period measure search over all states; see [`find_martingale_measure`].
pub fn find_risk_neutral_measure(
    market: &SinglePeriodMarket,
    flags: &ShortSaleFlags,
) -> Result<Option<RiskNeutralCertificate>, ArbitrageError> {
    find_martingale_measure(market.tree(), flags)
}

/// Maximizes `ε` subject to `Q ≥ ε` on every leaf, `ΣQ = 1` and, at every
/// internal node, the one-step condition `Σ_leaves Q(leaf)·(S*_m(child) −
/// S*_m(node)) = 0`, or `≤ 0` for banned assets. Returns a certificate iff
/// `ε* > 0`.
pub fn find_martingale_measure(
    tree: &EventTree,
    flags: &ShortSaleFlags,
) -> Result<Option<RiskNeutralCertificate>, ArbitrageError> {
    find_martingale_measure_on(tree, flags, &vec![true; tree.num_leaves()])
}

/// As [`find_martingale_measure`], with positivity required only on states
/// where `mask` is set; the remaining states get weight zero.
pub fn find_martingale_measure_on(
    tree: &EventTree,
    flags: &ShortSaleFlags,
    mask: &[bool],
) -> Result<Option<RiskNeutralCertificate>, ArbitrageError> {
    flags.check(tree)?;
    if mask.len() != tree.num_leaves() {
        return Err(MarketError::DimensionMismatch {
            what: "support mask",
            expected: tree.num_leaves(),
            found: mask.len(),
        }
        .into());
    }
    let states: Vec<usize> = (0..tree.num_leaves()).filter(|&k| mask[k]).collect();
    if states.is_empty() {
        return Err(ArbitrageError::EmptySupport);
    }
    let eps = states.len();
    let mut objective = vec![Rational::zero(); eps + 1];
    objective[eps] = Rational::one();
    let mut lp = LinearProgram::maximize(objective);
    lp.set_bound(eps, Bound::free());
    let column_of = |k: usize| states.binary_search(&k).ok();

    lp.add_sparse(
        &states
            .iter()
            .enumerate()
            .map(|(c, _)| (c, Rational::one()))
            .collect::<Vec<_>>(),
        Relation::Eq,
        Rational::one(),
    );
    for c in 0..eps {
        lp.add_sparse(
            &[(c, Rational::one()), (eps, -Rational::one())],
            Relation::Ge,
            Rational::zero(),
        );
    }
    for (terms, relation) in node_condition_rows(tree, flags, column_of) {
        lp.add_sparse(&terms, relation, Rational::zero());
    }

    let solution = match lp::solve(&lp)? {
        LpOutcome::Optimal(s) => s,
        LpOutcome::Infeasible(_) => return Ok(None),
        LpOutcome::Unbounded(_) => unreachable!("ε is bounded by the simplex"),
    };
    if !solution.value.is_positive() {
        return Ok(None);
    }
    let mut weights = vec![Rational::zero(); tree.num_leaves()];
    for (c, &k) in states.iter().enumerate() {
        weights[k] = solution.primal[c].clone();
    }
    let measure = Measure::new(weights)?;
    Ok(Some(RiskNeutralCertificate {
        measure,
        epsilon: solution.value,
    }))
}

/// Linearized one-step conditions at each internal node: for every asset,
/// `Σ_{children} Σ_{leaves below child} Q(leaf)·ΔS*_m(child)` is `= 0`
/// (unbanned) or `≤ 0` (banned). Leaves without a column are skipped.
pub(crate) fn node_condition_rows(
    tree: &EventTree,
    flags: &ShortSaleFlags,
    column_of: impl Fn(usize) -> Option<usize>,
) -> Vec<(Vec<(usize, Rational)>, Relation)> {
    let mut rows = Vec::new();
    for node in tree.internal_nodes() {
        for m in 0..tree.num_assets() {
            let mut terms = Vec::new();
            for &child in tree.children(node) {
                let inc = tree.increment(child, m);
                if inc.is_zero() {
                    continue;
                }
                for k in tree.leaf_range(child) {
                    if let Some(col) = column_of(k) {
                        terms.push((col, inc.clone()));
                    }
                }
            }
            if terms.is_empty() {
                continue;
            }
            let relation = if flags.is_banned(m) { Relation::Le } else { Relation::Eq };
            rows.push((terms, relation));
        }
    }
    rows
}

/// Runs both searches and returns the one certificate that exists.
pub fn decide(tree: &EventTree, family: &MeasureFamily, flags: &ShortSaleFlags) -> Result<Certificate, ArbitrageError> {
    let mask = support_mask(tree, family)?;
    let arbitrage = find_arbitrage_multi(tree, family, flags)?;
    let measure = find_martingale_measure_on(tree, flags, &mask)?;
    match (arbitrage, measure) {
        (Some(a), None) => Ok(Certificate::Arbitrage(a)),
        (None, Some(m)) => Ok(Certificate::NoArbitrage(m)),
        _ => Err(ArbitrageError::Inconsistent),
    }
}
