//! Replication and superhedging of terminal claims.
//!
//! The primal side minimizes initial wealth over self-financing strategies;
//! the dual side maximizes the discounted claim over the closed polytope of
//! martingale / supermartingale measures; [`backward_superhedge`] recomputes
//! the same price node by node.

use num_traits::{One, Zero};

use crate::arbitrage::{find_martingale_measure, node_condition_rows, ArbitrageError, HoldingColumns};
use crate::expectation::{check_strong, expectation, sublinear_expectation, ExpectationError, Horizons};
use crate::lp::{self, Bound, LinearProgram, LpError, LpOutcome, Relation};
use crate::market::{
    portfolio_value, Claim, EventTree, MarketError, Measure, MeasureFamily, ShortSaleFlags, TradingStrategy,
};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HedgingError {
    #[error("no martingale measure exists: the market admits arbitrage")]
    NoMeasure,
    #[error("claim cannot be replicated; price it by superhedging instead")]
    NotReplicable,
    #[error("superhedging cost is unbounded below: the market admits arbitrage")]
    UnboundedBelow,
    #[error("every state is polar under the actual family")]
    EmptySupport,
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Arbitrage(#[from] ArbitrageError),
    #[error(transparent)]
    Expectation(#[from] ExpectationError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HedgeMode {
    Replication,
    Superhedge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HedgeResult {
    pub price: Rational,
    pub strategy: TradingStrategy,
    pub mode: HedgeMode,
    /// `V*(T) − f*` per state. Zero on the support for a replication.
    pub slack: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Replication {
    Hedged(HedgeResult),
    NotReplicable,
}

/// Supremum of `E_Q[f*]` over the closed measure polytope and a maximizer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualPrice {
    pub price: Rational,
    pub measure: Measure,
    /// The maximizer gives zero weight to some charged state, so no strictly
    /// positive measure attains the price.
    pub on_boundary: bool,
}

fn support_mask(tree: &EventTree, family: &MeasureFamily) -> Result<Vec<bool>, HedgingError> {
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
        return Err(HedgingError::EmptySupport);
    }
    Ok(mask)
}

/// Columns `[x, holdings...]` plus the per-leaf hedge rows `x + H·S*(T) (rel) f*`.
struct HedgeProgram {
    cols: HoldingColumns,
    lp: LinearProgram,
}

impl HedgeProgram {
    fn new(
        tree: &EventTree,
        discounted_claim: &[Rational],
        mask: &[bool],
        flags: &ShortSaleFlags,
        relation: Relation,
        extra_columns: usize,
    ) -> Self {
        let cols = HoldingColumns::new(tree, mask, 1);
        let n = 1 + cols.len() + extra_columns;
        let mut lp = LinearProgram::minimize(vec![Rational::zero(); n]);
        lp.set_bound(0, Bound::free());
        for &node in &cols.nodes {
            for m in 0..tree.num_assets() {
                let bound = if flags.is_banned(m) {
                    Bound::nonnegative()
                } else {
                    Bound::free()
                };
                lp.set_bound(cols.column(node, m).unwrap(), bound);
            }
        }
        for (k, &leaf) in tree.leaves().iter().enumerate() {
            if mask[k] {
                let mut terms = cols.gain_terms(tree, leaf);
                terms.push((0, Rational::one()));
                lp.add_sparse(&terms, relation, discounted_claim[k].clone());
            }
        }
        HedgeProgram { cols, lp }
    }

    /// Adds `t_j ≥ |h_j|` columns after the holdings and minimizes `Σ t_j`.
    fn minimize_holdings_norm(&mut self) {
        let first_abs = 1 + self.cols.len();
        for j in 0..self.cols.len() {
            let h = 1 + j;
            let t = first_abs + j;
            self.lp.objective[t] = Rational::one();
            self.lp.add_sparse(
                &[(t, Rational::one()), (h, -Rational::one())],
                Relation::Ge,
                Rational::zero(),
            );
            self.lp.add_sparse(
                &[(t, Rational::one()), (h, Rational::one())],
                Relation::Ge,
                Rational::zero(),
            );
        }
    }

    fn result(
        &self,
        tree: &EventTree,
        discounted_claim: &[Rational],
        x: &[Rational],
        mode: HedgeMode,
    ) -> Result<HedgeResult, HedgingError> {
        let price = x[0].clone();
        let strategy = self.cols.strategy(tree, x, price.clone());
        let slack = tree
            .leaves()
            .iter()
            .zip(discounted_claim)
            .map(|(&leaf, f)| Ok(portfolio_value(tree, &strategy, leaf)? - f))
            .collect::<Result<Vec<_>, MarketError>>()?;
        Ok(HedgeResult {
            price,
            strategy,
            mode,
            slack,
        })
    }
}

/// Solves `x + H·S*(T) = f*` on every support state, choosing the solution
/// with the smallest total absolute holding.
pub fn replicate(tree: &EventTree, claim: &Claim, family: &MeasureFamily) -> Result<Replication, HedgingError> {
    let f = claim.discounted(tree)?;
    let mask = support_mask(tree, family)?;
    let mut program = HedgeProgram::new(
        tree,
        &f,
        &mask,
        &ShortSaleFlags::none(tree.num_assets()),
        Relation::Eq,
        0,
    );
    let extra = program.cols.len();
    program
        .lp
        .objective
        .extend(std::iter::repeat_n(Rational::zero(), extra));
    program
        .lp
        .bounds
        .extend(std::iter::repeat_n(Bound::nonnegative(), extra));
    for c in program.lp.constraints.iter_mut() {
        c.coeffs.extend(std::iter::repeat_n(Rational::zero(), extra));
    }
    program.minimize_holdings_norm();
    match lp::solve(&program.lp)? {
        LpOutcome::Optimal(s) => Ok(Replication::Hedged(program.result(
            tree,
            &f,
            &s.primal,
            HedgeMode::Replication,
        )?)),
        LpOutcome::Infeasible(_) => Ok(Replication::NotReplicable),
        LpOutcome::Unbounded(_) => unreachable!("norm objective is bounded below"),
    }
}

/// `E_Q[f*]` under the certified martingale measure, for a replicable claim.
pub fn hedge_price(tree: &EventTree, claim: &Claim) -> Result<Rational, HedgingError> {
    let f = claim.discounted(tree)?;
    let cert =
        find_martingale_measure(tree, &ShortSaleFlags::none(tree.num_assets()))?.ok_or(HedgingError::NoMeasure)?;
    let full = MeasureFamily::singleton(Measure::uniform(tree.num_leaves()));
    let hedge = match replicate(tree, claim, &full)? {
        Replication::Hedged(h) => h,
        Replication::NotReplicable => return Err(HedgingError::NotReplicable),
    };
    let price = expectation(&cert.measure, &f)?;
    debug_assert_eq!(price, hedge.price, "replication cost must equal the risk-neutral price");
    Ok(price)
}

/// Cheapest initial wealth whose self-financing terminal value dominates `f*`
/// on the support, banned holdings kept nonnegative. Among optimal strategies
/// the one with the smallest total absolute holding is returned.
pub fn superhedge(
    tree: &EventTree,
    claim: &Claim,
    flags: &ShortSaleFlags,
    family: &MeasureFamily,
) -> Result<HedgeResult, HedgingError> {
    flags.check(tree)?;
    let f = claim.discounted(tree)?;
    let mask = support_mask(tree, family)?;
    let mut program = HedgeProgram::new(tree, &f, &mask, flags, Relation::Ge, 0);
    program.lp.objective[0] = Rational::one();
    let price = match lp::solve(&program.lp)? {
        LpOutcome::Optimal(s) => s.value,
        LpOutcome::Unbounded(_) => return Err(HedgingError::UnboundedBelow),
        LpOutcome::Infeasible(_) => unreachable!("a large enough cash position always superhedges"),
    };

    let mut program = HedgeProgram::new(tree, &f, &mask, flags, Relation::Ge, program.cols.len());
    program.lp.set_bound(0, Bound::between(price.clone(), price));
    program.minimize_holdings_norm();
    let solution = lp::solve(&program.lp)?
        .into_optimal()
        .expect("the minimal price is attainable");
    program.result(tree, &f, &solution.primal, HedgeMode::Superhedge)
}

/// `sup E_Q[f*]` over all measures (weights `≥ 0`) satisfying the one-step
/// martingale condition, with `≤ 0` for banned assets.
pub fn dual_superhedge_price(
    tree: &EventTree,
    claim: &Claim,
    flags: &ShortSaleFlags,
) -> Result<DualPrice, HedgingError> {
    dual_superhedge_price_on(tree, claim, flags, &vec![true; tree.num_leaves()])
}

/// As [`dual_superhedge_price`], restricted to measures vanishing off `mask`.
pub fn dual_superhedge_price_on(
    tree: &EventTree,
    claim: &Claim,
    flags: &ShortSaleFlags,
    mask: &[bool],
) -> Result<DualPrice, HedgingError> {
    flags.check(tree)?;
    let f = claim.discounted(tree)?;
    let states: Vec<usize> = (0..tree.num_leaves())
        .filter(|&k| mask.get(k).copied().unwrap_or(false))
        .collect();
    if states.is_empty() {
        return Err(HedgingError::EmptySupport);
    }
    let mut lp = LinearProgram::maximize(states.iter().map(|&k| f[k].clone()).collect());
    lp.add_sparse(
        &(0..states.len()).map(|c| (c, Rational::one())).collect::<Vec<_>>(),
        Relation::Eq,
        Rational::one(),
    );
    for (terms, relation) in node_condition_rows(tree, flags, |k| states.binary_search(&k).ok()) {
        lp.add_sparse(&terms, relation, Rational::zero());
    }
    let solution = match lp::solve(&lp)? {
        LpOutcome::Optimal(s) => s,
        LpOutcome::Infeasible(_) => return Err(HedgingError::NoMeasure),
        LpOutcome::Unbounded(_) => unreachable!("the simplex is bounded"),
    };
    let mut weights = vec![Rational::zero(); tree.num_leaves()];
    for (c, &k) in states.iter().enumerate() {
        weights[k] = solution.primal[c].clone();
    }
    let on_boundary = states.iter().any(|&k| weights[k].is_zero());
    Ok(DualPrice {
        price: solution.value,
        measure: Measure::new(weights)?,
        on_boundary,
    })
}

/// Superhedging value at every node, by one-period programs from the leaves
/// back to the root. Leaves carry `f*`; the root entry is the superhedging price.
pub fn backward_superhedge(
    tree: &EventTree,
    claim: &Claim,
    flags: &ShortSaleFlags,
) -> Result<Vec<Rational>, HedgingError> {
    flags.check(tree)?;
    let f = claim.discounted(tree)?;
    let mut values: Vec<Option<Rational>> = vec![None; tree.num_nodes()];
    for (k, &leaf) in tree.leaves().iter().enumerate() {
        values[leaf] = Some(f[k].clone());
    }
    let m = tree.num_assets();
    // Preorder puts every child after its parent.
    for node in (0..tree.num_nodes()).rev().filter(|&n| !tree.is_leaf(n)) {
        let mut objective = vec![Rational::zero(); 1 + m];
        objective[0] = Rational::one();
        let mut lp = LinearProgram::minimize(objective);
        lp.set_bound(0, Bound::free());
        for a in 0..m {
            let bound = if flags.is_banned(a) {
                Bound::nonnegative()
            } else {
                Bound::free()
            };
            lp.set_bound(1 + a, bound);
        }
        for &child in tree.children(node) {
            let mut terms = vec![(0, Rational::one())];
            terms.extend((0..m).map(|a| (1 + a, tree.increment(child, a))));
            lp.add_sparse(&terms, Relation::Ge, values[child].clone().expect("child solved first"));
        }
        values[node] = Some(match lp::solve(&lp)? {
            LpOutcome::Optimal(s) => s.value,
            LpOutcome::Unbounded(_) => return Err(HedgingError::UnboundedBelow),
            LpOutcome::Infeasible(_) => unreachable!("cash alone superhedges one period"),
        });
    }
    Ok(values.into_iter().map(|v| v.expect("every node visited")).collect())
}

/// `sup_{Q ∈ pricing} E_Q[f*]` when `pricing` satisfies the strong condition,
/// a lower bound for the superhedging price. `None` if the condition fails.
pub fn strong_family_bound(
    tree: &EventTree,
    claim: &Claim,
    pricing: &MeasureFamily,
) -> Result<Option<Rational>, HedgingError> {
    let f = claim.discounted(tree)?;
    if !check_strong(pricing, tree, Horizons::Standard)?.holds {
        return Ok(None);
    }
    Ok(Some(sublinear_expectation(pricing, &f)?.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{terminal_values, NodeSpec, SinglePeriodMarket};
    use crate::rational::{int, ints, rat};
    use num_traits::Signed;

    fn binomial(up: i64, down: i64) -> EventTree {
        SinglePeriodMarket::new(int(0), ints(&[4]), vec![ints(&[up]), ints(&[down])])
            .unwrap()
            .into_tree()
    }

    fn recombining() -> EventTree {
        let up = NodeSpec::branch(
            ints(&[8]),
            vec![NodeSpec::leaf(ints(&[16])), NodeSpec::leaf(ints(&[4]))],
        );
        let down = NodeSpec::branch(ints(&[2]), vec![NodeSpec::leaf(ints(&[4])), NodeSpec::leaf(ints(&[1]))]);
        EventTree::from_spec(NodeSpec::branch(ints(&[4]), vec![up, down]), int(0)).unwrap()
    }

    fn full(k: usize) -> MeasureFamily {
        MeasureFamily::singleton(Measure::uniform(k))
    }

    #[test]
    fn replicates_binomial_call() {
        let tree = binomial(8, 2);
        let call = Claim::new(ints(&[4, 0]));
        let Replication::Hedged(h) = replicate(&tree, &call, &full(2)).unwrap() else {
            panic!("binomial call is replicable");
        };
        assert_eq!(h.price, rat(4, 3));
        assert_eq!(h.strategy.holdings(0).unwrap(), &[rat(2, 3)]);
        assert!(h.slack.iter().all(Zero::is_zero));
        assert_eq!(hedge_price(&tree, &call).unwrap(), rat(4, 3));
    }

    #[test]
    fn zero_claim_needs_nothing() {
        let tree = binomial(8, 2);
        let Replication::Hedged(h) = replicate(&tree, &Claim::new(ints(&[0, 0])), &full(2)).unwrap() else {
            panic!("zero claim is replicable");
        };
        assert_eq!(h.price, int(0));
        assert_eq!(h.strategy.holdings(0).unwrap(), &[int(0)]);
        assert_eq!(hedge_price(&tree, &Claim::new(ints(&[3, 3]))).unwrap(), int(3));
    }

    #[test]
    fn trinomial_claim_is_not_replicable() {
        let tree = SinglePeriodMarket::new(int(0), ints(&[4]), vec![ints(&[8]), ints(&[4]), ints(&[2])])
            .unwrap()
            .into_tree();
        let claim = Claim::new(ints(&[1, 5, 0]));
        assert_eq!(replicate(&tree, &claim, &full(3)).unwrap(), Replication::NotReplicable);
        assert_eq!(hedge_price(&tree, &claim), Err(HedgingError::NotReplicable));
    }

    #[test]
    fn two_period_call_price() {
        let tree = recombining();
        let call = Claim::new(ints(&[12, 0, 0, 0]));
        assert_eq!(hedge_price(&tree, &call).unwrap(), rat(4, 3));
        let values = backward_superhedge(&tree, &call, &ShortSaleFlags::none(1)).unwrap();
        assert_eq!(values[0], rat(4, 3));
        assert_eq!(values[tree.children(0)[0]], int(4));
        assert_eq!(values[tree.children(0)[1]], int(0));
    }

    #[test]
    fn banned_short_superhedge_costs_two() {
        let tree = binomial(4, 2);
        let claim = Claim::new(ints(&[2, 0]));
        let banned = ShortSaleFlags::all(1);
        let h = superhedge(&tree, &claim, &banned, &full(2)).unwrap();
        assert_eq!(h.price, int(2));
        assert_eq!(h.strategy.holdings(0).unwrap(), &[int(0)]);
        assert_eq!(terminal_values(&tree, &h.strategy).unwrap(), ints(&[2, 2]));
        assert_eq!(h.slack, ints(&[0, 2]));

        let dual = dual_superhedge_price(&tree, &claim, &banned).unwrap();
        assert_eq!(dual.price, int(2));
        assert_eq!(dual.measure, Measure::dirac(2, 0));
        assert!(dual.on_boundary);
        assert_eq!(backward_superhedge(&tree, &claim, &banned).unwrap()[0], int(2));
    }

    #[test]
    fn replicable_claim_superhedges_at_replication_price() {
        let tree = binomial(8, 2);
        let call = Claim::new(ints(&[4, 0]));
        let none = ShortSaleFlags::none(1);
        assert_eq!(superhedge(&tree, &call, &none, &full(2)).unwrap().price, rat(4, 3));
        let dual = dual_superhedge_price(&tree, &call, &none).unwrap();
        assert_eq!(dual.price, rat(4, 3));
        assert!(!dual.on_boundary);
    }

    #[test]
    fn nonpositive_claims() {
        let tree = binomial(4, 2);
        let banned = ShortSaleFlags::all(1);
        assert_eq!(
            superhedge(&tree, &Claim::new(ints(&[0, 0])), &banned, &full(2))
                .unwrap()
                .price,
            int(0)
        );
        let negative = superhedge(&tree, &Claim::new(ints(&[-1, -3])), &banned, &full(2)).unwrap();
        assert!(negative.price.is_negative());
        assert_eq!(
            dual_superhedge_price(&tree, &Claim::new(ints(&[5, 5])), &banned)
                .unwrap()
                .price,
            int(5)
        );
    }

    #[test]
    fn arbitrage_makes_superhedge_unbounded() {
        let tree = binomial(8, 5);
        let claim = Claim::new(ints(&[1, 0]));
        let none = ShortSaleFlags::none(1);
        assert_eq!(
            superhedge(&tree, &claim, &none, &full(2)),
            Err(HedgingError::UnboundedBelow)
        );
        assert_eq!(
            dual_superhedge_price(&tree, &claim, &none),
            Err(HedgingError::NoMeasure)
        );
        assert_eq!(
            backward_superhedge(&tree, &claim, &none),
            Err(HedgingError::UnboundedBelow)
        );
        assert_eq!(hedge_price(&tree, &claim), Err(HedgingError::NoMeasure));
    }

    #[test]
    fn strong_family_bounds_the_price() {
        let tree = binomial(4, 2);
        let claim = Claim::new(ints(&[2, 0]));
        let pricing = MeasureFamily::new(vec![
            Measure::uniform(2),
            Measure::new(vec![rat(3, 4), rat(1, 4)]).unwrap(),
        ])
        .unwrap();
        let bound = strong_family_bound(&tree, &claim, &pricing).unwrap().unwrap();
        assert_eq!(bound, rat(3, 2));
        let price = superhedge(&tree, &claim, &ShortSaleFlags::all(1), &full(2))
            .unwrap()
            .price;
        assert!(bound <= price);
    }
}
