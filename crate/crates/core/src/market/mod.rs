//! Market model: event trees, measures over terminal states, trading
//! strategies with a self-financed bond leg, claims and short-sale flags.

mod measure;
mod strategy;
mod tree;

pub use measure::{support, Measure, MeasureFamily};
pub use strategy::{
    bond_holding, discounted_gain, is_self_financing, portfolio_value, terminal_values, TradingStrategy,
};
pub use tree::{EventTree, NodeId, NodeSpec, SinglePeriodMarket};

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MarketError {
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("measure family must have at least one member")]
    EmptyFamily,
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("strategy has no holdings for node {0}")]
    MissingHoldings(NodeId),
    #[error("horizon {t} outside 1..={horizon}")]
    InvalidHorizon { t: usize, horizon: usize },
}

/// Discounted risky prices `S*_m(node) = S_m(node) / S_0(node)` for every node, indexed by node id.
pub fn discount_prices(tree: &EventTree) -> Vec<Vec<Rational>> {
    (0..tree.num_nodes()).map(|n| tree.discounted(n).to_vec()).collect()
}

/// Contingent claim: a payoff per terminal state.
#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    payoffs: Vec<Rational>,
}

impl Claim {
    pub fn new(payoffs: Vec<Rational>) -> Self {
        Claim { payoffs }
    }

    pub fn payoffs(&self) -> &[Rational] {
        &self.payoffs
    }

    /// `f* = f / S_0(T)` per leaf.
    pub fn discounted(&self, tree: &EventTree) -> Result<Vec<Rational>, MarketError> {
        if self.payoffs.len() != tree.num_leaves() {
            return Err(MarketError::DimensionMismatch {
                what: "claim payoffs",
                expected: tree.num_leaves(),
                found: self.payoffs.len(),
            });
        }
        Ok(self
            .payoffs
            .iter()
            .zip(tree.leaves())
            .map(|(f, &leaf)| f / tree.bond_price(leaf))
            .collect())
    }
}

/// Which risky assets may not be held short. The bond is never restricted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ShortSaleFlags {
    banned: Vec<bool>,
}

impl ShortSaleFlags {
    pub fn new(banned: Vec<bool>) -> Self {
        ShortSaleFlags { banned }
    }

    pub fn none(num_assets: usize) -> Self {
        ShortSaleFlags::new(vec![false; num_assets])
    }

    pub fn all(num_assets: usize) -> Self {
        ShortSaleFlags::new(vec![true; num_assets])
    }

    pub fn is_banned(&self, asset: usize) -> bool {
        self.banned.get(asset).copied().unwrap_or(false)
    }

    pub fn any(&self) -> bool {
        self.banned.iter().any(|&b| b)
    }

    pub fn len(&self) -> usize {
        self.banned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.banned.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.banned
    }

    pub(crate) fn check(&self, tree: &EventTree) -> Result<(), MarketError> {
        if self.banned.len() != tree.num_assets() {
            return Err(MarketError::DimensionMismatch {
                what: "short-sale flags",
                expected: tree.num_assets(),
                found: self.banned.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ints, rat};

    fn binomial(rate: Rational) -> SinglePeriodMarket {
        SinglePeriodMarket::new(rate, ints(&[4]), vec![ints(&[8]), ints(&[2])]).unwrap()
    }

    fn two_period(r1: Rational, r2: Rational) -> EventTree {
        let up = NodeSpec::branch(
            ints(&[8]),
            vec![NodeSpec::leaf(ints(&[16])), NodeSpec::leaf(ints(&[4]))],
        )
        .with_rate(r2.clone());
        let down =
            NodeSpec::branch(ints(&[2]), vec![NodeSpec::leaf(ints(&[4])), NodeSpec::leaf(ints(&[1]))]).with_rate(r2);
        EventTree::from_spec(NodeSpec::branch(ints(&[4]), vec![up, down]).with_rate(r1), int(0)).unwrap()
    }

    #[test]
    fn zero_rate_discount_is_identity() {
        let market = binomial(int(0));
        let d = discount_prices(market.tree());
        assert_eq!(d[1], ints(&[8]));
        assert_eq!(d[2], ints(&[2]));
    }

    #[test]
    fn unit_rate_halves_terminal_prices() {
        let market = binomial(int(1));
        let tree = market.tree();
        assert_eq!(tree.discounted(0), ints(&[4]).as_slice());
        assert_eq!(tree.discounted(tree.leaf_node(0)), ints(&[4]).as_slice());
        assert_eq!(tree.discounted(tree.leaf_node(1)), ints(&[1]).as_slice());
    }

    #[test]
    fn bond_compounds_along_the_path() {
        let tree = two_period(int(0), int(1));
        let leaf = tree.leaf_node(0);
        assert_eq!(tree.bond_price(leaf), &int(2));
        assert_eq!(tree.discounted(leaf), ints(&[8]).as_slice());
        assert_eq!(tree.bond_price(tree.root()), &int(1));
    }

    #[test]
    fn leaves_are_preorder_and_contiguous() {
        let tree = two_period(int(0), int(0));
        assert_eq!(tree.horizon(), 2);
        assert_eq!(tree.num_leaves(), 4);
        let up = tree.children(0)[0];
        assert_eq!(tree.leaf_range(up), 0..2);
        assert_eq!(tree.leaf_range(tree.children(0)[1]), 2..4);
        assert_eq!(tree.nodes_at_depth(1), vec![1, 4]);
        assert_eq!(tree.ancestor_at_depth(tree.leaf_node(3), 1), 4);
        assert_eq!(tree.increment(tree.leaf_node(0), 0), int(8));
    }

    #[test]
    fn rejects_ragged_and_invalid_trees() {
        let ragged = NodeSpec::branch(
            ints(&[4]),
            vec![
                NodeSpec::leaf(ints(&[1])),
                NodeSpec::branch(ints(&[2]), vec![NodeSpec::leaf(ints(&[3]))]),
            ],
        );
        assert!(matches!(
            EventTree::from_spec(ragged, int(0)),
            Err(MarketError::InvalidTree(_))
        ));
        let zero_initial = NodeSpec::branch(ints(&[0]), vec![NodeSpec::leaf(ints(&[1]))]);
        assert!(EventTree::from_spec(zero_initial, int(0)).is_err());
        let negative_rate = NodeSpec::branch(ints(&[1]), vec![NodeSpec::leaf(ints(&[1]))]);
        assert!(EventTree::from_spec(negative_rate, rat(-1, 2)).is_err());
        assert!(EventTree::from_spec(NodeSpec::leaf(ints(&[1])), int(0)).is_err());
        assert!(matches!(
            SinglePeriodMarket::new(int(0), ints(&[4]), vec![ints(&[8, 1])]),
            Err(MarketError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bankrupt_terminal_prices_are_allowed() {
        assert!(SinglePeriodMarket::new(int(0), ints(&[4]), vec![ints(&[8]), ints(&[0])]).is_ok());
    }

    #[test]
    fn claim_discounts_by_terminal_bond() {
        let tree = two_period(int(0), int(1));
        let claim = Claim::new(ints(&[12, 0, 0, 2]));
        assert_eq!(claim.discounted(&tree).unwrap(), ints(&[6, 0, 0, 1]));
        assert!(Claim::new(ints(&[1])).discounted(&tree).is_err());
    }
}
