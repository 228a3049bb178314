use std::collections::BTreeMap;

use num_traits::Zero;

use super::{EventTree, MarketError, NodeId};
use crate::rational::{dot, Rational};

/// Predictable risky holdings per internal node plus initial wealth.
///
/// The holding stored at node `n` is carried over the period from `n` to its
/// children. The bond leg is not stored: it is whatever makes the rebalancing
/// at each node self-financing, see [`bond_holding`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TradingStrategy {
    initial_wealth: Rational,
    holdings: BTreeMap<NodeId, Vec<Rational>>,
}

impl TradingStrategy {
    pub fn new(initial_wealth: Rational) -> Self {
        TradingStrategy {
            initial_wealth,
            holdings: BTreeMap::new(),
        }
    }

    /// All-zero holdings at every internal node of `tree`.
    pub fn zero(tree: &EventTree, initial_wealth: Rational) -> Self {
        let mut strategy = TradingStrategy::new(initial_wealth);
        for n in tree.internal_nodes() {
            strategy.set_holdings(n, vec![Rational::zero(); tree.num_assets()]);
        }
        strategy
    }

    pub fn with_holdings(mut self, node: NodeId, holdings: Vec<Rational>) -> Self {
        self.set_holdings(node, holdings);
        self
    }

    pub fn set_holdings(&mut self, node: NodeId, holdings: Vec<Rational>) {
        self.holdings.insert(node, holdings);
    }

    pub fn initial_wealth(&self) -> &Rational {
        &self.initial_wealth
    }

    pub fn holdings(&self, node: NodeId) -> Option<&[Rational]> {
        self.holdings.get(&node).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &[Rational])> {
        self.holdings.iter().map(|(&n, h)| (n, h.as_slice()))
    }

    fn require(&self, tree: &EventTree, node: NodeId) -> Result<&[Rational], MarketError> {
        let h = self.holdings(node).ok_or(MarketError::MissingHoldings(node))?;
        if h.len() != tree.num_assets() {
            return Err(MarketError::DimensionMismatch {
                what: "holdings",
                expected: tree.num_assets(),
                found: h.len(),
            });
        }
        Ok(h)
    }
}

/// Bond units `h_0` carried out of internal node `node`, i.e. the value left
/// after buying the risky holdings at that node.
pub fn bond_holding(tree: &EventTree, strategy: &TradingStrategy, node: NodeId) -> Result<Rational, MarketError> {
    let value = portfolio_value(tree, strategy, node)?;
    let h = strategy.require(tree, node)?;
    Ok(value - dot(h, tree.discounted(node)))
}

/// Discounted portfolio value `V*` at `node`: `h_0 + Σ h_m S*_m` using the
/// holdings set at the parent. The root value is the initial wealth.
pub fn portfolio_value(tree: &EventTree, strategy: &TradingStrategy, node: NodeId) -> Result<Rational, MarketError> {
    let mut value = strategy.initial_wealth.clone();
    let path = tree.path(node);
    for pair in path.windows(2) {
        let (parent, child) = (pair[0], pair[1]);
        let h = strategy.require(tree, parent)?;
        let bond = value - dot(h, tree.discounted(parent));
        value = bond + dot(h, tree.discounted(child));
    }
    Ok(value)
}

/// Discounted gain `G*(t) = Σ_u Σ_m h_m(u) ΔS*_m(u)` at every depth-`t` node,
/// aligned with [`EventTree::nodes_at_depth`].
pub fn discounted_gain(tree: &EventTree, strategy: &TradingStrategy, t: usize) -> Result<Vec<Rational>, MarketError> {
    if t == 0 || t > tree.horizon() {
        return Err(MarketError::InvalidHorizon {
            t,
            horizon: tree.horizon(),
        });
    }
    tree.nodes_at_depth(t)
        .into_iter()
        .map(|node| gain_at(tree, strategy, node))
        .collect()
}

pub(crate) fn gain_at(tree: &EventTree, strategy: &TradingStrategy, node: NodeId) -> Result<Rational, MarketError> {
    let mut gain = Rational::zero();
    for pair in tree.path(node).windows(2) {
        let h = strategy.require(tree, pair[0])?;
        for (m, hm) in h.iter().enumerate() {
            gain += hm * tree.increment(pair[1], m);
        }
    }
    Ok(gain)
}

/// Terminal discounted values `V*(T)` in state order.
pub fn terminal_values(tree: &EventTree, strategy: &TradingStrategy) -> Result<Vec<Rational>, MarketError> {
    tree.leaves()
        .iter()
        .map(|&leaf| portfolio_value(tree, strategy, leaf))
        .collect()
}

/// Checks `V*(t) = V*(0) + G*(t)` at every node and that the rebalancing at
/// every internal non-root node conserves value.
pub fn is_self_financing(tree: &EventTree, strategy: &TradingStrategy) -> Result<bool, MarketError> {
    for node in 1..tree.num_nodes() {
        let value = portfolio_value(tree, strategy, node)?;
        let gain = gain_at(tree, strategy, node)?;
        if value != strategy.initial_wealth() + gain {
            return Ok(false);
        }
        if !tree.is_leaf(node) {
            let parent = tree.parent(node).expect("non-root");
            let before =
                bond_holding(tree, strategy, parent)? + dot(strategy.require(tree, parent)?, tree.discounted(node));
            let after = bond_holding(tree, strategy, node)? + dot(strategy.require(tree, node)?, tree.discounted(node));
            if before != after {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
