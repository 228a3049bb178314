use std::ops::Range;

use num_traits::{One, Signed, Zero};

use super::MarketError;
use crate::rational::Rational;

/// Index of a node in an [`EventTree`]. The root is always `0`; nodes are numbered in preorder.
pub type NodeId = usize;

/// Nested description of a tree, the input form for [`EventTree::from_spec`].
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: Option<String>,
    /// Risky-asset prices at this node.
    pub prices: Vec<Rational>,
    /// Simple rate over the period that starts at this node. Falls back to the tree default.
    pub rate: Option<Rational>,
    pub children: Vec<NodeSpec>,
}

impl NodeSpec {
    pub fn leaf(prices: Vec<Rational>) -> Self {
        NodeSpec {
            name: None,
            prices,
            rate: None,
            children: Vec::new(),
        }
    }

    pub fn branch(prices: Vec<Rational>, children: Vec<NodeSpec>) -> Self {
        NodeSpec {
            name: None,
            prices,
            rate: None,
            children,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_rate(mut self, rate: Rational) -> Self {
        self.rate = Some(rate);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    name: Option<String>,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    depth: usize,
    prices: Vec<Rational>,
    discounted: Vec<Rational>,
    /// Rate over the period following this node; zero on leaves.
    rate: Rational,
    bond: Rational,
    leaves: Range<usize>,
}

/// Finite rooted tree of depth `T` carrying risky prices at every node and a
/// per-node rate for the period that follows it.
///
/// Leaves are the terminal states and are indexed `0..K` in preorder, so the
/// leaves below any node form a contiguous range. The bond is implicit: its
/// price at a node is the running product of `1 + r` along the path, with
/// value 1 at the root.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTree {
    nodes: Vec<Node>,
    num_assets: usize,
    horizon: usize,
    leaves: Vec<NodeId>,
    leaf_of_node: Vec<Option<usize>>,
}

impl EventTree {
    /// Flattens and validates a nested description. `default_rate` applies to
    /// every internal node that does not set its own rate.
    pub fn from_spec(root: NodeSpec, default_rate: Rational) -> Result<Self, MarketError> {
        let num_assets = root.prices.len();
        if num_assets == 0 {
            return Err(MarketError::InvalidTree("at least one risky asset is required".into()));
        }
        if root.prices.iter().any(|p| !p.is_positive()) {
            return Err(MarketError::InvalidTree(
                "initial prices must be strictly positive".into(),
            ));
        }
        let mut tree = EventTree {
            nodes: Vec::new(),
            num_assets,
            horizon: 0,
            leaves: Vec::new(),
            leaf_of_node: Vec::new(),
        };
        tree.push(root, None, 0, Rational::one(), &default_rate)?;

        let depths: Vec<usize> = tree.leaves.iter().map(|&l| tree.nodes[l].depth).collect();
        let horizon = depths[0];
        if horizon == 0 {
            return Err(MarketError::InvalidTree("tree must have at least one period".into()));
        }
        if depths.iter().any(|&d| d != horizon) {
            return Err(MarketError::InvalidTree(
                "every root-to-leaf path must have the same length".into(),
            ));
        }
        tree.horizon = horizon;
        tree.leaf_of_node = vec![None; tree.nodes.len()];
        for (k, &leaf) in tree.leaves.iter().enumerate() {
            tree.leaf_of_node[leaf] = Some(k);
        }
        Ok(tree)
    }

    fn push(
        &mut self,
        spec: NodeSpec,
        parent: Option<NodeId>,
        depth: usize,
        bond: Rational,
        default_rate: &Rational,
    ) -> Result<NodeId, MarketError> {
        let id = self.nodes.len();
        if spec.prices.len() != self.num_assets {
            return Err(MarketError::InvalidTree(format!(
                "node {id} has {} prices, expected {}",
                spec.prices.len(),
                self.num_assets
            )));
        }
        if spec.prices.iter().any(|p| p.is_negative()) {
            return Err(MarketError::InvalidTree(format!("node {id} has a negative price")));
        }
        let rate = if spec.children.is_empty() {
            Rational::zero()
        } else {
            spec.rate.clone().unwrap_or_else(|| default_rate.clone())
        };
        if rate.is_negative() {
            return Err(MarketError::InvalidTree(format!("node {id} has a negative rate")));
        }
        let discounted = spec.prices.iter().map(|p| p / &bond).collect();
        let first_leaf = self.leaves.len();
        self.nodes.push(Node {
            name: spec.name,
            parent,
            children: Vec::new(),
            depth,
            prices: spec.prices,
            discounted,
            rate: rate.clone(),
            bond: bond.clone(),
            leaves: first_leaf..first_leaf,
        });
        if spec.children.is_empty() {
            self.leaves.push(id);
        } else {
            let child_bond = &bond * (Rational::one() + &rate);
            for child in spec.children {
                let cid = self.push(child, Some(id), depth + 1, child_bond.clone(), default_rate)?;
                self.nodes[id].children.push(cid);
            }
        }
        self.nodes[id].leaves = first_leaf..self.leaves.len();
        Ok(id)
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_assets(&self) -> usize {
        self.num_assets
    }

    /// Number of periods `T`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Leaf nodes in state order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn leaf_node(&self, state: usize) -> NodeId {
        self.leaves[state]
    }

    /// State index of a leaf node, `None` for internal nodes.
    pub fn state_of(&self, node: NodeId) -> Option<usize> {
        self.leaf_of_node[node]
    }

    pub fn name(&self, node: NodeId) -> Option<&str> {
        self.nodes[node].name.as_deref()
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.nodes[node].parent
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.nodes[node].children
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.nodes[node].children.is_empty()
    }

    pub fn depth(&self, node: NodeId) -> usize {
        self.nodes[node].depth
    }

    pub fn prices(&self, node: NodeId) -> &[Rational] {
        &self.nodes[node].prices
    }

    /// Risky prices divided by the bond price at the node.
    pub fn discounted(&self, node: NodeId) -> &[Rational] {
        &self.nodes[node].discounted
    }

    /// Rate over the period following `node` (zero on leaves).
    pub fn rate(&self, node: NodeId) -> &Rational {
        &self.nodes[node].rate
    }

    pub fn bond_price(&self, node: NodeId) -> &Rational {
        &self.nodes[node].bond
    }

    /// Range of state indices below `node`.
    pub fn leaf_range(&self, node: NodeId) -> Range<usize> {
        self.nodes[node].leaves.clone()
    }

    /// Discounted one-step increment `S*_m(node) - S*_m(parent)`; zero at the root.
    pub fn increment(&self, node: NodeId, asset: usize) -> Rational {
        match self.nodes[node].parent {
            Some(p) => &self.nodes[node].discounted[asset] - &self.nodes[p].discounted[asset],
            None => Rational::zero(),
        }
    }

    /// Internal nodes in preorder.
    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&n| !self.is_leaf(n))
    }

    /// Nodes at depth `t` in preorder.
    pub fn nodes_at_depth(&self, t: usize) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&n| self.nodes[n].depth == t).collect()
    }

    /// Ancestor of `node` at depth `t` (the node itself when `t` equals its depth).
    pub fn ancestor_at_depth(&self, node: NodeId, t: usize) -> NodeId {
        assert!(t <= self.depth(node), "ancestor depth beyond node depth");
        let mut current = node;
        while self.nodes[current].depth > t {
            current = self.nodes[current].parent.expect("non-root node has a parent");
        }
        current
    }

    /// Root-to-node path, root first.
    pub fn path(&self, node: NodeId) -> Vec<NodeId> {
        let mut path = vec![node];
        let mut current = node;
        while let Some(p) = self.nodes[current].parent {
            path.push(p);
            current = p;
        }
        path.reverse();
        path
    }

    /// Rebuilds the nested description, e.g. for rescaling in tests.
    pub fn to_spec(&self) -> NodeSpec {
        self.spec_at(self.root())
    }

    fn spec_at(&self, node: NodeId) -> NodeSpec {
        let n = &self.nodes[node];
        NodeSpec {
            name: n.name.clone(),
            prices: n.prices.clone(),
            rate: if n.children.is_empty() {
                None
            } else {
                Some(n.rate.clone())
            },
            children: n.children.iter().map(|&c| self.spec_at(c)).collect(),
        }
    }
}

/// One-period market on `K` states with `M` risky assets and a bond paying `1 + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglePeriodMarket {
    tree: EventTree,
}

impl SinglePeriodMarket {
    /// `terminal[k][m]` is the price of asset `m` in state `k`.
    pub fn new(rate: Rational, initial: Vec<Rational>, terminal: Vec<Vec<Rational>>) -> Result<Self, MarketError> {
        if terminal.is_empty() {
            return Err(MarketError::InvalidTree("at least one state is required".into()));
        }
        if let Some(row) = terminal.iter().find(|row| row.len() != initial.len()) {
            return Err(MarketError::DimensionMismatch {
                what: "terminal price row",
                expected: initial.len(),
                found: row.len(),
            });
        }
        let root = NodeSpec {
            name: None,
            prices: initial,
            rate: Some(rate.clone()),
            children: terminal.into_iter().map(NodeSpec::leaf).collect(),
        };
        Ok(SinglePeriodMarket {
            tree: EventTree::from_spec(root, rate)?,
        })
    }

    /// Wraps a depth-1 tree.
    pub fn from_tree(tree: EventTree) -> Result<Self, MarketError> {
        if tree.horizon() != 1 {
            return Err(MarketError::InvalidTree("a single-period market has depth 1".into()));
        }
        Ok(SinglePeriodMarket { tree })
    }

    pub fn tree(&self) -> &EventTree {
        &self.tree
    }

    pub fn into_tree(self) -> EventTree {
        self.tree
    }

    pub fn rate(&self) -> &Rational {
        self.tree.rate(self.tree.root())
    }

    pub fn num_states(&self) -> usize {
        self.tree.num_leaves()
    }

    pub fn num_assets(&self) -> usize {
        self.tree.num_assets()
    }

    pub fn initial_prices(&self) -> &[Rational] {
        self.tree.prices(self.tree.root())
    }

    pub fn terminal_prices(&self, state: usize) -> &[Rational] {
        self.tree.prices(self.tree.leaf_node(state))
    }
}
