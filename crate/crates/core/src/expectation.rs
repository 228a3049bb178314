//! Linear, sublinear and superlinear expectations, conditional expectations
//! on event trees, and the (super)martingale and weak/strong risk-neutral
//! condition checks.

use std::ops::Deref;

use num_traits::{Signed, Zero};

use crate::market::{EventTree, Measure, MeasureFamily, NodeId, ShortSaleFlags};
use crate::rational::{dot, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExpectationError {
    #[error("dimension mismatch: expected {expected} states, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("node {0} carries zero mass; its conditional expectation is undefined")]
    ZeroMassNode(NodeId),
    #[error("state {0} has zero weight under every member")]
    PreconditionFailed(usize),
}

/// Values of a random variable, one per terminal state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomVariable(pub Vec<Rational>);

impl Deref for RandomVariable {
    type Target = [Rational];

    fn deref(&self) -> &[Rational] {
        &self.0
    }
}

impl From<Vec<Rational>> for RandomVariable {
    fn from(values: Vec<Rational>) -> Self {
        RandomVariable(values)
    }
}

fn check_len(expected: usize, found: usize) -> Result<(), ExpectationError> {
    if expected != found {
        return Err(ExpectationError::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub fn expectation(measure: &Measure, rv: &[Rational]) -> Result<Rational, ExpectationError> {
    check_len(measure.len(), rv.len())?;
    Ok(dot(measure.weights(), rv))
}

/// Extremal expectation over a family and the first member attaining it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extremum {
    pub value: Rational,
    pub member: usize,
}

/// `sup_{Q ∈ family} E_Q[rv]`.
pub fn sublinear_expectation(family: &MeasureFamily, rv: &[Rational]) -> Result<Extremum, ExpectationError> {
    extremum(family, rv, |candidate, best| candidate > best)
}

/// `inf_{Q ∈ family} E_Q[rv]`.
pub fn inf_expectation(family: &MeasureFamily, rv: &[Rational]) -> Result<Extremum, ExpectationError> {
    extremum(family, rv, |candidate, best| candidate < best)
}

fn extremum(
    family: &MeasureFamily,
    rv: &[Rational],
    improves: impl Fn(&Rational, &Rational) -> bool,
) -> Result<Extremum, ExpectationError> {
    let mut best: Option<Extremum> = None;
    for (i, q) in family.members().iter().enumerate() {
        let value = expectation(q, rv)?;
        if best.as_ref().is_none_or(|b| improves(&value, &b.value)) {
            best = Some(Extremum { value, member: i });
        }
    }
    Ok(best.expect("family is nonempty"))
}

/// Mass of the leaves below `node`.
pub fn node_mass(measure: &Measure, tree: &EventTree, node: NodeId) -> Rational {
    measure.weights()[tree.leaf_range(node)].iter().sum()
}

/// `E_Q[rv | node]` for a leaf-indexed `rv`.
pub fn conditional_expectation(
    measure: &Measure,
    tree: &EventTree,
    rv: &[Rational],
    node: NodeId,
) -> Result<Rational, ExpectationError> {
    check_len(tree.num_leaves(), measure.len())?;
    check_len(tree.num_leaves(), rv.len())?;
    let range = tree.leaf_range(node);
    let mass: Rational = measure.weights()[range.clone()].iter().sum();
    if mass.is_zero() {
        return Err(ExpectationError::ZeroMassNode(node));
    }
    Ok(dot(&measure.weights()[range.clone()], &rv[range]) / mass)
}

/// `E_Q[S*_m(u) | node]` where `u ≥ depth(node)`, as an unnormalized sum and the node mass.
fn conditional_future_price(
    measure: &Measure,
    tree: &EventTree,
    node: NodeId,
    u: usize,
    asset: usize,
) -> Option<Rational> {
    let range = tree.leaf_range(node);
    let mut mass = Rational::zero();
    let mut total = Rational::zero();
    for k in range {
        let w = measure.weight(k);
        if w.is_zero() {
            continue;
        }
        let ancestor = tree.ancestor_at_depth(tree.leaf_node(k), u);
        mass += w;
        total += w * &tree.discounted(ancestor)[asset];
    }
    (!mass.is_zero()).then(|| total / mass)
}

/// True iff at every internal node of positive mass the one-step conditional
/// increment of each asset is `= 0` (unbanned) or `≤ 0` (banned). The
/// root-to-horizon condition is checked as well.
pub fn satisfies_pricing_conditions(measure: &Measure, tree: &EventTree, flags: &ShortSaleFlags) -> bool {
    if measure.len() != tree.num_leaves() || flags.len() != tree.num_assets() {
        return false;
    }
    let holds = |node: NodeId, u: usize| {
        (0..tree.num_assets()).all(|m| match conditional_future_price(measure, tree, node, u, m) {
            None => true,
            Some(future) => {
                let drift = future - &tree.discounted(node)[m];
                if flags.is_banned(m) {
                    !drift.is_positive()
                } else {
                    drift.is_zero()
                }
            }
        })
    };
    tree.internal_nodes().all(|n| holds(n, tree.depth(n) + 1)) && holds(tree.root(), tree.horizon())
}

/// Every discounted price is a martingale under `measure`.
pub fn is_martingale_measure(measure: &Measure, tree: &EventTree) -> bool {
    satisfies_pricing_conditions(measure, tree, &ShortSaleFlags::none(tree.num_assets()))
}

/// Every discounted price is a supermartingale under `measure`.
pub fn is_supermartingale_measure(measure: &Measure, tree: &EventTree) -> bool {
    satisfies_pricing_conditions(measure, tree, &ShortSaleFlags::all(tree.num_assets()))
}

/// Which `(t, u)` horizon pairs the weak/strong checks visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Horizons {
    /// One-step pairs `(t, t+1)` plus `(0, T)`; the rest follow by the tower property.
    #[default]
    Standard,
    /// Every pair `t < u`.
    All,
}

impl Horizons {
    fn pairs(self, horizon: usize) -> Vec<(usize, usize)> {
        match self {
            Horizons::Standard => {
                let mut pairs: Vec<_> = (0..horizon).map(|t| (t, t + 1)).collect();
                if horizon > 1 {
                    pairs.push((0, horizon));
                }
                pairs
            }
            Horizons::All => (0..horizon)
                .flat_map(|t| (t + 1..=horizon).map(move |u| (t, u)))
                .collect(),
        }
    }
}

/// A node/asset/horizon where the condition fails, with the offending extremal conditional price.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node: NodeId,
    pub asset: usize,
    pub horizon: usize,
    pub conditional: Rational,
    pub current: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionReport {
    pub holds: bool,
    pub violations: Vec<Violation>,
    /// Nodes where no member has positive mass; they are not checked.
    pub skipped_nodes: Vec<NodeId>,
}

/// `inf_Q E_Q[S*_m(u) | F_t] ≤ S*_m(t)` for every asset, node and requested pair.
pub fn check_weak(
    family: &MeasureFamily,
    tree: &EventTree,
    horizons: Horizons,
) -> Result<ConditionReport, ExpectationError> {
    check_condition(family, tree, horizons, |candidate, best| candidate < best)
}

/// `sup_Q E_Q[S*_m(u) | F_t] ≤ S*_m(t)` for every asset, node and requested pair.
pub fn check_strong(
    family: &MeasureFamily,
    tree: &EventTree,
    horizons: Horizons,
) -> Result<ConditionReport, ExpectationError> {
    check_condition(family, tree, horizons, |candidate, best| candidate > best)
}

fn check_condition(
    family: &MeasureFamily,
    tree: &EventTree,
    horizons: Horizons,
    improves: impl Fn(&Rational, &Rational) -> bool,
) -> Result<ConditionReport, ExpectationError> {
    check_len(tree.num_leaves(), family.num_states())?;
    if let Some(k) = family.support_mask().iter().position(|&charged| !charged) {
        return Err(ExpectationError::PreconditionFailed(k));
    }
    let mut report = ConditionReport {
        holds: true,
        violations: Vec::new(),
        skipped_nodes: Vec::new(),
    };
    for (t, u) in horizons.pairs(tree.horizon()) {
        for node in tree.nodes_at_depth(t) {
            for m in 0..tree.num_assets() {
                let mut best: Option<Rational> = None;
                for q in family.members() {
                    if let Some(v) = conditional_future_price(q, tree, node, u, m) {
                        if best.as_ref().is_none_or(|b| improves(&v, b)) {
                            best = Some(v);
                        }
                    }
                }
                let Some(best) = best else {
                    if !report.skipped_nodes.contains(&node) {
                        report.skipped_nodes.push(node);
                    }
                    continue;
                };
                let current = &tree.discounted(node)[m];
                if best > *current {
                    report.holds = false;
                    report.violations.push(Violation {
                        node,
                        asset: m,
                        horizon: u,
                        conditional: best,
                        current: current.clone(),
                    });
                }
            }
        }
    }
    Ok(report)
}
