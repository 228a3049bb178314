//! Seeded random instances for property and acceptance tests.

use mlab_core::arbitrage::find_martingale_measure;
use mlab_core::hedging::dual_superhedge_price;
use mlab_core::market::{Claim, EventTree, Measure, MeasureFamily, NodeSpec, ShortSaleFlags, SinglePeriodMarket};
use mlab_core::rational::{int, rat, Rational};
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `p/q` with `1 ≤ q ≤ 20` and `lo ≤ p ≤ 20`.
pub fn small_rational(rng: &mut TestRng, lo: i64) -> Rational {
    rat(rng.gen_range(lo..=20), rng.gen_range(1..=20))
}

fn random_rate(rng: &mut TestRng) -> Rational {
    [int(0), int(0), rat(1, 10), rat(1, 5), rat(1, 4)]
        .choose(rng)
        .cloned()
        .expect("nonempty")
}

/// Single-period market with `K ≤ 5` states, `M ≤ 3` assets and prices `p/q`, `p, q ≤ 20`.
pub fn single_market(rng: &mut TestRng) -> SinglePeriodMarket {
    let k = rng.gen_range(1..=5);
    let m = rng.gen_range(1..=3);
    let initial: Vec<Rational> = (0..m).map(|_| small_rational(rng, 1)).collect();
    let terminal = (0..k)
        .map(|_| (0..m).map(|_| small_rational(rng, 0)).collect())
        .collect();
    SinglePeriodMarket::new(random_rate(rng), initial, terminal).expect("generated market is valid")
}

/// Tree of depth `1..=max_depth`, branching `1..=max_branch`, `1..=max_assets` assets.
pub fn tree(rng: &mut TestRng, max_depth: usize, max_branch: usize, max_assets: usize) -> EventTree {
    let depth = rng.gen_range(1..=max_depth);
    let m = rng.gen_range(1..=max_assets);
    let root: Vec<Rational> = (0..m).map(|_| small_rational(rng, 1)).collect();
    let spec = subtree(rng, root, depth, max_branch);
    EventTree::from_spec(spec, int(0)).expect("generated tree is valid")
}

/// Complete binary tree with one asset whose up/down moves straddle the
/// growth factor at every node, so it is arbitrage-free and complete.
pub fn complete_binary_tree(rng: &mut TestRng, depth: usize) -> EventTree {
    fn grow(rng: &mut TestRng, price: Rational, depth: usize) -> NodeSpec {
        if depth == 0 {
            return NodeSpec::leaf(vec![price]);
        }
        let rate = random_rate(rng);
        let growth = Rational::one() + &rate;
        let up = &price * &growth * (Rational::one() + rat(rng.gen_range(1..=5), rng.gen_range(2..=6)));
        let down = &price * &growth * rat(rng.gen_range(1..=5), 6);
        let children = vec![grow(rng, up, depth - 1), grow(rng, down, depth - 1)];
        NodeSpec::branch(vec![price], children).with_rate(rate)
    }
    let root = small_rational(rng, 1);
    EventTree::from_spec(grow(rng, root, depth), int(0)).expect("generated tree is valid")
}

fn subtree(rng: &mut TestRng, prices: Vec<Rational>, depth: usize, max_branch: usize) -> NodeSpec {
    if depth == 0 {
        return NodeSpec::leaf(prices);
    }
    let rate = random_rate(rng);
    let branching = rng.gen_range(1..=max_branch);
    let children = (0..branching)
        .map(|_| {
            let child: Vec<Rational> = prices
                .iter()
                .map(|p| {
                    if rng.gen_bool(0.7) {
                        // multiplicative move keeps many instances arbitrage-free
                        p * rat(rng.gen_range(1..=8), 4)
                    } else {
                        small_rational(rng, 0)
                    }
                })
                .collect();
            subtree(rng, child, depth - 1, max_branch)
        })
        .collect();
    NodeSpec::branch(prices, children).with_rate(rate)
}

/// Random probability vector; with `allow_zero` some weights may vanish.
pub fn measure(rng: &mut TestRng, k: usize, allow_zero: bool) -> Measure {
    let lo = if allow_zero { 0 } else { 1 };
    let mut raw: Vec<i64> = (0..k).map(|_| rng.gen_range(lo..=9)).collect();
    if raw.iter().all(|&w| w == 0) {
        let i = rng.gen_range(0..k);
        raw[i] = 1;
    }
    let total: i64 = raw.iter().sum();
    Measure::new(raw.into_iter().map(|w| rat(w, total)).collect()).expect("normalized")
}

/// Family of `1..=4` members, possibly with polar states when `allow_polar`.
pub fn family(rng: &mut TestRng, k: usize, allow_polar: bool) -> MeasureFamily {
    let n = rng.gen_range(1..=4);
    let members = (0..n)
        .map(|_| {
            let zeros = allow_polar || rng.gen_bool(0.3);
            measure(rng, k, zeros)
        })
        .collect();
    let family = MeasureFamily::new(members).expect("nonempty");
    if allow_polar || family.support_mask().iter().all(|&s| s) {
        family
    } else {
        let mut members = family.members().to_vec();
        members.push(measure(rng, k, false));
        MeasureFamily::new(members).expect("nonempty")
    }
}

/// Family whose members all charge every state.
pub fn full_support_family(rng: &mut TestRng, k: usize) -> MeasureFamily {
    let n = rng.gen_range(1..=4);
    MeasureFamily::new((0..n).map(|_| measure(rng, k, false)).collect()).expect("nonempty")
}

pub fn claim(rng: &mut TestRng, k: usize) -> Claim {
    Claim::new((0..k).map(|_| small_rational(rng, -5)).collect())
}

pub fn values(rng: &mut TestRng, k: usize) -> Vec<Rational> {
    (0..k)
        .map(|_| rat(rng.gen_range(-20..=20), rng.gen_range(1..=20)))
        .collect()
}

/// Supermartingale family: a strictly positive supermartingale measure plus
/// midpoints between it and vertices of the supermartingale polytope.
/// `None` when the all-banned market has arbitrage.
pub fn strong_family(rng: &mut TestRng, tree: &EventTree) -> Option<MeasureFamily> {
    let banned = ShortSaleFlags::all(tree.num_assets());
    let base = find_martingale_measure(tree, &banned).ok()??.measure;
    let mut members = vec![base.clone()];
    for _ in 0..rng.gen_range(0..=3) {
        let probe = claim(rng, tree.num_leaves());
        let vertex = dual_superhedge_price(tree, &probe, &banned).ok()?.measure;
        let weights = base
            .weights()
            .iter()
            .zip(vertex.weights())
            .map(|(a, b)| (a + b) / int(2))
            .collect();
        members.push(Measure::new(weights).expect("convex combination"));
    }
    Some(MeasureFamily::new(members).expect("nonempty"))
}

/// Multiplies every risky price at depth `t` by `factors[t]` and adjusts the
/// rates so the bond is scaled the same way. `factors[0]` must be 1 and the
/// factors nondecreasing so rates stay nonnegative.
pub fn rescale_by_date(tree: &EventTree, factors: &[Rational]) -> EventTree {
    fn walk(spec: &mut NodeSpec, depth: usize, factors: &[Rational]) {
        for p in spec.prices.iter_mut() {
            *p *= &factors[depth];
        }
        if let Some(rate) = spec.rate.as_mut() {
            let growth = (Rational::one() + &*rate) * &factors[depth + 1] / &factors[depth];
            *rate = growth - Rational::one();
        }
        for child in spec.children.iter_mut() {
            walk(child, depth + 1, factors);
        }
    }
    assert!(factors[0].is_one(), "root bond price stays 1");
    let mut spec = tree.to_spec();
    walk(&mut spec, 0, factors);
    EventTree::from_spec(spec, Rational::zero()).expect("rescaled tree is valid")
}

/// Nondecreasing date factors starting at 1.
pub fn date_factors(rng: &mut TestRng, horizon: usize) -> Vec<Rational> {
    let mut factors = vec![Rational::one()];
    for _ in 0..horizon {
        let step = Rational::one() + rat(rng.gen_range(0..=5), rng.gen_range(1..=7));
        let next = factors.last().expect("nonempty") * step;
        factors.push(next);
    }
    factors
}

/// Multiplies every risky price by `lambda`, leaving the bond alone.
pub fn scale_prices(tree: &EventTree, lambda: &Rational) -> EventTree {
    fn walk(spec: &mut NodeSpec, lambda: &Rational) {
        for p in spec.prices.iter_mut() {
            *p *= lambda;
        }
        for child in spec.children.iter_mut() {
            walk(child, lambda);
        }
    }
    let mut spec = tree.to_spec();
    walk(&mut spec, lambda);
    EventTree::from_spec(spec, Rational::zero()).expect("scaled tree is valid")
}

/// Random short-sale flags.
pub fn flags(rng: &mut TestRng, num_assets: usize) -> ShortSaleFlags {
    ShortSaleFlags::new((0..num_assets).map(|_| rng.gen_bool(0.5)).collect())
}
