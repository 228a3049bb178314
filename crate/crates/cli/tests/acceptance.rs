//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Every randomized check is seeded, so a failure reproduces exactly.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use mlab_core::arbitrage::{
    find_arbitrage_multi, find_arbitrage_single, find_martingale_measure, find_martingale_measure_on,
    find_risk_neutral_measure,
};
use mlab_core::expectation::{check_strong, check_weak, expectation, inf_expectation, sublinear_expectation, Horizons};
use mlab_core::hedging::{
    backward_superhedge, dual_superhedge_price, dual_superhedge_price_on, hedge_price, replicate, superhedge,
    HedgingError, Replication,
};
use mlab_core::lp::{self, LpOutcome, Sense};
use mlab_core::market::{Claim, EventTree, Measure, MeasureFamily, ShortSaleFlags};
use mlab_core::oracle::{self, basis_count, brute_force_extremum, enumerate_vertices, Direction, Polytope, MAX_STATES};
use mlab_core::Rational;
use mlab_testkit as tk;
use num_traits::{Signed, Zero};
use rand::Rng;
use serde_json::Value;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn fail<E: std::fmt::Debug>(context: String) -> impl FnOnce(E) -> String {
    move |e| format!("{context}: {e:?}")
}

/// Largest number of candidate bases for the exhaustive vertex cross-check;
/// the enumeration grows combinatorially with states and constraints.
const VERTEX_BASIS_BUDGET: u128 = 20_000;

/// Independent no-arbitrage verdict: a strictly positive measure on the
/// support exists iff the restricted pricing polytope is nonempty and the
/// average of its vertices charges every support state.
fn vertex_verdict(tree: &EventTree, flags: &ShortSaleFlags, mask: &[bool]) -> Option<bool> {
    if tree.num_leaves() > MAX_STATES {
        return None;
    }
    let polytope = Polytope::pricing(tree, flags).restricted_to(mask);
    if basis_count(&polytope) > VERTEX_BASIS_BUDGET {
        return None;
    }
    let vertices = enumerate_vertices(&polytope).expect("small polytope");
    if vertices.is_empty() {
        return Some(false);
    }
    Some((0..tree.num_leaves()).all(|k| !mask[k] || vertices.iter().any(|v| v.weight(k).is_positive())))
}

/// Exactly one search returns a certificate, it verifies, and the vertex
/// oracle agrees with the verdict. Returns the verdict and whether the vertex
/// oracle ran.
fn dichotomy_checked(
    tree: &EventTree,
    family: &MeasureFamily,
    flags: &ShortSaleFlags,
    label: &str,
) -> Result<(bool, bool), String> {
    let mask = family.support_mask();
    let arbitrage = find_arbitrage_multi(tree, family, flags).map_err(fail(label.into()))?;
    let measure = find_martingale_measure_on(tree, flags, &mask).map_err(fail(label.into()))?;
    let no_arbitrage = match (&arbitrage, &measure) {
        (Some(a), None) => {
            ensure!(
                oracle::verify_arbitrage(&a.strategy, tree, family, flags),
                "{label}: arbitrage fails oracle"
            );
            false
        }
        (None, Some(m)) => {
            ensure!(
                oracle::verify_risk_neutral(m, tree, family, flags),
                "{label}: measure fails oracle"
            );
            true
        }
        _ => return Err(format!("{label}: both or neither certificate returned")),
    };
    let expected = vertex_verdict(tree, flags, &mask);
    if let Some(expected) = expected {
        ensure!(expected == no_arbitrage, "{label}: vertex oracle disagrees");
    }
    Ok((no_arbitrage, expected.is_some()))
}

fn dichotomy(tree: &EventTree, family: &MeasureFamily, flags: &ShortSaleFlags, label: &str) -> Result<bool, String> {
    dichotomy_checked(tree, family, flags, label).map(|(verdict, _)| verdict)
}

fn criterion_1() -> Check {
    let mut rng = tk::rng(1);
    let (mut arb, mut free) = (0, 0);
    for i in 0..250 {
        let market = tk::single_market(&mut rng);
        let k = market.num_states();
        let m = market.num_assets();
        let full = MeasureFamily::singleton(Measure::uniform(k));
        let polar = tk::family(&mut rng, k, true);
        for flags in [ShortSaleFlags::none(m), ShortSaleFlags::all(m)] {
            let label = format!("market {i} bans {:?}", flags.as_slice());
            let a = find_arbitrage_single(&market, &full, &flags).map_err(fail(label.clone()))?;
            let q = find_risk_neutral_measure(&market, &flags).map_err(fail(label.clone()))?;
            ensure!(
                a.is_some() != q.is_some(),
                "{label}: single-period searches not exclusive"
            );
            let verdict = dichotomy(market.tree(), &full, &flags, &label)?;
            ensure!(verdict == q.is_some(), "{label}: single and multi searches disagree");
            dichotomy(market.tree(), &polar, &flags, &format!("{label} polar family"))?;
            if verdict {
                free += 1;
            } else {
                arb += 1;
            }
        }
    }
    Ok(format!(
        "250 markets x 2 ban settings: {free} no-arbitrage, {arb} arbitrage"
    ))
}

fn criterion_2() -> Check {
    let mut rng = tk::rng(2);
    let (mut arb, mut free, mut vertex_checked) = (0, 0, 0);
    for i in 0..120 {
        let tree = tk::tree(&mut rng, 3, 3, 2);
        let m = tree.num_assets();
        let k = tree.num_leaves();
        let families = [
            MeasureFamily::singleton(Measure::uniform(k)),
            tk::family(&mut rng, k, true),
        ];
        for (mode, flags) in [
            ("martingale", ShortSaleFlags::none(m)),
            ("supermartingale", ShortSaleFlags::all(m)),
        ] {
            for (j, family) in families.iter().enumerate() {
                let (verdict, checked) =
                    dichotomy_checked(&tree, family, &flags, &format!("tree {i} {mode} family {j}"))?;
                vertex_checked += usize::from(checked);
                if verdict {
                    free += 1;
                } else {
                    arb += 1;
                }
            }
        }
    }
    Ok(format!(
        "120 trees x 2 modes x 2 families: {free} no-arbitrage, {arb} arbitrage, {vertex_checked} vertex cross-checks"
    ))
}

fn criterion_3() -> Check {
    let mut rng = tk::rng(3);
    let mut found = [0usize; 2];
    let mut boundary = 0;
    for i in 0..5000 {
        if found.iter().all(|&n| n >= 100) {
            break;
        }
        let tree = tk::tree(&mut rng, 3, 3, 2);
        let m = tree.num_assets();
        let k = tree.num_leaves();
        let full = MeasureFamily::singleton(Measure::uniform(k));
        for (slot, flags) in [ShortSaleFlags::none(m), ShortSaleFlags::all(m)]
            .into_iter()
            .enumerate()
        {
            if find_martingale_measure(&tree, &flags)
                .map_err(fail(format!("tree {i}")))?
                .is_none()
            {
                continue;
            }
            found[slot] += 1;
            let claim = tk::claim(&mut rng, k);
            let label = format!("tree {i} bans {:?}", flags.as_slice());
            let primal = superhedge(&tree, &claim, &flags, &full).map_err(fail(label.clone()))?;
            let dual = dual_superhedge_price(&tree, &claim, &flags).map_err(fail(label.clone()))?;
            let backward = backward_superhedge(&tree, &claim, &flags).map_err(fail(label.clone()))?;
            ensure!(
                primal.price == dual.price,
                "{label}: primal {} != dual {}",
                primal.price,
                dual.price
            );
            ensure!(backward[tree.root()] == primal.price, "{label}: backward root differs");
            ensure!(
                primal.slack.iter().all(|s| !s.is_negative()),
                "{label}: strategy does not superhedge"
            );
            boundary += usize::from(dual.on_boundary);

            // Same duality restricted to the support of a family with polar states.
            let family = tk::family(&mut rng, k, true);
            let on = dual_superhedge_price_on(&tree, &claim, &flags, &family.support_mask());
            match (superhedge(&tree, &claim, &flags, &family), on) {
                (Ok(p), Ok(d)) => ensure!(p.price == d.price, "{label}: restricted primal != dual"),
                (Err(HedgingError::UnboundedBelow), Err(HedgingError::NoMeasure)) => {}
                (p, d) => return Err(format!("{label}: restricted duality mismatch {p:?} / {d:?}")),
            }
        }
    }
    ensure!(
        found.iter().all(|&n| n >= 100),
        "only {found:?} no-arbitrage instances generated"
    );
    Ok(format!(
        "{} martingale + {} supermartingale instances, {boundary} with a boundary maximizer",
        found[0], found[1]
    ))
}

fn criterion_4() -> Check {
    let mut rng = tk::rng(4);
    let mut count = 0;
    for depth in 1..=4 {
        for i in 0..15 {
            let tree = tk::complete_binary_tree(&mut rng, depth);
            let k = tree.num_leaves();
            let claim = tk::claim(&mut rng, k);
            let label = format!("depth {depth} tree {i}");
            let full = MeasureFamily::singleton(Measure::uniform(k));
            let Replication::Hedged(hedge) = replicate(&tree, &claim, &full).map_err(fail(label.clone()))? else {
                return Err(format!("{label}: complete market claim not replicable"));
            };
            let none = ShortSaleFlags::none(1);
            let q = find_martingale_measure(&tree, &none)
                .map_err(fail(label.clone()))?
                .ok_or(format!("{label}: no martingale measure"))?;
            let f = claim.discounted(&tree).map_err(fail(label.clone()))?;
            let eq = expectation(&q.measure, &f).map_err(fail(label.clone()))?;
            ensure!(hedge.price == eq, "{label}: x = {} but E_Q[f*] = {eq}", hedge.price);
            ensure!(
                hedge.slack.iter().all(Zero::is_zero),
                "{label}: replication is not exact"
            );
            let sup = superhedge(&tree, &claim, &none, &full).map_err(fail(label.clone()))?;
            ensure!(
                sup.price == hedge.price,
                "{label}: superhedge {} != replication {}",
                sup.price,
                hedge.price
            );
            ensure!(
                hedge_price(&tree, &claim).map_err(fail(label.clone()))? == eq,
                "{label}: hedge_price differs"
            );
            count += 1;
        }
    }
    Ok(format!("{count} complete binary trees of depth 1..=4"))
}

fn criterion_5() -> Check {
    let mut rng = tk::rng(5);
    let (mut strong_cases, mut weak_only, mut neither, mut singletons) = (0, 0, 0, 0);
    for i in 0..240 {
        let tree = if i % 3 == 0 {
            tk::single_market(&mut rng).into_tree()
        } else {
            tk::tree(&mut rng, 2, 3, 2)
        };
        let k = tree.num_leaves();
        let m = tree.num_assets();
        let family = match (i % 2, tk::strong_family(&mut rng, &tree)) {
            (0, Some(f)) => f,
            _ => tk::full_support_family(&mut rng, k),
        };
        let label = format!("pair {i}");
        for horizons in [Horizons::Standard, Horizons::All] {
            let strong = check_strong(&family, &tree, horizons).map_err(fail(label.clone()))?;
            let weak = check_weak(&family, &tree, horizons).map_err(fail(label.clone()))?;
            ensure!(!strong.holds || weak.holds, "{label}: strong holds but weak fails");
            if horizons == Horizons::Standard {
                match (strong.holds, weak.holds) {
                    (true, _) => strong_cases += 1,
                    (false, true) => weak_only += 1,
                    _ => neither += 1,
                }
            }
            if strong.holds {
                let arb = find_arbitrage_multi(&tree, &family, &ShortSaleFlags::all(m)).map_err(fail(label.clone()))?;
                ensure!(arb.is_none(), "{label}: strong condition holds but arbitrage found");
            }
        }
        for flags in [ShortSaleFlags::none(m), ShortSaleFlags::all(m)] {
            if let Some(cert) = find_martingale_measure(&tree, &flags).map_err(fail(label.clone()))? {
                let singleton = MeasureFamily::singleton(cert.measure);
                let strong = check_strong(&singleton, &tree, Horizons::All).map_err(fail(label.clone()))?;
                let weak = check_weak(&singleton, &tree, Horizons::All).map_err(fail(label.clone()))?;
                ensure!(
                    strong.holds && weak.holds,
                    "{label}: certified singleton fails a condition"
                );
                singletons += 1;
            }
        }
    }
    ensure!(strong_cases > 0 && weak_only + neither > 0, "degenerate sample");
    Ok(format!(
        "240 pairs: {strong_cases} strong, {weak_only} weak only, {neither} neither; {singletons} certified singletons"
    ))
}

fn criterion_6() -> Check {
    let mut rng = tk::rng(6);
    let sup = |f: &MeasureFamily, x: &[Rational]| sublinear_expectation(f, x).map(|e| e.value);
    let mut lp_checks = 0;
    for i in 0..600 {
        let k = rng.gen_range(1..=8);
        let family = tk::family(&mut rng, k, true);
        let x = tk::values(&mut rng, k);
        let y = tk::values(&mut rng, k);
        let label = format!("triple {i}");
        let e = |r: Result<Rational, _>| r.map_err(fail::<mlab_core::expectation::ExpectationError>(label.clone()));

        let sum: Vec<Rational> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        ensure!(
            e(sup(&family, &sum))? <= e(sup(&family, &x))? + e(sup(&family, &y))?,
            "{label}: subadditivity"
        );

        let above: Vec<Rational> = x.iter().zip(&y).map(|(a, b)| a + b.abs()).collect();
        ensure!(
            e(sup(&family, &x))? <= e(sup(&family, &above))?,
            "{label}: monotonicity"
        );

        let c = y[0].clone();
        let plus_c: Vec<Rational> = x.iter().map(|a| a + &c).collect();
        ensure!(e(sup(&family, &vec![c.clone(); k]))? == c, "{label}: constants");
        ensure!(
            e(sup(&family, &plus_c))? == e(sup(&family, &x))? + &c,
            "{label}: cash additivity"
        );

        let lambda = tk::small_rational(&mut rng, 1);
        let scaled: Vec<Rational> = x.iter().map(|a| a * &lambda).collect();
        ensure!(
            e(sup(&family, &scaled))? == e(sup(&family, &x))? * &lambda,
            "{label}: positive homogeneity"
        );

        let neg: Vec<Rational> = x.iter().map(|a| -a).collect();
        let inf = inf_expectation(&family, &x).map_err(fail(label.clone()))?.value;
        ensure!(inf == -e(sup(&family, &neg))?, "{label}: inf/sup conjugacy");

        // Extremum over a pricing polytope: vertex enumeration against the LP.
        let tree = if i % 2 == 0 {
            tk::single_market(&mut rng).into_tree()
        } else {
            tk::tree(&mut rng, 2, 3, 2)
        };
        if tree.num_leaves() > MAX_STATES {
            continue;
        }
        let flags = tk::flags(&mut rng, tree.num_assets());
        let polytope = Polytope::pricing(&tree, &flags);
        if basis_count(&polytope) > VERTEX_BASIS_BUDGET {
            continue;
        }
        let vertices = enumerate_vertices(&polytope).map_err(fail(label.clone()))?;
        let rv = tk::values(&mut rng, tree.num_leaves());
        for (direction, sense) in [(Direction::Max, Sense::Maximize), (Direction::Min, Sense::Minimize)] {
            let outcome = lp::solve(&polytope.to_program(rv.clone(), sense)).map_err(fail(label.clone()))?;
            match (brute_force_extremum(&vertices, &rv, direction), outcome) {
                (Ok(v), LpOutcome::Optimal(s)) => ensure!(v == s.value, "{label}: vertex {v} != LP {}", s.value),
                (Err(oracle::OracleError::Empty), LpOutcome::Infeasible(_)) => {}
                (v, o) => return Err(format!("{label}: vertex {v:?} vs LP {:?}", o.status())),
            }
            lp_checks += 1;
        }
    }
    Ok(format!("600 triples; {lp_checks} vertex/LP extremum comparisons"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run_cli(args: &[&str], model: &str) -> Result<(Value, i32, Duration), String> {
    let start = Instant::now();
    let path = fixture(model);
    let out = Command::new(env!("CARGO_BIN_EXE_mlab"))
        .args(args)
        .args(["--model", path.to_str().unwrap(), "--format", "json"])
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let doc = serde_json::from_slice(&out.stdout)
        .map_err(|e| format!("{args:?} {model}: {e}: {}", String::from_utf8_lossy(&out.stderr)))?;
    Ok((doc, out.status.code().unwrap_or(-1), elapsed))
}

fn criterion_7() -> Check {
    let cases: [(&[&str], &str, &str, Value, i32); 6] = [
        (
            &["check-arbitrage"],
            "binomial.json",
            "/certificate/measure",
            serde_json::json!(["1/3", "2/3"]),
            0,
        ),
        (
            &["check-arbitrage"],
            "binomial.json",
            "/certificate/epsilon",
            "1/3".into(),
            0,
        ),
        (&["price"], "binomial.json", "/price", "4/3".into(), 0),
        (&["price"], "two_period.json", "/price", "4/3".into(), 0),
        (
            &["superhedge", "--banned", "stock"],
            "banned_short.json",
            "/price",
            "2/1".into(),
            0,
        ),
        (
            &["check-arbitrage"],
            "arbitrage.json",
            "/verdict",
            "ARBITRAGE".into(),
            2,
        ),
    ];
    let mut slowest = Duration::ZERO;
    for (args, model, pointer, expected, code) in cases {
        let (doc, exit, elapsed) = run_cli(args, model)?;
        ensure!(
            doc.pointer(pointer) == Some(&expected),
            "{args:?} {model}: {pointer} = {:?}",
            doc.pointer(pointer)
        );
        ensure!(exit == code, "{args:?} {model}: exit {exit}, expected {code}");
        ensure!(elapsed < Duration::from_secs(1), "{args:?} {model}: took {elapsed:?}");
        slowest = slowest.max(elapsed);
    }
    Ok(format!(
        "6 fixture checks, slowest {:.0} ms",
        slowest.as_secs_f64() * 1000.0
    ))
}

fn superhedge_outcome(tree: &EventTree, claim: &Claim, flags: &ShortSaleFlags) -> Result<Option<Rational>, String> {
    let full = MeasureFamily::singleton(Measure::uniform(tree.num_leaves()));
    match superhedge(tree, claim, flags, &full) {
        Ok(h) => Ok(Some(h.price)),
        Err(HedgingError::UnboundedBelow) => Ok(None),
        Err(e) => Err(e.to_string()),
    }
}

fn criterion_8() -> Check {
    let mut rng = tk::rng(8);
    let (mut free, mut total) = (0, 0);
    for i in 0..5000 {
        if free >= 50 && total >= 70 {
            break;
        }
        let tree = tk::tree(&mut rng, 3, 2, 2);
        let k = tree.num_leaves();
        let flags = tk::flags(&mut rng, tree.num_assets());
        // Keep drawing until enough arbitrage-free instances exercise price invariance.
        let priced = find_martingale_measure(&tree, &flags)
            .map_err(fail(format!("instance {i}")))?
            .is_some();
        if !priced && total - free >= 20 {
            continue;
        }
        let family = tk::family(&mut rng, k, true);
        let claim = tk::claim(&mut rng, k);
        let factors = tk::date_factors(&mut rng, tree.horizon());
        let lambda = tk::small_rational(&mut rng, 1);
        let label = format!("instance {i}");

        let rescaled = tk::rescale_by_date(&tree, &factors);
        let rescaled_claim = Claim::new(claim.payoffs().iter().map(|f| f * &factors[tree.horizon()]).collect());
        let relabelled = tk::scale_prices(&tree, &lambda);

        let base = dichotomy(&tree, &family, &flags, &label)?;
        let base_price = superhedge_outcome(&tree, &claim, &flags)?;
        let base_discounted = claim.discounted(&tree).map_err(fail(label.clone()))?;
        for (name, other, other_claim) in [("date", &rescaled, &rescaled_claim), ("lambda", &relabelled, &claim)] {
            ensure!(
                dichotomy(other, &family, &flags, &label)? == base,
                "{label}: {name} scaling changes verdict"
            );
            let price = superhedge_outcome(other, other_claim, &flags)?;
            ensure!(
                price == base_price,
                "{label}: {name} scaling changes price {base_price:?} -> {price:?}"
            );
        }
        let discounted = rescaled_claim.discounted(&rescaled).map_err(fail(label.clone()))?;
        ensure!(discounted == base_discounted, "{label}: discounted claim not invariant");
        ensure!(
            !priced || base_price.is_some(),
            "{label}: arbitrage-free but superhedge price unbounded"
        );
        free += usize::from(priced);
        total += 1;
    }
    ensure!(free >= 50, "only {free} arbitrage-free instances generated");
    Ok(format!(
        "{total} instances ({free} arbitrage-free), date-process and constant rescaling"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 single-period dichotomy", criterion_1, Duration::from_secs(60)),
        ("2 multi-period dichotomy", criterion_2, Duration::from_secs(120)),
        ("3 superhedging duality", criterion_3, Duration::MAX),
        ("4 replication consistency", criterion_4, Duration::MAX),
        ("5 weak/strong ordering", criterion_5, Duration::MAX),
        ("6 sublinear expectation laws", criterion_6, Duration::MAX),
        ("7 CLI worked fixtures", criterion_7, Duration::MAX),
        ("8 numeraire invariance", criterion_8, Duration::MAX),
    ];
    let mut failures = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; exceeded {budget:?}")),
            other => other,
        };
        match result {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{:.2} s]", elapsed.as_secs_f64()),
            Err(reason) => {
                failures += 1;
                println!("FAIL criterion {name}: {reason} [{:.2} s]", elapsed.as_secs_f64());
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
