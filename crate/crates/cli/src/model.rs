//! Model documents: JSON files describing a single-period market or an event
//! tree, plus optional measure families, short-sale bans and claims.
//!
//! ```json
//! {
//!   "type": "single",
//!   "assets": ["stock"],
//!   "rate": "0",
//!   "states": ["up", "down"],
//!   "prices": { "initial": ["4"], "terminal": [["8"], ["2"]] },
//!   "families": { "actual": [["1/2", "1/2"]], "pricing": [["1/3", "2/3"]] },
//!   "bans": ["stock"],
//!   "claims": { "call": ["4", "0"] }
//! }
//! ```
//!
//! For `"type": "tree"`, `prices` is the root node
//! `{ "name": "root", "values": ["4"], "rate": "1/10", "children": [ ... ] }`
//! and the rate may be given as a scalar `rate`, a per-period list `rates`,
//! or per node.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use mlab_core::market::{
    Claim, EventTree, MarketError, Measure, MeasureFamily, NodeSpec, ShortSaleFlags, SinglePeriodMarket,
};
use mlab_core::{parse_rational, Rational};
use num_traits::Zero;
use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid model: {0}")]
    Validation(String),
}

impl From<MarketError> for ModelError {
    fn from(e: MarketError) -> Self {
        ModelError::Validation(e.to_string())
    }
}

/// Exact rational literal: a `"p/q"` string or a JSON integer.
#[derive(Debug, Clone, PartialEq)]
pub struct Lit(pub Rational);

impl<'de> Deserialize<'de> for Lit {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct LitVisitor;

        impl Visitor<'_> for LitVisitor {
            type Value = Lit;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational written as \"p/q\" or an integer")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Lit, E> {
                parse_rational(v).map(Lit).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Lit, E> {
                Ok(Lit(Rational::from_integer(v.into())))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Lit, E> {
                Ok(Lit(Rational::from_integer(v.into())))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Lit, E> {
                Err(E::custom(format!(
                    "floating-point number {v} is not exact; write it as \"p/q\""
                )))
            }
        }

        deserializer.deserialize_any(LitVisitor)
    }
}

fn lits(v: Vec<Lit>) -> Vec<Rational> {
    v.into_iter().map(|l| l.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Single,
    Tree,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Bans {
    Keyword(String),
    Assets(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SinglePrices {
    initial: Vec<Lit>,
    terminal: Vec<Vec<Lit>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeNodeDoc {
    name: Option<String>,
    values: Vec<Lit>,
    rate: Option<Lit>,
    #[serde(default)]
    children: Vec<TreeNodeDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    #[serde(rename = "type")]
    kind: ModelKind,
    assets: Vec<String>,
    rate: Option<Lit>,
    rates: Option<Vec<Lit>>,
    states: Option<Vec<String>>,
    prices: serde_json::Value,
    #[serde(default)]
    families: BTreeMap<String, Vec<Vec<Lit>>>,
    bans: Option<Bans>,
    #[serde(default)]
    claims: BTreeMap<String, Vec<Lit>>,
}

/// A validated model document.
#[derive(Debug, Clone)]
pub struct Model {
    pub kind: ModelKind,
    pub tree: EventTree,
    pub assets: Vec<String>,
    pub states: Vec<String>,
    /// Actual family; the uniform measure when the document has none.
    pub actual: MeasureFamily,
    pub pricing: Option<MeasureFamily>,
    pub bans: ShortSaleFlags,
    pub claims: BTreeMap<String, Claim>,
}

impl Model {
    /// Resolves `--banned`: `all`, `none` or a comma-separated list of asset names.
    pub fn parse_bans(&self, spec: &str) -> Result<ShortSaleFlags, ModelError> {
        parse_bans(&self.assets, spec)
    }

    pub fn claim(&self, name: Option<&str>) -> Result<(&str, &Claim), ModelError> {
        match name {
            Some(n) => self
                .claims
                .get_key_value(n)
                .map(|(k, v)| (k.as_str(), v))
                .ok_or_else(|| ModelError::Validation(format!("no claim named {n:?}"))),
            None if self.claims.len() == 1 => {
                let (k, v) = self.claims.iter().next().expect("one claim");
                Ok((k.as_str(), v))
            }
            None if self.claims.is_empty() => Err(ModelError::Validation("model defines no claims".into())),
            None => Err(ModelError::Validation(
                "model defines several claims; pick one with --claim".into(),
            )),
        }
    }

    pub fn node_label(&self, node: usize) -> String {
        match (self.tree.state_of(node), self.tree.name(node)) {
            (Some(k), _) => self.states[k].clone(),
            (None, Some(name)) => name.to_string(),
            (None, None) if node == self.tree.root() => "root".to_string(),
            (None, None) => format!("n{node}"),
        }
    }
}

fn parse_bans(assets: &[String], spec: &str) -> Result<ShortSaleFlags, ModelError> {
    match spec.trim() {
        "all" => Ok(ShortSaleFlags::all(assets.len())),
        "none" | "" => Ok(ShortSaleFlags::none(assets.len())),
        list => {
            let mut banned = vec![false; assets.len()];
            for name in list.split(',').map(str::trim) {
                let i = assets
                    .iter()
                    .position(|a| a == name)
                    .ok_or_else(|| ModelError::Validation(format!("unknown asset {name:?} in bans")))?;
                banned[i] = true;
            }
            Ok(ShortSaleFlags::new(banned))
        }
    }
}

pub(crate) fn from_serde(e: serde_json::Error) -> ModelError {
    let full = e.to_string();
    // serde_json appends the position, which we report separately.
    let message = match full.rfind(" at line ") {
        Some(i) => full[..i].to_string(),
        None => full,
    };
    ModelError::Parse {
        line: e.line(),
        column: e.column(),
        message,
    }
}

pub fn parse_model(path: &Path) -> Result<Model, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_model_str(&text)
}

pub fn parse_model_str(text: &str) -> Result<Model, ModelError> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(from_serde)?;
    if doc.assets.is_empty() {
        return Err(ModelError::Validation("at least one asset is required".into()));
    }
    let default_rate = match (&doc.rate, &doc.rates) {
        (Some(_), Some(_)) => return Err(ModelError::Validation("give either rate or rates, not both".into())),
        (Some(r), None) => r.0.clone(),
        _ => Rational::zero(),
    };
    let m = doc.assets.len();

    let tree = match doc.kind {
        ModelKind::Single => {
            // Re-serialize so type errors inside `prices` are still reported.
            let prices: SinglePrices =
                serde_json::from_value(doc.prices).map_err(|e| ModelError::Validation(format!("prices: {e}")))?;
            if let Some(states) = &doc.states {
                if states.len() != prices.terminal.len() {
                    return Err(ModelError::Validation(format!(
                        "{} terminal price rows for {} states",
                        prices.terminal.len(),
                        states.len()
                    )));
                }
            }
            if prices.initial.len() != m {
                return Err(ModelError::Validation(format!(
                    "{} initial prices for {m} assets",
                    prices.initial.len()
                )));
            }
            if let Some((k, row)) = prices.terminal.iter().enumerate().find(|(_, r)| r.len() != m) {
                return Err(ModelError::Validation(format!(
                    "terminal row {k} has {} prices for {m} assets",
                    row.len()
                )));
            }
            let rate = match &doc.rates {
                Some(rates) if rates.len() != 1 => {
                    return Err(ModelError::Validation("a single-period model takes one rate".into()))
                }
                Some(rates) => rates[0].0.clone(),
                None => default_rate,
            };
            let terminal = prices.terminal.into_iter().map(lits).collect();
            SinglePeriodMarket::new(rate, lits(prices.initial), terminal)?.into_tree()
        }
        ModelKind::Tree => {
            let root: TreeNodeDoc =
                serde_json::from_value(doc.prices).map_err(|e| ModelError::Validation(format!("prices: {e}")))?;
            let spec = to_spec(root, 0, doc.rates.as_deref())?;
            let tree = EventTree::from_spec(spec, default_rate)?;
            if let Some(rates) = &doc.rates {
                if rates.len() != tree.horizon() {
                    return Err(ModelError::Validation(format!(
                        "{} rates for a {}-period tree",
                        rates.len(),
                        tree.horizon()
                    )));
                }
            }
            if tree.num_assets() != m {
                return Err(ModelError::Validation(format!(
                    "tree nodes carry {} prices for {m} assets",
                    tree.num_assets()
                )));
            }
            if let Some(states) = &doc.states {
                if states.len() != tree.num_leaves() {
                    return Err(ModelError::Validation(format!(
                        "{} state names for {} leaves",
                        states.len(),
                        tree.num_leaves()
                    )));
                }
            }
            tree
        }
    };

    let k = tree.num_leaves();
    let states = doc.states.unwrap_or_else(|| {
        (0..k)
            .map(|s| {
                tree.name(tree.leaf_node(s))
                    .map_or_else(|| format!("w{}", s + 1), str::to_string)
            })
            .collect()
    });

    let mut families = BTreeMap::new();
    for (name, members) in doc.families {
        if name != "actual" && name != "pricing" {
            return Err(ModelError::Validation(format!(
                "unknown family {name:?}; expected \"actual\" or \"pricing\""
            )));
        }
        let measures = members
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                if w.len() != k {
                    return Err(ModelError::Validation(format!(
                        "family {name:?} member {i} has {} weights for {k} states",
                        w.len()
                    )));
                }
                Measure::new(lits(w)).map_err(|e| ModelError::Validation(format!("family {name:?} member {i}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let family =
            MeasureFamily::new(measures).map_err(|e| ModelError::Validation(format!("family {name:?}: {e}")))?;
        families.insert(name, family);
    }
    let actual = families
        .remove("actual")
        .unwrap_or_else(|| MeasureFamily::singleton(Measure::uniform(k)));
    let pricing = families.remove("pricing");

    let bans = match doc.bans {
        None => ShortSaleFlags::none(m),
        Some(Bans::Keyword(word)) => parse_bans(&doc.assets, &word)?,
        Some(Bans::Assets(list)) => parse_bans(&doc.assets, &list.join(","))?,
    };

    let claims = doc
        .claims
        .into_iter()
        .map(|(name, payoffs)| {
            if payoffs.len() != k {
                return Err(ModelError::Validation(format!(
                    "claim {name:?} has {} payoffs for {k} states",
                    payoffs.len()
                )));
            }
            Ok((name, Claim::new(lits(payoffs))))
        })
        .collect::<Result<_, _>>()?;

    Ok(Model {
        kind: doc.kind,
        tree,
        assets: doc.assets,
        states,
        actual,
        pricing,
        bans,
        claims,
    })
}

fn to_spec(node: TreeNodeDoc, depth: usize, rates: Option<&[Lit]>) -> Result<NodeSpec, ModelError> {
    let rate = match (node.rate, rates) {
        (Some(r), _) => Some(r.0),
        (None, Some(rates)) if !node.children.is_empty() => Some(
            rates
                .get(depth)
                .ok_or_else(|| ModelError::Validation(format!("no rate given for period {}", depth + 1)))?
                .0
                .clone(),
        ),
        _ => None,
    };
    let children = node
        .children
        .into_iter()
        .map(|c| to_spec(c, depth + 1, rates))
        .collect::<Result<_, _>>()?;
    Ok(NodeSpec {
        name: node.name,
        prices: lits(node.values),
        rate,
        children,
    })
}
