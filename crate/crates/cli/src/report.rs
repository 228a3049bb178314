//! Command reports: one structure rendered either as an aligned text table or
//! as a JSON document with every rational written as a `"p/q"` string.

use mlab_core::arbitrage::{ArbitrageCertificate, Certificate, RiskNeutralCertificate};
use mlab_core::market::{bond_holding, EventTree, Measure, MeasureFamily, ShortSaleFlags, TradingStrategy};
use mlab_core::oracle;
use mlab_core::{format_rational, parse_rational, Rational};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::model::Model;

pub fn fmt(r: &Rational) -> String {
    format_rational(r)
}

pub fn fmt_all(rs: &[Rational]) -> Vec<String> {
    rs.iter().map(fmt).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub verdict: String,
    fields: Map<String, Value>,
    lines: Vec<(String, String)>,
    tables: Vec<Table>,
    certificate: Value,
}

impl Report {
    pub fn new(command: &str, verdict: impl Into<String>) -> Self {
        Self {
            command: command.to_string(),
            verdict: verdict.into(),
            fields: Map::new(),
            lines: Vec::new(),
            tables: Vec::new(),
            certificate: Value::Null,
        }
    }

    /// A scalar shown in both renderings.
    pub fn scalar(&mut self, key: &str, text: impl Into<String>) -> &mut Self {
        let text = text.into();
        self.fields.insert(key.to_string(), Value::String(text.clone()));
        self.lines.push((key.to_string(), text));
        self
    }

    /// An integer shown in both renderings.
    pub fn count(&mut self, key: &str, n: usize) -> &mut Self {
        self.fields.insert(key.to_string(), Value::from(n));
        self.lines.push((key.to_string(), n.to_string()));
        self
    }

    /// A JSON-only value.
    pub fn json(&mut self, key: &str, value: Value) -> &mut Self {
        self.fields.insert(key.to_string(), value);
        self
    }

    /// A text-only line.
    pub fn line(&mut self, key: &str, text: impl Into<String>) -> &mut Self {
        self.lines.push((key.to_string(), text.into()));
        self
    }

    pub fn table(&mut self, table: Table) -> &mut Self {
        self.tables.push(table);
        self
    }

    pub fn set_certificate(&mut self, certificate: Value) -> &mut Self {
        self.certificate = certificate;
        self
    }

    pub fn field(&self, key: &str) -> Option<&Value> {
        self.fields.get(key)
    }

    pub fn certificate(&self) -> &Value {
        &self.certificate
    }

    pub fn to_json(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("command".into(), Value::String(self.command.clone()));
        doc.insert("verdict".into(), Value::String(self.verdict.clone()));
        doc.extend(self.fields.clone());
        doc.insert("certificate".into(), self.certificate.clone());
        Value::Object(doc)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.to_json()).expect("reports serialize");
                s.push('\n');
                s
            }
            Format::Table => self.render_table(),
        }
    }

    fn render_table(&self) -> String {
        let mut lines = vec![
            ("command".to_string(), self.command.clone()),
            ("verdict".to_string(), self.verdict.clone()),
        ];
        lines.extend(self.lines.iter().cloned());
        let width = lines.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in &lines {
            out.push_str(&format!("{k:<width$}  {v}\n"));
        }
        for table in &self.tables {
            out.push('\n');
            out.push_str(&render_grid(table));
        }
        out
    }
}

fn render_grid(table: &Table) -> String {
    let ncols = table.header.len();
    let mut widths: Vec<usize> = table.header.iter().map(|h| h.chars().count()).collect();
    for row in &table.rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::from(" ");
        for (i, cell) in cells.iter().enumerate().take(ncols) {
            // Right-align numbers, left-align the first (label) column.
            if i == 0 {
                s.push_str(&format!(" {cell:<w$}", w = widths[i]));
            } else {
                s.push_str(&format!("  {cell:>w$}", w = widths[i]));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = format!("{}:\n", table.title);
    out.push_str(&line(&table.header));
    for row in &table.rows {
        out.push_str(&line(row));
    }
    out
}

pub fn measure_table(title: &str, model: &Model, measure: &Measure) -> Table {
    Table {
        title: title.to_string(),
        header: vec!["state".into(), "weight".into()],
        rows: model
            .states
            .iter()
            .zip(measure.weights())
            .map(|(s, w)| vec![s.clone(), fmt(w)])
            .collect(),
    }
}

pub fn family_table(title: &str, model: &Model, family: &MeasureFamily) -> Table {
    let mut header = vec!["state".to_string()];
    header.extend((0..family.len()).map(|i| format!("Q{i}")));
    Table {
        title: title.to_string(),
        header,
        rows: model
            .states
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let mut row = vec![s.clone()];
                row.extend(family.members().iter().map(|q| fmt(q.weight(k))));
                row
            })
            .collect(),
    }
}

/// Holdings per internal node: risky positions followed by the derived bond holding.
pub fn strategy_table(title: &str, model: &Model, strategy: &TradingStrategy) -> Table {
    let mut header = vec!["node".to_string()];
    header.extend(model.assets.iter().cloned());
    header.push("bond".into());
    let rows = strategy_rows(&model.tree, strategy)
        .into_iter()
        .map(|h| {
            let mut row = vec![model.node_label(h.node)];
            row.extend(h.risky);
            row.push(h.bond);
            row
        })
        .collect();
    Table {
        title: title.to_string(),
        header,
        rows,
    }
}

/// One node's positions in a serialized strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldingDoc {
    pub node: usize,
    pub risky: Vec<String>,
    /// Derived from self-financing; informational only when read back.
    pub bond: String,
}

fn strategy_rows(tree: &EventTree, strategy: &TradingStrategy) -> Vec<HoldingDoc> {
    strategy
        .iter()
        .map(|(node, h)| HoldingDoc {
            node,
            risky: fmt_all(h),
            bond: bond_holding(tree, strategy, node).map_or_else(|_| "?".into(), |b| fmt(&b)),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyDoc {
    pub initial_wealth: String,
    pub holdings: Vec<HoldingDoc>,
}

impl StrategyDoc {
    pub fn from_strategy(tree: &EventTree, strategy: &TradingStrategy) -> Self {
        Self {
            initial_wealth: fmt(strategy.initial_wealth()),
            holdings: strategy_rows(tree, strategy),
        }
    }

    pub fn to_strategy(&self) -> Result<TradingStrategy, String> {
        let mut strategy = TradingStrategy::new(parse(&self.initial_wealth)?);
        for h in &self.holdings {
            strategy.set_holdings(h.node, h.risky.iter().map(|s| parse(s)).collect::<Result<_, _>>()?);
        }
        Ok(strategy)
    }
}

/// Serialized form of a no-arbitrage decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CertificateDoc {
    Arbitrage {
        positive_state: usize,
        #[serde(flatten)]
        strategy: StrategyDoc,
    },
    NoArbitrage {
        measure: Vec<String>,
        epsilon: String,
    },
}

fn parse(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

impl CertificateDoc {
    pub fn from_certificate(tree: &EventTree, cert: &Certificate) -> Self {
        match cert {
            Certificate::Arbitrage(a) => CertificateDoc::Arbitrage {
                positive_state: a.positive_state,
                strategy: StrategyDoc::from_strategy(tree, &a.strategy),
            },
            Certificate::NoArbitrage(c) => CertificateDoc::NoArbitrage {
                measure: fmt_all(c.measure.weights()),
                epsilon: fmt(&c.epsilon),
            },
        }
    }

    pub fn to_certificate(&self) -> Result<Certificate, String> {
        Ok(match self {
            CertificateDoc::Arbitrage {
                positive_state,
                strategy,
            } => Certificate::Arbitrage(ArbitrageCertificate {
                strategy: strategy.to_strategy()?,
                positive_state: *positive_state,
            }),
            CertificateDoc::NoArbitrage { measure, epsilon } => {
                let weights = measure.iter().map(|s| parse(s)).collect::<Result<_, _>>()?;
                Certificate::NoArbitrage(RiskNeutralCertificate {
                    measure: Measure::new(weights).map_err(|e| e.to_string())?,
                    epsilon: parse(epsilon)?,
                })
            }
        })
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("certificates serialize")
    }

    /// Independent re-check through the oracle's evaluation routines.
    pub fn verify(&self, tree: &EventTree, family: &MeasureFamily, flags: &ShortSaleFlags) -> Result<bool, String> {
        let cert = self.to_certificate()?;
        if let (CertificateDoc::Arbitrage { positive_state, .. }, Certificate::Arbitrage(a)) = (self, &cert) {
            // The named state must actually be one where the strategy pays off.
            let mask = family.support_mask();
            let pays = *positive_state < tree.num_leaves()
                && mask[*positive_state]
                && mlab_core::market::portfolio_value(tree, &a.strategy, tree.leaf_node(*positive_state))
                    .map(|v| v > Rational::from_integer(0.into()))
                    .unwrap_or(false);
            if !pays {
                return Ok(false);
            }
        }
        Ok(oracle::verify_certificate(&cert, tree, family, flags))
    }
}

pub fn banned_names(model: &Model, flags: &ShortSaleFlags) -> Vec<String> {
    model
        .assets
        .iter()
        .enumerate()
        .filter(|&(m, _)| flags.is_banned(m))
        .map(|(_, a)| a.clone())
        .collect()
}
