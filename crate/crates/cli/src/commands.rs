//! Command-line arguments and command dispatch.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use mlab_core::arbitrage::{decide, find_martingale_measure_on, Certificate};
use mlab_core::expectation::{
    check_strong, check_weak, inf_expectation, sublinear_expectation, ConditionReport, Horizons,
};
use mlab_core::hedging::{
    backward_superhedge, dual_superhedge_price_on, hedge_price, replicate, strong_family_bound, superhedge,
    HedgeResult, HedgingError, Replication,
};
use mlab_core::market::{MeasureFamily, ShortSaleFlags};
use serde_json::{json, Value};

use crate::model::{parse_model, Model, ModelError};
use crate::report::{
    banned_names, family_table, fmt, fmt_all, measure_table, strategy_table, CertificateDoc, Format, Report,
    StrategyDoc, Table,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_ARBITRAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mlab",
    version,
    about = "Exact no-arbitrage, risk-neutral measure and superhedging toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide whether the market admits an arbitrage, with a certificate either way
    CheckArbitrage(Options),
    /// Search for a strictly positive martingale or supermartingale measure
    FindMeasure(Options),
    /// Check the weak risk-neutral condition for a family
    CheckWeak(Options),
    /// Check the strong risk-neutral condition for a family
    CheckStrong(Options),
    /// Largest expectation of the discounted claim over a family
    EvalSup(Options),
    /// Smallest expectation of the discounted claim over a family
    EvalInf(Options),
    /// Find a replicating strategy for a claim
    Replicate(Options),
    /// Arbitrage-free price of a replicable claim
    Price(Options),
    /// Cheapest superhedging strategy, honouring short-sale bans
    Superhedge(Options),
    /// Superhedging price from the measure side
    DualPrice(Options),
    /// Re-check a certificate from a JSON report
    Verify(Options),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Martingale,
    Supermartingale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyChoice {
    Actual,
    Pricing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum HorizonChoice {
    #[default]
    Standard,
    All,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Options {
    /// Model document (JSON)
    #[arg(long)]
    pub model: PathBuf,
    /// Claim to use when the model defines several
    #[arg(long)]
    pub claim: Option<String>,
    /// Assets that may not be sold short: comma-separated names, `all` or `none`
    #[arg(long)]
    pub banned: Option<String>,
    /// `martingale` lifts all bans, `supermartingale` bans every asset
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Measure family to use; defaults to `pricing` for the condition and
    /// expectation commands when the model has one, `actual` otherwise
    #[arg(long, value_enum)]
    pub family: Option<FamilyChoice>,
    /// Horizon pairs checked by check-weak / check-strong
    #[arg(long, value_enum, default_value_t = HorizonChoice::Standard)]
    pub horizons: HorizonChoice,
    /// JSON report (or bare certificate) to re-check; `-` reads stdin
    #[arg(long)]
    pub certificate: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Engine(String),
    #[error("{0}")]
    Usage(String),
}

macro_rules! engine_err {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Engine(e.to_string())
            }
        }
    )*};
}
engine_err!(
    mlab_core::arbitrage::ArbitrageError,
    mlab_core::expectation::ExpectationError,
    mlab_core::hedging::HedgingError,
    mlab_core::market::MarketError
);

/// A finished command: the report and the process exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(report: Report) -> Self {
        Self {
            report,
            exit_code: EXIT_OK,
        }
    }

    fn arbitrage(report: Report) -> Self {
        Self {
            report,
            exit_code: EXIT_ARBITRAGE,
        }
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckArbitrage(_) => "check-arbitrage",
            Command::FindMeasure(_) => "find-measure",
            Command::CheckWeak(_) => "check-weak",
            Command::CheckStrong(_) => "check-strong",
            Command::EvalSup(_) => "eval-sup",
            Command::EvalInf(_) => "eval-inf",
            Command::Replicate(_) => "replicate",
            Command::Price(_) => "price",
            Command::Superhedge(_) => "superhedge",
            Command::DualPrice(_) => "dual-price",
            Command::Verify(_) => "verify",
        }
    }

    pub fn options(&self) -> &Options {
        match self {
            Command::CheckArbitrage(o)
            | Command::FindMeasure(o)
            | Command::CheckWeak(o)
            | Command::CheckStrong(o)
            | Command::EvalSup(o)
            | Command::EvalInf(o)
            | Command::Replicate(o)
            | Command::Price(o)
            | Command::Superhedge(o)
            | Command::DualPrice(o)
            | Command::Verify(o) => o,
        }
    }
}

/// Resolved inputs shared by all commands.
struct Context<'a> {
    name: &'static str,
    model: Model,
    options: &'a Options,
}

impl Context<'_> {
    /// `--banned` wins, then `--mode`, then the model's own bans.
    fn flags(&self) -> Result<ShortSaleFlags, CliError> {
        let m = self.model.assets.len();
        Ok(match (&self.options.banned, self.options.mode) {
            (Some(spec), _) => self.model.parse_bans(spec)?,
            (None, Some(Mode::Martingale)) => ShortSaleFlags::none(m),
            (None, Some(Mode::Supermartingale)) => ShortSaleFlags::all(m),
            (None, None) => self.model.bans.clone(),
        })
    }

    fn family(&self, prefer_pricing: bool) -> Result<(&'static str, &MeasureFamily), CliError> {
        let choice = self
            .options
            .family
            .unwrap_or(if prefer_pricing && self.model.pricing.is_some() {
                FamilyChoice::Pricing
            } else {
                FamilyChoice::Actual
            });
        match choice {
            FamilyChoice::Actual => Ok(("actual", &self.model.actual)),
            FamilyChoice::Pricing => self
                .model
                .pricing
                .as_ref()
                .map(|f| ("pricing", f))
                .ok_or_else(|| CliError::Usage("model has no \"pricing\" family".into())),
        }
    }

    fn report(&self, verdict: &str, flags: Option<&ShortSaleFlags>) -> Report {
        let mut r = Report::new(self.name, verdict);
        r.json("model", Value::String(self.options.model.display().to_string()));
        if let Some(flags) = flags {
            let names = banned_names(&self.model, flags);
            r.json("banned", json!(names));
            r.line(
                "banned",
                if names.is_empty() {
                    "none".to_string()
                } else {
                    names.join(",")
                },
            );
        }
        r
    }

    fn claim(&self, r: &mut Report) -> Result<mlab_core::market::Claim, CliError> {
        let (name, claim) = self.model.claim(self.options.claim.as_deref())?;
        r.scalar("claim", name);
        Ok(claim.clone())
    }
}

/// Parses the model and runs one command.
pub fn run(command: &Command) -> Result<Outcome, CliError> {
    let options = command.options();
    let ctx = Context {
        name: command.name(),
        model: parse_model(&options.model)?,
        options,
    };
    match command {
        Command::CheckArbitrage(_) => check_arbitrage(&ctx),
        Command::FindMeasure(_) => find_measure(&ctx),
        Command::CheckWeak(_) => check_condition(&ctx, false),
        Command::CheckStrong(_) => check_condition(&ctx, true),
        Command::EvalSup(_) => eval(&ctx, true),
        Command::EvalInf(_) => eval(&ctx, false),
        Command::Replicate(_) => replicate_cmd(&ctx),
        Command::Price(_) => price(&ctx),
        Command::Superhedge(_) => superhedge_cmd(&ctx),
        Command::DualPrice(_) => dual_price(&ctx),
        Command::Verify(_) => verify(&ctx),
    }
}

fn certificate_report(ctx: &Context, r: &mut Report, cert: &Certificate) {
    let doc = CertificateDoc::from_certificate(&ctx.model.tree, cert);
    match cert {
        Certificate::NoArbitrage(c) => {
            r.scalar("epsilon", fmt(&c.epsilon));
            r.table(measure_table("risk-neutral measure", &ctx.model, &c.measure));
        }
        Certificate::Arbitrage(a) => {
            r.scalar("positive_state", ctx.model.states[a.positive_state].clone());
            r.line("initial_wealth", fmt(a.strategy.initial_wealth()));
            r.table(strategy_table("arbitrage strategy", &ctx.model, &a.strategy));
        }
    }
    r.set_certificate(doc.to_json());
}

fn ftap_outcome(r: Report) -> Outcome {
    if r.certificate()["kind"] == "arbitrage" {
        Outcome::arbitrage(r)
    } else {
        Outcome::ok(r)
    }
}

fn check_arbitrage(ctx: &Context) -> Result<Outcome, CliError> {
    let flags = ctx.flags()?;
    let (family_name, family) = ctx.family(false)?;
    let cert = decide(&ctx.model.tree, family, &flags)?;
    let verdict = if cert.is_arbitrage() {
        "ARBITRAGE"
    } else {
        "NO-ARBITRAGE"
    };
    let mut r = ctx.report(verdict, Some(&flags));
    r.json("family", json!(family_name));
    certificate_report(ctx, &mut r, &cert);
    Ok(ftap_outcome(r))
}

fn find_measure(ctx: &Context) -> Result<Outcome, CliError> {
    let flags = ctx.flags()?;
    let (family_name, family) = ctx.family(false)?;
    let mask = family.support_mask();
    let found = find_martingale_measure_on(&ctx.model.tree, &flags, &mask)?;
    let kind = if flags.any() { "supermartingale" } else { "martingale" };
    let mut r = ctx.report(if found.is_some() { "FOUND" } else { "NONE" }, Some(&flags));
    r.json("family", json!(family_name));
    r.scalar("measure_kind", kind);
    // Without a measure the dual certificate is an arbitrage strategy.
    let cert = match found {
        Some(c) => Certificate::NoArbitrage(c),
        None => decide(&ctx.model.tree, family, &flags)?,
    };
    certificate_report(ctx, &mut r, &cert);
    Ok(ftap_outcome(r))
}

fn condition_report(ctx: &Context, r: &mut Report, report: &ConditionReport, strong: bool) {
    let rows: Vec<Vec<String>> = report
        .violations
        .iter()
        .map(|v| {
            vec![
                ctx.model.node_label(v.node),
                ctx.model.assets[v.asset].clone(),
                v.horizon.to_string(),
                fmt(&v.conditional),
                fmt(&v.current),
            ]
        })
        .collect();
    let extremum = if strong { "sup_conditional" } else { "inf_conditional" };
    let violations: Vec<Value> = report
        .violations
        .iter()
        .map(|v| {
            json!({
                "node": v.node,
                "label": ctx.model.node_label(v.node),
                "asset": ctx.model.assets[v.asset],
                "horizon": v.horizon,
                extremum: fmt(&v.conditional),
                "current": fmt(&v.current),
            })
        })
        .collect();
    r.count("violations", report.violations.len());
    r.json("skipped_nodes", json!(report.skipped_nodes));
    if !report.skipped_nodes.is_empty() {
        let labels: Vec<String> = report.skipped_nodes.iter().map(|&n| ctx.model.node_label(n)).collect();
        r.line("skipped_nodes", labels.join(","));
    }
    if !rows.is_empty() {
        r.table(Table {
            title: "violations".into(),
            header: vec![
                "node".into(),
                "asset".into(),
                "horizon".into(),
                extremum.into(),
                "current".into(),
            ],
            rows,
        });
    }
    r.set_certificate(json!({ "kind": "conditions", "violations": violations }));
}

fn check_condition(ctx: &Context, strong: bool) -> Result<Outcome, CliError> {
    let (family_name, family) = ctx.family(true)?;
    let horizons = match ctx.options.horizons {
        HorizonChoice::Standard => Horizons::Standard,
        HorizonChoice::All => Horizons::All,
    };
    let result = if strong {
        check_strong(family, &ctx.model.tree, horizons)?
    } else {
        check_weak(family, &ctx.model.tree, horizons)?
    };
    let mut r = ctx.report(if result.holds { "HOLDS" } else { "FAILS" }, None);
    r.scalar("family", family_name);
    r.count("members", family.len());
    condition_report(ctx, &mut r, &result, strong);
    Ok(Outcome::ok(r))
}

fn eval(ctx: &Context, sup: bool) -> Result<Outcome, CliError> {
    let (family_name, family) = ctx.family(true)?;
    let mut r = ctx.report("OK", None);
    let claim = ctx.claim(&mut r)?;
    let f = claim.discounted(&ctx.model.tree)?;
    let best = if sup {
        sublinear_expectation(family, &f)?
    } else {
        inf_expectation(family, &f)?
    };
    r.scalar("family", family_name);
    r.scalar("value", fmt(&best.value));
    r.json("member", json!(best.member));
    r.line("member", format!("Q{}", best.member));
    r.json("discounted_claim", json!(fmt_all(&f)));
    r.table(family_table("family", &ctx.model, family));
    r.set_certificate(json!({
        "kind": "attaining-member",
        "member": best.member,
        "measure": fmt_all(family.members()[best.member].weights()),
    }));
    Ok(Outcome::ok(r))
}

fn hedge_report(ctx: &Context, r: &mut Report, hedge: &HedgeResult, title: &str) {
    r.scalar("price", fmt(&hedge.price));
    r.json("slack", json!(fmt_all(&hedge.slack)));
    r.table(strategy_table(title, &ctx.model, &hedge.strategy));
    r.table(Table {
        title: "terminal slack V*(T) - f*".into(),
        header: vec!["state".into(), "slack".into()],
        rows: ctx
            .model
            .states
            .iter()
            .zip(&hedge.slack)
            .map(|(s, v)| vec![s.clone(), fmt(v)])
            .collect(),
    });
    let doc = StrategyDoc::from_strategy(&ctx.model.tree, &hedge.strategy);
    let mut cert = serde_json::to_value(doc).expect("strategies serialize");
    cert["kind"] = json!("strategy");
    r.set_certificate(cert);
}

fn replicate_cmd(ctx: &Context) -> Result<Outcome, CliError> {
    let (family_name, family) = ctx.family(false)?;
    let mut r = ctx.report("", None);
    let claim = ctx.claim(&mut r)?;
    match replicate(&ctx.model.tree, &claim, family)? {
        Replication::Hedged(hedge) => {
            r.verdict = "REPLICABLE".into();
            r.json("family", json!(family_name));
            hedge_report(ctx, &mut r, &hedge, "replicating strategy");
        }
        Replication::NotReplicable => {
            r.verdict = "NOT-REPLICABLE".into();
            r.json("family", json!(family_name));
            r.line(
                "hint",
                "no self-financing strategy matches the claim on the support; try superhedge",
            );
        }
    }
    Ok(Outcome::ok(r))
}

fn price(ctx: &Context) -> Result<Outcome, CliError> {
    let tree = &ctx.model.tree;
    let none = ShortSaleFlags::none(tree.num_assets());
    let mut r = ctx.report("", Some(&none));
    let claim = ctx.claim(&mut r)?;
    match hedge_price(tree, &claim) {
        Ok(p) => {
            r.verdict = "PRICED".into();
            r.scalar("price", fmt(&p));
            let full = MeasureFamily::singleton(mlab_core::market::Measure::uniform(tree.num_leaves()));
            let cert = decide(tree, &full, &none)?;
            certificate_report(ctx, &mut r, &cert);
            Ok(Outcome::ok(r))
        }
        Err(HedgingError::NoMeasure) => {
            r.verdict = "ARBITRAGE".into();
            let full = MeasureFamily::singleton(mlab_core::market::Measure::uniform(tree.num_leaves()));
            let cert = decide(tree, &full, &none)?;
            certificate_report(ctx, &mut r, &cert);
            Ok(Outcome::arbitrage(r))
        }
        Err(HedgingError::NotReplicable) => Err(CliError::Engine(
            "claim is not replicable, so it has no unique price; use superhedge".into(),
        )),
        Err(e) => Err(e.into()),
    }
}

fn superhedge_cmd(ctx: &Context) -> Result<Outcome, CliError> {
    let flags = ctx.flags()?;
    let (family_name, family) = ctx.family(false)?;
    let tree = &ctx.model.tree;
    let mut r = ctx.report("", Some(&flags));
    let claim = ctx.claim(&mut r)?;
    r.json("family", json!(family_name));
    match superhedge(tree, &claim, &flags, family) {
        Ok(hedge) => {
            r.verdict = "SUPERHEDGED".into();
            hedge_report(ctx, &mut r, &hedge, "superhedging strategy");
            if let Some(pricing) = &ctx.model.pricing {
                if let Some(bound) = strong_family_bound(tree, &claim, pricing)? {
                    r.scalar("pricing_family_bound", fmt(&bound));
                }
            }
            if family.support_mask().iter().all(|&c| c) {
                let backward = backward_superhedge(tree, &claim, &flags)?;
                r.scalar("backward_root", fmt(&backward[tree.root()]));
            }
            Ok(Outcome::ok(r))
        }
        Err(HedgingError::UnboundedBelow) => {
            r.verdict = "ARBITRAGE".into();
            r.line("hint", "superhedging cost is unbounded below");
            let cert = decide(tree, family, &flags)?;
            certificate_report(ctx, &mut r, &cert);
            Ok(Outcome::arbitrage(r))
        }
        Err(e) => Err(e.into()),
    }
}

fn dual_price(ctx: &Context) -> Result<Outcome, CliError> {
    let flags = ctx.flags()?;
    let (family_name, family) = ctx.family(false)?;
    let tree = &ctx.model.tree;
    let mut r = ctx.report("", Some(&flags));
    let claim = ctx.claim(&mut r)?;
    r.json("family", json!(family_name));
    match dual_superhedge_price_on(tree, &claim, &flags, &family.support_mask()) {
        Ok(d) => {
            r.verdict = "PRICED".into();
            r.scalar("price", fmt(&d.price));
            r.json("on_boundary", json!(d.on_boundary));
            r.line("on_boundary", d.on_boundary.to_string());
            r.table(measure_table("maximizing measure", &ctx.model, &d.measure));
            r.set_certificate(json!({
                "kind": "dual-measure",
                "measure": fmt_all(d.measure.weights()),
                "on_boundary": d.on_boundary,
            }));
            Ok(Outcome::ok(r))
        }
        Err(HedgingError::NoMeasure) => {
            r.verdict = "ARBITRAGE".into();
            let cert = decide(tree, family, &flags)?;
            certificate_report(ctx, &mut r, &cert);
            Ok(Outcome::arbitrage(r))
        }
        Err(e) => Err(e.into()),
    }
}

fn read_certificate(ctx: &Context) -> Result<Value, CliError> {
    let path = ctx
        .options
        .certificate
        .as_ref()
        .ok_or_else(|| CliError::Usage("verify needs --certificate <path>".into()))?;
    let text = if path.as_os_str() == "-" {
        std::io::read_to_string(std::io::stdin())
    } else {
        std::fs::read_to_string(path)
    }
    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Model(crate::model::from_serde(e)))
}

fn verify(ctx: &Context) -> Result<Outcome, CliError> {
    let doc = read_certificate(ctx)?;
    // Accept a whole report or a bare certificate.
    let (cert_value, banned) = match doc.get("certificate") {
        Some(c) => (c.clone(), doc.get("banned").cloned()),
        None => (doc.clone(), None),
    };
    let flags = match (&ctx.options.banned, ctx.options.mode, banned) {
        (None, None, Some(Value::Array(names))) => {
            let names: Vec<&str> = names.iter().filter_map(Value::as_str).collect();
            ctx.model.parse_bans(&names.join(","))?
        }
        _ => ctx.flags()?,
    };
    let family_name = match (ctx.options.family, doc.get("family").and_then(Value::as_str)) {
        (None, Some("pricing")) => "pricing",
        (Some(FamilyChoice::Pricing), _) => "pricing",
        _ => "actual",
    };
    let family = match family_name {
        "pricing" => ctx
            .model
            .pricing
            .as_ref()
            .ok_or_else(|| CliError::Usage("model has no \"pricing\" family".into()))?,
        _ => &ctx.model.actual,
    };
    let cert: CertificateDoc = serde_json::from_value(cert_value)
        .map_err(|e| CliError::Usage(format!("not an arbitrage or no-arbitrage certificate: {e}")))?;
    let valid = cert.verify(&ctx.model.tree, family, &flags).map_err(CliError::Usage)?;
    let claimed = match cert {
        CertificateDoc::Arbitrage { .. } => "ARBITRAGE",
        CertificateDoc::NoArbitrage { .. } => "NO-ARBITRAGE",
    };
    let mut r = ctx.report(if valid { claimed } else { "INVALID" }, Some(&flags));
    r.scalar("family", family_name);
    r.json("valid", json!(valid));
    r.line("valid", valid.to_string());
    r.set_certificate(cert.to_json());
    Ok(match (valid, claimed) {
        (false, _) => Outcome {
            report: r,
            exit_code: EXIT_ERROR,
        },
        (true, "ARBITRAGE") => Outcome::arbitrage(r),
        (true, _) => Outcome::ok(r),
    })
}
