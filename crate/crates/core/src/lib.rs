//! Exact no-arbitrage analysis for finite markets under model uncertainty.
//!
//! Markets are event trees with exact rational prices. The crate decides
//! whether a zero-cost self-financing strategy can produce a riskless profit
//! on the non-polar states of an actual family of measures, and certifies the
//! answer either with the strategy itself or with a strictly positive
//! martingale (or supermartingale, under short-sale bans) measure. On top of
//! that it evaluates sublinear expectations over measure families, checks the
//! weak and strong risk-neutral conditions, and prices claims by replication
//! and superhedging with an independent dual and dynamic-programming check.

pub mod arbitrage;
pub mod expectation;
pub mod hedging;
pub mod lp;
pub mod market;
pub mod oracle;
pub mod rational;

pub use rational::{format_rational, parse_rational, Rational};
