//! Exact rational scalars used throughout the crate.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

/// Arbitrary-precision rational. Every price, weight and LP coefficient is one of these.
pub type Rational = BigRational;

/// Builds `num/den` from machine integers. Panics on a zero denominator.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Integer-valued rational.
pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn rats(values: &[(i64, i64)]) -> Vec<Rational> {
    values.iter().map(|&(n, d)| rat(n, d)).collect()
}

pub fn ints(values: &[i64]) -> Vec<Rational> {
    values.iter().map(|&n| int(n)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {literal:?}: {reason}")]
pub struct ParseRationalError {
    pub literal: String,
    pub reason: &'static str,
}

/// Parses `"p/q"` or a plain integer such as `"-7"`. Whitespace around the parts is ignored.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let fail = |reason| ParseRationalError {
        literal: text.to_string(),
        reason,
    };
    let text_trimmed = text.trim();
    if text_trimmed.is_empty() {
        return Err(fail("empty"));
    }
    let (num, den) = match text_trimmed.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text_trimmed, "1"),
    };
    let num: BigInt = parse_integer(num).ok_or_else(|| fail("numerator is not an integer"))?;
    let den: BigInt = parse_integer(den).ok_or_else(|| fail("denominator is not an integer"))?;
    if den.is_zero() {
        return Err(fail("zero denominator"));
    }
    Ok(Rational::new(num, den))
}

fn parse_integer(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Display adaptor that always writes `p/q`, including `q = 1`.
pub struct Fraction<'a>(pub &'a Rational);

impl fmt::Display for Fraction<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = format!("{}/{}", self.0.numer(), self.0.denom());
        f.pad(&s)
    }
}

/// `p/q` string form of a rational.
pub fn format_rational(value: &Rational) -> String {
    Fraction(value).to_string()
}

pub(crate) fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_integers() {
        assert_eq!(parse_rational("1/3").unwrap(), rat(1, 3));
        assert_eq!(parse_rational(" -4 / 6 ").unwrap(), rat(-2, 3));
        assert_eq!(parse_rational("12").unwrap(), int(12));
        assert_eq!(parse_rational("+5").unwrap(), int(5));
    }

    #[test]
    fn rejects_bad_literals() {
        for bad in ["", "1/0", "0.5", "a/b", "1/", "--1", "1e3"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn formats_with_explicit_denominator() {
        assert_eq!(format_rational(&int(2)), "2/1");
        assert_eq!(format_rational(&rat(-4, 12)), "-1/3");
        assert_eq!(format!("{:>6}", Fraction(&rat(1, 3))), "   1/3");
    }
}
