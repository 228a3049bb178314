use num_traits::{One, Signed, Zero};

use super::MarketError;
use crate::rational::Rational;

/// Probability vector over the terminal states.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Measure {
    weights: Vec<Rational>,
}

impl Measure {
    pub fn new(weights: Vec<Rational>) -> Result<Self, MarketError> {
        if weights.is_empty() {
            return Err(MarketError::InvalidMeasure("no states".into()));
        }
        if weights.iter().any(|w| w.is_negative()) {
            return Err(MarketError::InvalidMeasure("negative weight".into()));
        }
        let total: Rational = weights.iter().sum();
        if !total.is_one() {
            return Err(MarketError::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(Measure { weights })
    }

    pub fn uniform(num_states: usize) -> Self {
        let w = Rational::new(1.into(), num_states.into());
        Measure {
            weights: vec![w; num_states],
        }
    }

    /// Point mass on one state.
    pub fn dirac(num_states: usize, state: usize) -> Self {
        let mut weights = vec![Rational::zero(); num_states];
        weights[state] = Rational::one();
        Measure { weights }
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn weight(&self, state: usize) -> &Rational {
        &self.weights[state]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Smallest weight.
    pub fn min_weight(&self) -> &Rational {
        self.weights.iter().min().expect("measure is nonempty")
    }
}

/// Finite nonempty list of measures on a common state set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasureFamily {
    members: Vec<Measure>,
}

impl MeasureFamily {
    pub fn new(members: Vec<Measure>) -> Result<Self, MarketError> {
        let first = members.first().ok_or(MarketError::EmptyFamily)?;
        let k = first.len();
        if let Some(bad) = members.iter().find(|m| m.len() != k) {
            return Err(MarketError::DimensionMismatch {
                what: "family member",
                expected: k,
                found: bad.len(),
            });
        }
        Ok(MeasureFamily { members })
    }

    pub fn singleton(measure: Measure) -> Self {
        MeasureFamily { members: vec![measure] }
    }

    pub fn members(&self) -> &[Measure] {
        &self.members
    }

    pub fn num_states(&self) -> usize {
        self.members[0].len()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mask form of [`support`].
    pub fn support_mask(&self) -> Vec<bool> {
        (0..self.num_states())
            .map(|k| self.members.iter().any(|m| m.weight(k).is_positive()))
            .collect()
    }
}

/// States charged by at least one member (`sup_P P(ω) > 0`). The rest are polar.
pub fn support(family: &MeasureFamily) -> Vec<usize> {
    family
        .support_mask()
        .into_iter()
        .enumerate()
        .filter_map(|(k, charged)| charged.then_some(k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{ints, rat, rats};

    #[test]
    fn validates_weights() {
        assert!(Measure::new(rats(&[(1, 2), (1, 2)])).is_ok());
        assert!(Measure::new(rats(&[(1, 2), (1, 3)])).is_err());
        assert!(Measure::new(vec![rat(3, 2), rat(-1, 2)]).is_err());
        assert!(Measure::new(vec![]).is_err());
    }

    #[test]
    fn support_takes_sup_over_members() {
        let full = MeasureFamily::singleton(Measure::new(rats(&[(1, 2), (1, 2)])).unwrap());
        assert_eq!(support(&full), vec![0, 1]);
        let point = MeasureFamily::singleton(Measure::new(ints(&[1, 0])).unwrap());
        assert_eq!(support(&point), vec![0]);
        let pair = MeasureFamily::new(vec![Measure::dirac(2, 0), Measure::dirac(2, 1)]).unwrap();
        assert_eq!(support(&pair), vec![0, 1]);
    }

    #[test]
    fn family_members_must_agree_on_states() {
        assert!(matches!(MeasureFamily::new(vec![]), Err(MarketError::EmptyFamily)));
        assert!(MeasureFamily::new(vec![Measure::uniform(2), Measure::uniform(3)]).is_err());
    }
}
