use num_traits::{Signed, Zero};

use super::{LinearProgram, LpOutcome, Relation, Sense};
use crate::rational::Rational;

/// Re-checks an outcome against `lp` by substitution. Returns `true` only if
/// every certificate condition holds exactly.
pub fn verify_certificate(lp: &LinearProgram, outcome: &LpOutcome) -> bool {
    if lp.validate().is_err() {
        return false;
    }
    match outcome {
        LpOutcome::Optimal(sol) => {
            lp.is_feasible(&sol.primal)
                && lp.objective_value(&sol.primal) == sol.value
                && dual_bound(lp, &sol.dual).is_some_and(|bound| bound == sol.value)
        }
        LpOutcome::Infeasible(cert) => farkas_holds(lp, &cert.multipliers),
        LpOutcome::Unbounded(ray) => {
            lp.is_feasible(&ray.point) && is_recession_direction(lp, &ray.ray) && {
                let slope = lp.objective_value(&ray.ray);
                match lp.sense {
                    Sense::Minimize => slope.is_negative(),
                    Sense::Maximize => slope.is_positive(),
                }
            }
        }
    }
}

/// Dual objective of `dual`, or `None` if it is not dual feasible. For a
/// minimization this is a lower bound on every feasible objective value, for a
/// maximization an upper bound.
fn dual_bound(lp: &LinearProgram, dual: &[Rational]) -> Option<Rational> {
    if dual.len() != lp.constraints.len() {
        return None;
    }
    let flip = lp.sense == Sense::Maximize;
    let sign = |v: &Rational| if flip { -v.clone() } else { v.clone() };
    let mut bound = Rational::zero();
    let mut reduced: Vec<Rational> = lp.objective.iter().map(sign).collect();
    for (c, y) in lp.constraints.iter().zip(dual) {
        let y = sign(y);
        let ok = match c.relation {
            Relation::Ge => !y.is_negative(),
            Relation::Le => !y.is_positive(),
            Relation::Eq => true,
        };
        if !ok {
            return None;
        }
        bound += &y * &c.rhs;
        for (d, a) in reduced.iter_mut().zip(&c.coeffs) {
            *d -= &y * a;
        }
    }
    for (d, b) in reduced.iter().zip(&lp.bounds) {
        if d.is_positive() {
            bound += d * b.lower.as_ref()?;
        } else if d.is_negative() {
            bound += d * b.upper.as_ref()?;
        }
    }
    Some(if flip { -bound } else { bound })
}

fn farkas_holds(lp: &LinearProgram, multipliers: &[Rational]) -> bool {
    if multipliers.len() != lp.constraints.len() {
        return false;
    }
    let mut combined = vec![Rational::zero(); lp.num_vars()];
    let mut rhs = Rational::zero();
    for (c, lambda) in lp.constraints.iter().zip(multipliers) {
        let weight = match c.relation {
            Relation::Le => {
                if lambda.is_negative() {
                    return false;
                }
                lambda.clone()
            }
            Relation::Ge => {
                if lambda.is_negative() {
                    return false;
                }
                -lambda.clone()
            }
            Relation::Eq => lambda.clone(),
        };
        rhs += &weight * &c.rhs;
        for (g, a) in combined.iter_mut().zip(&c.coeffs) {
            *g += &weight * a;
        }
    }
    // Smallest value of g·x over the bound box must exceed the combined right-hand side.
    let mut least = Rational::zero();
    for (g, b) in combined.iter().zip(&lp.bounds) {
        if g.is_positive() {
            match &b.lower {
                Some(l) => least += g * l,
                None => return false,
            }
        } else if g.is_negative() {
            match &b.upper {
                Some(u) => least += g * u,
                None => return false,
            }
        }
    }
    least > rhs
}

fn is_recession_direction(lp: &LinearProgram, ray: &[Rational]) -> bool {
    if ray.len() != lp.num_vars() {
        return false;
    }
    let bounds_ok = lp
        .bounds
        .iter()
        .zip(ray)
        .all(|(b, r)| (b.lower.is_none() || !r.is_negative()) && (b.upper.is_none() || !r.is_positive()));
    bounds_ok
        && lp.constraints.iter().all(|c| {
            let lhs: Rational = c.coeffs.iter().zip(ray).map(|(a, r)| a * r).sum();
            match c.relation {
                Relation::Le => !lhs.is_positive(),
                Relation::Ge => !lhs.is_negative(),
                Relation::Eq => lhs.is_zero(),
            }
        })
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::rational::{int, ints, rat};

    fn min_x_ge_2() -> LinearProgram {
        let mut lp = LinearProgram::minimize(ints(&[1]));
        lp.set_bound(0, Bound::free());
        lp.add_constraint(ints(&[1]), Relation::Ge, int(2));
        lp
    }

    #[test]
    fn single_bound_minimum() {
        let lp = min_x_ge_2();
        let out = solve(&lp).unwrap();
        let sol = out.optimal().unwrap();
        assert_eq!(sol.primal, ints(&[2]));
        assert_eq!(sol.value, int(2));
        assert!(verify_certificate(&lp, &out));
    }

    #[test]
    fn tampered_primal_fails_verification() {
        let lp = min_x_ge_2();
        let mut out = solve(&lp).unwrap();
        if let LpOutcome::Optimal(sol) = &mut out {
            sol.primal = ints(&[1]);
            sol.value = int(1);
        }
        assert!(!verify_certificate(&lp, &out));
    }

    #[test]
    fn duality_gap_fails_verification() {
        let lp = min_x_ge_2();
        let mut out = solve(&lp).unwrap();
        if let LpOutcome::Optimal(sol) = &mut out {
            sol.dual = vec![rat(1, 2)];
        }
        assert!(!verify_certificate(&lp, &out));
    }

    #[test]
    fn binomial_max_epsilon() {
        // q1, q2, eps
        let mut lp = LinearProgram::maximize(ints(&[0, 0, 1]));
        lp.set_bound(2, Bound::free());
        lp.add_constraint(ints(&[1, 1, 0]), Relation::Eq, int(1));
        lp.add_constraint(ints(&[8, 2, 0]), Relation::Eq, int(4));
        lp.add_constraint(ints(&[1, 0, -1]), Relation::Ge, int(0));
        lp.add_constraint(ints(&[0, 1, -1]), Relation::Ge, int(0));
        let out = solve(&lp).unwrap();
        let sol = out.optimal().unwrap();
        assert_eq!(sol.primal, vec![rat(1, 3), rat(2, 3), rat(1, 3)]);
        assert_eq!(sol.value, rat(1, 3));
        assert!(verify_certificate(&lp, &out));
    }

    #[test]
    fn contradictory_bounds_give_farkas_pair() {
        let mut lp = LinearProgram::minimize(ints(&[0]));
        lp.set_bound(0, Bound::free());
        lp.add_constraint(ints(&[1]), Relation::Le, int(0));
        lp.add_constraint(ints(&[1]), Relation::Ge, int(1));
        let out = solve(&lp).unwrap();
        match &out {
            LpOutcome::Infeasible(cert) => assert_eq!(cert.multipliers, ints(&[1, 1])),
            other => panic!("expected infeasible, got {other:?}"),
        }
        assert!(verify_certificate(&lp, &out));
        let bogus = LpOutcome::Infeasible(FarkasCertificate {
            multipliers: ints(&[1, 0]),
        });
        assert!(!verify_certificate(&lp, &bogus));
    }

    #[test]
    fn unbounded_program_returns_ray() {
        let mut lp = LinearProgram::maximize(ints(&[1, 1]));
        lp.add_constraint(ints(&[1, -1]), Relation::Le, int(1));
        let out = solve(&lp).unwrap();
        assert_eq!(out.status(), LpStatus::Unbounded);
        assert!(verify_certificate(&lp, &out));
    }

    #[test]
    fn bounded_variables_and_negative_rhs() {
        // max x - y, -3 <= x <= 2, y <= -1 (upper only), x + y >= -10
        let mut lp = LinearProgram::maximize(ints(&[1, -1]));
        lp.set_bound(0, Bound::between(int(-3), int(2)));
        lp.set_bound(
            1,
            Bound {
                lower: None,
                upper: Some(int(-1)),
            },
        );
        lp.add_constraint(ints(&[1, 1]), Relation::Ge, int(-10));
        let out = solve(&lp).unwrap();
        let sol = out.optimal().unwrap();
        assert_eq!(sol.primal, ints(&[2, -12]));
        assert_eq!(sol.value, int(14));
        assert!(verify_certificate(&lp, &out));
    }

    #[test]
    fn redundant_equalities_are_handled() {
        let mut lp = LinearProgram::minimize(ints(&[1, 2]));
        lp.add_constraint(ints(&[1, 1]), Relation::Eq, int(1));
        lp.add_constraint(ints(&[2, 2]), Relation::Eq, int(2));
        let out = solve(&lp).unwrap();
        assert_eq!(out.optimal().unwrap().value, int(1));
        assert!(verify_certificate(&lp, &out));
    }

    #[test]
    fn malformed_programs_are_rejected() {
        let mut lp = LinearProgram::minimize(ints(&[1, 1]));
        lp.add_constraint(ints(&[1]), Relation::Le, int(1));
        assert!(matches!(solve(&lp), Err(LpError::MalformedProgram(_))));
        let mut lp = LinearProgram::minimize(ints(&[1]));
        lp.set_bound(0, Bound::between(int(2), int(1)));
        assert!(solve(&lp).is_err());
        assert!(solve(&LinearProgram::minimize(vec![])).is_err());
    }
}
