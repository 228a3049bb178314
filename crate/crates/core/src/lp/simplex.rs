use num_traits::{One, Signed, Zero};

use super::{FarkasCertificate, LinearProgram, LpError, LpOutcome, OptimalSolution, Relation, Sense, UnboundedRay};
use crate::rational::Rational;

/// `x_j = offset + Σ sign · x'_col` for one original variable.
struct VarMap {
    offset: Rational,
    terms: Vec<(usize, bool)>,
}

struct StdRow {
    coeffs: Vec<Rational>,
    relation: Relation,
    rhs: Rational,
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
}

enum Exit {
    Optimal,
    Unbounded(usize),
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let inv = self.rows[row][col].recip();
        for v in self.rows[row].iter_mut() {
            if !v.is_zero() {
                *v *= &inv;
            }
        }
        self.rhs[row] *= &inv;
        let pivot_row = self.rows[row].clone();
        let pivot_rhs = self.rhs[row].clone();
        for i in 0..self.rows.len() {
            if i == row || self.rows[i][col].is_zero() {
                continue;
            }
            let factor = self.rows[i][col].clone();
            for (v, p) in self.rows[i].iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &factor * p;
                }
            }
            self.rhs[i] -= &factor * &pivot_rhs;
        }
        self.basis[row] = col;
    }

    fn reduced_cost(&self, costs: &[Rational], col: usize) -> Rational {
        let mut r = costs[col].clone();
        for (i, &b) in self.basis.iter().enumerate() {
            if !costs[b].is_zero() && !self.rows[i][col].is_zero() {
                r -= &costs[b] * &self.rows[i][col];
            }
        }
        r
    }

    /// Bland's rule: lowest-index improving column enters, ratio ties leave by
    /// lowest basic index.
    fn run(&mut self, costs: &[Rational], enterable: usize) -> Exit {
        loop {
            let mut is_basic = vec![false; costs.len()];
            for &b in &self.basis {
                is_basic[b] = true;
            }
            let entering = (0..enterable).find(|&j| !is_basic[j] && self.reduced_cost(costs, j).is_negative());
            let Some(e) = entering else {
                return Exit::Optimal;
            };
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][e];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, e),
                None => return Exit::Unbounded(e),
            }
        }
    }

    /// `c_Bᵀ B⁻¹`, read off the artificial columns which started as the identity.
    fn duals(&self, costs: &[Rational], art_start: usize) -> Vec<Rational> {
        (0..self.rows.len())
            .map(|r| {
                let mut y = Rational::zero();
                for (k, &b) in self.basis.iter().enumerate() {
                    let t = &self.rows[k][art_start + r];
                    if !costs[b].is_zero() && !t.is_zero() {
                        y += &costs[b] * t;
                    }
                }
                y
            })
            .collect()
    }

    fn values(&self, ncols: usize) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); ncols];
        for (i, &b) in self.basis.iter().enumerate() {
            x[b] = self.rhs[i].clone();
        }
        x
    }
}

/// Solves `lp` exactly. The pivot sequence is fully determined by the input.
pub fn solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    lp.validate()?;
    let n = lp.num_vars();

    // Shift, reflect or split variables so every standard column is `≥ 0`.
    let mut maps = Vec::with_capacity(n);
    let mut nstruct = 0;
    let mut bound_rows: Vec<(usize, Rational)> = Vec::new();
    for b in &lp.bounds {
        let map = match (&b.lower, &b.upper) {
            (Some(l), upper) => {
                if let Some(u) = upper {
                    bound_rows.push((nstruct, u - l));
                }
                nstruct += 1;
                VarMap {
                    offset: l.clone(),
                    terms: vec![(nstruct - 1, true)],
                }
            }
            (None, Some(u)) => {
                nstruct += 1;
                VarMap {
                    offset: u.clone(),
                    terms: vec![(nstruct - 1, false)],
                }
            }
            (None, None) => {
                nstruct += 2;
                VarMap {
                    offset: Rational::zero(),
                    terms: vec![(nstruct - 2, true), (nstruct - 1, false)],
                }
            }
        };
        maps.push(map);
    }

    let mut rows: Vec<StdRow> = Vec::with_capacity(lp.constraints.len() + bound_rows.len());
    for c in &lp.constraints {
        let mut coeffs = vec![Rational::zero(); nstruct];
        let mut rhs = c.rhs.clone();
        for (a, map) in c.coeffs.iter().zip(&maps) {
            if a.is_zero() {
                continue;
            }
            rhs -= a * &map.offset;
            for &(col, positive) in &map.terms {
                if positive {
                    coeffs[col] += a;
                } else {
                    coeffs[col] -= a;
                }
            }
        }
        rows.push(StdRow {
            coeffs,
            relation: c.relation,
            rhs,
        });
    }
    for (col, width) in &bound_rows {
        let mut coeffs = vec![Rational::zero(); nstruct];
        coeffs[*col] = Rational::one();
        rows.push(StdRow {
            coeffs,
            relation: Relation::Le,
            rhs: width.clone(),
        });
    }

    let m = rows.len();
    let nslack = rows.iter().filter(|r| r.relation != Relation::Eq).count();
    let art_start = nstruct + nslack;
    let ncols = art_start + m;

    let mut tableau = Tableau {
        rows: Vec::with_capacity(m),
        rhs: Vec::with_capacity(m),
        basis: (art_start..ncols).collect(),
    };
    let mut row_sign = Vec::with_capacity(m);
    let mut next_slack = nstruct;
    for (i, row) in rows.into_iter().enumerate() {
        let mut full = row.coeffs;
        full.resize(ncols, Rational::zero());
        match row.relation {
            Relation::Le => {
                full[next_slack] = Rational::one();
                next_slack += 1;
            }
            Relation::Ge => {
                full[next_slack] = -Rational::one();
                next_slack += 1;
            }
            Relation::Eq => {}
        }
        let mut rhs = row.rhs;
        let negate = rhs.is_negative();
        if negate {
            for v in full.iter_mut() {
                *v = -v.clone();
            }
            rhs = -rhs;
        }
        full[art_start + i] = Rational::one();
        row_sign.push(negate);
        tableau.rows.push(full);
        tableau.rhs.push(rhs);
    }

    // Phase 1: minimize the sum of artificials.
    let mut phase1 = vec![Rational::zero(); ncols];
    for c in phase1.iter_mut().skip(art_start) {
        *c = Rational::one();
    }
    match tableau.run(&phase1, art_start) {
        Exit::Optimal => {}
        Exit::Unbounded(_) => unreachable!("phase 1 objective is bounded below by zero"),
    }
    let infeasibility: Rational = tableau
        .basis
        .iter()
        .zip(&tableau.rhs)
        .filter(|(&b, _)| b >= art_start)
        .map(|(_, v)| v.clone())
        .sum();
    let ncons = lp.constraints.len();
    if infeasibility.is_positive() {
        let y_std = tableau.duals(&phase1, art_start);
        let multipliers = lp
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let y = if row_sign[i] {
                    -y_std[i].clone()
                } else {
                    y_std[i].clone()
                };
                match c.relation {
                    Relation::Ge => y,
                    Relation::Le | Relation::Eq => -y,
                }
            })
            .collect();
        return Ok(LpOutcome::Infeasible(FarkasCertificate { multipliers }));
    }

    // Drive zero-level artificials out of the basis where a structural pivot exists.
    for i in 0..m {
        if tableau.basis[i] >= art_start {
            if let Some(j) = (0..art_start).find(|&j| !tableau.rows[i][j].is_zero()) {
                tableau.pivot(i, j);
            }
        }
    }

    // Phase 2 in minimization form.
    let flip = lp.sense == Sense::Maximize;
    let mut costs = vec![Rational::zero(); ncols];
    for (c, map) in lp.objective.iter().zip(&maps) {
        let c = if flip { -c.clone() } else { c.clone() };
        for &(col, positive) in &map.terms {
            if positive {
                costs[col] += &c;
            } else {
                costs[col] -= &c;
            }
        }
    }

    let to_original = |std: &[Rational], with_offset: bool| -> Vec<Rational> {
        maps.iter()
            .map(|map| {
                let mut v = if with_offset {
                    map.offset.clone()
                } else {
                    Rational::zero()
                };
                for &(col, positive) in &map.terms {
                    if positive {
                        v += &std[col];
                    } else {
                        v -= &std[col];
                    }
                }
                v
            })
            .collect()
    };

    match tableau.run(&costs, art_start) {
        Exit::Optimal => {
            let primal = to_original(&tableau.values(ncols), true);
            let y_std = tableau.duals(&costs, art_start);
            let dual = (0..ncons)
                .map(|i| {
                    let y = if row_sign[i] {
                        -y_std[i].clone()
                    } else {
                        y_std[i].clone()
                    };
                    if flip {
                        -y
                    } else {
                        y
                    }
                })
                .collect();
            let value = lp.objective_value(&primal);
            Ok(LpOutcome::Optimal(OptimalSolution { primal, value, dual }))
        }
        Exit::Unbounded(e) => {
            let point = to_original(&tableau.values(ncols), true);
            let mut direction = vec![Rational::zero(); ncols];
            direction[e] = Rational::one();
            for (i, &b) in tableau.basis.iter().enumerate() {
                direction[b] = -tableau.rows[i][e].clone();
            }
            let ray = to_original(&direction, false);
            Ok(LpOutcome::Unbounded(UnboundedRay { point, ray }))
        }
    }
}
