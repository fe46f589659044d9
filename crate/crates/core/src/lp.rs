//! Dense two-phase simplex over exact rationals with Bland's rule.
//!
//! Problems are in equality form `A x = b, x >= 0`. Several objectives can be
//! minimised lexicographically: after each stage, every nonbasic column with
//! a strictly positive reduced cost is zero in all optimal solutions, so it is
//! frozen before the next objective is optimised.

use num::{BigRational, Signed, Zero};

use crate::error::{FactoryError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<BigRational>,
    /// Optimal value of each objective, in order.
    pub values: Vec<BigRational>,
}

struct Tableau {
    rows: Vec<Vec<BigRational>>,
    rhs: Vec<BigRational>,
    basis: Vec<usize>,
    /// Reduced costs of the current objective.
    cost: Vec<BigRational>,
    value: BigRational,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = self.rows[r][c].recip();
        for x in self.rows[r].iter_mut() {
            if !x.is_zero() {
                *x *= &inv;
            }
        }
        self.rhs[r] *= &inv;
        let prow = self.rows[r].clone();
        let prhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for (x, y) in self.rows[i].iter_mut().zip(&prow) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
            self.rhs[i] -= &f * &prhs;
        }
        if !self.cost[c].is_zero() {
            let f = self.cost[c].clone();
            for (x, y) in self.cost.iter_mut().zip(&prow) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
            self.value += &f * &prhs;
        }
        self.basis[r] = c;
    }

    fn set_objective(&mut self, c: &[BigRational]) {
        let mut cost = c.to_vec();
        let mut value = BigRational::zero();
        for (i, &bi) in self.basis.iter().enumerate() {
            let cb = &c[bi];
            if cb.is_zero() {
                continue;
            }
            for (x, y) in cost.iter_mut().zip(&self.rows[i]) {
                if !y.is_zero() {
                    *x -= cb * y;
                }
            }
            value += cb * &self.rhs[i];
        }
        self.cost = cost;
        self.value = value;
    }

    /// Bland's rule until optimal.
    fn optimise(&mut self, allowed: &[bool]) -> Result<()> {
        loop {
            let Some(c) = (0..self.cost.len()).find(|&j| allowed[j] && self.cost[j].is_negative()) else {
                return Ok(());
            };
            let mut best: Option<(usize, BigRational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            let Some((r, _)) = best else {
                return Err(FactoryError::usage("linear program is unbounded"));
            };
            self.pivot(r, c);
        }
    }
}

/// Lexicographically minimises `objectives` over `{x >= 0 : a x = b}`.
/// Returns `Ok(None)` when the feasible set is empty.
pub fn lex_minimize(
    a: &[Vec<BigRational>],
    b: &[BigRational],
    objectives: &[Vec<BigRational>],
) -> Result<Option<LpSolution>> {
    let m = a.len();
    let n = a.first().map_or(0, |r| r.len());
    if b.len() != m || a.iter().any(|r| r.len() != n) || objectives.iter().any(|c| c.len() != n) {
        return Err(FactoryError::usage("inconsistent linear program dimensions"));
    }
    let one = BigRational::from_integer(1.into());
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (i, (row, bi)) in a.iter().zip(b).enumerate() {
        let flip = bi.is_negative();
        let mut r: Vec<BigRational> = row.iter().map(|x| if flip { -x } else { x.clone() }).collect();
        r.extend((0..m).map(|k| if k == i { one.clone() } else { BigRational::zero() }));
        rows.push(r);
        rhs.push(if flip { -bi } else { bi.clone() });
    }
    let total = n + m;
    let mut t = Tableau {
        rows,
        rhs,
        basis: (n..total).collect(),
        cost: Vec::new(),
        value: BigRational::zero(),
    };
    let phase1: Vec<BigRational> = (0..total).map(|j| if j >= n { one.clone() } else { BigRational::zero() }).collect();
    t.set_objective(&phase1);
    let mut allowed = vec![true; total];
    t.optimise(&allowed)?;
    if t.value.is_positive() {
        return Ok(None);
    }
    // drive artificials out of the basis; rows where that fails are redundant
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            if let Some(c) = (0..n).find(|&j| !t.rows[i][j].is_zero()) {
                t.pivot(i, c);
            } else {
                t.rows.remove(i);
                t.rhs.remove(i);
                t.basis.remove(i);
                continue;
            }
        }
        i += 1;
    }
    for flag in allowed.iter_mut().skip(n) {
        *flag = false;
    }
    let mut values = Vec::with_capacity(objectives.len());
    for c in objectives {
        let mut full = c.clone();
        full.extend((0..m).map(|_| BigRational::zero()));
        t.set_objective(&full);
        t.optimise(&allowed)?;
        values.push(t.value.clone());
        for j in 0..n {
            if t.cost[j].is_positive() {
                allowed[j] = false;
            }
        }
    }
    let mut x = vec![BigRational::zero(); n];
    for (i, &bi) in t.basis.iter().enumerate() {
        if bi < n {
            x[bi] = t.rhs[i].clone();
        }
    }
    Ok(Some(LpSolution { x, values }))
}

pub fn is_feasible(a: &[Vec<BigRational>], b: &[BigRational]) -> Result<bool> {
    Ok(lex_minimize(a, b, &[])?.is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    #[test]
    fn small_program() {
        // minimise -x - y subject to x + 2y + s1 = 4, 3x + y + s2 = 6
        let a = vec![
            vec![int(1), int(2), int(1), int(0)],
            vec![int(3), int(1), int(0), int(1)],
        ];
        let b = vec![int(4), int(6)];
        let sol = lex_minimize(&a, &b, &[vec![int(-1), int(-1), int(0), int(0)]]).unwrap().unwrap();
        assert_eq!(sol.values, vec![rat(-14, 5)]);
        assert_eq!(&sol.x[..2], &[rat(8, 5), rat(6, 5)]);
    }

    #[test]
    fn infeasible_and_redundant() {
        let a = vec![vec![int(1), int(1)], vec![int(1), int(1)]];
        assert!(lex_minimize(&a, &[int(1), int(2)], &[]).unwrap().is_none());
        let sol = lex_minimize(&a, &[int(1), int(1)], &[vec![int(0), int(1)]]).unwrap().unwrap();
        assert_eq!(sol.x, vec![int(1), int(0)]);
        assert!(lex_minimize(&[vec![int(1)]], &[int(-1)], &[]).unwrap().is_none());
    }

    #[test]
    fn lexicographic_tie_break() {
        // x + y = 1: every point minimises 0; then minimise x
        let a = vec![vec![int(1), int(1)]];
        let zero = vec![int(0), int(0)];
        let sol = lex_minimize(&a, &[int(1)], &[zero, vec![int(1), int(0)]]).unwrap().unwrap();
        assert_eq!(sol.x, vec![int(0), int(1)]);
    }

    #[test]
    fn unbounded_is_reported() {
        let a = vec![vec![int(1), int(-1)]];
        assert!(lex_minimize(&a, &[int(0)], &[vec![int(-1), int(0)]]).is_err());
    }
}
