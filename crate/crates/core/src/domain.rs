//! Domains `K = {x ∈ [0,1]^n : M x = b}`, the ℓ∞ projection onto them and
//! the conditioned variables `Y_{t,ε}` and `Z_{t,ε} = Π_K(Y_{t,ε})`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num::{BigRational, One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::bounds::min_t_for_acceptance;
use crate::coin::{CoinBank, CoinSource, FlipBudget, Interrupt, Metered};
use crate::error::{FactoryError, Result};
use crate::lattice::{LatticeGeometry, LevelOracle, LevelSchedule};
use crate::lp::lex_minimize;
use crate::program::{Draw, FactoryProgram};
use crate::rational::{check_unit_point, fmt_point, fmt_rational, int, Point, Rational};
use crate::target::TargetFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineCubeDomain {
    n: usize,
    m: Vec<Vec<BigRational>>,
    b: Vec<BigRational>,
}

#[derive(Serialize, Deserialize)]
struct DomainRepr {
    n: usize,
    #[serde(rename = "M", default)]
    m: Vec<Vec<Rational>>,
    #[serde(default)]
    b: Vec<Rational>,
}

impl AffineCubeDomain {
    /// Fails with `Infeasible` when `K` is empty.
    pub fn new(n: usize, m: Vec<Vec<BigRational>>, b: Vec<BigRational>) -> Result<Self> {
        if n == 0 {
            return Err(FactoryError::usage("domain dimension must be positive"));
        }
        if m.len() != b.len() || m.iter().any(|row| row.len() != n) {
            return Err(FactoryError::usage(format!(
                "M must be {} x {n} to match b",
                b.len()
            )));
        }
        let domain = AffineCubeDomain { n, m, b };
        // y + u = 1 encodes y <= 1
        let mut a = Vec::new();
        let mut rhs = Vec::new();
        for (row, bi) in domain.m.iter().zip(&domain.b) {
            let mut r = row.clone();
            r.extend((0..n).map(|_| BigRational::zero()));
            a.push(r);
            rhs.push(bi.clone());
        }
        for i in 0..n {
            let mut r = vec![BigRational::zero(); 2 * n];
            r[i] = BigRational::one();
            r[n + i] = BigRational::one();
            a.push(r);
            rhs.push(BigRational::one());
        }
        if lex_minimize(&a, &rhs, &[])?.is_none() {
            return Err(FactoryError::Infeasible("the domain {x in [0,1]^n : Mx = b} is empty".into()));
        }
        Ok(domain)
    }

    /// The whole cube.
    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, Vec::new(), Vec::new())
    }

    /// `{x : x_1 + ... + x_n = k}`.
    pub fn k_subset(n: usize, k: usize) -> Result<Self> {
        Self::new(n, vec![vec![BigRational::one(); n]], vec![int(k as i64)])
    }

    /// Doubly stochastic `side x side` matrices, flattened row by row.
    pub fn birkhoff(side: usize) -> Result<Self> {
        let n = side * side;
        let mut m = Vec::new();
        for r in 0..side {
            m.push((0..n).map(|j| if j / side == r { int(1) } else { int(0) }).collect());
        }
        for c in 0..side {
            m.push((0..n).map(|j| if j % side == c { int(1) } else { int(0) }).collect());
        }
        let b = vec![int(1); 2 * side];
        Self::new(n, m, b)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let repr: DomainRepr =
            serde_json::from_str(json).map_err(|e| FactoryError::Parse(e.to_string()))?;
        let m = repr
            .m
            .into_iter()
            .map(|row| row.into_iter().map(|r| r.0).collect())
            .collect();
        Self::new(repr.n, m, repr.b.into_iter().map(|r| r.0).collect())
    }

    pub fn to_json(&self) -> String {
        let repr = DomainRepr {
            n: self.n,
            m: self
                .m
                .iter()
                .map(|row| row.iter().cloned().map(Rational).collect())
                .collect(),
            b: self.b.iter().cloned().map(Rational).collect(),
        };
        serde_json::to_string(&repr).expect("domain serialises")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &[Vec<BigRational>] {
        &self.m
    }

    pub fn rhs(&self) -> &[BigRational] {
        &self.b
    }

    pub fn has_constraints(&self) -> bool {
        !self.m.is_empty()
    }

    fn residuals(&self, x: &[BigRational]) -> impl Iterator<Item = BigRational> + '_ {
        let x = x.to_vec();
        self.m.iter().zip(&self.b).map(move |(row, bi)| {
            row.iter().zip(&x).map(|(a, y)| a * y).sum::<BigRational>() - bi
        })
    }

    pub fn satisfies_equations(&self, x: &[BigRational]) -> bool {
        x.len() == self.n && self.residuals(x).all(|r| r.is_zero())
    }

    pub fn contains(&self, x: &[BigRational]) -> bool {
        check_unit_point(x).is_ok() && self.satisfies_equations(x)
    }

    /// `max_j |m_j·x - b_j| / ||m_j||_1`, a lower bound on the ℓ∞ distance to `K`.
    pub fn distance_lower_bound(&self, x: &[BigRational]) -> BigRational {
        self.residuals(x)
            .zip(&self.m)
            .filter_map(|(r, row)| {
                let norm: BigRational = row.iter().map(|a| a.abs()).sum();
                (!norm.is_zero()).then(|| r.abs() / norm)
            })
            .max()
            .unwrap_or_else(BigRational::zero)
    }

    fn check_point(&self, x: &[BigRational]) -> Result<()> {
        if x.len() != self.n {
            return Err(FactoryError::usage(format!(
                "point has {} coordinates, domain has {}",
                x.len(),
                self.n
            )));
        }
        check_unit_point(x)
    }

    /// A nearest point of `K` in ℓ∞ and the distance. Ties are broken by
    /// the smallest ℓ1 displacement, then lexicographically.
    pub fn linf_project(&self, x: &[BigRational]) -> Result<(Point, BigRational)> {
        self.check_point(x)?;
        if self.satisfies_equations(x) {
            return Ok((x.to_vec(), BigRational::zero()));
        }
        let n = self.n;
        // y = x + p - q; columns: p (n), q (n), r, s (n), g (n), h (n)
        let (p0, q0, r_col, s0, g0, h0) = (0, n, 2 * n, 2 * n + 1, 3 * n + 1, 4 * n + 1);
        let cols = 5 * n + 1;
        let mut a = Vec::new();
        let mut rhs = Vec::new();
        let mut row = |entries: &[(usize, i64)], value: BigRational| {
            let mut r = vec![BigRational::zero(); cols];
            for &(j, v) in entries {
                r[j] = int(v);
            }
            a.push(r);
            rhs.push(value);
        };
        for i in 0..n {
            // |y_i - x_i| <= r
            row(&[(p0 + i, 1), (q0 + i, 1), (r_col, -1), (s0 + i, 1)], BigRational::zero());
            // y_i >= 0 and y_i <= 1
            row(&[(p0 + i, -1), (q0 + i, 1), (g0 + i, 1)], x[i].clone());
            row(&[(p0 + i, 1), (q0 + i, -1), (h0 + i, 1)], BigRational::one() - &x[i]);
        }
        for (mrow, bi) in self.m.iter().zip(&self.b) {
            let mut r = vec![BigRational::zero(); cols];
            for k in 0..n {
                r[p0 + k] = mrow[k].clone();
                r[q0 + k] = -mrow[k].clone();
            }
            a.push(r);
            let mx: BigRational = mrow.iter().zip(x).map(|(u, v)| u * v).sum();
            rhs.push(bi - mx);
        }
        let objective = |terms: &[(usize, i64)]| {
            let mut c = vec![BigRational::zero(); cols];
            for &(j, v) in terms {
                c[j] = int(v);
            }
            c
        };
        let mut objectives = vec![objective(&[(r_col, 1)])];
        let l1: Vec<(usize, i64)> = (0..2 * n).map(|j| (j, 1)).collect();
        objectives.push(objective(&l1));
        objectives.extend((0..n).map(|i| objective(&[(p0 + i, 1), (q0 + i, -1)])));
        let sol = lex_minimize(&a, &rhs, &objectives)?
            .ok_or_else(|| FactoryError::Infeasible("projection onto an empty domain".into()))?;
        let y = (0..n)
            .map(|i| &x[i] + &sol.x[p0 + i] - &sol.x[q0 + i])
            .collect();
        Ok((y, sol.values[0].clone()))
    }

    /// Whether the ℓ∞ distance from `x` to `K` is strictly below `eps`.
    pub fn within_ball(&self, x: &[BigRational], eps: &BigRational) -> Result<bool> {
        if !eps.is_positive() {
            return Err(FactoryError::usage("eps must be positive"));
        }
        self.check_point(x)?;
        if &self.distance_lower_bound(x) >= eps {
            return Ok(false);
        }
        Ok(&self.linf_project(x)?.1 < eps)
    }

    /// Draws `X̄_t` until it lands within `eps` of `K`, then projects it.
    pub fn sample_z(
        &self,
        bank: &mut CoinBank,
        t: u32,
        eps: &BigRational,
        budget: FlipBudget,
    ) -> Result<Draw<Point>> {
        if t == 0 {
            return Err(FactoryError::usage("t must be positive"));
        }
        if !eps.is_positive() {
            return Err(FactoryError::usage("eps must be positive"));
        }
        if bank.num_coins() < self.n {
            return Err(FactoryError::usage("bank has fewer coins than the domain dimension"));
        }
        let mut src = Metered::new(bank, budget);
        loop {
            let counts = match draw_counts(&mut src, self.n, t) {
                Ok(c) => c,
                Err(Interrupt::BudgetExhausted) => return Ok(Draw::BudgetExhausted(src.used())),
                Err(Interrupt::Failed(e)) => return Err(e),
                Err(Interrupt::Truncated) => return Err(FactoryError::usage("unexpected truncation")),
            };
            let x: Point = counts
                .iter()
                .map(|&c| BigRational::new(c.into(), t.into()))
                .collect();
            if self.within_ball(&x, eps)? {
                return Ok(Draw::Value(self.linf_project(&x)?.0));
            }
        }
    }

    pub fn describe(&self) -> String {
        let rows: Vec<String> = self
            .m
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| {
                let lhs: Vec<String> = row.iter().map(fmt_rational).collect();
                format!("[{}] = {}", lhs.join(" "), fmt_rational(bi))
            })
            .collect();
        format!("n = {}; {}", self.n, rows.join("; "))
    }
}

/// `t` flips of each of the first `n` coins; returns the head counts.
pub fn draw_counts(src: &mut dyn CoinSource, n: usize, t: u32) -> Result<Vec<u32>, Interrupt> {
    let mut counts = vec![0u32; n];
    for (i, c) in counts.iter_mut().enumerate() {
        for _ in 0..t {
            *c += src.flip(i)? as u32;
        }
    }
    Ok(counts)
}

/// Both sides of the domination `P[Y ∈ A] <= 2 P[X̄ ∈ A]` for one event.
#[derive(Debug, Clone, PartialEq)]
pub struct DominationReport {
    pub conditioned: BigRational,
    pub unconditioned: BigRational,
    pub holds: bool,
}

/// Exact check of the domination for `event` at `p ∈ K`, over a prebuilt
/// geometry. Requires `t >= ln(8n)/(2 eps^2)`.
pub fn lemma52_check(
    geometry: &LatticeGeometry,
    p: &[BigRational],
    event: &dyn Fn(&[u32]) -> bool,
) -> Result<DominationReport> {
    let (Some(domain), Some(eps)) = (geometry.domain(), geometry.eps()) else {
        return Err(FactoryError::usage("the geometry has no domain constraints"));
    };
    if !domain.contains(p) {
        return Err(FactoryError::domain(format!("{} is not in K", fmt_point(p))));
    }
    let need = min_t_for_acceptance(domain.n() as u64, eps)?;
    if u64::from(geometry.t()) < need {
        return Err(FactoryError::usage(format!(
            "t = {} is below ln(8n)/(2 eps^2), which needs t >= {need}",
            geometry.t()
        )));
    }
    let conditioned = geometry.conditioned_event_probability(p, event)?;
    let unconditioned = geometry.event_probability(p, event)?;
    let holds = conditioned <= &unconditioned * int(2);
    Ok(DominationReport {
        conditioned,
        unconditioned,
        holds,
    })
}

/// A pseudo-random event on count vectors: each lattice point belongs to it
/// with probability 1/2, determined by hashing `(seed, counts)`.
pub fn random_event(seed: u64) -> impl Fn(&[u32]) -> bool {
    move |counts: &[u32]| {
        let mut h = DefaultHasher::new();
        seed.hash(&mut h);
        counts.hash(&mut h);
        h.finish() & 1 == 1
    }
}

/// The level-mixture factory for `f` on `K`, with `Z_{t,ε}` as the level
/// variable.
pub fn subdomain_factory(
    f: TargetFunction,
    domain: &AffineCubeDomain,
    schedule: LevelSchedule,
    eps: &BigRational,
) -> Result<FactoryProgram> {
    Ok(Arc::new(LevelOracle::subdomain(f, schedule, domain, eps)?).program())
}
