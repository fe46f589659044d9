//! k-subset sampling with inclusion probabilities `p_i`, `sum_i p_i = k`.
//!
//! The classic procedure flips every coin once, keeps the heads `U` when
//! `|U| = k`, then flips one uniformly chosen coin outside `U` and accepts
//! on heads. One round outputs `U` with probability `g_U(p)`, so the
//! procedure outputs `U` with probability `f_U = g_U / sum_V g_V`. At points
//! such as `(1,1,0)` every `g_V` vanishes and the loop never ends.
//!
//! `fbar_U` extends `f_U` continuously to the vertices `e_V` of `K`; racing
//! subdomain factories for the `fbar_U` gives a sampler that terminates on
//! all of `K`.

use std::sync::Arc;

use num::{BigInt, BigRational, One, Signed, Zero};

use crate::coin::{CoinBank, CoinSource, FlipBudget, Interrupt, Metered};
use crate::combinators::{bernoulli_race, uniform_coins, uniform_index, BernoulliRace};
use crate::domain::AffineCubeDomain;
use crate::error::{FactoryError, Result};
use crate::faces::BoundCertificate;
use crate::lattice::{LevelOracle, LevelSchedule};
use crate::program::Draw;
use crate::rational::{binomial, check_unit_point, fmt_point, int};
use crate::target::TargetFunction;

/// A sampled subset (0-based, sorted) and the draws it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetOutcome {
    pub subset: Vec<usize>,
    pub flips_used: u64,
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(FactoryError::usage(format!("need 1 <= k < n, got n = {n}, k = {k}")));
    }
    Ok(())
}

fn check_subset(n: usize, u: &[usize]) -> Result<()> {
    if u.windows(2).any(|w| w[0] >= w[1]) || u.iter().any(|&i| i >= n) {
        return Err(FactoryError::usage("subsets must be sorted, distinct and within 0..n"));
    }
    check_nk(n, u.len())
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn grow(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            grow(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    grow(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// `e_U`: the 0/1 indicator vector of `u`.
pub fn indicator(n: usize, u: &[usize]) -> Vec<BigRational> {
    let mut v = vec![BigRational::zero(); n];
    for &i in u {
        v[i] = BigRational::one();
    }
    v
}

/// Probability that one round of the classic procedure outputs `u`:
/// `(1/(n-k)) prod_{i in U} p_i prod_{i not in U} (1-p_i) sum_{i not in U} p_i`.
pub fn g_u(p: &[BigRational], u: &[usize]) -> Result<BigRational> {
    let n = p.len();
    check_subset(n, u)?;
    check_unit_point(p)?;
    let one = BigRational::one();
    let mut prod = one.clone();
    let mut outside = BigRational::zero();
    for (i, x) in p.iter().enumerate() {
        if u.binary_search(&i).is_ok() {
            prod *= x;
        } else {
            prod *= &one - x;
            outside += x;
        }
    }
    Ok(prod * outside / int((n - u.len()) as i64))
}

/// `g_U / sum_V g_V`; fails where every `g_V` vanishes.
pub fn f_u(p: &[BigRational], u: &[usize]) -> Result<BigRational> {
    let k = u.len();
    check_subset(p.len(), u)?;
    let mut total = BigRational::zero();
    for v in k_subsets(p.len(), k) {
        total += g_u(p, &v)?;
    }
    if total.is_zero() {
        return Err(FactoryError::domain(format!(
            "every g_V vanishes at {}; use fbar_u on K",
            fmt_point(p)
        )));
    }
    Ok(g_u(p, u)? / total)
}

fn check_in_k(p: &[BigRational], k: usize) -> Result<()> {
    check_unit_point(p)?;
    let sum: BigRational = p.iter().sum();
    if sum != int(k as i64) {
        return Err(FactoryError::domain(format!(
            "coordinates of {} sum to {sum}, not {k}",
            fmt_point(p)
        )));
    }
    Ok(())
}

/// The continuous extension of `f_U` to `K = {p ∈ [0,1]^n : sum p = k}`:
/// 1 at `e_U`, 0 at the other `e_V`, `f_U` elsewhere.
pub fn fbar_u(p: &[BigRational], u: &[usize]) -> Result<BigRational> {
    check_subset(p.len(), u)?;
    check_in_k(p, u.len())?;
    if p.iter().all(|x| x.is_zero() || x.is_one()) {
        let at_u = p
            .iter()
            .enumerate()
            .all(|(i, x)| x.is_one() == u.binary_search(&i).is_ok());
        return Ok(if at_u { int(1) } else { int(0) });
    }
    f_u(p, u)
}

/// `fbar_U(p)` for every `k`-subset, in [`k_subsets`] order.
pub fn fbar_all(p: &[BigRational], k: usize) -> Result<Vec<(Vec<usize>, BigRational)>> {
    check_nk(p.len(), k)?;
    k_subsets(p.len(), k)
        .into_iter()
        .map(|u| {
            let v = fbar_u(p, &u)?;
            Ok((u, v))
        })
        .collect()
}

/// `c = 1/((n-k) k C(n,k))`, `m = 1`.
pub fn sampford_bound_cert(n: usize, k: usize) -> Result<BoundCertificate> {
    check_nk(n, k)?;
    let den = BigInt::from((n - k) * k) * binomial(n as u64, k as u64);
    BoundCertificate::new(BigRational::new(BigInt::one(), den), 1)
}

/// `{1,2}` for the 0-based subset `[0, 1]`.
pub fn subset_label(u: &[usize]) -> String {
    let items: Vec<String> = u.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", items.join(","))
}

/// `fbar_U` as a target function on `K`.
pub fn fbar_target(n: usize, u: &[usize]) -> Result<TargetFunction> {
    check_subset(n, u)?;
    let u = u.to_vec();
    Ok(TargetFunction::new(
        format!("fbar{}", subset_label(&u)),
        n,
        move |p| fbar_u(p, &u),
    ))
}

fn heads(src: &mut dyn CoinSource, n: usize) -> Result<Vec<usize>, Interrupt> {
    let mut u = Vec::new();
    for i in 0..n {
        if src.flip(i)? {
            u.push(i);
        }
    }
    Ok(u)
}

fn finish(result: Result<Vec<usize>, Interrupt>, used: u64) -> Result<Draw<SubsetOutcome>> {
    match result {
        Ok(subset) => Ok(Draw::Value(SubsetOutcome {
            subset,
            flips_used: used,
        })),
        Err(Interrupt::BudgetExhausted) => Ok(Draw::BudgetExhausted(used)),
        Err(Interrupt::Failed(e)) => Err(e),
        Err(Interrupt::Truncated) => Err(FactoryError::usage("unexpected truncation")),
    }
}

/// The classic procedure, one coin per element of the bank.
pub fn classic_sampford(bank: &mut CoinBank, k: usize, budget: FlipBudget) -> Result<Draw<SubsetOutcome>> {
    let n = bank.num_coins();
    check_nk(n, k)?;
    let pick = uniform_coins(n - k);
    let mut src = Metered::new(bank, budget);
    let result = (|| loop {
        let u = heads(&mut src, n)?;
        if u.len() != k {
            continue;
        }
        let rest: Vec<usize> = (0..n).filter(|i| u.binary_search(i).is_err()).collect();
        let j = rest[uniform_index(&mut src, &pick)?];
        if src.flip(j)? {
            return Ok(u);
        }
    })();
    let used = src.used();
    finish(result, used)
}

/// The incorrect single-pass sampler: keep the heads once there are exactly
/// `k` of them. Inclusion probabilities are not `p`.
pub fn naive_sampford(bank: &mut CoinBank, k: usize, budget: FlipBudget) -> Result<Draw<SubsetOutcome>> {
    let n = bank.num_coins();
    check_nk(n, k)?;
    let mut src = Metered::new(bank, budget);
    let result = (|| loop {
        let u = heads(&mut src, n)?;
        if u.len() == k {
            return Ok(u);
        }
    })();
    let used = src.used();
    finish(result, used)
}

/// A race between subdomain factories for every `fbar_U`.
#[derive(Clone)]
pub struct BoundarySampford {
    n: usize,
    k: usize,
    subsets: Vec<Vec<usize>>,
    oracles: Vec<Arc<LevelOracle>>,
    race: BernoulliRace,
}

impl std::fmt::Debug for BoundarySampford {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BoundarySampford(n = {}, k = {})", self.n, self.k)
    }
}

pub fn boundary_sampford(n: usize, k: usize, schedule: LevelSchedule, eps: &BigRational) -> Result<BoundarySampford> {
    check_nk(n, k)?;
    let domain = AffineCubeDomain::k_subset(n, k)?;
    let subsets = k_subsets(n, k);
    let first = LevelOracle::subdomain(fbar_target(n, &subsets[0])?, schedule, &domain, eps)?;
    let mut oracles = Vec::with_capacity(subsets.len());
    for u in &subsets[1..] {
        oracles.push(Arc::new(first.sibling(fbar_target(n, u)?)?));
    }
    oracles.insert(0, Arc::new(first));
    let race = bernoulli_race(oracles.iter().map(|o| o.program()).collect())?;
    Ok(BoundarySampford {
        n,
        k,
        subsets,
        oracles,
        race,
    })
}

impl BoundarySampford {
    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    /// The level oracle behind `fbar_U` for each subset, in [`k_subsets`] order.
    pub fn oracles(&self) -> &[Arc<LevelOracle>] {
        &self.oracles
    }

    /// Index into [`subsets`](Self::subsets) of the sampled subset.
    pub fn sample_index(&self, src: &mut dyn CoinSource) -> Result<usize, Interrupt> {
        self.race.sample(src)
    }

    pub fn sample(&self, bank: &mut CoinBank, budget: FlipBudget) -> Result<Draw<SubsetOutcome>> {
        if bank.num_coins() != self.n {
            return Err(FactoryError::usage("bank size differs from n"));
        }
        check_in_k(bank.biases(), self.k).map_err(|e| match e {
            FactoryError::Domain(m) => FactoryError::usage(m),
            other => other,
        })?;
        let mut src = Metered::new(bank, budget);
        let result = self.sample_index(&mut src).map(|i| self.subsets[i].clone());
        let used = src.used();
        finish(result, used)
    }
}

/// Inclusion marginals `sum_U w_U e_U` of a distribution over subsets.
pub fn marginals(n: usize, weights: &[(Vec<usize>, BigRational)]) -> Vec<BigRational> {
    let mut m = vec![BigRational::zero(); n];
    for (u, w) in weights {
        for &i in u {
            m[i] += w;
        }
    }
    m
}

/// Whether `weights` is a probability vector (non-negative, summing to 1).
pub fn is_distribution(weights: &[(Vec<usize>, BigRational)]) -> bool {
    weights.iter().all(|(_, w)| !w.is_negative()) && weights.iter().map(|(_, w)| w).sum::<BigRational>().is_one()
}
