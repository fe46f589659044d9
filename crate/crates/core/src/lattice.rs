//! Exact oracle for the level functions of the geometric-mixture factory.
//!
//! With `f_1 = f`, level `k` uses `g_k(p) = P_p[f_k(Z) >= 1/2]` where `Z` is
//! `X̄_t` (no domain) or the projection of `X̄_t` conditioned on landing
//! within `ε` of the domain, and `f_{k+1} = (4/3)(f_k - g_k/4)`. Sampling
//! level `K` with `P[K = k] = (1/4)(3/4)^(k-1)` and outputting
//! `[f_K(Z) >= 1/2]` gives `sum_k (1/4)(3/4)^(k-1) g_k(p)`, which equals
//! `f(p)` as long as every `f_k` stays in `[0,1]`.
//!
//! Every probability here is a finite sum over the lattice `{0..t}^n`, so
//! everything is computed exactly. The lattice weights factor per
//! coordinate, which lets a batch of queries share partial contractions.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num::{BigInt, BigRational, One, Signed, Zero};
use parking_lot::{Mutex, RwLock};
use rayon::prelude::*;

use crate::coin::{CoinSource, Interrupt};
use crate::combinators::geometric_index;
use crate::domain::{draw_counts, AffineCubeDomain};
use crate::error::{FactoryError, Result};
use crate::faces::grid_points;
use crate::program::FactoryProgram;
use crate::rational::{binomial, binomial_row, check_unit_point, fmt_rational, rat, Point};
use crate::target::TargetFunction;

/// Default cap on `(t+1)^n`.
pub const DEFAULT_LATTICE_LIMIT: u64 = 1 << 24;
/// Default cap on the sampled level.
pub const DEFAULT_LEVEL_CAP: usize = 256;

const REJECTED: u32 = u32::MAX;

/// A value of `X̄_t`: head counts out of `t` flips per coin.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatticePoint {
    pub t: u32,
    pub counts: Vec<u32>,
}

impl LatticePoint {
    pub fn new(t: u32, counts: Vec<u32>) -> Result<Self> {
        if t == 0 || counts.iter().any(|&c| c > t) {
            return Err(FactoryError::usage("lattice counts must lie in [0, t] with t >= 1"));
        }
        Ok(LatticePoint { t, counts })
    }

    pub fn value(&self) -> Point {
        self.counts
            .iter()
            .map(|&c| BigRational::new(c.into(), self.t.into()))
            .collect()
    }
}

/// Sample size `t_k` per level (the last entry repeats).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSchedule {
    ts: Vec<u32>,
    /// Highest level covered by certificate checks.
    pub max_level: usize,
    /// Highest level the sampler may draw before failing.
    pub level_cap: usize,
}

impl LevelSchedule {
    pub fn constant(t: u32) -> Result<Self> {
        Self::per_level(vec![t])
    }

    pub fn per_level(ts: Vec<u32>) -> Result<Self> {
        if ts.is_empty() || ts.contains(&0) {
            return Err(FactoryError::usage("every t_k must be at least 1"));
        }
        Ok(LevelSchedule {
            ts,
            max_level: 6,
            level_cap: DEFAULT_LEVEL_CAP,
        })
    }

    pub fn with_max_level(mut self, k: usize) -> Self {
        self.max_level = k;
        self
    }

    pub fn with_level_cap(mut self, cap: usize) -> Self {
        self.level_cap = cap;
        self
    }

    /// `t_k` for `k >= 1`.
    pub fn t(&self, level: usize) -> u32 {
        let i = level.saturating_sub(1).min(self.ts.len() - 1);
        self.ts[i]
    }

    /// The listed values; the last one applies to all deeper levels.
    pub fn ts(&self) -> &[u32] {
        &self.ts
    }
}

/// The lattice `{0..t}^n / t`, which of its points are accepted (within
/// `ε` of the domain) and where each accepted point projects to.
pub struct LatticeGeometry {
    n: usize,
    t: u32,
    domain: Option<AffineCubeDomain>,
    eps: Option<BigRational>,
    proj: Vec<u32>,
    points: Vec<Point>,
    rows: Mutex<HashMap<BigRational, Arc<Vec<BigInt>>>>,
    acceptance: Mutex<HashMap<Point, BigInt>>,
}

impl std::fmt::Debug for LatticeGeometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "LatticeGeometry(n = {}, t = {}, {} projected points)",
            self.n,
            self.t,
            self.points.len()
        )
    }
}

fn lattice_size(n: usize, t: u32, limit: u64) -> Result<usize> {
    let side = t as u64 + 1;
    let mut size: u64 = 1;
    for _ in 0..n {
        size = size.checked_mul(side).filter(|s| *s <= limit).ok_or_else(|| {
            FactoryError::resource(format!("lattice ({side})^{n} exceeds the limit of {limit} points"))
        })?;
    }
    Ok(size as usize)
}

fn counts_of(mut idx: usize, n: usize, t: u32) -> Vec<u32> {
    let side = t as usize + 1;
    let mut counts = vec![0u32; n];
    for c in counts.iter_mut().rev() {
        *c = (idx % side) as u32;
        idx /= side;
    }
    counts
}

impl LatticeGeometry {
    /// Without a domain every lattice point is accepted and projects to
    /// itself. With one, `eps` must be positive.
    pub fn new(
        n: usize,
        t: u32,
        domain: Option<&AffineCubeDomain>,
        eps: Option<&BigRational>,
        limit: u64,
    ) -> Result<Self> {
        if t == 0 {
            return Err(FactoryError::usage("t must be positive"));
        }
        if n == 0 {
            return Err(FactoryError::usage("need at least one coin"));
        }
        let size = lattice_size(n, t, limit)?;
        if let Some(d) = domain {
            if d.n() != n {
                return Err(FactoryError::usage("domain dimension differs from the number of coins"));
            }
            if !eps.is_some_and(|e| e.is_positive()) {
                return Err(FactoryError::usage("eps must be positive"));
            }
        }
        let domain = domain.filter(|d| d.has_constraints()).cloned();
        let eps = domain.as_ref().and(eps.cloned());
        let projected: Vec<Option<Point>> = (0..size)
            .into_par_iter()
            .map(|idx| -> Result<Option<Point>> {
                let x = LatticePoint {
                    t,
                    counts: counts_of(idx, n, t),
                }
                .value();
                match (&domain, &eps) {
                    (Some(d), Some(e)) => {
                        if &d.distance_lower_bound(&x) >= e {
                            return Ok(None);
                        }
                        let (y, r) = d.linf_project(&x)?;
                        Ok((&r < e).then_some(y))
                    }
                    _ => Ok(Some(x)),
                }
            })
            .collect::<Result<_>>()?;
        let mut index: HashMap<Point, u32> = HashMap::new();
        let mut points = Vec::new();
        let proj = projected
            .into_iter()
            .map(|y| match y {
                None => REJECTED,
                Some(y) => *index.entry(y.clone()).or_insert_with(|| {
                    points.push(y);
                    (points.len() - 1) as u32
                }),
            })
            .collect();
        Ok(LatticeGeometry {
            n,
            t,
            domain,
            eps,
            proj,
            points,
            rows: Mutex::new(HashMap::new()),
            acceptance: Mutex::new(HashMap::new()),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn domain(&self) -> Option<&AffineCubeDomain> {
        self.domain.as_ref()
    }

    pub fn eps(&self) -> Option<&BigRational> {
        self.eps.as_ref()
    }

    pub fn size(&self) -> usize {
        self.proj.len()
    }

    /// Row-major index, first coordinate most significant.
    pub fn index(&self, counts: &[u32]) -> usize {
        let side = self.t as usize + 1;
        counts.iter().fold(0, |acc, &c| acc * side + c as usize)
    }

    pub fn counts(&self, idx: usize) -> Vec<u32> {
        counts_of(idx, self.n, self.t)
    }

    /// Index into [`points`](Self::points) of the projection, or `None` if
    /// the lattice point is rejected.
    pub fn projected(&self, idx: usize) -> Option<usize> {
        let j = self.proj[idx];
        (j != REJECTED).then_some(j as usize)
    }

    pub fn is_accepted(&self, idx: usize) -> bool {
        self.proj[idx] != REJECTED
    }

    pub fn accepted_count(&self) -> usize {
        self.proj.iter().filter(|&&j| j != REJECTED).count()
    }

    /// The distinct projected points, in order of first appearance.
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// `C(t,c) u^c (v-u)^(t-c)` for `a = u/v`: the binomial weights of one
    /// coordinate, over the common denominator `v^t`.
    fn weight_row(&self, a: &BigRational) -> Arc<Vec<BigInt>> {
        if let Some(row) = self.rows.lock().get(a) {
            return row.clone();
        }
        let t = self.t as usize;
        let u = a.numer().clone();
        let w = a.denom() - &u;
        let mut up = vec![BigInt::one(); t + 1];
        let mut wp = vec![BigInt::one(); t + 1];
        for c in 1..=t {
            up[c] = &up[c - 1] * &u;
            wp[c] = &wp[c - 1] * &w;
        }
        let row: Vec<BigInt> = binomial_row(t as u64)
            .into_iter()
            .enumerate()
            .map(|(c, b)| b * &up[c] * &wp[t - c])
            .collect();
        let row = Arc::new(row);
        self.rows.lock().insert(a.clone(), row.clone());
        row
    }

    /// `prod_i denom(q_i)^t`, the common denominator of all weights at `q`.
    pub fn denominator(&self, q: &[BigRational]) -> BigInt {
        q.iter()
            .map(|x| num::pow(x.denom().clone(), self.t as usize))
            .product()
    }

    /// `sum_x data[x] * weight_q(x)` for every query, scaled by the
    /// denominator of that query.
    fn contract(&self, data: &[BigInt], queries: &[&[BigRational]]) -> Vec<BigInt> {
        let mut out = vec![BigInt::zero(); queries.len()];
        let ids: Vec<usize> = (0..queries.len()).collect();
        self.contract_dim(data, 0, queries, &ids, &mut out);
        out
    }

    fn contract_dim(
        &self,
        data: &[BigInt],
        dim: usize,
        queries: &[&[BigRational]],
        ids: &[usize],
        out: &mut [BigInt],
    ) {
        let side = self.t as usize + 1;
        let stride = data.len() / side;
        let mut groups: BTreeMap<&BigRational, Vec<usize>> = BTreeMap::new();
        for &id in ids {
            groups.entry(&queries[id][dim]).or_default().push(id);
        }
        for (a, group) in groups {
            let w = self.weight_row(a);
            let mut next = vec![BigInt::zero(); stride];
            for (c, wc) in w.iter().enumerate() {
                if wc.is_zero() {
                    continue;
                }
                let slice = &data[c * stride..(c + 1) * stride];
                for (acc, x) in next.iter_mut().zip(slice) {
                    if !x.is_zero() {
                        *acc += wc * x;
                    }
                }
            }
            if dim + 1 == self.n {
                for id in group {
                    out[id] = next[0].clone();
                }
            } else {
                self.contract_dim(&next, dim + 1, queries, &group, out);
            }
        }
    }

    fn indicator(&self, keep: impl Fn(usize) -> bool) -> Vec<BigInt> {
        (0..self.size())
            .map(|idx| if keep(idx) { BigInt::one() } else { BigInt::zero() })
            .collect()
    }

    fn check_query(&self, q: &[BigRational]) -> Result<()> {
        if q.len() != self.n {
            return Err(FactoryError::usage(format!(
                "query has {} coordinates, expected {}",
                q.len(),
                self.n
            )));
        }
        check_unit_point(q)
    }

    /// Scaled `P_q[X̄_t accepted]` for each query (cached).
    fn acceptance_weights(&self, queries: &[&[BigRational]]) -> Vec<BigInt> {
        if self.domain.is_none() {
            return queries.iter().map(|q| self.denominator(q)).collect();
        }
        let mut out: Vec<Option<BigInt>> = {
            let cache = self.acceptance.lock();
            queries.iter().map(|q| cache.get(*q).cloned()).collect()
        };
        let missing: Vec<usize> = (0..queries.len()).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            let mask = self.indicator(|idx| self.is_accepted(idx));
            let qs: Vec<&[BigRational]> = missing.iter().map(|&i| queries[i]).collect();
            let sums = self.contract(&mask, &qs);
            let mut cache = self.acceptance.lock();
            for (&i, s) in missing.iter().zip(sums) {
                cache.insert(queries[i].to_vec(), s.clone());
                out[i] = Some(s);
            }
        }
        out.into_iter().map(|o| o.expect("filled above")).collect()
    }

    /// `P_q[Z ∈ H]` where `H` is the set of projected points flagged in `hits`.
    pub fn conditional_probability(&self, hits: &[bool], queries: &[&[BigRational]]) -> Result<Vec<BigRational>> {
        if hits.len() != self.points.len() {
            return Err(FactoryError::usage("one flag per projected point is required"));
        }
        for q in queries {
            self.check_query(q)?;
        }
        let mask = self.indicator(|idx| self.projected(idx).is_some_and(|j| hits[j]));
        let num = self.contract(&mask, queries);
        let den = self.acceptance_weights(queries);
        num.into_iter()
            .zip(den)
            .zip(queries)
            .map(|((a, b), q)| {
                if b.is_zero() {
                    Err(FactoryError::domain(format!(
                        "no accepted lattice point has positive probability at {}",
                        crate::rational::fmt_point(q)
                    )))
                } else {
                    Ok(BigRational::new(a, b))
                }
            })
            .collect()
    }

    /// `P_q[X̄_t ∈ A]` for the lattice event `A` (unconditioned).
    pub fn event_probability(&self, q: &[BigRational], event: &dyn Fn(&[u32]) -> bool) -> Result<BigRational> {
        self.check_query(q)?;
        let mask = self.indicator(|idx| event(&self.counts(idx)));
        let num = self.contract(&mask, &[q]).remove(0);
        Ok(BigRational::new(num, self.denominator(q)))
    }

    /// `P_q[Y ∈ A]`: the event restricted to accepted points, conditioned on
    /// acceptance.
    pub fn conditioned_event_probability(
        &self,
        q: &[BigRational],
        event: &dyn Fn(&[u32]) -> bool,
    ) -> Result<BigRational> {
        self.check_query(q)?;
        let mask = self.indicator(|idx| self.is_accepted(idx) && event(&self.counts(idx)));
        let num = self.contract(&mask, &[q]).remove(0);
        let den = self.acceptance_weights(&[q]).remove(0);
        if den.is_zero() {
            return Err(FactoryError::domain("acceptance has probability zero at this point"));
        }
        Ok(BigRational::new(num, den))
    }
}

/// `P_q[f(X̄_t) >= 1/2]` by direct enumeration of the lattice.
pub fn gk_eval(
    f: &dyn Fn(&[BigRational]) -> Result<BigRational>,
    q: &[BigRational],
    t: u32,
    limit: u64,
) -> Result<BigRational> {
    check_unit_point(q)?;
    if t == 0 {
        return Err(FactoryError::usage("t must be positive"));
    }
    let n = q.len();
    let size = lattice_size(n, t, limit)?;
    let half = rat(1, 2);
    let one = BigRational::one();
    let mut total = BigRational::zero();
    for idx in 0..size {
        let point = LatticePoint {
            t,
            counts: counts_of(idx, n, t),
        };
        if f(&point.value())? < half {
            continue;
        }
        let mut w = BigRational::one();
        for (c, qi) in point.counts.iter().zip(q) {
            w *= BigRational::from_integer(binomial(t as u64, *c as u64))
                * crate::rational::pow(qi, *c)
                * crate::rational::pow(&(&one - qi), t - c);
        }
        total += w;
    }
    Ok(total)
}

/// Worst margin of the one-step inequalities on a grid.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub level: usize,
    pub holds: bool,
    pub points_checked: usize,
    pub worst_point: Option<Point>,
    pub worst_margin: Option<BigRational>,
}

impl CertificateReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "level": self.level,
            "holds": self.holds,
            "points_checked": self.points_checked,
            "worst_point": self.worst_point.as_ref().map(|p| p.iter().map(fmt_rational).collect::<Vec<_>>()),
            "worst_margin": self.worst_margin.as_ref().map(fmt_rational),
        })
    }
}

#[derive(Debug, Clone)]
struct ChainEntry {
    level: usize,
    value: BigRational,
    /// First level whose value left `[0,1]`, if any.
    violation: Option<(usize, BigRational)>,
}

#[derive(Default)]
struct State {
    /// Highest level computed so far at each point.
    chain: HashMap<Point, ChainEntry>,
}

/// `[f_k(z) >= 1/2]` over the projected points of one level, and whether
/// the chain `f_1(z), ..., f_k(z)` stayed inside `[0,1]`.
#[derive(Debug)]
pub struct LevelTable {
    pub hit: Vec<bool>,
    pub valid: Vec<bool>,
}

impl LevelTable {
    pub fn all_valid(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }
}

/// The level functions `f_k` for one target function, with memoised values
/// and per-level hit tables over the projected points.
///
/// Indicators are recorded even where a level value has left `[0,1]`, so
/// later levels stay well defined; a certificate violation is raised only
/// when such a value is itself requested (by a query or by the sampler).
pub struct LevelOracle {
    target: TargetFunction,
    schedule: LevelSchedule,
    domain: Option<AffineCubeDomain>,
    eps: Option<BigRational>,
    limit: u64,
    geometries: Arc<Mutex<HashMap<u32, Arc<LatticeGeometry>>>>,
    tables: RwLock<Vec<Arc<LevelTable>>>,
    state: Mutex<State>,
}

impl std::fmt::Debug for LevelOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LevelOracle({}, {:?})", self.target.name(), self.schedule)
    }
}

impl LevelOracle {
    /// Level functions over the whole cube.
    pub fn general(target: TargetFunction, schedule: LevelSchedule) -> Result<Self> {
        Self::build(target, schedule, None, None, DEFAULT_LATTICE_LIMIT)
    }

    /// Level functions on `K`, using the projected variable `Z_{t,ε}`.
    pub fn subdomain(
        target: TargetFunction,
        schedule: LevelSchedule,
        domain: &AffineCubeDomain,
        eps: &BigRational,
    ) -> Result<Self> {
        if !eps.is_positive() {
            return Err(FactoryError::usage("eps must be positive"));
        }
        Self::build(target, schedule, Some(domain), Some(eps), DEFAULT_LATTICE_LIMIT)
    }

    /// Geometries are built on first use, one per distinct `t`.
    pub fn build(
        target: TargetFunction,
        schedule: LevelSchedule,
        domain: Option<&AffineCubeDomain>,
        eps: Option<&BigRational>,
        limit: u64,
    ) -> Result<Self> {
        if let Some(d) = domain {
            if d.n() != target.arity() {
                return Err(FactoryError::usage("domain dimension differs from the target arity"));
            }
            if !eps.is_some_and(|e| e.is_positive()) {
                return Err(FactoryError::usage("eps must be positive"));
            }
        }
        lattice_size(target.arity(), schedule.t(1), limit)?;
        Ok(LevelOracle {
            target,
            schedule,
            domain: domain.cloned(),
            eps: domain.and(eps.cloned()),
            limit,
            geometries: Arc::new(Mutex::new(HashMap::new())),
            tables: RwLock::new(Vec::new()),
            state: Mutex::new(State::default()),
        })
    }

    /// Reuses an already-built geometry for every level whose `t` matches.
    pub fn with_geometry(self, geometry: Arc<LatticeGeometry>) -> Result<Self> {
        if geometry.n() != self.target.arity() {
            return Err(FactoryError::usage("geometry and target dimensions differ"));
        }
        if geometry.domain() != self.domain.as_ref().filter(|d| d.has_constraints())
            || geometry.eps() != self.eps.as_ref().filter(|_| geometry.domain().is_some())
        {
            return Err(FactoryError::usage("geometry was built for a different domain"));
        }
        self.geometries.lock().insert(geometry.t(), geometry);
        Ok(self)
    }

    /// An oracle for another target on the same domain and schedule, sharing
    /// the lattice geometries (and their projections) with this one.
    pub fn sibling(&self, target: TargetFunction) -> Result<Self> {
        if target.arity() != self.target.arity() {
            return Err(FactoryError::usage("sibling targets must have the same arity"));
        }
        Ok(LevelOracle {
            target,
            schedule: self.schedule.clone(),
            domain: self.domain.clone(),
            eps: self.eps.clone(),
            limit: self.limit,
            geometries: self.geometries.clone(),
            tables: RwLock::new(Vec::new()),
            state: Mutex::new(State::default()),
        })
    }

    pub fn target(&self) -> &TargetFunction {
        &self.target
    }

    pub fn schedule(&self) -> &LevelSchedule {
        &self.schedule
    }

    pub fn domain(&self) -> Option<&AffineCubeDomain> {
        self.domain.as_ref()
    }

    pub fn geometry(&self, level: usize) -> Result<Arc<LatticeGeometry>> {
        let t = self.schedule.t(level);
        if let Some(g) = self.geometries.lock().get(&t) {
            return Ok(g.clone());
        }
        let g = Arc::new(LatticeGeometry::new(
            self.target.arity(),
            t,
            self.domain.as_ref(),
            self.eps.as_ref(),
            self.limit,
        )?);
        Ok(self.geometries.lock().entry(t).or_insert(g).clone())
    }

    fn check_level(&self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(FactoryError::usage("levels start at 1"));
        }
        if k > self.schedule.level_cap {
            return Err(FactoryError::resource(format!(
                "level {k} exceeds the cap of {}",
                self.schedule.level_cap
            )));
        }
        Ok(())
    }

    /// `f_k` at each point; fails if any of them left `[0,1]` at a level up to `k`.
    pub fn values(&self, k: usize, points: &[Point]) -> Result<Vec<BigRational>> {
        self.check_level(k)?;
        let entries = {
            let mut st = self.state.lock();
            self.chains(&mut st, k, points)?
        };
        entries
            .into_iter()
            .zip(points)
            .map(|(e, p)| match e.violation {
                Some((level, value)) => Err(FactoryError::CertificateViolation {
                    level,
                    point: p.clone(),
                    value,
                }),
                None => Ok(e.value),
            })
            .collect()
    }

    pub fn fk_eval(&self, k: usize, q: &[BigRational]) -> Result<BigRational> {
        Ok(self.values(k, &[q.to_vec()])?.remove(0))
    }

    /// `g_k` at each point.
    pub fn gk(&self, k: usize, points: &[Point]) -> Result<Vec<BigRational>> {
        self.check_level(k)?;
        let table = self.table(k)?;
        let qs: Vec<&[BigRational]> = points.iter().map(|p| p.as_slice()).collect();
        self.geometry(k)?.conditional_probability(&table.hit, &qs)
    }

    /// `sum_{s <= k} (1/4)(3/4)^(s-1) g_s(q)`.
    pub fn partial_sum(&self, k: usize, q: &[BigRational]) -> Result<BigRational> {
        let mut weight = rat(1, 4);
        let mut total = BigRational::zero();
        for s in 1..=k {
            total += &weight * self.gk(s, &[q.to_vec()])?.remove(0);
            weight *= rat(3, 4);
        }
        Ok(total)
    }

    fn chains(&self, st: &mut State, k: usize, points: &[Point]) -> Result<Vec<ChainEntry>> {
        let mut cur: Vec<ChainEntry> = points
            .iter()
            .map(|p| match st.chain.get(p) {
                Some(e) if e.level <= k => Ok(e.clone()),
                _ => Ok(ChainEntry {
                    level: 1,
                    value: self.target.eval(p)?,
                    violation: None,
                }),
            })
            .collect::<Result<_>>()?;
        let scale = rat(4, 3);
        let quarter = rat(1, 4);
        for level in 1..k {
            let idx: Vec<usize> = (0..points.len()).filter(|&i| cur[i].level == level).collect();
            if idx.is_empty() {
                continue;
            }
            let table = self.table_locked(st, level)?;
            let qs: Vec<&[BigRational]> = idx.iter().map(|&i| points[i].as_slice()).collect();
            let g = self.geometry(level)?.conditional_probability(&table.hit, &qs)?;
            for (&i, gi) in idx.iter().zip(g) {
                let e = &mut cur[i];
                e.value = (&e.value - gi * &quarter) * &scale;
                e.level = level + 1;
                if e.violation.is_none() && (e.value.is_negative() || e.value > BigRational::one()) {
                    e.violation = Some((level + 1, e.value.clone()));
                }
            }
        }
        for (p, c) in points.iter().zip(&cur) {
            if st.chain.get(p).map_or(true, |e| e.level < c.level) {
                st.chain.insert(p.clone(), c.clone());
            }
        }
        Ok(cur)
    }

    fn table_locked(&self, st: &mut State, level: usize) -> Result<Arc<LevelTable>> {
        if let Some(h) = self.tables.read().get(level - 1) {
            return Ok(h.clone());
        }
        let have = self.tables.read().len();
        let half = rat(1, 2);
        for j in have + 1..=level {
            let geometry = self.geometry(j)?;
            let entries = self.chains(st, j, geometry.points())?;
            let table = LevelTable {
                hit: entries.iter().map(|e| e.value >= half).collect(),
                valid: entries.iter().map(|e| e.violation.is_none()).collect(),
            };
            self.tables.write().push(Arc::new(table));
        }
        Ok(self.tables.read()[level - 1].clone())
    }

    /// The hit table of level `k` over the projected points of its geometry.
    pub fn table(&self, k: usize) -> Result<Arc<LevelTable>> {
        self.check_level(k)?;
        if let Some(h) = self.tables.read().get(k - 1) {
            return Ok(h.clone());
        }
        let mut st = self.state.lock();
        self.table_locked(&mut st, k)
    }

    /// Grid points (of `K`, when there is a domain) with spacing `1/d`.
    pub fn grid(&self, d: u32) -> Vec<Point> {
        grid_points(self.target.arity(), d)
            .into_iter()
            .filter(|p| self.domain.as_ref().map_or(true, |k| k.contains(p)))
            .collect()
    }

    /// Checks `f_k - g_k/4 >= f_k/8` and `(1-f_k) - (1-g_k)/4 >= (1-f_k)/8`
    /// at every grid point of mesh `1/d`. Evidence, not proof.
    pub fn certificate_check(&self, k: usize, d: u32) -> Result<CertificateReport> {
        if d < 2 {
            return Err(FactoryError::usage("grid mesh must be 1/d with d >= 2"));
        }
        let points = self.grid(d);
        let f = self.values(k, &points)?;
        let g = self.gk(k, &points)?;
        let one = BigRational::one();
        let (quarter, eighth) = (rat(1, 4), rat(1, 8));
        let mut worst: Option<(usize, BigRational)> = None;
        for (i, (fi, gi)) in f.iter().zip(&g).enumerate() {
            let low = fi - gi * &quarter - fi * &eighth;
            let nf = &one - fi;
            let high = &nf - (&one - gi) * &quarter - &nf * &eighth;
            let margin = low.min(high);
            if worst.as_ref().map_or(true, |(_, w)| margin < *w) {
                worst = Some((i, margin));
            }
        }
        Ok(CertificateReport {
            level: k,
            holds: worst.as_ref().map_or(true, |(_, m)| !m.is_negative()),
            points_checked: points.len(),
            worst_point: worst.as_ref().map(|(i, _)| points[*i].clone()),
            worst_margin: worst.map(|(_, m)| m),
        })
    }

    /// One run of the level mixture.
    pub fn sample(&self, src: &mut dyn CoinSource) -> Result<bool, Interrupt> {
        let k = geometric_index(src, self.schedule.level_cap)?;
        let geometry = self.geometry(k).map_err(Interrupt::Failed)?;
        let j = loop {
            let counts = draw_counts(src, geometry.n(), geometry.t())?;
            if let Some(j) = geometry.projected(geometry.index(&counts)) {
                break j;
            }
        };
        let table = self.table(k).map_err(Interrupt::Failed)?;
        if !table.valid[j] {
            let err = self
                .fk_eval(k, &geometry.points()[j])
                .expect_err("the chain at this point is out of range");
            return Err(Interrupt::Failed(err));
        }
        Ok(table.hit[j])
    }

    pub fn program(self: &Arc<Self>) -> FactoryProgram {
        let me = self.clone();
        FactoryProgram::procedural(
            format!("level mixture for {}", self.target.name()),
            self.target.arity(),
            move |src| me.sample(src),
        )
    }
}

/// The factory for `f` over the whole cube.
pub fn general_factory(f: TargetFunction, schedule: LevelSchedule) -> Result<FactoryProgram> {
    Ok(Arc::new(LevelOracle::general(f, schedule)?).program())
}

/// One-step certificate for `f` itself with sample size `t`.
pub fn certificate_check(f: &TargetFunction, t: u32, d: u32) -> Result<CertificateReport> {
    LevelOracle::general(f.clone(), LevelSchedule::constant(t)?)?.certificate_check(1, d)
}
