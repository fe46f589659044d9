//! Polytopes `P = [0,1]^n ∩ {M x = b}` and vertex samplers with mean `p`.
//!
//! For each vertex `w`, the fan triangulation `T_w` cones `w` over every
//! facet not containing it. Writing `p` in barycentric coordinates of its
//! simplex in `T_w` gives weights `g^(w)_v(p)`; averaging over all `w` gives
//! `f_v(p)`, which sums to 1, has mean `p`, and is continuous and
//! polynomially bounded on `P`. Racing factories for the `f_v` samples a
//! vertex with probability `f_v(p)`.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use num::{BigRational, One, Signed, Zero};
use parking_lot::Mutex;

use crate::coin::{CoinBank, CoinSource, FlipBudget, Interrupt, Metered};
use crate::combinators::{bernoulli_race, BernoulliRace};
use crate::domain::AffineCubeDomain;
use crate::error::{FactoryError, Result};
use crate::lattice::{LevelOracle, LevelSchedule};
use crate::linalg::{nullspace, rank, solve_unique};
use crate::program::Draw;
use crate::rational::{fmt_point, Point};
use crate::target::TargetFunction;

/// Default cap on the dimension for vertex enumeration.
pub const DEFAULT_VERTEX_CAP: usize = 12;

/// A facet: the cube constraints `x_i = c` cutting it out, and its vertices
/// (indices into the polytope's vertex list).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Facet {
    pub constraints: Vec<(usize, bool)>,
    pub vertices: Vec<usize>,
}

/// Simplices of `T_w`, each a sorted list of vertex indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FanTriangulation {
    pub apex: usize,
    pub simplices: Vec<Vec<usize>>,
}

pub struct PolytopeP {
    domain: AffineCubeDomain,
    vertices: Vec<Point>,
    dim: usize,
    fans: Vec<FanTriangulation>,
    memo: Mutex<HashMap<Point, Arc<Vec<BigRational>>>>,
}

impl std::fmt::Debug for PolytopeP {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "PolytopeP(dim {}, {} vertices in [0,1]^{})",
            self.dim,
            self.vertices.len(),
            self.domain.n()
        )
    }
}

fn affine_dim(points: &[&Point]) -> usize {
    match points.split_first() {
        None => 0,
        Some((first, rest)) => {
            let diffs: Vec<Vec<BigRational>> = rest
                .iter()
                .map(|p| p.iter().zip(first.iter()).map(|(a, b)| a - b).collect())
                .collect();
            if diffs.is_empty() {
                0
            } else {
                rank(&diffs)
            }
        }
    }
}

/// Extreme points of `[0,1]^n ∩ {M x = b}`, sorted lexicographically.
///
/// Every vertex has `n` linearly independent tight constraints, so at most
/// `rank(M)` coordinates are strictly inside `(0,1)`. For each candidate set
/// of free coordinates and each 0/1 assignment of the rest, the free part
/// is the unique solution of the remaining equations when it exists.
pub fn enum_vertices(domain: &AffineCubeDomain, cap: usize) -> Result<Vec<Point>> {
    let n = domain.n();
    if n > cap {
        return Err(FactoryError::resource(format!(
            "vertex enumeration is capped at n = {cap}, got n = {n}"
        )));
    }
    let m = domain.matrix();
    let b = domain.rhs();
    let r = if m.is_empty() { 0 } else { rank(m) };
    let mut found: BTreeSet<Point> = BTreeSet::new();
    for mask in 0u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        if free.len() > r {
            continue;
        }
        let fixed: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 0).collect();
        let sub: Vec<Vec<BigRational>> = m.iter().map(|row| free.iter().map(|&j| row[j].clone()).collect()).collect();
        if !free.is_empty() && rank(&sub) < free.len() {
            continue;
        }
        for bits in 0u32..(1 << fixed.len()) {
            let mut x = vec![BigRational::zero(); n];
            for (k, &i) in fixed.iter().enumerate() {
                if bits >> k & 1 == 1 {
                    x[i] = BigRational::one();
                }
            }
            if free.is_empty() {
                if domain.satisfies_equations(&x) {
                    found.insert(x);
                }
                continue;
            }
            let rhs: Vec<BigRational> = m
                .iter()
                .zip(b)
                .map(|(row, bi)| bi - fixed.iter().map(|&i| &row[i] * &x[i]).sum::<BigRational>())
                .collect();
            let Some(sol) = solve_unique(&sub, &rhs) else {
                continue;
            };
            for (&j, v) in free.iter().zip(sol) {
                x[j] = v;
            }
            if domain.contains(&x) {
                found.insert(x);
            }
        }
    }
    Ok(found.into_iter().collect())
}

/// Facets of the face spanned by `vs` (of affine dimension `dim`), found as
/// maximal vertex subsets on a cube constraint with dimension `dim - 1`.
fn face_facets(vertices: &[Point], vs: &[usize], dim: usize) -> Vec<Facet> {
    if dim == 0 {
        return Vec::new();
    }
    let n = vertices[vs[0]].len();
    let mut out: Vec<Facet> = Vec::new();
    for i in 0..n {
        for c in [false, true] {
            let value = if c { BigRational::one() } else { BigRational::zero() };
            let on: Vec<usize> = vs.iter().copied().filter(|&v| vertices[v][i] == value).collect();
            if on.is_empty() || on.len() == vs.len() {
                continue;
            }
            let pts: Vec<&Point> = on.iter().map(|&v| &vertices[v]).collect();
            if affine_dim(&pts) + 1 != dim {
                continue;
            }
            match out.iter_mut().find(|f| f.vertices == on) {
                Some(f) => f.constraints.push((i, c)),
                None => out.push(Facet {
                    constraints: vec![(i, c)],
                    vertices: on,
                }),
            }
        }
    }
    out
}

fn fan(vertices: &[Point], vs: &[usize], dim: usize, apex: usize) -> Vec<Vec<usize>> {
    if vs.len() == dim + 1 {
        return vec![vs.to_vec()];
    }
    let mut out = Vec::new();
    for facet in face_facets(vertices, vs, dim) {
        if facet.vertices.contains(&apex) {
            continue;
        }
        // vertex indices follow lexicographic order, so the first is smallest
        let sub_apex = facet.vertices[0];
        for mut s in fan(vertices, &facet.vertices, dim - 1, sub_apex) {
            s.push(apex);
            s.sort_unstable();
            out.push(s);
        }
    }
    out.sort();
    out
}

impl PolytopeP {
    pub fn new(domain: AffineCubeDomain) -> Result<Self> {
        Self::with_cap(domain, DEFAULT_VERTEX_CAP)
    }

    pub fn with_cap(domain: AffineCubeDomain, cap: usize) -> Result<Self> {
        let vertices = enum_vertices(&domain, cap)?;
        if vertices.is_empty() {
            return Err(FactoryError::Infeasible("the polytope has no vertices".into()));
        }
        let dim = affine_dim(&vertices.iter().collect::<Vec<_>>());
        let all: Vec<usize> = (0..vertices.len()).collect();
        let fans = (0..vertices.len())
            .map(|w| FanTriangulation {
                apex: w,
                simplices: fan(&vertices, &all, dim, w),
            })
            .collect();
        Ok(PolytopeP {
            domain,
            vertices,
            dim,
            fans,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn domain(&self) -> &AffineCubeDomain {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.domain.n()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn contains(&self, p: &[BigRational]) -> bool {
        self.domain.contains(p)
    }

    pub fn facets(&self) -> Vec<Facet> {
        let all: Vec<usize> = (0..self.vertices.len()).collect();
        face_facets(&self.vertices, &all, self.dim)
    }

    /// `T_w` for vertex index `w`.
    pub fn fan_triangulation(&self, w: usize) -> Result<&FanTriangulation> {
        self.fans
            .get(w)
            .ok_or_else(|| FactoryError::usage(format!("vertex index {w} out of range")))
    }

    fn check_member(&self, p: &[BigRational]) -> Result<()> {
        if p.len() != self.n() || !self.contains(p) {
            return Err(FactoryError::usage(format!("{} is not in the polytope", fmt_point(p))));
        }
        Ok(())
    }

    /// Barycentric coordinates of `p` in `simplex`, if it lies inside.
    fn barycentric(&self, simplex: &[usize], p: &[BigRational]) -> Option<Vec<BigRational>> {
        let n = self.n();
        let mut a: Vec<Vec<BigRational>> = (0..n)
            .map(|i| simplex.iter().map(|&v| self.vertices[v][i].clone()).collect())
            .collect();
        a.push(vec![BigRational::one(); simplex.len()]);
        let mut rhs = p.to_vec();
        rhs.push(BigRational::one());
        let lambda = solve_unique(&a, &rhs)?;
        lambda.iter().all(|l| !l.is_negative()).then_some(lambda)
    }

    /// `g^(w)_v(p)` for every vertex `v`: barycentric coordinates of `p` in
    /// the first simplex of `T_w` (in sorted order) that contains it.
    pub fn locate_and_decompose(&self, fan: &FanTriangulation, p: &[BigRational]) -> Result<Vec<BigRational>> {
        self.check_member(p)?;
        for simplex in &fan.simplices {
            if let Some(lambda) = self.barycentric(simplex, p) {
                let mut out = vec![BigRational::zero(); self.vertices.len()];
                for (&v, l) in simplex.iter().zip(lambda) {
                    out[v] = l;
                }
                return Ok(out);
            }
        }
        Err(FactoryError::domain(format!(
            "no simplex of the fan at vertex {} contains {}",
            fan.apex + 1,
            fmt_point(p)
        )))
    }

    /// `f_v(p) = (1/|V|) sum_w g^(w)_v(p)` for every vertex (memoised).
    pub fn f_v(&self, p: &[BigRational]) -> Result<Arc<Vec<BigRational>>> {
        if let Some(v) = self.memo.lock().get(p) {
            return Ok(v.clone());
        }
        self.check_member(p)?;
        let mut total = vec![BigRational::zero(); self.vertices.len()];
        for fan in &self.fans {
            for (acc, g) in total.iter_mut().zip(self.locate_and_decompose(fan, p)?) {
                *acc += g;
            }
        }
        let count = BigRational::from_integer(self.vertices.len().into());
        let out: Arc<Vec<BigRational>> = Arc::new(total.into_iter().map(|x| x / &count).collect());
        self.memo.lock().insert(p.to_vec(), out.clone());
        Ok(out)
    }
}

/// One `(vertex, facet)` pair with no witnessing coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub vertex: usize,
    pub facet: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateWitnessReport {
    pub pairs_checked: usize,
    pub counterexamples: Vec<Counterexample>,
}

impl CoordinateWitnessReport {
    pub fn pass(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// For every vertex `v` and facet `F` not containing it, looks for `i` with
/// `v_i > 0` and `x_i = 0` on `F`, or `v_i < 1` and `x_i = 1` on `F`.
pub fn coordinate_witness_check(vertices: &[Point], facets: &[Vec<usize>]) -> CoordinateWitnessReport {
    let mut pairs_checked = 0;
    let mut counterexamples = Vec::new();
    let one = BigRational::one();
    for (v, vertex) in vertices.iter().enumerate() {
        for facet in facets {
            if facet.contains(&v) {
                continue;
            }
            pairs_checked += 1;
            let witnessed = (0..vertex.len()).any(|i| {
                (vertex[i].is_positive() && facet.iter().all(|&x| vertices[x][i].is_zero()))
                    || (vertex[i] < one && facet.iter().all(|&x| vertices[x][i].is_one()))
            });
            if !witnessed {
                counterexamples.push(Counterexample {
                    vertex: v,
                    facet: facet.clone(),
                });
            }
        }
    }
    CoordinateWitnessReport {
        pairs_checked,
        counterexamples,
    }
}

/// The coordinate-witness property for a polytope of the cube ∩ affine form.
pub fn lemma71_check(p: &PolytopeP) -> CoordinateWitnessReport {
    let facets: Vec<Vec<usize>> = p.facets().into_iter().map(|f| f.vertices).collect();
    coordinate_witness_check(p.vertices(), &facets)
}

/// Facets of `conv(points)` by supporting hyperplanes within its affine
/// hull; works for any point set, not only cube ∩ affine polytopes.
pub fn hull_facets(points: &[Point]) -> Vec<Vec<usize>> {
    let refs: Vec<&Point> = points.iter().collect();
    let dim = affine_dim(&refs);
    if dim == 0 {
        return Vec::new();
    }
    let origin = &points[0];
    let diff = |p: &Point| -> Vec<BigRational> { p.iter().zip(origin).map(|(a, b)| a - b).collect() };
    // basis of the direction space of the hull
    let mut basis: Vec<Vec<BigRational>> = Vec::new();
    for p in &points[1..] {
        let d = diff(p);
        let mut trial = basis.clone();
        trial.push(d.clone());
        if rank(&trial) > basis.len() {
            basis = trial;
        }
    }
    let dot = |a: &[BigRational], b: &[BigRational]| -> BigRational { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut facets: BTreeSet<Vec<usize>> = BTreeSet::new();
    let m = points.len();
    let mut choose = vec![0usize; dim];
    fn next(choose: &mut [usize], m: usize) -> bool {
        let d = choose.len();
        for i in (0..d).rev() {
            if choose[i] < m - d + i {
                choose[i] += 1;
                for j in i + 1..d {
                    choose[j] = choose[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, c) in choose.iter_mut().enumerate() {
        *c = i;
    }
    loop {
        let s0 = &points[choose[0]];
        // normal a = sum_j c_j basis_j with a . (s_i - s0) = 0
        let rows: Vec<Vec<BigRational>> = choose[1..]
            .iter()
            .map(|&i| {
                let d: Vec<BigRational> = points[i].iter().zip(s0).map(|(a, b)| a - b).collect();
                basis.iter().map(|bj| dot(bj, &d)).collect()
            })
            .collect();
        let null = if rows.is_empty() {
            nullspace(&[vec![BigRational::zero(); dim]], dim)
        } else {
            nullspace(&rows, dim)
        };
        if null.len() == 1 {
            let coeffs = &null[0];
            let normal: Vec<BigRational> = (0..origin.len())
                .map(|k| basis.iter().zip(coeffs).map(|(bj, c)| &bj[k] * c).sum())
                .collect();
            let side: Vec<BigRational> = points
                .iter()
                .map(|p| {
                    let d: Vec<BigRational> = p.iter().zip(s0).map(|(a, b)| a - b).collect();
                    dot(&normal, &d)
                })
                .collect();
            let supporting =
                side.iter().all(|s| !s.is_negative()) || side.iter().all(|s| !s.is_positive());
            if supporting {
                facets.insert((0..m).filter(|&i| side[i].is_zero()).collect());
            }
        }
        if !next(&mut choose, m) {
            break;
        }
    }
    facets.into_iter().collect()
}

/// Samples vertex `v` with probability `f_v(p)`.
#[derive(Clone)]
pub struct CombinatorialFactory {
    polytope: Arc<PolytopeP>,
    oracles: Vec<Arc<LevelOracle>>,
    race: Option<BernoulliRace>,
}

impl std::fmt::Debug for CombinatorialFactory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CombinatorialFactory({:?})", self.polytope)
    }
}

/// `f_v` as a target function on `P`.
pub fn vertex_target(polytope: &Arc<PolytopeP>, v: usize) -> TargetFunction {
    let p = polytope.clone();
    let label = fmt_point(&polytope.vertices()[v]);
    TargetFunction::new(format!("f_v at {label}"), polytope.n(), move |x| Ok(p.f_v(x)?[v].clone()))
}

/// Subdomain factories for every `f_v`, raced. A single-vertex polytope
/// needs no coins at all.
pub fn combinatorial_factory(
    polytope: Arc<PolytopeP>,
    schedule: LevelSchedule,
    eps: &BigRational,
) -> Result<CombinatorialFactory> {
    if polytope.vertices().len() == 1 {
        return Ok(CombinatorialFactory {
            polytope,
            oracles: Vec::new(),
            race: None,
        });
    }
    let first = LevelOracle::subdomain(vertex_target(&polytope, 0), schedule, polytope.domain(), eps)?;
    let mut oracles = vec![];
    for v in 1..polytope.vertices().len() {
        oracles.push(Arc::new(first.sibling(vertex_target(&polytope, v))?));
    }
    oracles.insert(0, Arc::new(first));
    let race = bernoulli_race(oracles.iter().map(|o| o.program()).collect())?;
    Ok(CombinatorialFactory {
        polytope,
        oracles,
        race: Some(race),
    })
}

impl CombinatorialFactory {
    pub fn polytope(&self) -> &Arc<PolytopeP> {
        &self.polytope
    }

    pub fn oracles(&self) -> &[Arc<LevelOracle>] {
        &self.oracles
    }

    /// Index of the sampled vertex.
    pub fn sample_index(&self, src: &mut dyn CoinSource) -> Result<usize, Interrupt> {
        match &self.race {
            None => Ok(0),
            Some(race) => race.sample(src),
        }
    }

    pub fn sample(&self, bank: &mut CoinBank, budget: FlipBudget) -> Result<Draw<usize>> {
        if bank.num_coins() != self.polytope.n() {
            return Err(FactoryError::usage("bank size differs from the polytope dimension"));
        }
        if !self.polytope.contains(bank.biases()) {
            return Err(FactoryError::usage("the coin biases are not in the polytope"));
        }
        let mut src = Metered::new(bank, budget);
        match self.sample_index(&mut src) {
            Ok(v) => Ok(Draw::Value(v)),
            Err(Interrupt::BudgetExhausted) => Ok(Draw::BudgetExhausted(src.used())),
            Err(Interrupt::Failed(e)) => Err(e),
            Err(Interrupt::Truncated) => Err(FactoryError::usage("unexpected truncation")),
        }
    }
}
