//! End-to-end acceptance checks. Each test prints one `criterion N PASS|FAIL`
//! line straight to stdout (bypassing the test harness capture) and then
//! asserts the same verdict.

use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use bernoulli_factory::domain::{lemma52_check, random_event, subdomain_factory};
use bernoulli_factory::faces::{check_1d, check_poly_bounded};
use bernoulli_factory::harness::{chi_square, outcome_draw, run_trials, TrialReport, DEFAULT_ALPHA};
use bernoulli_factory::lattice::general_factory;
use bernoulli_factory::polytope::{combinatorial_factory, coordinate_witness_check, hull_facets, lemma71_check, PolytopeP};
use bernoulli_factory::program::exact_eval;
use bernoulli_factory::rational::{binomial, fmt_point, int, pow, rat, to_f64, Point};
use bernoulli_factory::sampford::{
    boundary_sampford, classic_sampford, fbar_all, fbar_target, indicator, k_subsets, naive_sampford, sampford_bound_cert,
    subset_label,
};
use bernoulli_factory::target::builtin;
use bernoulli_factory::{
    AffineCubeDomain, BoundCertificate, CoinBank, Draw, FactoryProgram, FiniteTree, FlipBudget, LatticeGeometry,
    LevelOracle, LevelSchedule, TargetFunction,
};
use num::{BigRational, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;
const MC_TRIALS: u64 = 100_000;

// Criteria run one at a time so their wall-clock times are meaningful.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: u32, title: &str, pass: bool, detail: &[String]) {
    let mut out = std::io::stdout().lock();
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(out, "criterion {n:>2} {tag}  {title}");
    for d in detail {
        let _ = writeln!(out, "              {d}");
    }
    let _ = out.flush();
    assert!(pass, "criterion {n} failed: {title}\n{}", detail.join("\n"));
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn random_unit(rng: &mut ChaCha8Rng) -> BigRational {
    let den = rng.gen_range(1..=1000i64);
    rat(rng.gen_range(0..=den), den)
}

/// A random rational convex combination of `vertices`; about a third of the
/// weights are zero so faces get exercised too.
fn random_point_in(rng: &mut ChaCha8Rng, vertices: &[Point]) -> Point {
    loop {
        let w: Vec<i64> = vertices
            .iter()
            .map(|_| if rng.gen_bool(1.0 / 3.0) { 0 } else { rng.gen_range(1..=100) })
            .collect();
        let total: i64 = w.iter().sum();
        if total == 0 {
            continue;
        }
        let n = vertices[0].len();
        return (0..n)
            .map(|i| {
                vertices
                    .iter()
                    .zip(&w)
                    .map(|(v, &wi)| &v[i] * int(wi))
                    .sum::<BigRational>()
                    / int(total)
            })
            .collect();
    }
}

fn simulate(program: &FactoryProgram, p: Point, trials: u64) -> TrialReport {
    let bank = CoinBank::new(p, SEED).unwrap();
    let run = run_trials("acceptance", &bank, trials, SEED, FlipBudget::UNBOUNDED, |b, budget| {
        Ok(outcome_draw(program.run(b, budget)?))
    });
    run_report(&run, None)
}

fn run_report(run: &bernoulli_factory::harness::TrialRun, oracle: Option<&[(String, BigRational)]>) -> TrialReport {
    TrialReport::new(run, oracle, DEFAULT_ALPHA)
}

fn frequency_line(label: &str, report: &TrialReport, target: &BigRational) -> (bool, String) {
    let ones = report.row("1").map_or(0, |r| r.count);
    let z = bernoulli_factory::harness::z_score(ones, report.completed, target);
    let ok = report.completed > 0 && z.abs() <= 3.0;
    let mut s = format!(
        "{label}: {ones}/{} ones, target {} ({:.5}), z = {z:+.2}",
        report.completed,
        target,
        to_f64(target)
    );
    if report.failed > 0 || report.exhausted > 0 {
        s += &format!(", {} failed, {} exhausted", report.failed, report.exhausted);
    }
    (ok, s)
}

fn quarter_affine() -> TargetFunction {
    TargetFunction::new("(1+2p)/4", 1, |p| Ok((int(1) + &p[0] * int(2)) / int(4)))
}

fn segment() -> AffineCubeDomain {
    AffineCubeDomain::new(2, vec![vec![int(1), int(1)]], vec![rat(1, 2)]).unwrap()
}

#[test]
fn criterion_01_intro_tree() {
    let _g = serial();
    let start = Instant::now();
    let tree = FiniteTree::two_heads_then_tail([0, 0, 0]);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut exact_ok = true;
    for _ in 0..20 {
        let p = random_unit(&mut rng);
        let want = &p * &p - &p * &p * &p;
        exact_ok &= exact_eval(&tree, &[p]).unwrap() == want;
    }
    let report = simulate(&tree.into(), vec![rat(1, 2)], MC_TRIALS);
    let (mc_ok, line) = frequency_line("p = 1/2", &report, &rat(1, 8));
    let elapsed = start.elapsed();
    let fast = elapsed < Duration::from_secs(5);
    verdict(
        1,
        "p^2(1-p) tree: exact at 20 random p, Monte Carlo within 3 sigma",
        exact_ok && mc_ok && fast,
        &[
            format!("exact_eval = p^2 - p^3 at 20 points: {exact_ok}"),
            line,
            format!("runtime {} (limit 5 s)", secs(elapsed)),
        ],
    );
}

/// `g_k` and the partial sums for `(1+2p)/4` with `t = 64`, by direct
/// binomial enumeration over the 65 lattice points.
fn independent_partial_sums(levels: usize, t: u32) -> Vec<Vec<BigRational>> {
    let lattice: Vec<BigRational> = (0..=t).map(|c| rat(c as i64, t as i64)).collect();
    let weights = |x: &BigRational| -> Vec<BigRational> {
        let q = BigRational::one() - x;
        (0..=t)
            .map(|c| BigRational::from_integer(binomial(t as u64, c as u64)) * pow(x, c) * pow(&q, t - c))
            .collect()
    };
    let w: Vec<Vec<BigRational>> = lattice.iter().map(weights).collect();
    let mut f: Vec<BigRational> = lattice.iter().map(|x| (int(1) + x * int(2)) / int(4)).collect();
    let mut sums = vec![BigRational::zero(); lattice.len()];
    let mut out = Vec::new();
    let mut weight = rat(1, 4);
    for _ in 0..levels {
        let hit: Vec<bool> = f.iter().map(|v| v >= &rat(1, 2)).collect();
        let g: Vec<BigRational> = w
            .iter()
            .map(|row| row.iter().zip(&hit).filter(|(_, h)| **h).map(|(wc, _)| wc.clone()).sum())
            .collect();
        for (s, gi) in sums.iter_mut().zip(&g) {
            *s += &weight * gi;
        }
        out.push(sums.clone());
        f = f.iter().zip(&g).map(|(fi, gi)| (fi - gi / int(4)) * rat(4, 3)).collect();
        weight *= rat(3, 4);
    }
    out
}

#[test]
fn criterion_02_partial_sum_sandwich() {
    let _g = serial();
    let start = Instant::now();
    let oracle = LevelOracle::general(quarter_affine(), LevelSchedule::constant(64).unwrap()).unwrap();
    let independent = independent_partial_sums(6, 64);
    let mut sandwich_ok = true;
    let mut agree = true;
    let mut tightest = None::<BigRational>;
    for k in 1..=6usize {
        let bound = pow(&rat(3, 4), k as u32);
        for i in 0..=16i64 {
            let p = rat(i, 16);
            let s = oracle.partial_sum(k, &[p.clone()]).unwrap();
            agree &= s == independent[k - 1][(i * 4) as usize];
            let r = (int(1) + &p * int(2)) / int(4) - s;
            sandwich_ok &= !r.is_negative() && r <= bound;
            let slack = &bound - &r;
            if tightest.as_ref().map_or(true, |t| &slack < t) {
                tightest = Some(slack);
            }
        }
    }
    let elapsed = start.elapsed();
    let fast = elapsed < Duration::from_secs(120);
    verdict(
        2,
        "partial sums of (1+2p)/4, t = 64: 0 <= f - S_k <= (3/4)^k at 17 points, k = 1..6",
        sandwich_ok && agree && fast,
        &[
            format!(
                "sandwich holds: {sandwich_ok}; smallest upper slack {:.3e}",
                to_f64(tightest.as_ref().unwrap())
            ),
            format!("matches direct binomial enumeration: {agree}"),
            format!("runtime {} (limit 120 s)", secs(elapsed)),
        ],
    );
}

#[test]
fn criterion_03_general_factory() {
    let _g = serial();
    let start = Instant::now();
    let program = general_factory(quarter_affine(), LevelSchedule::constant(64).unwrap()).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for p in [rat(0, 1), rat(1, 4), rat(1, 2), rat(1, 1)] {
        let target = (int(1) + &p * int(2)) / int(4);
        let report = simulate(&program, vec![p.clone()], MC_TRIALS);
        let (good, line) = frequency_line(&format!("p = {p}"), &report, &target);
        ok &= good;
        lines.push(line);
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(600);
    lines.push(format!("runtime {} (limit 600 s)", secs(elapsed)));
    verdict(3, "general factory for (1+2p)/4 at p = 0, 1/4, 1/2, 1", ok, &lines);
}

/// `P[Y ∈ A]` and `P[X̄ ∈ A]` on the line `x1 + x2 = 1` by direct enumeration.
fn independent_line_domination(t: u32, eps: &BigRational, p: &[BigRational], event: &dyn Fn(&[u32]) -> bool) -> (BigRational, BigRational) {
    let coin = |q: &BigRational, c: u32| {
        BigRational::from_integer(binomial(t as u64, c as u64)) * pow(q, c) * pow(&(BigRational::one() - q), t - c)
    };
    let (mut acc, mut acc_in_a, mut in_a) = (BigRational::zero(), BigRational::zero(), BigRational::zero());
    for a in 0..=t {
        for b in 0..=t {
            let w = coin(&p[0], a) * coin(&p[1], b);
            let dist = (rat(a as i64 + b as i64, t as i64) - int(1)).abs() / int(2);
            let hit = event(&[a, b]);
            if hit {
                in_a += &w;
            }
            if &dist < eps {
                acc += &w;
                if hit {
                    acc_in_a += &w;
                }
            }
        }
    }
    (acc_in_a / acc, in_a)
}

#[test]
fn criterion_04_domination() {
    let _g = serial();
    let start = Instant::now();
    let limit = 1 << 20;
    let mut checks = 0u64;
    let mut violations = 0u64;
    let mut mismatches = 0u64;
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    let cases: Vec<(&str, AffineCubeDomain, BigRational, Vec<u32>, Vec<Point>)> = vec![
        (
            "k-subset n=2 k=1",
            AffineCubeDomain::k_subset(2, 1).unwrap(),
            rat(2, 5),
            (9..=12).collect(),
            vec![
                vec![rat(1, 2), rat(1, 2)],
                vec![rat(1, 3), rat(2, 3)],
                vec![rat(1, 10), rat(9, 10)],
                vec![int(1), int(0)],
            ],
        ),
        ("birkhoff 1x1", AffineCubeDomain::birkhoff(1).unwrap(), rat(1, 2), (5..=12).collect(), vec![vec![int(1)]]),
        (
            "birkhoff 2x2",
            AffineCubeDomain::birkhoff(2).unwrap(),
            rat(1, 2),
            vec![7, 12],
            vec![
                vec![rat(1, 2), rat(1, 2), rat(1, 2), rat(1, 2)],
                vec![rat(1, 3), rat(2, 3), rat(2, 3), rat(1, 3)],
                vec![int(1), int(0), int(0), int(1)],
            ],
        ),
    ];
    for (name, domain, eps, ts, points) in &cases {
        let n = domain.n();
        let mut case_checks = 0;
        for &t in ts {
            let need = (8.0 * n as f64).ln() / (2.0 * to_f64(eps).powi(2));
            assert!(t as f64 >= need, "{name}: t = {t} is below ln(8n)/(2 eps^2) = {need:.2}");
            let geometry = LatticeGeometry::new(n, t, Some(domain), Some(eps), limit).unwrap();
            for p in points {
                for e in 0..50u64 {
                    let event = random_event(1000 * t as u64 + e);
                    let r = lemma52_check(&geometry, p, &event).unwrap();
                    checks += 1;
                    case_checks += 1;
                    if !r.holds {
                        violations += 1;
                    }
                    if r.unconditioned.is_positive() {
                        worst = worst.max(to_f64(&(&r.conditioned / &r.unconditioned)));
                    }
                    if n == 2 {
                        let (y, x) = independent_line_domination(t, eps, p, &event);
                        if y != r.conditioned || x != r.unconditioned {
                            mismatches += 1;
                        }
                    }
                }
            }
        }
        lines.push(format!("{name}: eps = {eps}, t in {ts:?}, {} points, {case_checks} checks", points.len()));
    }
    lines.push(format!(
        "{checks} checks, {violations} violations, largest P[Y in A]/P[X in A] = {worst:.3}, {mismatches} disagreements with direct enumeration"
    ));
    lines.push(format!("runtime {}", secs(start.elapsed())));
    verdict(
        4,
        "domination P[Y in A] <= 2 P[X in A] over 50 random events",
        violations == 0 && mismatches == 0,
        &lines,
    );
}

#[test]
fn criterion_05_ratio_on_segment() {
    let _g = serial();
    let start = Instant::now();
    let k = segment();
    // (3/10, 1/10) has p1 + p2 = 2/5 and lies off the segment; (3/8, 1/8) is
    // the segment point with the same ratio 3/4.
    assert!(!k.contains(&[rat(3, 10), rat(1, 10)]));
    let program = subdomain_factory(builtin("ratio").unwrap(), &k, LevelSchedule::constant(64).unwrap(), &rat(1, 256)).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for p in [vec![rat(3, 8), rat(1, 8)], vec![rat(1, 2), int(0)], vec![int(0), rat(1, 2)]] {
        let target = &p[0] / (&p[0] + &p[1]);
        let report = simulate(&program, p.clone(), MC_TRIALS);
        let (good, line) = frequency_line(&fmt_point(&p), &report, &target);
        ok &= good;
        lines.push(line);
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(900);
    lines.push(format!("t = 64, eps = 1/256; runtime {} (limit 900 s)", secs(elapsed)));
    verdict(5, "p1/(p1+p2) on the segment x1 + x2 = 1/2", ok, &lines);
}

#[test]
fn criterion_06_sampford_boundary() {
    let _g = serial();
    let start = Instant::now();
    let p = vec![int(1), int(1), int(0)];
    let bank = CoinBank::new(p.clone(), SEED).unwrap();
    let classic = run_trials("classic", &bank, 1000, SEED, FlipBudget::limited(10_000), |b, budget| {
        Ok(match classic_sampford(b, 2, budget)? {
            Draw::Value(o) => Draw::Value(subset_label(&o.subset)),
            Draw::BudgetExhausted(n) => Draw::BudgetExhausted(n),
        })
    });
    let sampler = boundary_sampford(3, 2, LevelSchedule::constant(16).unwrap(), &rat(1, 192)).unwrap();
    let boundary = run_trials("boundary", &bank, 1000, SEED, FlipBudget::UNBOUNDED, |b, budget| {
        Ok(match sampler.sample(b, budget)? {
            Draw::Value(o) => Draw::Value(subset_label(&o.subset)),
            Draw::BudgetExhausted(n) => Draw::BudgetExhausted(n),
        })
    });
    let hits = boundary.counts().get("{1,2}").copied().unwrap_or(0);
    let max_flips = boundary.records.iter().map(|r| r.flips).max().unwrap_or(0);
    let elapsed = start.elapsed();
    let ok = classic.exhausted() == 1000 && hits == 1000 && elapsed < Duration::from_secs(600);
    verdict(
        6,
        "Sampford at p = (1, 1, 0), k = 2: classic never finishes, boundary always returns {1,2}",
        ok,
        &[
            format!("classic: {}/1000 trials exhausted the 10^4-flip budget", classic.exhausted()),
            format!(
                "boundary: {hits}/1000 trials returned {{1,2}} ({} failed), at most {max_flips} draws",
                boundary.failed()
            ),
            format!("runtime {} (limit 600 s)", secs(elapsed)),
        ],
    );
}

#[test]
fn criterion_07_sampford_identities() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut ok = true;
    let mut lines = Vec::new();
    for (n, k) in [(3usize, 2usize), (4, 2), (5, 3)] {
        let vertices: Vec<Point> = k_subsets(n, k).iter().map(|u| indicator(n, u)).collect();
        let mut good = 0;
        for _ in 0..50 {
            let p = random_point_in(&mut rng, &vertices);
            let fbar = fbar_all(&p, k).unwrap();
            let total: BigRational = fbar.iter().map(|(_, w)| w.clone()).sum();
            let mean: Point = (0..n)
                .map(|i| fbar.iter().filter(|(u, _)| u.contains(&i)).map(|(_, w)| w.clone()).sum())
                .collect();
            let nonneg = fbar.iter().all(|(_, w)| !w.is_negative());
            if total.is_one() && mean == p && nonneg {
                good += 1;
            }
        }
        ok &= good == 50;
        lines.push(format!("(n, k) = ({n}, {k}): {good}/50 points exact"));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    lines.push(format!("runtime {} (limit 60 s)", secs(elapsed)));
    verdict(7, "sum_U fbar_U = 1 and sum_U fbar_U e_U = p", ok, &lines);
}

#[test]
fn criterion_08_sampford_certificate() {
    let _g = serial();
    let mut ok = true;
    let mut lines = Vec::new();
    for (n, k) in [(3usize, 2usize), (4, 2)] {
        let choose = binomial(n as u64, k as u64).to_i64().unwrap();
        let c = rat(1, ((n - k) * k) as i64 * choose);
        let cert = BoundCertificate::new(c.clone(), 1).unwrap();
        assert_eq!(sampford_bound_cert(n, k).unwrap(), cert);
        let domain = AffineCubeDomain::k_subset(n, k).unwrap();
        let mut passed = 0;
        let subsets = k_subsets(n, k);
        for u in &subsets {
            let f = fbar_target(n, u).unwrap();
            if check_poly_bounded(&f, &cert, &rat(1, 8), Some(&domain)).unwrap().pass() {
                passed += 1;
            }
        }
        ok &= passed == subsets.len();
        lines.push(format!("(n, k) = ({n}, {k}), c = {c}: {passed}/{} subsets pass", subsets.len()));
    }
    verdict(8, "fbar_U >= c * face_poly on K, m = 1, mesh 1/8", ok, &lines);
}

#[test]
fn criterion_09_vertex_weights() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, domain) in [
        ("triangle (3,2)", AffineCubeDomain::k_subset(3, 2).unwrap()),
        ("birkhoff 2x2", AffineCubeDomain::birkhoff(2).unwrap()),
        ("cube n=3", AffineCubeDomain::cube(3).unwrap()),
    ] {
        let poly = PolytopeP::new(domain).unwrap();
        let mut good = 0;
        for _ in 0..50 {
            let p = random_point_in(&mut rng, poly.vertices());
            let w = poly.f_v(&p).unwrap();
            let total: BigRational = w.iter().sum();
            let mean: Point = (0..poly.n())
                .map(|i| poly.vertices().iter().zip(w.iter()).map(|(v, wv)| &v[i] * wv).sum())
                .collect();
            if total.is_one() && mean == p && w.iter().all(|x| !x.is_negative()) {
                good += 1;
            }
        }
        let witness = lemma71_check(&poly);
        ok &= good == 50 && witness.pass();
        lines.push(format!(
            "{name}: {good}/50 points exact; coordinate witnesses {} ({} pairs)",
            if witness.pass() { "pass" } else { "fail" },
            witness.pairs_checked
        ));
    }
    let free = vec![vec![int(0), int(0)], vec![int(1), int(0)], vec![int(0), int(1)]];
    let r = coordinate_witness_check(&free, &hull_facets(&free));
    let caught = !r.pass() && r.counterexamples.iter().any(|c| c.vertex == 0);
    ok &= caught;
    lines.push(format!(
        "free triangle (0,0), (1,0), (0,1): {} counterexample(s), vertex (0, 0) flagged: {caught}",
        r.counterexamples.len()
    ));
    lines.push(format!("runtime {}", secs(start.elapsed())));
    verdict(9, "sum_v f_v = 1, sum_v f_v v = p, and the coordinate witness check", ok, &lines);
}

struct VertexCase {
    name: &'static str,
    domain: AffineCubeDomain,
    t: u32,
    eps: BigRational,
    points: Vec<Point>,
}

fn fractions(xs: &[(i64, i64)]) -> Point {
    xs.iter().map(|&(a, b)| rat(a, b)).collect()
}

#[test]
fn criterion_10_combinatorial_factory() {
    let _g = serial();
    let start = Instant::now();
    let cases = vec![
        VertexCase {
            name: "triangle (3,2)",
            domain: AffineCubeDomain::k_subset(3, 2).unwrap(),
            t: 16,
            eps: rat(1, 192),
            points: vec![
                fractions(&[(2, 3), (2, 3), (2, 3)]),
                fractions(&[(1, 2), (3, 4), (3, 4)]),
                fractions(&[(5, 6), (1, 2), (2, 3)]),
                fractions(&[(1, 1), (1, 2), (1, 2)]),
                fractions(&[(1, 1), (1, 1), (0, 1)]),
            ],
        },
        VertexCase {
            name: "birkhoff 2x2",
            domain: AffineCubeDomain::birkhoff(2).unwrap(),
            t: 16,
            eps: rat(1, 8),
            points: vec![
                fractions(&[(1, 2), (1, 2), (1, 2), (1, 2)]),
                fractions(&[(1, 4), (3, 4), (3, 4), (1, 4)]),
                fractions(&[(2, 3), (1, 3), (1, 3), (2, 3)]),
                fractions(&[(1, 1), (0, 1), (0, 1), (1, 1)]),
                fractions(&[(0, 1), (1, 1), (1, 1), (0, 1)]),
            ],
        },
        VertexCase {
            name: "cube n=3",
            domain: AffineCubeDomain::cube(3).unwrap(),
            t: 16,
            eps: rat(1, 192),
            points: vec![
                fractions(&[(1, 2), (1, 3), (1, 4)]),
                fractions(&[(1, 2), (1, 2), (1, 2)]),
                fractions(&[(2, 3), (1, 4), (3, 4)]),
                fractions(&[(1, 1), (1, 2), (1, 3)]),
                fractions(&[(0, 1), (1, 1), (1, 2)]),
            ],
        },
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for case in cases {
        let poly = Arc::new(PolytopeP::new(case.domain.clone()).unwrap());
        let factory = combinatorial_factory(poly.clone(), LevelSchedule::constant(case.t).unwrap(), &case.eps).unwrap();
        let labels: Vec<String> = poly.vertices().iter().map(|v| fmt_point(v)).collect();
        lines.push(format!("{}: t = {}, eps = {}", case.name, case.t, case.eps));
        for p in &case.points {
            let weights = poly.f_v(p).unwrap();
            let oracle: Vec<(String, BigRational)> = labels.iter().cloned().zip(weights.iter().cloned()).collect();
            let bank = CoinBank::new(p.clone(), SEED).unwrap();
            let run = run_trials("combinatorial", &bank, MC_TRIALS, SEED, FlipBudget::UNBOUNDED, |b, budget| {
                Ok(match factory.sample(b, budget)? {
                    Draw::Value(v) => Draw::Value(labels[v].clone()),
                    Draw::BudgetExhausted(n) => Draw::BudgetExhausted(n),
                })
            });
            let report = run_report(&run, Some(&oracle));
            let z_max = report.max_abs_z();
            let freq_ok = report.completed > 0 && z_max <= 3.0;
            // E[v_i] = p_i and v_i is 0/1, so Var(v_i) = p_i (1 - p_i).
            let completed = report.completed as f64;
            let mut mean_z = 0.0f64;
            for i in 0..poly.n() {
                let hits: u64 = poly
                    .vertices()
                    .iter()
                    .zip(&labels)
                    .filter(|(v, _)| v[i].is_one())
                    .map(|(_, l)| report.row(l).map_or(0, |r| r.count))
                    .sum();
                let pi = to_f64(&p[i]);
                let sd = (pi * (1.0 - pi) / completed).sqrt();
                let dev = hits as f64 / completed - pi;
                let z = if sd == 0.0 {
                    if dev == 0.0 { 0.0 } else { f64::INFINITY }
                } else {
                    dev / sd
                };
                mean_z = mean_z.max(z.abs());
            }
            let mean_ok = report.completed > 0 && mean_z <= 3.0;
            ok &= freq_ok && mean_ok;
            let mut line = format!(
                "  {}: {}/{} completed, max |z| vertices {z_max:.2}, mean {mean_z:.2}{}",
                fmt_point(p),
                report.completed,
                report.trials,
                if freq_ok && mean_ok { "" } else { "  <-- outside 3 sigma" }
            );
            if report.failed > 0 {
                line += &format!(", {} failed trials", report.failed);
            }
            lines.push(line);
        }
    }
    lines.push(format!("runtime {}", secs(start.elapsed())));
    verdict(10, "combinatorial factory vertex frequencies and mean vector", ok, &lines);
}

#[test]
fn criterion_11_naive_sampler_rejected() {
    let _g = serial();
    let p = fractions(&[(9, 10), (9, 10), (1, 5)]);
    let oracle: Vec<(String, BigRational)> =
        fbar_all(&p, 2).unwrap().into_iter().map(|(u, w)| (subset_label(&u), w)).collect();
    let bank = CoinBank::new(p, SEED).unwrap();
    let label = |d: Draw<bernoulli_factory::sampford::SubsetOutcome>| match d {
        Draw::Value(o) => Draw::Value(subset_label(&o.subset)),
        Draw::BudgetExhausted(n) => Draw::BudgetExhausted(n),
    };
    let naive = run_trials("naive", &bank, MC_TRIALS, SEED, FlipBudget::UNBOUNDED, |b, budget| {
        Ok(label(naive_sampford(b, 2, budget)?))
    });
    let classic = run_trials("classic", &bank, MC_TRIALS, SEED, FlipBudget::UNBOUNDED, |b, budget| {
        Ok(label(classic_sampford(b, 2, budget)?))
    });
    let chi = |run: &bernoulli_factory::harness::TrialRun| {
        let r = run_report(run, Some(&oracle));
        let counts: Vec<u64> = r.rows.iter().filter(|row| row.oracle.is_some()).map(|row| row.count).collect();
        let probs: Vec<BigRational> = r.rows.iter().filter_map(|row| row.oracle.clone()).collect();
        chi_square(&counts, &probs, DEFAULT_ALPHA)
    };
    let (bad, good) = (chi(&naive), chi(&classic));
    verdict(
        11,
        "chi-square rejects the naive single-pass sampler at p = (0.9, 0.9, 0.2)",
        !bad.pass && good.pass,
        &[
            format!("naive: statistic {:.1} vs critical {:.1} (dof {}), rejected: {}", bad.statistic, bad.critical, bad.dof, !bad.pass),
            format!("classic: statistic {:.1} vs critical {:.1}, accepted: {}", good.statistic, good.critical, good.pass),
        ],
    );
}

#[test]
fn criterion_12_one_dimensional_reduction() {
    let _g = serial();
    let mesh = rat(1, 16);
    let cases: Vec<(TargetFunction, BigRational, u32)> = vec![
        (quarter_affine(), rat(1, 4), 1),
        (builtin("intro").unwrap(), int(1), 2),
        (builtin("identity").unwrap(), int(1), 1),
        (builtin("square").unwrap(), int(1), 2),
        (builtin("half").unwrap(), rat(1, 2), 1),
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for (f, c, m) in cases {
        let cert = BoundCertificate::new(c.clone(), m).unwrap();
        let faces = check_poly_bounded(&f, &cert, &mesh, None).unwrap().pass()
            && check_poly_bounded(&f.complement(), &cert, &mesh, None).unwrap().pass();
        // ceil(log2(1/c)) by doubling, in exact arithmetic
        let mut bits = 0u32;
        while pow(&rat(1, 2), bits) > c {
            bits += 1;
        }
        let m1 = bits + 2 * m;
        let one_dim = check_1d(&f, m1, &mesh).unwrap().pass;
        ok &= faces && one_dim;
        lines.push(format!("{}: (c, m) = ({c}, {m}) faces {faces}; m' = {m1} one-dimensional {one_dim}", f.name()));
    }
    verdict(12, "face bound (c, m) implies the one-dimensional bound with m' = ceil(log2(1/c)) + 2m", ok, &lines);
}
