use std::sync::Arc;

use bernoulli_factory::domain::{lemma52_check, random_event, subdomain_factory};
use bernoulli_factory::faces::{check_1d, check_poly_bounded, BoundednessReport};
use bernoulli_factory::harness::{bit_label, outcome_draw, run_trials, TrialReport};
use bernoulli_factory::lattice::{general_factory, DEFAULT_LATTICE_LIMIT};
use bernoulli_factory::polytope::{
    combinatorial_factory, coordinate_witness_check, hull_facets, lemma71_check, CoordinateWitnessReport, PolytopeP,
};
use bernoulli_factory::program::exact_eval;
use bernoulli_factory::rational::{fmt_point, fmt_rational, pow, rat, to_f64};
use bernoulli_factory::sampford::{
    boundary_sampford, classic_sampford, f_u, fbar_all, g_u, k_subsets, naive_sampford, subset_label,
};
use bernoulli_factory::{
    AffineCubeDomain, BoundCertificate, CoinBank, Draw, FactoryError, FlipBudget, LatticeGeometry, LevelOracle,
    Result, TargetFunction,
};
use num::{BigRational, One};
use serde_json::{json, Value};

use crate::{input, Cli, Command, EvalCommand, Global, LevelArgs, PolytopeCommand, SampfordMode, Verdict, VerifyCommand};

/// A table printed as CSV, or as a JSON list of objects.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| csv_cell(c)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let obj = self.header.iter().zip(r).map(|(h, c)| (h.to_string(), json!(c))).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn emit_table(g: &Global, t: &Table) {
    if g.json {
        println!("{}", serde_json::to_string_pretty(&t.to_json()).expect("json"));
    } else {
        print!("{}", t.to_csv());
    }
}

fn emit_report(g: &Global, r: &TrialReport, extra: Option<(&str, Value)>) {
    if g.json {
        let mut v = r.to_json();
        if let Some((k, x)) = extra {
            v[k] = x;
        }
        println!("{}", serde_json::to_string_pretty(&v).expect("json"));
    } else {
        print!("{}", r.to_csv());
    }
    if r.exhausted > 0 {
        eprintln!("{} of {} trials exhausted the budget", r.exhausted, r.trials);
    }
    if r.failed > 0 {
        eprintln!(
            "{} of {} trials failed; first: {}",
            r.failed,
            r.trials,
            r.first_failure.as_deref().unwrap_or("")
        );
    }
}

fn budget(g: &Global) -> FlipBudget {
    match g.budget {
        Some(0) | None => FlipBudget::UNBOUNDED,
        Some(b) => FlipBudget::limited(b),
    }
}

/// Simulation budget: unbounded only on request (`--budget 0`).
fn sim_budget(g: &Global) -> FlipBudget {
    match g.budget {
        None => FlipBudget::limited(1_000_000),
        Some(_) => budget(g),
    }
}

fn report_verdict(r: &TrialReport) -> Verdict {
    let ok = r.completed > 0 && r.chi_square.as_ref().map_or(true, |c| c.pass);
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn mesh_d(g: &Global) -> Result<u32> {
    let m = input::mesh(&g.mesh)?;
    let d = (BigRational::one() / &m).to_integer();
    if m.numer() != &1.into() || d < 2.into() {
        return Err(FactoryError::usage("mesh must be 1/d with d >= 2"));
    }
    u32::try_from(d).map_err(|_| FactoryError::resource("mesh too fine"))
}

fn level_oracle(f: TargetFunction, domain: Option<&str>, args: &LevelArgs) -> Result<LevelOracle> {
    let n = f.arity();
    let schedule = input::schedule(args, n)?;
    match domain {
        None => LevelOracle::general(f, schedule),
        Some(d) => {
            let d = input::domain(d)?;
            let eps = input::eps(args, &schedule, n)?;
            LevelOracle::subdomain(f, schedule, &d, &eps)
        }
    }
}

pub fn run(cli: &Cli) -> Result<Verdict> {
    let g = &cli.global;
    match &cli.command {
        Command::Eval(e) => eval(g, e),
        Command::Simulate {
            p,
            tree,
            target,
            domain,
            level,
            alpha,
        } => simulate(g, p, tree.as_deref(), target.as_deref(), domain.as_deref(), level, *alpha),
        Command::Verify(v) => verify(g, v),
        Command::Polytope(c) => polytope(g, c),
        Command::Sampford { p, k, mode, level, alpha } => sampford(g, p, *k, *mode, level, *alpha),
    }
}

fn eval(g: &Global, cmd: &EvalCommand) -> Result<Verdict> {
    match cmd {
        EvalCommand::Tree { tree, p } => {
            let tree = input::tree(tree)?;
            let p = input::point(p)?;
            let v = exact_eval(&tree, &p)?;
            if g.json {
                println!("{}", json!({"p": fmt_point(&p), "value": fmt_rational(&v), "approx": to_f64(&v)}));
            } else {
                println!("{}", fmt_rational(&v));
            }
        }
        EvalCommand::Level {
            target,
            p,
            level,
            domain,
            args,
        } => {
            let oracle = level_oracle(input::target(target)?, domain.as_deref(), args)?;
            let p = input::point(p)?;
            let mut t = Table::new(&["level", "t", "f_k", "g_k", "partial_sum", "tail_bound"]);
            for k in 1..=*level {
                let f = oracle.fk_eval(k, &p)?;
                let gk = oracle.gk(k, &[p.clone()])?.remove(0);
                let s = oracle.partial_sum(k, &p)?;
                t.push(vec![
                    k.to_string(),
                    oracle.schedule().t(k).to_string(),
                    fmt_rational(&f),
                    fmt_rational(&gk),
                    fmt_rational(&s),
                    fmt_rational(&pow(&rat(3, 4), k as u32)),
                ]);
            }
            emit_table(g, &t);
        }
        EvalCommand::Fv { domain, p } => {
            let poly = PolytopeP::new(input::domain(domain)?)?;
            let p = input::point(p)?;
            let w = poly.f_v(&p)?;
            let mut t = Table::new(&["vertex", "f_v"]);
            for (v, x) in poly.vertices().iter().zip(w.iter()) {
                t.push(vec![fmt_point(v), fmt_rational(x)]);
            }
            emit_table(g, &t);
        }
        EvalCommand::Fbar { p, k } => {
            let p = input::point(p)?;
            let mut t = Table::new(&["subset", "g_U", "f_U", "fbar_U"]);
            for (u, fb) in fbar_all(&p, *k)? {
                let f = f_u(&p, &u).map(|x| fmt_rational(&x)).unwrap_or_default();
                t.push(vec![subset_label(&u), fmt_rational(&g_u(&p, &u)?), f, fmt_rational(&fb)]);
            }
            emit_table(g, &t);
        }
    }
    Ok(Verdict::Pass)
}

fn bits(p: BigRational) -> Vec<(String, BigRational)> {
    vec![(bit_label(false), BigRational::one() - &p), (bit_label(true), p)]
}

fn simulate(
    g: &Global,
    p: &str,
    tree: Option<&str>,
    target: Option<&str>,
    domain: Option<&str>,
    level: &LevelArgs,
    alpha: f64,
) -> Result<Verdict> {
    let p = input::point(p)?;
    let (name, program, value) = match (tree, target) {
        (Some(t), _) => {
            let tree = input::tree(t)?;
            let v = exact_eval(&tree, &p)?;
            ("tree".to_string(), tree.into(), v)
        }
        (None, Some(t)) => {
            let f = input::target(t)?;
            if f.arity() != p.len() {
                return Err(FactoryError::usage("the target and p have different dimensions"));
            }
            let schedule = input::schedule(level, f.arity())?;
            let prog = match domain {
                None => general_factory(f.clone(), schedule)?,
                Some(d) => {
                    let d = input::domain(d)?;
                    if !d.contains(&p) {
                        return Err(FactoryError::usage(format!("{} is not in the domain", fmt_point(&p))));
                    }
                    let eps = input::eps(level, &schedule, f.arity())?;
                    subdomain_factory(f.clone(), &d, schedule, &eps)?
                }
            };
            (f.name().to_string(), prog, f.eval(&p)?)
        }
        (None, None) => return Err(FactoryError::usage("give --tree or --target")),
    };
    let bank = CoinBank::new(p, g.seed)?;
    let run = run_trials(&name, &bank, g.trials, g.seed, sim_budget(g), |b, budget| {
        Ok(outcome_draw(program.run(b, budget)?))
    });
    let report = TrialReport::new(&run, Some(&bits(value)), alpha);
    emit_report(g, &report, None);
    Ok(report_verdict(&report))
}

fn face_rows(t: &mut Table, label: &str, r: &BoundednessReport) {
    for f in &r.faces {
        t.push(vec![
            label.to_string(),
            f.face.to_string(),
            f.hypothesis.label().to_string(),
            f.pass.to_string(),
            f.worst_point.as_ref().map(|p| fmt_point(p)).unwrap_or_default(),
            f.worst_margin.as_ref().map(fmt_rational).unwrap_or_default(),
        ]);
    }
}

fn witness_table(g: &Global, r: &CoordinateWitnessReport, vertices: &[Vec<BigRational>]) -> Verdict {
    let mut t = Table::new(&["vertex", "facet", "witnessed"]);
    for c in &r.counterexamples {
        let facet: Vec<String> = c.facet.iter().map(|&i| fmt_point(&vertices[i])).collect();
        t.push(vec![fmt_point(&vertices[c.vertex]), facet.join(" "), "false".into()]);
    }
    emit_table(g, &t);
    eprintln!(
        "{} pairs checked, {} without a witness",
        r.pairs_checked,
        r.counterexamples.len()
    );
    if r.pass() {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn verify(g: &Global, cmd: &VerifyCommand) -> Result<Verdict> {
    let pass = |ok: bool| if ok { Verdict::Pass } else { Verdict::Fail };
    match cmd {
        VerifyCommand::PolyBounded {
            target,
            c,
            m,
            domain,
            both,
        } => {
            let f = input::target(target)?;
            let cert = BoundCertificate::new(input::rational(c)?, *m)?;
            let mesh = input::mesh(&g.mesh)?;
            let domain = domain.as_deref().map(input::domain).transpose()?;
            let mut t = Table::new(&["function", "face", "hypothesis", "pass", "worst_point", "worst_margin"]);
            let r = check_poly_bounded(&f, &cert, &mesh, domain.as_ref())?;
            face_rows(&mut t, "f", &r);
            let mut ok = r.pass();
            if *both {
                let r = check_poly_bounded(&f.complement(), &cert, &mesh, domain.as_ref())?;
                face_rows(&mut t, "1-f", &r);
                ok &= r.pass();
            }
            emit_table(g, &t);
            Ok(pass(ok))
        }
        VerifyCommand::OneDim { target, m } => {
            let r = check_1d(&input::target(target)?, *m, &input::mesh(&g.mesh)?)?;
            if g.json {
                println!("{}", r.to_json());
            } else {
                let mut t = Table::new(&["pass", "worst_point", "worst_margin"]);
                t.push(vec![
                    r.pass.to_string(),
                    r.worst_point.as_ref().map(fmt_rational).unwrap_or_default(),
                    r.worst_margin.as_ref().map(fmt_rational).unwrap_or_default(),
                ]);
                emit_table(g, &t);
            }
            Ok(pass(r.pass))
        }
        VerifyCommand::Certificate {
            target,
            level,
            domain,
            args,
        } => {
            let oracle = level_oracle(input::target(target)?, domain.as_deref(), args)?;
            let d = mesh_d(g)?;
            let mut t = Table::new(&["level", "t", "holds", "points", "worst_point", "worst_margin"]);
            let mut ok = true;
            for k in 1..=*level {
                let r = oracle.certificate_check(k, d)?;
                ok &= r.holds;
                t.push(vec![
                    k.to_string(),
                    oracle.schedule().t(k).to_string(),
                    r.holds.to_string(),
                    r.points_checked.to_string(),
                    r.worst_point.as_ref().map(|p| fmt_point(p)).unwrap_or_default(),
                    r.worst_margin.as_ref().map(fmt_rational).unwrap_or_default(),
                ]);
            }
            emit_table(g, &t);
            Ok(pass(ok))
        }
        VerifyCommand::Domination {
            domain,
            t,
            eps,
            p,
            events,
        } => {
            let domain = input::domain(domain)?;
            let eps = input::rational(eps)?;
            let p = input::point(p)?;
            let geometry = LatticeGeometry::new(domain.n(), *t, Some(&domain), Some(&eps), DEFAULT_LATTICE_LIMIT)?;
            let mut table = Table::new(&["event", "conditioned", "unconditioned", "holds"]);
            let mut ok = true;
            for i in 0..*events {
                let event = random_event(g.seed.wrapping_mul(1_000_003).wrapping_add(i));
                let r = lemma52_check(&geometry, &p, &event)?;
                ok &= r.holds;
                table.push(vec![
                    (i + 1).to_string(),
                    fmt_rational(&r.conditioned),
                    fmt_rational(&r.unconditioned),
                    r.holds.to_string(),
                ]);
            }
            emit_table(g, &table);
            Ok(pass(ok))
        }
        VerifyCommand::Witness { domain, vertices } => match (domain, vertices) {
            (Some(d), _) => {
                let poly = PolytopeP::new(input::domain(d)?)?;
                let r = lemma71_check(&poly);
                Ok(witness_table(g, &r, poly.vertices()))
            }
            (None, Some(v)) => {
                let vs = input::points(v)?;
                if vs.is_empty() {
                    return Err(FactoryError::usage("empty vertex list"));
                }
                let r = coordinate_witness_check(&vs, &hull_facets(&vs));
                Ok(witness_table(g, &r, &vs))
            }
            (None, None) => Err(FactoryError::usage("give --domain or --vertices")),
        },
    }
}

fn load_polytope(domain: &str) -> Result<(AffineCubeDomain, PolytopeP)> {
    let d = input::domain(domain)?;
    let p = PolytopeP::new(d.clone())?;
    Ok((d, p))
}

fn polytope(g: &Global, cmd: &PolytopeCommand) -> Result<Verdict> {
    match cmd {
        PolytopeCommand::Vertices { domain } => {
            let (_, poly) = load_polytope(domain)?;
            let mut t = Table::new(&["index", "vertex"]);
            for (i, v) in poly.vertices().iter().enumerate() {
                t.push(vec![(i + 1).to_string(), fmt_point(v)]);
            }
            emit_table(g, &t);
            eprintln!("dimension {}, {} vertices", poly.dim(), poly.vertices().len());
        }
        PolytopeCommand::Facets { domain } => {
            let (_, poly) = load_polytope(domain)?;
            let mut t = Table::new(&["index", "constraints", "vertices"]);
            for (i, f) in poly.facets().iter().enumerate() {
                let cons: Vec<String> = f
                    .constraints
                    .iter()
                    .map(|(j, c)| format!("x{}={}", j + 1, *c as u8))
                    .collect();
                let vs: Vec<String> = f.vertices.iter().map(|&v| fmt_point(&poly.vertices()[v])).collect();
                t.push(vec![(i + 1).to_string(), cons.join(" "), vs.join(" ")]);
            }
            emit_table(g, &t);
        }
        PolytopeCommand::Triangulation { domain } => {
            let (_, poly) = load_polytope(domain)?;
            let mut t = Table::new(&["apex", "simplices", "members"]);
            for w in 0..poly.vertices().len() {
                let fan = poly.fan_triangulation(w)?;
                let members: Vec<String> = fan
                    .simplices
                    .iter()
                    .map(|s| {
                        let idx: Vec<String> = s.iter().map(|v| (v + 1).to_string()).collect();
                        format!("[{}]", idx.join(" "))
                    })
                    .collect();
                t.push(vec![
                    fmt_point(&poly.vertices()[w]),
                    fan.simplices.len().to_string(),
                    members.join(" "),
                ]);
            }
            emit_table(g, &t);
        }
        PolytopeCommand::Sample { domain, p, level, alpha } => {
            let (_, poly) = load_polytope(domain)?;
            let poly = Arc::new(poly);
            let p = input::point(p)?;
            let weights = poly.f_v(&p)?;
            let schedule = input::schedule(level, poly.n())?;
            let eps = input::eps(level, &schedule, poly.n())?;
            let factory = combinatorial_factory(poly.clone(), schedule, &eps)?;
            let labels: Vec<String> = poly.vertices().iter().map(|v| fmt_point(v)).collect();
            let oracle: Vec<(String, BigRational)> = labels.iter().cloned().zip(weights.iter().cloned()).collect();
            let bank = CoinBank::new(p, g.seed)?;
            let run = run_trials("combinatorial", &bank, g.trials, g.seed, sim_budget(g), |b, budget| {
                Ok(match factory.sample(b, budget)? {
                    Draw::Value(v) => Draw::Value(labels[v].clone()),
                    Draw::BudgetExhausted(n) => Draw::BudgetExhausted(n),
                })
            });
            let report = TrialReport::new(&run, Some(&oracle), *alpha);
            let mean = empirical_mean(&report, &poly);
            emit_report(g, &report, Some(("mean", json!(mean))));
            return Ok(report_verdict(&report));
        }
    }
    Ok(Verdict::Pass)
}

fn empirical_mean(report: &TrialReport, poly: &PolytopeP) -> Vec<f64> {
    let mut mean = vec![0.0; poly.n()];
    if report.completed == 0 {
        return mean;
    }
    for v in poly.vertices() {
        let w = report.frequency(&fmt_point(v));
        for (m, x) in mean.iter_mut().zip(v) {
            *m += w * to_f64(x);
        }
    }
    mean
}

fn sampford(g: &Global, p: &str, k: usize, mode: SampfordMode, level: &LevelArgs, alpha: f64) -> Result<Verdict> {
    let p = input::point(p)?;
    let n = p.len();
    let oracle: Vec<(String, BigRational)> = fbar_all(&p, k)?
        .into_iter()
        .map(|(u, w)| (subset_label(&u), w))
        .collect();
    let bank = CoinBank::new(p, g.seed)?;
    let label = |d: Draw<bernoulli_factory::sampford::SubsetOutcome>| match d {
        Draw::Value(o) => Draw::Value(subset_label(&o.subset)),
        Draw::BudgetExhausted(n) => Draw::BudgetExhausted(n),
    };
    let budget = sim_budget(g);
    let run = match mode {
        SampfordMode::Classic => run_trials("classic", &bank, g.trials, g.seed, budget, |b, budget| {
            Ok(label(classic_sampford(b, k, budget)?))
        }),
        SampfordMode::Naive => run_trials("naive", &bank, g.trials, g.seed, budget, |b, budget| {
            Ok(label(naive_sampford(b, k, budget)?))
        }),
        SampfordMode::Boundary => {
            let schedule = input::schedule(level, n)?;
            let eps = input::eps(level, &schedule, n)?;
            let sampler = boundary_sampford(n, k, schedule, &eps)?;
            debug_assert_eq!(sampler.subsets(), k_subsets(n, k).as_slice());
            run_trials("boundary", &bank, g.trials, g.seed, budget, |b, budget| {
                Ok(label(sampler.sample(b, budget)?))
            })
        }
    };
    let report = TrialReport::new(&run, Some(&oracle), alpha);
    emit_report(g, &report, None);
    Ok(report_verdict(&report))
}
