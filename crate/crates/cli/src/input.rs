//! Argument parsing: points, domains, targets, trees and schedules.

use bernoulli_factory::rational::{parse_rational, BiasDocument, Point, Rational};
use bernoulli_factory::target::{builtin, Polynomial};
use bernoulli_factory::{AffineCubeDomain, FactoryError, FiniteTree, LevelSchedule, Result, TargetFunction};
use num::BigRational;

use crate::LevelArgs;

/// `@path` reads the file; anything else is taken literally.
pub fn text(arg: &str) -> Result<String> {
    match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| FactoryError::usage(format!("cannot read {path}: {e}"))),
        None => Ok(arg.to_string()),
    }
}

pub fn rational(arg: &str) -> Result<BigRational> {
    parse_rational(arg)
}

/// `{"p": [...]}`, a JSON list, or a comma-separated list of rationals.
pub fn point(arg: &str) -> Result<Point> {
    let s = text(arg)?;
    let s = s.trim();
    if s.starts_with('{') {
        return BiasDocument::parse(s);
    }
    if s.starts_with('[') {
        let list: Vec<Rational> = serde_json::from_str(s).map_err(|e| FactoryError::Parse(e.to_string()))?;
        return Ok(list.into_iter().map(|r| r.0).collect());
    }
    s.split(',').map(parse_rational).collect()
}

/// A JSON list of points.
pub fn points(arg: &str) -> Result<Vec<Point>> {
    let s = text(arg)?;
    let list: Vec<Vec<Rational>> = serde_json::from_str(&s).map_err(|e| FactoryError::Parse(e.to_string()))?;
    Ok(list.into_iter().map(|p| p.into_iter().map(|r| r.0).collect()).collect())
}

/// `cube:n`, `k-subset:n:k`, `birkhoff:s`, or domain JSON.
pub fn domain(arg: &str) -> Result<AffineCubeDomain> {
    let s = text(arg)?;
    let s = s.trim();
    if s.starts_with('{') {
        return AffineCubeDomain::from_json(s);
    }
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<usize> {
        parts
            .get(i)
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| FactoryError::Parse(format!("bad domain {s:?}")))
    };
    match parts[0] {
        "cube" => AffineCubeDomain::cube(num(1)?),
        "k-subset" => AffineCubeDomain::k_subset(num(1)?, num(2)?),
        "birkhoff" => AffineCubeDomain::birkhoff(num(1)?),
        _ => Err(FactoryError::Parse(format!(
            "bad domain {s:?}; use cube:n, k-subset:n:k, birkhoff:s or JSON"
        ))),
    }
}

/// A built-in name, or a polynomial as a JSON term list.
pub fn target(arg: &str) -> Result<TargetFunction> {
    let s = text(arg)?;
    let s = s.trim();
    if s.starts_with('[') {
        Polynomial::from_json(s).map(|p| p.into_target("polynomial"))
    } else {
        builtin(s)
    }
}

pub fn tree(arg: &str) -> Result<FiniteTree> {
    if arg == "intro" {
        return Ok(FiniteTree::two_heads_then_tail([0, 0, 0]));
    }
    FiniteTree::from_json(&text(arg)?)
}

/// Mesh `1/d`.
pub fn mesh(arg: &str) -> Result<BigRational> {
    rational(arg)
}

pub fn default_t(n: usize) -> u32 {
    if n <= 2 {
        64
    } else {
        16
    }
}

pub fn schedule(args: &LevelArgs, n: usize) -> Result<LevelSchedule> {
    let s = match &args.schedule {
        Some(list) => {
            let ts = list
                .split(',')
                .map(|x| x.trim().parse::<u32>().map_err(|_| FactoryError::Parse(format!("bad schedule entry {x:?}"))))
                .collect::<Result<Vec<u32>>>()?;
            LevelSchedule::per_level(ts)?
        }
        None => LevelSchedule::constant(args.t.unwrap_or_else(|| default_t(n)))?,
    };
    Ok(s.with_level_cap(args.level_cap))
}

/// The given radius, or `1/(4 n t_max)`: below the distance of any lattice
/// point off a hyperplane with unit coefficients, so `X̄` is accepted only
/// on `K` itself.
pub fn eps(args: &LevelArgs, schedule: &LevelSchedule, n: usize) -> Result<BigRational> {
    match &args.eps {
        Some(e) => rational(e),
        None => {
            let t_max = schedule.ts().iter().copied().max().unwrap_or(1);
            Ok(BigRational::new(1.into(), (4 * n as i64 * t_max as i64).into()))
        }
    }
}
