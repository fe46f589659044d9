//! Target functions `f : [0,1]^n -> [0,1]` handed to the general constructions.

use std::fmt;
use std::sync::Arc;

use num::{BigRational, One, Zero};
use serde::Deserialize;

use crate::error::{FactoryError, Result};
use crate::faces::FacePartition;
use crate::rational::{fmt_point, fmt_rational, in_unit_interval, pow, Rational};

type Eval = dyn Fn(&[BigRational]) -> Result<BigRational> + Send + Sync;
type FaceZero = dyn Fn(&FacePartition) -> bool + Send + Sync;

/// An exact evaluator on rational points. Continuity and polynomial
/// boundedness are the caller's claims; `faces` can check them on a grid.
#[derive(Clone)]
pub struct TargetFunction {
    name: Arc<str>,
    arity: usize,
    eval: Arc<Eval>,
    face_zero: Option<Arc<FaceZero>>,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TargetFunction({}, n = {})", self.name, self.arity)
    }
}

impl TargetFunction {
    pub fn new<F>(name: impl Into<String>, arity: usize, eval: F) -> Self
    where
        F: Fn(&[BigRational]) -> Result<BigRational> + Send + Sync + 'static,
    {
        TargetFunction {
            name: Arc::from(name.into()),
            arity,
            eval: Arc::new(eval),
            face_zero: None,
        }
    }

    /// Attaches an exact decision of "identically zero on this open face".
    pub fn with_face_zero<F>(mut self, decide: F) -> Self
    where
        F: Fn(&FacePartition) -> bool + Send + Sync + 'static,
    {
        self.face_zero = Some(Arc::new(decide));
        self
    }

    pub fn constant(c: BigRational, arity: usize) -> Result<Self> {
        if !in_unit_interval(&c) {
            return Err(FactoryError::usage(format!(
                "constant {} is outside [0,1]",
                fmt_rational(&c)
            )));
        }
        let name = format!("const {}", fmt_rational(&c));
        let zero = c.is_zero();
        Ok(TargetFunction::new(name, arity, move |_| Ok(c.clone())).with_face_zero(move |_| zero))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn exact_face_zero(&self, face: &FacePartition) -> Option<bool> {
        self.face_zero.as_ref().map(|d| d(face))
    }

    /// Evaluates at `p`, rejecting points of the wrong length and values
    /// outside `[0,1]`.
    pub fn eval(&self, p: &[BigRational]) -> Result<BigRational> {
        if p.len() != self.arity {
            return Err(FactoryError::usage(format!(
                "{} takes {} coordinates, got {}",
                self.name,
                self.arity,
                p.len()
            )));
        }
        let v = (self.eval)(p)?;
        if !in_unit_interval(&v) {
            return Err(FactoryError::domain(format!(
                "{} evaluates to {} at {}",
                self.name,
                fmt_rational(&v),
                fmt_point(p)
            )));
        }
        Ok(v)
    }

    /// `1 - f`.
    pub fn complement(&self) -> TargetFunction {
        let inner = self.clone();
        TargetFunction::new(format!("1 - {}", self.name), self.arity, move |p| {
            Ok(BigRational::one() - inner.eval(p)?)
        })
    }
}

/// `sum_j coeff_j * prod_i p_i^{e_ij}`, read from
/// `[{"coeff": "1/2", "exponents": [1, 0]}, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub arity: usize,
    pub terms: Vec<(BigRational, Vec<u32>)>,
}

#[derive(Deserialize)]
struct TermRepr {
    coeff: Rational,
    exponents: Vec<u32>,
}

impl Polynomial {
    pub fn from_json(json: &str) -> Result<Self> {
        let terms: Vec<TermRepr> =
            serde_json::from_str(json).map_err(|e| FactoryError::Parse(e.to_string()))?;
        let arity = terms.first().map_or(0, |t| t.exponents.len());
        if terms.iter().any(|t| t.exponents.len() != arity) {
            return Err(FactoryError::Parse("all terms need the same number of exponents".into()));
        }
        Ok(Polynomial {
            arity,
            terms: terms.into_iter().map(|t| (t.coeff.0, t.exponents)).collect(),
        })
    }

    pub fn value(&self, p: &[BigRational]) -> BigRational {
        self.terms
            .iter()
            .map(|(c, e)| {
                e.iter()
                    .zip(p)
                    .fold(c.clone(), |acc, (&k, x)| acc * pow(x, k))
            })
            .sum()
    }

    pub fn into_target(self, name: impl Into<String>) -> TargetFunction {
        let arity = self.arity;
        TargetFunction::new(name, arity, move |p| Ok(self.value(p)))
    }
}

/// Named functions available from the command line.
pub fn builtin(name: &str) -> Result<TargetFunction> {
    let one = BigRational::one;
    let f = match name {
        "zero" => TargetFunction::constant(BigRational::zero(), 1)?,
        "one" => TargetFunction::constant(one(), 1)?,
        "half" => TargetFunction::constant(BigRational::new(1.into(), 2.into()), 1)?,
        "quarter" => TargetFunction::constant(BigRational::new(1.into(), 4.into()), 1)?,
        "identity" => TargetFunction::new("identity", 1, |p| Ok(p[0].clone())),
        "square" => TargetFunction::new("square", 1, |p| Ok(&p[0] * &p[0])),
        "intro" => TargetFunction::new("intro", 1, |p| Ok(&p[0] * &p[0] * (BigRational::one() - &p[0]))),
        "quarter-affine" => TargetFunction::new("quarter-affine", 1, |p| {
            Ok((BigRational::one() + &p[0] * BigRational::from_integer(2.into()))
                / BigRational::from_integer(4.into()))
        }),
        "ratio" => TargetFunction::new("ratio", 2, |p| {
            let s = &p[0] + &p[1];
            if s.is_zero() {
                Err(FactoryError::domain("p1/(p1+p2) is undefined at (0, 0)"))
            } else {
                Ok(&p[0] / s)
            }
        }),
        other => {
            return Err(FactoryError::usage(format!(
                "unknown function {other:?}; known: {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    Ok(f)
}

pub const BUILTIN_NAMES: &[&str] = &[
    "zero",
    "one",
    "half",
    "quarter",
    "identity",
    "square",
    "intro",
    "quarter-affine",
    "ratio",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    #[test]
    fn polynomial_from_json() {
        let poly = Polynomial::from_json(
            r#"[{"coeff": "1/4", "exponents": [0]}, {"coeff": "1/2", "exponents": [1]}]"#,
        )
        .unwrap();
        let f = poly.into_target("affine");
        assert_eq!(f.eval(&[rat(1, 2)]).unwrap(), rat(1, 2));
        assert_eq!(f.eval(&[int(1)]).unwrap(), rat(3, 4));
        assert!(Polynomial::from_json(r#"[{"coeff": "1", "exponents": [1]}, {"coeff": "1", "exponents": []}]"#).is_err());
    }

    #[test]
    fn eval_checks_range_and_arity() {
        let f = TargetFunction::new("double", 1, |p| Ok(&p[0] * int(2)));
        assert!(matches!(f.eval(&[rat(3, 4)]), Err(FactoryError::Domain(_))));
        assert!(matches!(f.eval(&[rat(1, 4), rat(1, 4)]), Err(FactoryError::Usage(_))));
        assert!(TargetFunction::constant(rat(3, 2), 1).is_err());
    }

    #[test]
    fn builtins() {
        for name in BUILTIN_NAMES {
            let f = builtin(name).unwrap();
            let p = vec![rat(1, 3); f.arity()];
            assert!(f.eval(&p).is_ok(), "{name}");
        }
        assert_eq!(builtin("ratio").unwrap().eval(&[rat(3, 10), rat(1, 10)]).unwrap(), rat(3, 4));
        assert!(builtin("nope").is_err());
        let c = builtin("quarter-affine").unwrap().complement();
        assert_eq!(c.eval(&[int(0)]).unwrap(), rat(3, 4));
    }
}
