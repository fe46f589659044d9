//! Exact rational helpers: parsing, formatting, serde adapters and a few
//! combinatorial primitives shared by the oracles.

use std::str::FromStr;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{FactoryError, Result};

/// A point of `[0,1]^n` (or of any rational vector space) with exact coordinates.
pub type Point = Vec<BigRational>;

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn point(coords: &[(i64, i64)]) -> Point {
    coords.iter().map(|&(n, d)| rat(n, d)).collect()
}

/// Parses `"num/den"`, `"-num/den"` or a plain integer.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let text = text.trim();
    let bad = || FactoryError::Parse(format!("not a rational: {text:?}"));
    match text.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
            let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
            if d.is_zero() {
                return Err(FactoryError::Parse(format!("zero denominator in {text:?}")));
            }
            Ok(BigRational::new(n, d))
        }
        None => BigInt::from_str(text)
            .map(BigRational::from_integer)
            .map_err(|_| bad()),
    }
}

/// `"num/den"`, or the bare integer when the denominator is one.
pub fn fmt_rational(value: &BigRational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn fmt_point(p: &[BigRational]) -> String {
    let inner: Vec<String> = p.iter().map(fmt_rational).collect();
    format!("({})", inner.join(", "))
}

pub fn to_f64(value: &BigRational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

pub fn in_unit_interval(value: &BigRational) -> bool {
    !value.is_negative() && value <= &BigRational::one()
}

pub fn check_unit_point(p: &[BigRational]) -> Result<()> {
    for (i, x) in p.iter().enumerate() {
        if !in_unit_interval(x) {
            return Err(FactoryError::domain(format!(
                "coordinate {} = {} is outside [0,1]",
                i + 1,
                fmt_rational(x)
            )));
        }
    }
    Ok(())
}

/// Binomial coefficient `C(n, k)` as a big integer.
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// `C(n, 0), ..., C(n, n)`.
pub fn binomial_row(n: u64) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut acc = BigInt::one();
    row.push(acc.clone());
    for i in 0..n {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
        row.push(acc.clone());
    }
    row
}

pub fn pow(base: &BigRational, exp: u32) -> BigRational {
    num::pow(base.clone(), exp as usize)
}

/// Wire form of a rational: accepts `"num/den"` strings and JSON integers;
/// always serialises as a string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rational(pub BigRational);

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Rational;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a rational as \"num/den\" or an integer")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Rational, E> {
                parse_rational(v).map(Rational).map_err(E::custom)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Rational, E> {
                Ok(Rational(int(v)))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Rational, E> {
                Ok(Rational(BigRational::from_integer(BigInt::from(v))))
            }
        }
        d.deserialize_any(V)
    }
}

impl From<BigRational> for Rational {
    fn from(v: BigRational) -> Self {
        Rational(v)
    }
}

/// `{"p": ["1/2", "1/3", 1]}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasDocument {
    pub p: Vec<Rational>,
}

impl BiasDocument {
    pub fn parse(json: &str) -> Result<Point> {
        let doc: BiasDocument =
            serde_json::from_str(json).map_err(|e| FactoryError::Parse(e.to_string()))?;
        Ok(doc.p.into_iter().map(|r| r.0).collect())
    }

    pub fn render(p: &[BigRational]) -> String {
        let doc = BiasDocument {
            p: p.iter().cloned().map(Rational).collect(),
        };
        serde_json::to_string(&doc).expect("bias document serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_integers() {
        assert_eq!(parse_rational("1/3").unwrap(), rat(1, 3));
        assert_eq!(parse_rational(" 2/4 ").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("1").unwrap(), int(1));
        assert_eq!(parse_rational("-3/9").unwrap(), rat(-1, 3));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("0.5").is_err());
    }

    #[test]
    fn bias_document_round_trip() {
        let p = BiasDocument::parse(r#"{"p": ["1/2", "1/3", 1]}"#).unwrap();
        assert_eq!(p, vec![rat(1, 2), rat(1, 3), int(1)]);
        assert_eq!(BiasDocument::parse(&BiasDocument::render(&p)).unwrap(), p);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), BigInt::from(10));
        assert_eq!(binomial(64, 32), "1832624140942590534".parse::<BigInt>().unwrap());
        assert_eq!(binomial(3, 4), BigInt::zero());
    }
}
