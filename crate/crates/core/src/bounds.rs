//! Concentration bounds for `X̄_t`, evaluated as certified rational upper
//! bounds. `exp` and `ln` are enclosed in intervals whose endpoints are
//! rounded outward to 64 fractional bits.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::{FactoryError, Result};
use crate::rational::{in_unit_interval, pow};

const FRAC_BITS: usize = 64;
/// Series are summed until the remainder is below `2^-TAIL_BITS`.
const TAIL_BITS: usize = 80;

/// A closed interval `[lo, hi]` with rational endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub lo: BigRational,
    pub hi: BigRational,
}

fn scale() -> BigRational {
    BigRational::from_integer(BigInt::one() << FRAC_BITS)
}

fn round_down(x: &BigRational) -> BigRational {
    let s = scale();
    (x * &s).floor() / s
}

fn round_up(x: &BigRational) -> BigRational {
    let s = scale();
    (x * &s).ceil() / s
}

fn two_pow(e: i64) -> BigRational {
    let p = BigRational::from_integer(BigInt::one() << e.unsigned_abs() as usize);
    if e >= 0 {
        p
    } else {
        p.recip()
    }
}

impl Interval {
    pub fn point(x: BigRational) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    fn outward(lo: BigRational, hi: BigRational) -> Self {
        Interval {
            lo: round_down(&lo),
            hi: round_up(&hi),
        }
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn scale(&self, k: &BigRational) -> Interval {
        let (a, b) = (&self.lo * k, &self.hi * k);
        if k.is_negative() {
            Interval { lo: b, hi: a }
        } else {
            Interval { lo: a, hi: b }
        }
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }
}

/// Encloses `exp(x)`.
pub fn exp_interval(x: &BigRational) -> Interval {
    if x.is_negative() {
        let pos = exp_interval(&-x);
        return Interval {
            lo: pos.hi.recip(),
            hi: pos.lo.recip(),
        };
    }
    // halve until y <= 1/2, then square back
    let half = BigRational::new(1.into(), 2.into());
    let mut squarings = 0u32;
    let mut y = x.clone();
    while y > half {
        y /= BigRational::from_integer(2.into());
        squarings += 1;
    }
    let tail_cap = two_pow(-(TAIL_BITS as i64));
    let mut sum = BigRational::zero();
    let mut term = BigRational::one();
    let mut j = 0u32;
    let remainder = loop {
        sum += &term;
        j += 1;
        term = term * &y / BigRational::from_integer(j.into());
        // tail after the current partial sum is at most 2 * term for y <= 1/2
        let rest = &term * BigRational::from_integer(2.into());
        if rest < tail_cap {
            break rest;
        }
    };
    let mut enclosure = Interval::outward(sum.clone(), sum + remainder);
    for _ in 0..squarings {
        enclosure = Interval::outward(&enclosure.lo * &enclosure.lo, &enclosure.hi * &enclosure.hi);
    }
    enclosure
}

/// Encloses `atanh(z)` for `0 <= z <= 1/3`.
fn atanh_interval(z: &BigRational) -> Interval {
    let z2 = z * z;
    let tail_cap = two_pow(-(TAIL_BITS as i64));
    let mut sum = BigRational::zero();
    let mut power = z.clone();
    let mut k = 1u32;
    loop {
        sum += &power / BigRational::from_integer(k.into());
        power *= &z2;
        k += 2;
        let rest = &power / (BigRational::from_integer(k.into()) * (BigRational::one() - &z2));
        if rest < tail_cap {
            return Interval::outward(sum.clone(), sum + rest);
        }
    }
}

/// Encloses `ln(r)` for `r > 0`.
pub fn ln_interval(r: &BigRational) -> Result<Interval> {
    if !r.is_positive() {
        return Err(FactoryError::domain("logarithm of a non-positive number"));
    }
    let mut e = r.numer().bits() as i64 - r.denom().bits() as i64;
    let mut m = r / two_pow(e);
    let two = BigRational::from_integer(2.into());
    while m >= two {
        m /= &two;
        e += 1;
    }
    while m < BigRational::one() {
        m *= &two;
        e -= 1;
    }
    let one = BigRational::one();
    let z = (&m - &one) / (&m + &one);
    let ln_m = atanh_interval(&z).scale(&two);
    let ln2 = atanh_interval(&BigRational::new(1.into(), 3.into())).scale(&two);
    Ok(ln2.scale(&BigRational::from_integer(e.into())).add(&ln_m))
}

/// `2n exp(-2 δ^2 t)`, as a certified upper bound on
/// `P[max_i |X̄_t,i - p_i| >= δ]`.
pub fn hoeffding_bound(delta: &BigRational, t: u64, n: u64) -> Result<BigRational> {
    if !delta.is_positive() {
        return Err(FactoryError::usage("delta must be positive"));
    }
    if t == 0 || n == 0 {
        return Err(FactoryError::usage("t and n must be at least 1"));
    }
    let exponent = -(delta * delta) * BigRational::from_integer((2 * t).into());
    Ok(exp_interval(&exponent).hi * BigRational::from_integer((2 * n).into()))
}

/// `((p/a)^a ((1-p)/(1-a))^(1-a))^t` with `a = p + δ`, the relative-entropy
/// bound on `P[X̄_t >= p + δ]` for a single coin. `0^0` is read as 1.
pub fn chernoff_bound(p: &BigRational, delta: &BigRational, t: u64) -> Result<BigRational> {
    let a = p + delta;
    if delta.is_negative() || !in_unit_interval(p) || !in_unit_interval(&a) {
        return Err(FactoryError::usage("need 0 <= p and 0 <= delta with p + delta <= 1"));
    }
    if t == 0 {
        return Err(FactoryError::usage("t must be at least 1"));
    }
    if delta.is_zero() {
        return Ok(BigRational::one());
    }
    if p.is_zero() {
        return Ok(BigRational::zero());
    }
    if a.is_one() {
        return Ok(pow(p, t as u32));
    }
    let one = BigRational::one();
    let x = ln_interval(&(p / &a))?
        .scale(&a)
        .add(&ln_interval(&((&one - p) / (&one - &a)))?.scale(&(&one - &a)));
    let bound = exp_interval(&(x.hi * BigRational::from_integer(t.into()))).hi;
    Ok(bound.min(one))
}

/// Smallest integer `t` with `t >= ln(8n) / (2 ε^2)`, using an upper
/// enclosure of the logarithm so the returned `t` always qualifies.
pub fn min_t_for_acceptance(n: u64, eps: &BigRational) -> Result<u64> {
    if !eps.is_positive() {
        return Err(FactoryError::usage("eps must be positive"));
    }
    let ln = ln_interval(&BigRational::from_integer((8 * n).into()))?;
    let t = (ln.hi / (eps * eps * BigRational::from_integer(2.into()))).ceil();
    t.to_integer()
        .to_u64()
        .ok_or_else(|| FactoryError::resource("required t does not fit in 64 bits"))
}
