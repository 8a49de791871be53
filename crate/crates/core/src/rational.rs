//! Exact rational helpers used by the path discretisation.
//!
//! Every finite `f64` is a dyadic rational, so grid paths convert to
//! [`Q`] without loss and crossing times of piecewise-linear paths can be
//! solved exactly.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{domain, Error, Result};

pub type Q = BigRational;

pub fn q_from_f64(x: f64) -> Result<Q> {
    BigRational::from_float(x).ok_or_else(|| Error::Domain(format!("non-finite value {x}")))
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Approximation within a few ulps, without the big division of
/// [`q_to_f64`].
pub fn q_approx_f64(x: &Q) -> f64 {
    fn top(n: &BigInt) -> (f64, i64) {
        let shift = n.bits().saturating_sub(64);
        let head = (n >> shift).to_f64().unwrap_or(f64::NAN);
        (head, shift as i64)
    }
    let (n, en) = top(x.numer());
    let (d, ed) = top(x.denom());
    let e = en - ed;
    if e.abs() > 1000 {
        return q_to_f64(x);
    }
    n / d * 2f64.powi(e as i32)
}

pub fn q_int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// `2^e` for any integer exponent.
pub fn pow2(e: i64) -> Q {
    let mag = BigInt::one() << (e.unsigned_abs() as usize);
    if e >= 0 {
        Q::from_integer(mag)
    } else {
        Q::new(BigInt::one(), mag)
    }
}

// `Ratio` normalises through a binary gcd whose running time grows with the
// bit length even against a power of two. The staged discretisation builds
// dyadics with thousands of bits, so they get a gcd-free path here.

/// `e` such that the denominator of `x` is `2^e`, if it is a power of two.
pub fn dyadic_exponent(x: &Q) -> Option<u64> {
    let d = x.denom();
    let tz = d.trailing_zeros()?;
    (d.bits() == tz + 1).then_some(tz)
}

/// Reduced `num / 2^e`.
pub fn dyadic(num: BigInt, e: u64) -> Q {
    if num.is_zero() {
        return Q::zero();
    }
    let tz = num.trailing_zeros().unwrap_or(0).min(e);
    Q::new_raw(num >> tz, BigInt::one() << (e - tz))
}

fn dyadic_combine(a: &Q, b: &Q, sub: bool) -> Option<Q> {
    let (ea, eb) = (dyadic_exponent(a)?, dyadic_exponent(b)?);
    let e = ea.max(eb);
    let (x, y) = (a.numer() << (e - ea), b.numer() << (e - eb));
    Some(dyadic(if sub { x - y } else { x + y }, e))
}

/// `a + b`, avoiding the gcd when both are dyadic.
pub fn q_add(a: &Q, b: &Q) -> Q {
    dyadic_combine(a, b, false).unwrap_or_else(|| a + b)
}

/// `a - b`, avoiding the gcd when both are dyadic.
pub fn q_sub(a: &Q, b: &Q) -> Q {
    dyadic_combine(a, b, true).unwrap_or_else(|| a - b)
}

/// `2^{-m} ⌈2^m x⌉`.
pub fn ceil_to_dyadic(x: &Q, m: i64) -> Q {
    if m < 0 {
        let scale = pow2(m);
        return (x * &scale).ceil() / scale;
    }
    let shifted = x.numer() << (m as usize);
    dyadic(Integer::div_ceil(&shifted, x.denom()), m as u64)
}

/// Whether `x` is an integer multiple of `2^{-m}`; returns the multiple.
pub fn dyadic_multiple(x: &Q, m: i64) -> Option<BigInt> {
    match dyadic_exponent(x) {
        Some(e) if m >= 0 => (e <= m as u64).then(|| x.numer() << (m as u64 - e)),
        _ => {
            let scaled = x * pow2(m);
            scaled.is_integer().then(|| scaled.to_integer())
        }
    }
}

/// Order by cross-multiplication, which beats the continued-fraction
/// comparison of `Ratio` on long dyadic numerators.
pub fn q_cmp(a: &Q, b: &Q) -> std::cmp::Ordering {
    if a.denom() == b.denom() {
        return a.numer().cmp(b.numer());
    }
    (a.numer() * b.denom()).cmp(&(b.numer() * a.denom()))
}

/// Fraction kept unreduced, with positive denominator. Chains of a few
/// operations followed by comparisons skip every gcd this way.
#[derive(Debug, Clone)]
pub struct RawQ {
    pub num: BigInt,
    pub den: BigInt,
}

impl RawQ {
    pub fn of(x: &Q) -> Self {
        Self { num: x.numer().clone(), den: x.denom().clone() }
    }

    pub fn sub(&self, o: &RawQ) -> RawQ {
        if self.den == o.den {
            return RawQ { num: &self.num - &o.num, den: self.den.clone() };
        }
        RawQ { num: &self.num * &o.den - &o.num * &self.den, den: &self.den * &o.den }
    }

    pub fn add(&self, o: &RawQ) -> RawQ {
        if self.den == o.den {
            return RawQ { num: &self.num + &o.num, den: self.den.clone() };
        }
        RawQ { num: &self.num * &o.den + &o.num * &self.den, den: &self.den * &o.den }
    }

    pub fn mul(&self, o: &RawQ) -> RawQ {
        RawQ { num: &self.num * &o.num, den: &self.den * &o.den }
    }

    /// Panics on a zero divisor.
    pub fn div(&self, o: &RawQ) -> RawQ {
        assert!(!o.num.is_zero(), "division by zero");
        let (num, den) = (&self.num * &o.den, &self.den * &o.num);
        if den.is_negative() {
            RawQ { num: -num, den: -den }
        } else {
            RawQ { num, den }
        }
    }

    pub fn abs(mut self) -> RawQ {
        if self.num.is_negative() {
            self.num = -self.num;
        }
        self
    }

    pub fn compare(&self, o: &RawQ) -> std::cmp::Ordering {
        (&self.num * &o.den).cmp(&(&o.num * &self.den))
    }

    pub fn to_q(&self) -> Q {
        Q::new(self.num.clone(), self.den.clone())
    }
}

pub fn format_q(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let parsed = match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| Error::Domain(format!("bad rational '{s}'")))?;
            let d: BigInt = d.trim().parse().map_err(|_| Error::Domain(format!("bad rational '{s}'")))?;
            if d.is_zero() {
                return domain(format!("zero denominator in '{s}'"));
            }
            Q::new(n, d)
        }
        None => Q::from_integer(s.parse().map_err(|_| Error::Domain(format!("bad rational '{s}'")))?),
    };
    Ok(parsed)
}

/// The fraction `p/q` (positive integers) with `a < p/q <= b` minimising
/// `p + q`.
///
/// Descends the Stern–Brocot tree with run-length steps. The node reached is
/// the simplest fraction in the interval: every other fraction in `(a, b]`
/// is a descendant, so it has both the smallest numerator and the smallest
/// denominator and the minimiser of `p + q` is unique.
pub fn simplest_in_half_open(a: &Q, b: &Q) -> Result<(BigInt, BigInt)> {
    simplest_in_half_open_raw(&RawQ::of(a), &RawQ::of(b))
}

/// [`simplest_in_half_open`] on unreduced endpoints.
pub fn simplest_in_half_open_raw(a: &RawQ, b: &RawQ) -> Result<(BigInt, BigInt)> {
    if a.compare(b).is_ge() {
        return domain(format!("empty interval ({}, {}]", format_q(&a.to_q()), format_q(&b.to_q())));
    }
    if a.num.is_negative() {
        return domain(format!("interval start {} is negative", format_q(&a.to_q())));
    }
    let (an, ad) = (&a.num, &a.den);
    let (bn, bd) = (&b.num, &b.den);
    // left = lp/lq <= a, right = rp/rq > b (rq = 0 encodes +inf)
    let (mut lp, mut lq) = (BigInt::zero(), BigInt::one());
    let (mut rp, mut rq) = (BigInt::one(), BigInt::zero());
    loop {
        let mp = &lp + &rp;
        let mq = &lq + &rq;
        if &mp * ad <= an * &mq {
            // largest k with (lp + k rp)/(lq + k rq) <= a
            let num = an * &lq - &lp * ad;
            let den = &rp * ad - an * &rq;
            let k = num.div_floor(&den).max(BigInt::one());
            lp += &k * &rp;
            lq += &k * &rq;
        } else if &mp * bd > bn * &mq {
            // largest k with (k lp + rp)/(k lq + rq) > b
            let num = &rp * bd - bn * &rq;
            let den = bn * &lq - &lp * bd;
            let k = (num.div_ceil(&den) - BigInt::one()).max(BigInt::one());
            rp = &k * &lp + &rp;
            rq = &k * &lq + &rq;
        } else {
            let g = mp.gcd(&mq);
            return Ok((mp / &g, mq / g));
        }
    }
}

pub fn q_max_abs<'a>(xs: impl IntoIterator<Item = &'a Q>) -> Q {
    xs.into_iter().map(|x| x.abs()).fold(Q::zero(), |m, x| if x > m { x } else { m })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Q {
        Q::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn simplest_fraction_examples() {
        assert_eq!(simplest_in_half_open(&q(0, 1), &q(1, 2)).unwrap(), (1.into(), 2.into()));
        assert_eq!(simplest_in_half_open(&q(3, 10), &q(6, 5)).unwrap(), (1.into(), 1.into()));
        assert_eq!(simplest_in_half_open(&q(7, 10), &q(9, 10)).unwrap(), (3.into(), 4.into()));
    }

    #[test]
    fn simplest_fraction_rejects_empty_interval() {
        assert!(simplest_in_half_open(&q(1, 2), &q(1, 2)).is_err());
        assert!(simplest_in_half_open(&q(2, 3), &q(1, 2)).is_err());
    }

    #[test]
    fn upper_end_is_inclusive() {
        // (1/3, 1/2]: 1/2 itself is admissible and simplest
        assert_eq!(simplest_in_half_open(&q(1, 3), &q(1, 2)).unwrap(), (1.into(), 2.into()));
        // (1/2, 1]: 1/1
        assert_eq!(simplest_in_half_open(&q(1, 2), &q(1, 1)).unwrap(), (1.into(), 1.into()));
    }

    #[test]
    fn narrow_interval_far_down_the_tree() {
        let a = q(1_000_000, 1_000_001);
        let b = q(1_000_001, 1_000_002);
        let (p, qq) = simplest_in_half_open(&a, &b).unwrap();
        let x = Q::new(p, qq);
        assert!(x > a && x <= b);
    }

    #[test]
    fn dyadic_ceiling() {
        assert_eq!(ceil_to_dyadic(&q(3, 10), 2), q(1, 2));
        assert_eq!(ceil_to_dyadic(&q(1, 1), 2), q(1, 1));
        assert_eq!(ceil_to_dyadic(&q(0, 1), 3), q(0, 1));
    }

    #[test]
    fn rational_text_round_trip() {
        let x = q(-7, 12);
        assert_eq!(parse_q(&format_q(&x)).unwrap(), x);
        assert_eq!(parse_q("5").unwrap(), q(5, 1));
        assert!(parse_q("1/0").is_err());
    }
}
