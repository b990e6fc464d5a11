//! Rational literals, p-adic valuations of integers and rationals, and
//! outward-rounded logarithms.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RationalParseError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal {0:?}")]
    Invalid(String),
    #[error("zero denominator")]
    ZeroDenominator,
}

/// Parse `n`, `-n`, `n/d` or `-n/d` with decimal digits.
pub fn parse_rational(text: &str) -> Result<BigRational, RationalParseError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(RationalParseError::Empty);
    }
    let invalid = || RationalParseError::Invalid(s.to_string());
    let digits = |t: &str| -> Result<BigInt, RationalParseError> {
        let body = t.strip_prefix(['+', '-']).unwrap_or(t);
        if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
            return Err(invalid());
        }
        t.parse::<BigInt>().map_err(|_| invalid())
    };
    match s.split_once('/') {
        None => Ok(BigRational::from_integer(digits(s)?)),
        Some((n, d)) => {
            let num = digits(n.trim())?;
            let d = d.trim();
            if d.starts_with(['+', '-']) {
                return Err(invalid());
            }
            let den = digits(d)?;
            if den.is_zero() {
                return Err(RationalParseError::ZeroDenominator);
            }
            Ok(BigRational::new(num, den))
        }
    }
}

/// Lossless `num/den` rendering.
pub struct Fraction<'a>(pub &'a BigRational);

impl fmt::Display for Fraction<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

pub fn format_rational(q: &BigRational) -> String {
    Fraction(q).to_string()
}

/// Exponent of `p` in nonzero `n`.
pub fn vp_int(n: &BigInt, p: u64) -> u64 {
    assert!(!n.is_zero(), "valuation of zero");
    let pb = BigInt::from(p);
    let mut m = n.abs();
    let mut v = 0;
    loop {
        let (q, r) = m.div_rem(&pb);
        if !r.is_zero() {
            return v;
        }
        m = q;
        v += 1;
    }
}

pub fn vp_rational(q: &BigRational, p: u64) -> i64 {
    vp_int(q.numer(), p) as i64 - vp_int(q.denom(), p) as i64
}

/// Interval containing `ln n` for a positive integer.
pub fn ln_int_interval(n: &BigUint) -> (f64, f64) {
    assert!(!n.is_zero());
    let bits = n.bits();
    if bits <= 53 {
        let v = n.to_f64().unwrap().ln();
        return (v.next_down().next_down(), v.next_up().next_up());
    }
    let shift = bits - 60;
    let top = (n >> shift).to_u64().unwrap() as f64;
    let s = shift as f64 * std::f64::consts::LN_2;
    let lo = top.ln() + s;
    let hi = (top + 1.0).ln() + s;
    let pad = 8.0 * f64::EPSILON * hi.abs().max(1.0);
    (lo - pad, hi + pad)
}

/// Interval containing `ln |q|` for nonzero `q`.
pub fn ln_abs_interval(q: &BigRational) -> (f64, f64) {
    let (nl, nh) = ln_int_interval(q.numer().magnitude());
    let (dl, dh) = ln_int_interval(q.denom().magnitude());
    ((nl - dh).next_down(), (nh - dl).next_up())
}

pub fn ln_abs(q: &BigRational) -> f64 {
    let (lo, hi) = ln_abs_interval(q);
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals() {
        assert_eq!(parse_rational("3").unwrap(), BigRational::from_integer(3.into()));
        assert_eq!(
            parse_rational(" -6/4 ").unwrap(),
            BigRational::new((-3).into(), 2.into())
        );
        assert_eq!(parse_rational("1/0"), Err(RationalParseError::ZeroDenominator));
        assert!(parse_rational("1/-2").is_err());
        assert!(parse_rational("1.5").is_err());
        assert!(parse_rational("--1").is_err());
        assert!(parse_rational("").is_err());
        assert!(parse_rational("/3").is_err());
    }

    #[test]
    fn valuations() {
        let q = BigRational::new(12.into(), 5.into());
        assert_eq!(vp_rational(&q, 2), 2);
        assert_eq!(vp_rational(&q, 5), -1);
        assert_eq!(vp_rational(&q, 7), 0);
    }

    #[test]
    fn log_intervals_contain_value() {
        let n: BigUint = BigUint::from(10u32).pow(100);
        let (lo, hi) = ln_int_interval(&n);
        let exact = 100.0 * 10f64.ln();
        assert!(lo <= exact && exact <= hi);
        assert!(hi - lo < 1e-10);
        let q = BigRational::new(1.into(), BigInt::from(10).pow(100));
        let (lo, hi) = ln_abs_interval(&q);
        assert!(lo <= -exact && -exact <= hi);
    }

    #[test]
    fn formatting() {
        assert_eq!(format_rational(&BigRational::from_integer(16.into())), "16/1");
        assert_eq!(
            format_rational(&BigRational::new((-2).into(), 9.into())),
            "-2/9"
        );
    }
}
