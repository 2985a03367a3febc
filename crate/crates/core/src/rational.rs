//! Exact rational arithmetic helpers shared by all modules.
//!
//! All delays, clock constants, and interval bounds are rationals. Before any
//! DBM is built, every constant in scope is scaled by the least common multiple
//! of the denominators so that zone arithmetic stays integral.

use num::rational::Ratio;
use num::{Integer, Signed, Zero};
use thiserror::Error;

pub type Rational = Ratio<i64>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RationalError {
    #[error("malformed rational literal `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Parses `3`, `-3`, `3.25`, or `7/2` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational, RationalError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(RationalError::Malformed(s.to_string()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num
            .trim()
            .parse()
            .map_err(|_| RationalError::Malformed(s.to_string()))?;
        let d: i64 = den
            .trim()
            .parse()
            .map_err(|_| RationalError::Malformed(s.to_string()))?;
        if d == 0 {
            return Err(RationalError::ZeroDenominator(s.to_string()));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let sign = if int.trim_start().starts_with('-') { -1 } else { 1 };
        let i: i64 = if int == "-" || int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| RationalError::Malformed(s.to_string()))?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(RationalError::Malformed(s.to_string()));
        }
        if frac.len() > 15 {
            return Err(RationalError::Malformed(s.to_string()));
        }
        let f: i64 = frac.parse().map_err(|_| RationalError::Malformed(s.to_string()))?;
        let scale = 10i64.pow(frac.len() as u32);
        return Ok(Rational::from_integer(i) + Rational::new(sign * f, scale));
    }
    s.parse::<i64>()
        .map(Rational::from_integer)
        .map_err(|_| RationalError::Malformed(s.to_string()))
}

/// Renders a rational as an exact decimal when the denominator is of the form
/// 2^a * 5^b, and as `num/den` otherwise.
pub fn format_rational(r: &Rational) -> String {
    let den = *r.denom();
    if den == 1 {
        return format!("{}.0", r.numer());
    }
    // Decimal rendering is possible iff den divides some power of ten.
    let (mut twos, mut fives, mut rest) = (0u32, 0u32, den);
    while rest % 2 == 0 {
        twos += 1;
        rest /= 2;
    }
    while rest % 5 == 0 {
        fives += 1;
        rest /= 5;
    }
    if rest != 1 || twos.max(fives) > 15 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let digits = twos.max(fives);
    let scale = 10i64.pow(digits);
    let scaled = r.numer() * (scale / den);
    let sign = if scaled < 0 { "-" } else { "" };
    let abs = scaled.abs();
    let int = abs / scale;
    let frac = abs % scale;
    format!("{sign}{int}.{frac:0width$}", width = digits as usize)
}

/// Least common multiple of the denominators of all given rationals (at least 1).
pub fn denominator_lcm<'a>(values: impl IntoIterator<Item = &'a Rational>) -> i64 {
    let mut lcm = 1i64;
    for v in values {
        lcm = lcm.lcm(v.denom());
    }
    lcm
}

/// Scales a rational by `factor`, which must clear its denominator.
pub fn scale_to_integer(r: &Rational, factor: i64) -> i64 {
    let scaled = r * Rational::from_integer(factor);
    debug_assert!(scaled.denom().abs() == 1);
    scaled.to_integer()
}

pub fn is_nonnegative(r: &Rational) -> bool {
    !r.is_negative() || r.is_zero()
}
