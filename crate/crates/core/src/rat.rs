//! Exact nonnegative rationals.
//!
//! Every cost, bound and ratio in the crate is a [`Rat`]. The text form is
//! `p` or `p/q` in lowest terms, which is what transcripts and wire messages
//! carry.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul};
use std::str::FromStr;

use rug::ops::Pow;
use rug::{Integer, Rational};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRatError {
    #[error("malformed rational {0:?}: expected `p` or `p/q` with decimal digits")]
    Malformed(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
    #[error("negative value {0:?}")]
    Negative(String),
}

/// Nonnegative arbitrary-precision rational, always in lowest terms.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rat(Rational);

impl Rat {
    pub fn zero() -> Self {
        Rat(Rational::new())
    }

    pub fn one() -> Self {
        Rat(Rational::from(1))
    }

    pub fn from_integer(value: u64) -> Self {
        Rat(Rational::from(value))
    }

    /// `numer / denom`, reduced. Panics if `denom` is zero.
    pub fn new(numer: u64, denom: u64) -> Self {
        assert!(denom != 0, "Rat::new with zero denominator");
        Rat(Rational::from((numer, denom)))
    }

    /// `numer / denom`, reduced; `None` for a zero denominator or a negative value.
    pub fn from_parts(numer: Integer, denom: Integer) -> Option<Self> {
        if denom == 0 {
            return None;
        }
        let value = Rational::from((numer, denom));
        (value >= 0).then_some(Rat(value))
    }

    pub fn from_big(value: Integer) -> Option<Self> {
        Self::from_parts(value, Integer::from(1))
    }

    pub fn numer(&self) -> &Integer {
        self.0.numer()
    }

    pub fn denom(&self) -> &Integer {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0 == 0
    }

    pub fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(Rat(self.0.clone().recip()))
        }
    }

    pub fn checked_div(&self, rhs: &Rat) -> Option<Self> {
        if rhs.is_zero() {
            None
        } else {
            Some(Rat(Rational::from(&self.0 / &rhs.0)))
        }
    }

    /// `self - rhs`, or `None` when the result would be negative.
    pub fn checked_sub(&self, rhs: &Rat) -> Option<Self> {
        if rhs > self {
            None
        } else {
            Some(Rat(Rational::from(&self.0 - &rhs.0)))
        }
    }

    pub fn pow(&self, exp: u32) -> Self {
        Rat(Rational::from((&self.0).pow(exp)))
    }

    pub fn ceil(&self) -> Integer {
        Integer::from(self.0.ceil_ref())
    }

    pub fn floor(&self) -> Integer {
        Integer::from(self.0.floor_ref())
    }

    /// Lossy conversion for display.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    /// Decimal rendering truncated to `places` digits after the point.
    /// Display only; never round-tripped.
    pub fn to_decimal_string(&self, places: usize) -> String {
        let scale = Integer::from(Integer::u_pow_u(10, places as u32));
        let scaled = Integer::from(self.numer() * &scale) / self.denom();
        let (int_part, frac_part) = scaled.div_rem(scale);
        if places == 0 {
            return int_part.to_string();
        }
        format!("{int_part}.{frac_part:0>places$}")
    }
}

impl Default for Rat {
    fn default() -> Self {
        Rat::zero()
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self.0.denom() == 1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rat({self})")
    }
}

fn parse_digits(part: &str, whole: &str) -> Result<Integer, ParseRatError> {
    if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseRatError::Malformed(whole.to_string()));
    }
    Integer::from_str_radix(part, 10).map_err(|_| ParseRatError::Malformed(whole.to_string()))
}

impl FromStr for Rat {
    type Err = ParseRatError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        if text.starts_with('-') {
            return Err(ParseRatError::Negative(text.to_string()));
        }
        let (numer, denom) = match text.split_once('/') {
            Some((p, q)) => (parse_digits(p, text)?, parse_digits(q, text)?),
            None => (parse_digits(text, text)?, Integer::from(1)),
        };
        Rat::from_parts(numer, denom).ok_or_else(|| ParseRatError::ZeroDenominator(text.to_string()))
    }
}

pub fn parse_rat(text: &str) -> Result<Rat, ParseRatError> {
    text.parse()
}

pub fn format_rat(value: &Rat) -> String {
    value.to_string()
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl From<u64> for Rat {
    fn from(value: u64) -> Self {
        Rat::from_integer(value)
    }
}

impl<'a> Add<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn add(self, rhs: &'a Rat) -> Rat {
        Rat(Rational::from(&self.0 + &rhs.0))
    }
}

impl Add for Rat {
    type Output = Rat;
    fn add(self, rhs: Rat) -> Rat {
        Rat(self.0 + rhs.0)
    }
}

impl AddAssign<&Rat> for Rat {
    fn add_assign(&mut self, rhs: &Rat) {
        self.0 += &rhs.0;
    }
}

impl<'a> Mul<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn mul(self, rhs: &'a Rat) -> Rat {
        Rat(Rational::from(&self.0 * &rhs.0))
    }
}

impl Mul for Rat {
    type Output = Rat;
    fn mul(self, rhs: Rat) -> Rat {
        Rat(self.0 * rhs.0)
    }
}

/// Panics on a zero divisor; use [`Rat::checked_div`] when that is possible.
impl<'a> Div<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn div(self, rhs: &'a Rat) -> Rat {
        self.checked_div(rhs).expect("division of Rat by zero")
    }
}

impl Div for Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        &self / &rhs
    }
}

impl Sum for Rat {
    fn sum<I: Iterator<Item = Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |acc, r| acc + r)
    }
}

impl<'a> Sum<&'a Rat> for Rat {
    fn sum<I: Iterator<Item = &'a Rat>>(iter: I) -> Rat {
        let mut acc = Rat::zero();
        for r in iter {
            acc += r;
        }
        acc
    }
}

impl PartialEq<u64> for Rat {
    fn eq(&self, other: &u64) -> bool {
        self.0 == *other
    }
}

impl PartialOrd<u64> for Rat {
    fn partial_cmp(&self, other: &u64) -> Option<Ordering> {
        self.0.partial_cmp(other)
    }
}
