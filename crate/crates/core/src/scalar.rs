//! Scalar abstraction shared by the discrete solvers.
//!
//! The discrete machinery (loss thresholds, success-set search, lattice
//! construction, replication) runs unchanged over `f32`, `f64` and exact
//! big rationals. Floating types compare with a small relative tolerance,
//! the rational type compares exactly.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

pub trait Scalar:
    Num + Signed + PartialOrd + Clone + Debug + Display + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Relative slack used by feasibility and tie tests. Zero for exact types.
    fn rel_tol() -> Self;

    /// Absolute slack used by feasibility and tie tests. Zero for exact types.
    fn abs_tol() -> Self;

    fn is_exact() -> bool;

    /// Parses a decimal literal (`0.1`, `-2e-3`) or a fraction (`1/4`).
    /// Exact types keep decimal literals exact.
    fn parse_decimal(text: &str) -> Option<Self>;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_f64_lossy(x: f64) -> Self;

    /// Real power `self^exp` for `self >= 0`. Exact types return an exact
    /// result whenever it is representable.
    fn powr(&self, exp: &Self) -> Self;

    /// Exact fraction text, if the type carries one.
    fn exact_text(&self) -> Option<String> {
        None
    }
}

/// `cost <= budget` up to the scalar's tolerance.
pub fn fits<T: Scalar>(cost: &T, budget: &T) -> bool {
    let slack = budget.abs() * T::rel_tol() + T::abs_tol();
    *cost <= budget.clone() + slack
}

/// `a == b` up to the scalar's tolerance.
pub fn approx_eq<T: Scalar>(a: &T, b: &T) -> bool {
    let scale = if a.abs() > b.abs() { a.abs() } else { b.abs() };
    (a.clone() - b.clone()).abs() <= scale * T::rel_tol() + T::abs_tol()
}

/// `a < b` by more than the tolerance.
pub fn definitely_less<T: Scalar>(a: &T, b: &T) -> bool {
    a < b && !approx_eq(a, b)
}

pub fn max_of<T: Scalar>(a: T, b: T) -> T {
    if a >= b {
        a
    } else {
        b
    }
}

/// `(x)^+`
pub fn positive_part<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

fn split_fraction(text: &str) -> Option<(&str, &str)> {
    let mut parts = text.splitn(2, '/');
    let num = parts.next()?.trim();
    let den = parts.next()?.trim();
    Some((num, den))
}

impl Scalar for f64 {
    fn rel_tol() -> Self {
        1e-12
    }

    fn abs_tol() -> Self {
        1e-15
    }

    fn is_exact() -> bool {
        false
    }

    fn parse_decimal(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Some((n, d)) = split_fraction(text) {
            let n: f64 = n.parse().ok()?;
            let d: f64 = d.parse().ok()?;
            return (d != 0.0).then_some(n / d);
        }
        text.parse().ok().filter(|x: &f64| x.is_finite())
    }

    fn from_f64_lossy(x: f64) -> Self {
        x
    }

    fn powr(&self, exp: &Self) -> Self {
        if *exp == 1.0 {
            *self
        } else {
            self.powf(*exp)
        }
    }
}

impl Scalar for f32 {
    fn rel_tol() -> Self {
        1e-5
    }

    fn abs_tol() -> Self {
        1e-7
    }

    fn is_exact() -> bool {
        false
    }

    fn parse_decimal(text: &str) -> Option<Self> {
        f64::parse_decimal(text).map(|x| x as f32)
    }

    fn from_f64_lossy(x: f64) -> Self {
        x as f32
    }

    fn powr(&self, exp: &Self) -> Self {
        if *exp == 1.0 {
            *self
        } else {
            self.powf(*exp)
        }
    }
}

/// Largest exponent magnitude evaluated exactly before falling back to floats.
const MAX_EXACT_EXPONENT: u32 = 256;

fn parse_decimal_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(pos) => (&digits[..pos], &digits[pos + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numer = BigInt::parse_bytes(all_digits.as_bytes(), 10)?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = BigRational::from_integer(numer);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

fn exact_root(value: &BigInt, degree: u32) -> Option<BigInt> {
    if value.is_negative() {
        return None;
    }
    let root = value.nth_root(degree);
    (num_traits::pow(root.clone(), degree as usize) == *value).then_some(root)
}

impl Scalar for BigRational {
    fn rel_tol() -> Self {
        BigRational::zero()
    }

    fn abs_tol() -> Self {
        BigRational::zero()
    }

    fn is_exact() -> bool {
        true
    }

    fn parse_decimal(text: &str) -> Option<Self> {
        if let Some((n, d)) = split_fraction(text) {
            let n = parse_decimal_rational(n)?;
            let d = parse_decimal_rational(d)?;
            return (!d.is_zero()).then(|| n / d);
        }
        parse_decimal_rational(text)
    }

    fn from_f64_lossy(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(BigRational::zero)
    }

    fn powr(&self, exp: &Self) -> Self {
        if exp.is_zero() {
            return BigRational::one();
        }
        if self.is_zero() {
            return BigRational::zero();
        }
        let numer = exp.numer().abs();
        let denom = exp.denom().clone();
        let exact = numer.to_u32().zip(denom.to_u32()).and_then(|(p, q)| {
            if p > MAX_EXACT_EXPONENT || q > MAX_EXACT_EXPONENT {
                return None;
            }
            let raised = num_traits::pow(self.clone(), p as usize);
            let top = exact_root(raised.numer(), q)?;
            let bottom = exact_root(raised.denom(), q)?;
            Some(BigRational::new(top, bottom))
        });
        let magnitude = exact.unwrap_or_else(|| {
            Self::from_f64_lossy(self.to_f64_lossy().powf(numer.to_f64().unwrap_or(f64::NAN) / denom.to_f64().unwrap_or(f64::NAN)))
        });
        if exp.is_negative() {
            magnitude.recip()
        } else {
            magnitude
        }
    }

    fn exact_text(&self) -> Option<String> {
        Some(self.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn rational_parses_decimals_exactly() {
        assert_eq!(BigRational::parse_decimal("0.1").unwrap(), q(1, 10));
        assert_eq!(BigRational::parse_decimal("-0.2").unwrap(), q(-1, 5));
        assert_eq!(BigRational::parse_decimal("1/4").unwrap(), q(1, 4));
        assert_eq!(BigRational::parse_decimal("1.5e2").unwrap(), q(150, 1));
        assert_eq!(BigRational::parse_decimal("25e-2").unwrap(), q(1, 4));
        assert!(BigRational::parse_decimal("abc").is_none());
        assert!(BigRational::parse_decimal("1/0").is_none());
    }

    #[test]
    fn float_parses_fractions() {
        assert_eq!(f64::parse_decimal("1/4"), Some(0.25));
        assert_eq!(f64::parse_decimal(" 600 "), Some(600.0));
        assert_eq!(f64::parse_decimal("inf"), None);
    }

    #[test]
    fn rational_power_is_exact_when_representable() {
        assert_eq!(q(5, 1).powr(&q(2, 1)), q(25, 1));
        assert_eq!(q(25, 1).powr(&q(1, 2)), q(5, 1));
        assert_eq!(q(4, 9).powr(&q(3, 2)), q(8, 27));
        assert_eq!(q(4, 1).powr(&q(-1, 2)), q(1, 2));
        // not a perfect square: falls back to the float value
        let r = q(2, 1).powr(&q(1, 2)).to_f64_lossy();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn tolerant_comparisons() {
        assert!(fits(&0.6000000000000001, &0.6));
        assert!(!fits(&0.6001, &0.6));
        assert!(fits(&q(3, 5), &q(3, 5)));
        assert!(!fits(&(q(3, 5) + q(1, 1_000_000_000_000)), &q(3, 5)));
        assert!(approx_eq(&(0.1 + 0.2), &0.3));
        assert!(!approx_eq(&q(1, 3), &q(333_333_333, 1_000_000_000)));
    }
}
