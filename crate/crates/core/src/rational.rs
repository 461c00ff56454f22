//! Exact rational helpers shared by the cost ledger, the shift values and the
//! parameter LP.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// `num / den` as an exact rational.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Closest rational with denominator `den` to a float.
pub fn from_f64_rounded(value: f64, den: i64) -> Rational {
    ratio((value * den as f64).round() as i64, den)
}

/// Parses `12`, `-0.375`, `3.`, `.5` or `7/3`.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(Rational::new(num, den));
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    if body.is_empty() {
        return None;
    }
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{whole}{frac}");
    let mantissa: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    let value = Rational::new(mantissa, scale);
    Some(if negative { -value } else { value })
}

/// Exact decimal rendering when the denominator has only factors 2 and 5,
/// otherwise `p/q`.
pub fn format_rational(value: &Rational) -> String {
    let mut den = value.denom().clone();
    let mut twos = 0usize;
    let mut fives = 0usize;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while den.is_multiple_of(&two) {
        den /= &two;
        twos += 1;
    }
    while den.is_multiple_of(&five) {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let places = twos.max(fives);
    let scaled = value * Rational::from_integer(num_traits::pow(BigInt::from(10), places));
    let digits = scaled.to_integer().abs().to_string();
    let sign = if value.is_negative() { "-" } else { "" };
    if places == 0 {
        return format!("{sign}{digits}");
    }
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (whole, frac) = padded.split_at(padded.len() - places);
    format!("{sign}{whole}.{frac}")
}

/// Serializes a rational as its exact text form.
pub fn serialize<S: serde::Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&format_rational(value))
}

/// Least common multiple of the denominators, if it fits in an `i64`.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> Option<i64> {
    let mut lcm = BigInt::one();
    for value in values {
        lcm = lcm.lcm(value.denom());
    }
    lcm.to_i64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_round_trip() {
        for text in ["0", "1", "12.5", "-0.375", "0.001", "100.25"] {
            let value = parse_rational(text).unwrap();
            assert_eq!(format_rational(&value), text);
        }
        assert_eq!(format_rational(&parse_rational(".5").unwrap()), "0.5");
        assert_eq!(format_rational(&ratio(1, 3)), "1/3");
        assert_eq!(parse_rational("2/6").unwrap(), ratio(1, 3));
    }

    #[test]
    fn rejects_garbage() {
        for text in ["", "-", ".", "1.2.3", "abc", "1/0", "1e3"] {
            assert!(parse_rational(text).is_none(), "{text}");
        }
    }
}
