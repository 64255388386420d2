//! Exact rational arithmetic helpers.
//!
//! Model inputs arrive as `f64` (JSON numbers, CLI flags). They are converted
//! through their shortest round-trip decimal representation, so `2.83` becomes
//! exactly `283/100` rather than the nearest binary fraction. All model sums
//! are carried out on these rationals and rounded only for display.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

pub type Exact = BigRational;

/// Exact value of the shortest decimal that round-trips to `value`.
///
/// Panics on non-finite input; callers validate first.
pub fn from_f64(value: f64) -> Exact {
    assert!(value.is_finite(), "non-finite value {value}");
    // `Display` for f64 prints the shortest round-trip digits, never in
    // exponent form.
    let text = value.to_string();
    parse_decimal(&text).expect("f64 display is a plain decimal")
}

/// Parse a plain decimal literal such as `-12.0375`.
pub fn parse_decimal(text: &str) -> Option<Exact> {
    let (negative, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let joined = format!("{int_part}{frac_part}");
    let numer: BigInt = if joined.is_empty() {
        BigInt::zero()
    } else {
        joined.parse().ok()?
    };
    let denom = num::pow(BigInt::from(10), frac_part.len());
    let value = BigRational::new(numer, denom);
    Some(if negative { -value } else { value })
}

pub fn int(value: i64) -> Exact {
    BigRational::from_integer(BigInt::from(value))
}

pub fn ratio(numer: i64, denom: i64) -> Exact {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn to_f64(value: &Exact) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Nearest integer, halves away from zero.
pub fn round_to_int(value: &Exact) -> i64 {
    value
        .round()
        .to_integer()
        .to_i64()
        .expect("rounded value fits in i64")
}

/// Round to `decimals` places, halves away from zero.
pub fn round_decimals(value: &Exact, decimals: u32) -> Exact {
    let scale = BigRational::from_integer(num::pow(BigInt::from(10), decimals as usize));
    (value * &scale).round() / scale
}

/// Round to `figures` significant figures, halves away from zero.
pub fn round_significant(value: &Exact, figures: u32) -> Exact {
    assert!(figures > 0);
    if value.is_zero() {
        return value.clone();
    }
    let magnitude = decimal_exponent(&value.abs());
    let shift = figures as i64 - 1 - magnitude;
    let ten = BigRational::from_integer(BigInt::from(10));
    let scale = if shift >= 0 {
        num::pow(ten, shift as usize)
    } else {
        BigRational::one() / num::pow(ten, (-shift) as usize)
    };
    (value * &scale).round() / scale
}

/// `floor(log10(value))` for a positive rational.
fn decimal_exponent(value: &Exact) -> i64 {
    let ten = BigRational::from_integer(BigInt::from(10));
    let one = BigRational::one();
    let mut exponent = 0i64;
    let mut scaled = value.clone();
    while scaled >= ten {
        scaled /= &ten;
        exponent += 1;
    }
    while scaled < one {
        scaled *= &ten;
        exponent -= 1;
    }
    exponent
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_conversion_is_exact() {
        assert_eq!(from_f64(2.83), ratio(283, 100));
        assert_eq!(from_f64(0.1), ratio(1, 10));
        assert_eq!(from_f64(-12.5), ratio(-25, 2));
        assert_eq!(from_f64(64.0), int(64));
        assert_eq!(parse_decimal(".5"), Some(ratio(1, 2)));
        assert_eq!(parse_decimal("1e5"), None);
        assert_eq!(parse_decimal(""), None);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_to_int(&ratio(5, 2)), 3);
        assert_eq!(round_to_int(&ratio(-5, 2)), -3);
        assert_eq!(round_to_int(&ratio(726, 10)), 73);
        assert_eq!(round_decimals(&ratio(17375, 10000), 2), ratio(174, 100));
    }

    #[test]
    fn significant_figures() {
        assert_eq!(round_significant(&ratio(139, 80), 3), ratio(174, 100));
        assert_eq!(round_significant(&ratio(174, 665), 3), ratio(262, 1000));
        assert_eq!(round_significant(&int(12345), 2), int(12000));
        assert_eq!(round_significant(&ratio(-5, 1000), 1), ratio(-5, 1000));
        assert_eq!(round_significant(&ratio(9996, 1000), 3), int(10));
    }
}
