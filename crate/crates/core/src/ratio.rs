//! Exact probabilities.
//!
//! Model weights are kept as `i64` rationals so that outcome distributions sum
//! to one exactly. In files they appear either as JSON numbers (read through
//! their shortest decimal rendering) or as `"num/den"` strings.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serializer};

/// Probability or weight.
pub type Prob = Rational64;

/// Parses `"0.3"`, `"3"`, `"1e-2"` or `"1/3"` into an exact rational.
pub fn parse_prob(text: &str) -> Option<Prob> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: i64 = num.trim().parse().ok()?;
        let den: i64 = den.trim().parse().ok()?;
        if den == 0 {
            return None;
        }
        return Some(Prob::new(num, den));
    }
    parse_decimal(text)
}

fn parse_decimal(text: &str) -> Option<Prob> {
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut num: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    let mut den: i128 = 1;
    let scale = exp - frac_part.len() as i32;
    for _ in 0..scale.unsigned_abs() {
        if scale > 0 {
            num = num.checked_mul(10)?;
        } else {
            den = den.checked_mul(10)?;
        }
    }
    let g = num.gcd(&den);
    let (num, den) = (num / g.max(1), den / g.max(1));
    let num = i64::try_from(num).ok()?;
    let den = i64::try_from(den).ok()?;
    Some(Prob::new(if neg { -num } else { num }, den))
}

/// Converts an `f64` read from JSON into the rational its shortest decimal
/// rendering denotes.
pub fn prob_from_f64(value: f64) -> Option<Prob> {
    if !value.is_finite() {
        return None;
    }
    parse_decimal(&format!("{value}"))
}

/// Renders a rational as its exact decimal expansion when finite, else `num/den`.
pub fn format_prob(p: &Prob) -> String {
    format_big(&BigRational::new(BigInt::from(*p.numer()), BigInt::from(*p.denom())))
}

/// Same as [`format_prob`] for arbitrary-precision rationals.
pub fn format_big(p: &BigRational) -> String {
    let mut den = p.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0u32, 0u32);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("{}/{}", p.numer(), p.denom());
    }
    let places = twos.max(fives);
    let scaled = p.numer() * BigInt::from(10).pow(places) / p.denom();
    let neg = scaled.is_negative();
    let digits = scaled.abs().to_string();
    if places == 0 {
        return format!("{}{}", if neg { "-" } else { "" }, digits);
    }
    let places = places as usize;
    let padded = format!("{:0>width$}", digits, width = places + 1);
    let (int_part, frac_part) = padded.split_at(padded.len() - places);
    format!("{}{}.{}", if neg { "-" } else { "" }, int_part, frac_part)
}

pub fn to_f64(p: &Prob) -> f64 {
    p.to_f64().unwrap_or(f64::NAN)
}

pub fn big_to_f64(p: &BigRational) -> f64 {
    p.to_f64().unwrap_or(f64::NAN)
}

/// Serde adapter: accepts a JSON number or a `"num/den"` string, writes a
/// number when the decimal expansion is finite and a string otherwise.
pub mod serde_prob {
    use super::*;

    pub fn serialize<S: Serializer>(p: &Prob, s: S) -> Result<S::Ok, S::Error> {
        let text = format_prob(p);
        if text.contains('/') {
            s.serialize_str(&text)
        } else {
            let v: serde_json::Number = text.parse().map_err(serde::ser::Error::custom)?;
            serde::Serialize::serialize(&v, s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Prob, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => prob_from_f64(v)
                .ok_or_else(|| de::Error::custom(format!("invalid probability {v}"))),
            Raw::Text(t) => {
                parse_prob(&t).ok_or_else(|| de::Error::custom(format!("invalid probability {t:?}")))
            }
        }
    }
}

pub fn zero() -> Prob {
    Prob::zero()
}

pub fn one() -> Prob {
    Prob::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_parse_exactly() {
        assert_eq!(parse_prob("0.3"), Some(Prob::new(3, 10)));
        assert_eq!(parse_prob("0.91"), Some(Prob::new(91, 100)));
        assert_eq!(parse_prob("1"), Some(Prob::new(1, 1)));
        assert_eq!(parse_prob("1e-2"), Some(Prob::new(1, 100)));
        assert_eq!(parse_prob("1/3"), Some(Prob::new(1, 3)));
        assert_eq!(parse_prob(".5"), Some(Prob::new(1, 2)));
        assert_eq!(parse_prob("x"), None);
        assert_eq!(parse_prob("1/0"), None);
    }

    #[test]
    fn f64_goes_through_shortest_rendering() {
        assert_eq!(prob_from_f64(0.1), Some(Prob::new(1, 10)));
        assert_eq!(prob_from_f64(0.6), Some(Prob::new(3, 5)));
    }

    #[test]
    fn formatting() {
        assert_eq!(format_prob(&Prob::new(3, 10)), "0.3");
        assert_eq!(format_prob(&Prob::new(9, 100)), "0.09");
        assert_eq!(format_prob(&Prob::new(1, 1)), "1");
        assert_eq!(format_prob(&Prob::new(1, 8)), "0.125");
        assert_eq!(format_prob(&Prob::new(1, 3)), "1/3");
        assert_eq!(format_prob(&Prob::new(-1, 4)), "-0.25");
    }
}
