//! Exact rational helpers.
//!
//! Every period, density and threshold in the crate is a [`Ratio`]; nothing on
//! a verdict path goes through floating point.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Ratio = BigRational;

pub fn int(n: i64) -> Ratio {
    Ratio::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Ratio {
    Ratio::new(BigInt::from(n), BigInt::from(d))
}

/// `1/n`.
pub fn recip(n: i64) -> Ratio {
    frac(1, n)
}

pub fn parse(s: &str) -> Option<Ratio> {
    let s = s.trim();
    let r: Ratio = s.parse().ok()?;
    if s.contains('/') && r.denom().is_zero() {
        return None;
    }
    Some(r)
}

/// Exact value as `u64` when the ratio is a non-negative integer.
pub fn to_u64(r: &Ratio) -> Option<u64> {
    if r.is_integer() && !r.is_negative() {
        r.numer().to_u64()
    } else {
        None
    }
}

/// `floor(r)` as a big integer.
pub fn floor(r: &Ratio) -> BigInt {
    r.numer().div_floor(r.denom())
}

/// Smallest `k` with `2^k >= r`, for `r > 0`.
pub fn ceil_log2(r: &Ratio) -> i64 {
    assert!(r.is_positive(), "ceil_log2 of non-positive value");
    let mut k = 0i64;
    let mut p = Ratio::one();
    if &p >= r {
        while &(&p / int(2)) >= r {
            p /= int(2);
            k -= 1;
        }
        return k;
    }
    while &p < r {
        p *= int(2);
        k += 1;
    }
    k
}

/// `2^k` for any integer `k`.
pub fn pow2(k: i64) -> Ratio {
    let base = Ratio::from_integer(BigInt::one() << k.unsigned_abs());
    if k >= 0 {
        base
    } else {
        base.recip()
    }
}

/// Serde adapter that writes a ratio as `"7/2"` (or `"7"`).
pub mod serde_str {
    use super::Ratio;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Ratio, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(r)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio, D::Error> {
        let s = String::deserialize(d)?;
        super::parse(&s).ok_or_else(|| D::Error::custom(format!("invalid ratio {s:?}")))
    }
}

pub mod serde_vec_str {
    use super::Ratio;
    use serde::{de::Error, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Ratio], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&r.to_string())?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Ratio>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| super::parse(s).ok_or_else(|| D::Error::custom(format!("invalid ratio {s:?}"))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse("7"), Some(int(7)));
        assert_eq!(parse(" 7/2 "), Some(frac(7, 2)));
        assert_eq!(parse("14/4"), Some(frac(7, 2)));
        assert_eq!(parse("x"), None);
        assert_eq!(parse("1/0"), None);
    }

    #[test]
    fn log2_and_pow2() {
        assert_eq!(ceil_log2(&int(1)), 0);
        assert_eq!(ceil_log2(&int(24)), 5);
        assert_eq!(ceil_log2(&int(32)), 5);
        assert_eq!(ceil_log2(&int(33)), 6);
        assert_eq!(ceil_log2(&frac(1, 2)), -1);
        assert_eq!(ceil_log2(&frac(3, 4)), 0);
        assert_eq!(pow2(-2), frac(1, 4));
        assert_eq!(pow2(4), int(16));
    }

    #[test]
    fn floor_of_fractions() {
        assert_eq!(floor(&frac(54, 7)), BigInt::from(7));
        assert_eq!(floor(&frac(-1, 2)), BigInt::from(-1));
    }
}
