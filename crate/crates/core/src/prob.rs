//! Probability values that stay exact rationals when supplied as rationals
//! (e.g. 1/2 tie-breaks) and are IEEE doubles otherwise. The exact engine
//! refuses to run unless every input probability is rational.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Prob {
    Exact(BigRational),
    Approx(f64),
}

impl Prob {
    pub fn from_ratio(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidArgument(
                "probability with zero denominator".into(),
            ));
        }
        let r = BigRational::new(BigInt::from(num), BigInt::from(den));
        Self::exact(r)
    }

    pub fn exact(r: BigRational) -> Result<Self> {
        if r.is_negative() || r > BigRational::one() {
            return Err(Error::InvalidArgument(format!(
                "probability {r} outside [0, 1]"
            )));
        }
        Ok(Prob::Exact(r))
    }

    pub fn from_f64(value: f64) -> Result<Self> {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidArgument(format!(
                "probability {value} outside [0, 1]"
            )));
        }
        Ok(Prob::Approx(value))
    }

    pub fn zero() -> Self {
        Prob::Exact(BigRational::zero())
    }

    pub fn one() -> Self {
        Prob::Exact(BigRational::one())
    }

    pub fn half() -> Self {
        Prob::Exact(BigRational::new(BigInt::from(1), BigInt::from(2)))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Prob::Exact(r) => r.to_f64().unwrap_or_else(|| {
                // values are confined to [0, 1]; conversion cannot overflow
                unreachable!("probability out of f64 range")
            }),
            Prob::Approx(x) => *x,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Prob::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Prob::Exact(r) => Some(r),
            Prob::Approx(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Prob::Exact(r) => r.is_zero(),
            Prob::Approx(x) => *x == 0.0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Prob::Exact(r) => r.is_one(),
            Prob::Approx(x) => *x == 1.0,
        }
    }

    pub fn is_positive(&self) -> bool {
        match self {
            Prob::Exact(r) => r.is_positive(),
            Prob::Approx(x) => *x > 0.0,
        }
    }

    /// 1 - p, staying exact when p is exact.
    pub fn one_minus(&self) -> Prob {
        match self {
            Prob::Exact(r) => Prob::Exact(BigRational::one() - r),
            Prob::Approx(x) => Prob::Approx(1.0 - x),
        }
    }

    /// Stable content encoding used for rule fingerprints.
    pub fn push_canonical_bytes(&self, out: &mut Vec<u8>) {
        match self {
            Prob::Exact(r) => {
                out.extend_from_slice(b"r:");
                out.extend_from_slice(r.numer().to_string().as_bytes());
                out.push(b'/');
                out.extend_from_slice(r.denom().to_string().as_bytes());
            }
            Prob::Approx(x) => {
                out.extend_from_slice(b"f:");
                out.extend_from_slice(&x.to_bits().to_le_bytes());
            }
        }
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prob::Exact(r) => write!(f, "{r}"),
            Prob::Approx(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for Prob {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Prob::Exact(r) => {
                let num = r.numer().to_i128().ok_or_else(|| {
                    serde::ser::Error::custom("rational numerator too large to serialize")
                })?;
                let den = r.denom().to_i128().ok_or_else(|| {
                    serde::ser::Error::custom("rational denominator too large to serialize")
                })?;
                let mut s = serializer.serialize_struct("Prob", 2)?;
                s.serialize_field("num", &num)?;
                s.serialize_field("den", &den)?;
                s.end()
            }
            Prob::Approx(x) => serializer.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Prob {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ProbVisitor;

        impl<'de> Visitor<'de> for ProbVisitor {
            type Value = Prob;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number in [0, 1] or an object {\"num\": a, \"den\": b}")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Prob, E> {
                Prob::from_f64(v).map_err(E::custom)
            }

            // integer literals (0 and 1) are exact; float literals are not
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Prob, E> {
                let v = i64::try_from(v).map_err(E::custom)?;
                Prob::from_ratio(v, 1).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Prob, E> {
                Prob::from_ratio(v, 1).map_err(E::custom)
            }

            fn visit_map<A: MapAccess<'de>>(
                self,
                mut map: A,
            ) -> std::result::Result<Prob, A::Error> {
                let mut num: Option<i64> = None;
                let mut den: Option<i64> = None;
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "num" => num = Some(map.next_value()?),
                        "den" => den = Some(map.next_value()?),
                        other => {
                            return Err(de::Error::unknown_field(other, &["num", "den"]));
                        }
                    }
                }
                let num = num.ok_or_else(|| de::Error::missing_field("num"))?;
                let den = den.ok_or_else(|| de::Error::missing_field("den"))?;
                Prob::from_ratio(num, den).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_any(ProbVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_constructor_checks_range() {
        assert!(Prob::from_ratio(1, 2).is_ok());
        assert!(Prob::from_ratio(3, 2).is_err());
        assert!(Prob::from_ratio(-1, 2).is_err());
        assert!(Prob::from_ratio(1, 0).is_err());
    }

    #[test]
    fn serde_distinguishes_rational_from_float() {
        let p: Prob = serde_json::from_str("0.1").unwrap();
        assert!(!p.is_exact());
        let q: Prob = serde_json::from_str(r#"{"num":1,"den":10}"#).unwrap();
        assert!(q.is_exact());
        assert_eq!(q.to_f64(), 0.1);
    }

    #[test]
    fn one_minus_stays_exact() {
        let p = Prob::from_ratio(1, 10).unwrap();
        let q = p.one_minus();
        assert_eq!(
            q.as_exact().unwrap(),
            &BigRational::new(9.into(), 10.into())
        );
    }
}
