//! Exact rationals for base rotations and continued-fraction convergents.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

use crate::error::{Error, Result};

/// The golden mean `(sqrt(5) - 1) / 2`, the default "most irrational" base rotation.
pub const GOLDEN_MEAN: f64 = 0.618_033_988_749_894_8;

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// A rational number `p/q` in lowest terms with `q > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rational {
    p: i64,
    q: i64,
}

impl Rational {
    pub fn new(p: i64, q: i64) -> Result<Self> {
        if q == 0 {
            return Err(Error::Domain("zero denominator".into()));
        }
        let g = gcd(p, q).max(1);
        let s = if q < 0 { -1 } else { 1 };
        Ok(Rational {
            p: s * p / g,
            q: s * q / g,
        })
    }

    pub fn integer(n: i64) -> Self {
        Rational { p: n, q: 1 }
    }

    pub fn numer(&self) -> i64 {
        self.p
    }

    pub fn denom(&self) -> i64 {
        self.q
    }

    pub fn to_f64(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    /// Natural numbers `(s, k)` with `s*p - k*q = 1`, `0 < s <= q`.
    ///
    /// Requires `gcd(p, q) = 1` and `q >= 2`.
    pub fn bezout(&self) -> Result<(i64, i64)> {
        if self.q < 2 {
            return Err(Error::Domain(format!(
                "bezout pair needs q >= 2, got {}",
                self
            )));
        }
        let pm = self.p.rem_euclid(self.q);
        // extended Euclid on (pm, q)
        let (mut r0, mut r1) = (pm, self.q);
        let (mut s0, mut s1) = (1i64, 0i64);
        while r1 != 0 {
            let t = r0 / r1;
            (r0, r1) = (r1, r0 - t * r1);
            (s0, s1) = (s1, s0 - t * s1);
        }
        if r0 != 1 {
            return Err(Error::Domain(format!("{} is not in lowest terms", self)));
        }
        let s = s0.rem_euclid(self.q);
        let s = if s == 0 { self.q } else { s };
        // s*p - 1 is divisible by q
        let k = (s as i128 * self.p as i128 - 1) / self.q as i128;
        Ok((s, k as i64))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

#[derive(Serialize, Deserialize)]
struct RationalRepr {
    p: String,
    q: String,
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RationalRepr {
            p: self.p.to_string(),
            q: self.q.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = RationalRepr::deserialize(d)?;
        let p: i64 = r.p.parse().map_err(serde::de::Error::custom)?;
        let q: i64 = r.q.parse().map_err(serde::de::Error::custom)?;
        Rational::new(p, q).map_err(serde::de::Error::custom)
    }
}

/// Rotation number of the base circle.
///
/// Rationals are kept exact; everything else carries a "nominally
/// irrational" tag. No attempt is made to decide irrationality of a float.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseRotation {
    Rational { value: Rational },
    Irrational { value: f64 },
}

impl BaseRotation {
    pub fn rational(p: i64, q: i64) -> Result<Self> {
        Ok(BaseRotation::Rational {
            value: Rational::new(p, q)?,
        })
    }

    pub fn irrational(value: f64) -> Self {
        BaseRotation::Irrational { value }
    }

    pub fn golden() -> Self {
        BaseRotation::irrational(GOLDEN_MEAN)
    }

    pub fn value(&self) -> f64 {
        match self {
            BaseRotation::Rational { value } => value.to_f64(),
            BaseRotation::Irrational { value } => *value,
        }
    }

    pub fn as_rational(&self) -> Option<Rational> {
        match self {
            BaseRotation::Rational { value } => Some(*value),
            BaseRotation::Irrational { .. } => None,
        }
    }

    pub fn require_rational(&self) -> Result<Rational> {
        self.as_rational()
            .ok_or_else(|| Error::Domain("stage requires an exact rational base rotation".into()))
    }
}

/// Continued-fraction convergents `p/q` of `x` with `q <= q_max`, in order.
pub fn convergents(x: f64, q_max: i64) -> Vec<Rational> {
    let mut out = Vec::new();
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if !a.is_finite() || a.abs() > 1e15 {
            break;
        }
        let a_i = a as i64;
        let h2 = a_i.checked_mul(h1).and_then(|v| v.checked_add(h0));
        let k2 = a_i.checked_mul(k1).and_then(|v| v.checked_add(k0));
        let (Some(h2), Some(k2)) = (h2, k2) else { break };
        if k2 > q_max {
            break;
        }
        if let Ok(c) = Rational::new(h2, k2) {
            if out.last() != Some(&c) {
                out.push(c);
            }
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    out
}

/// Best rational approximation of `x` within `tol` having denominator at most `q_max`.
pub fn nearby_rational(x: f64, tol: f64, q_max: i64) -> Option<Rational> {
    for q in 1..=q_max {
        let p = (x * q as f64).round() as i64;
        if (p as f64 / q as f64 - x).abs() <= tol {
            return Rational::new(p, q).ok();
        }
    }
    None
}
