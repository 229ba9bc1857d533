use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A token amount stored as an integer number of tenths.
///
/// Public goods payoffs with a 1.6 multiplier over four players are always whole
/// tenths, so every payoff in the harness is exact and logs are bit-stable.
/// On the wire the value is written as a decimal number (`24.4`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tokens(i64);

impl Tokens {
    pub const ZERO: Tokens = Tokens(0);

    pub const fn from_tenths(tenths: i64) -> Self {
        Tokens(tenths)
    }

    pub const fn whole(tokens: i64) -> Self {
        Tokens(tokens * 10)
    }

    pub const fn tenths(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 10.0
    }

    /// Largest whole number of tokens not exceeding this amount (zero if negative).
    pub fn whole_floor(self) -> u32 {
        if self.0 <= 0 {
            0
        } else {
            u32::try_from(self.0 / 10).unwrap_or(u32::MAX)
        }
    }

    /// Parses a decimal value that must be an exact multiple of 0.1.
    pub fn try_from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        let scaled = (value * 10.0).round();
        if (scaled / 10.0 - value).abs() > 1e-9 * value.abs().max(1.0) {
            return None;
        }
        Some(Tokens(scaled as i64))
    }
}

impl fmt::Display for Tokens {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{}", abs / 10, abs % 10)
    }
}

impl Add for Tokens {
    type Output = Tokens;
    fn add(self, rhs: Tokens) -> Tokens {
        Tokens(self.0 + rhs.0)
    }
}

impl AddAssign for Tokens {
    fn add_assign(&mut self, rhs: Tokens) {
        self.0 += rhs.0;
    }
}

impl Sub for Tokens {
    type Output = Tokens;
    fn sub(self, rhs: Tokens) -> Tokens {
        Tokens(self.0 - rhs.0)
    }
}

impl SubAssign for Tokens {
    fn sub_assign(&mut self, rhs: Tokens) {
        self.0 -= rhs.0;
    }
}

impl Neg for Tokens {
    type Output = Tokens;
    fn neg(self) -> Tokens {
        Tokens(-self.0)
    }
}

impl Mul<i64> for Tokens {
    type Output = Tokens;
    fn mul(self, rhs: i64) -> Tokens {
        Tokens(self.0 * rhs)
    }
}

impl Sum for Tokens {
    fn sum<I: Iterator<Item = Tokens>>(iter: I) -> Tokens {
        iter.fold(Tokens::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Tokens> for Tokens {
    fn sum<I: Iterator<Item = &'a Tokens>>(iter: I) -> Tokens {
        iter.copied().sum()
    }
}

impl Serialize for Tokens {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Tokens {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = f64::deserialize(deserializer)?;
        Tokens::try_from_f64(value)
            .ok_or_else(|| serde::de::Error::custom(format!("{value} is not a whole number of tenths")))
    }
}
