//! Exact first-order infinitesimal arithmetic.
//!
//! A [`DualRational`] is `a + b·ε` with rational `a`, `b` and `ε` a formal
//! positive infinitesimal. Products drop the `ε²` term, so every predicate that
//! is bilinear in the cell coordinates is evaluated exactly in the `ε → 0⁺`
//! limit.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

pub type Rational = Ratio<i128>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DualRational {
    std: Rational,
    inf: Rational,
}

impl DualRational {
    pub fn new(std: Rational, inf: Rational) -> Self {
        Self { std, inf }
    }

    pub fn from_int(v: i64) -> Self {
        Self::standard(Rational::from_integer(v as i128))
    }

    pub fn standard(std: Rational) -> Self {
        Self {
            std,
            inf: Rational::zero(),
        }
    }

    /// The ε-shifted contour level `E + ε`. Never equal to any integer.
    pub fn level(energy: i64) -> Self {
        Self {
            std: Rational::from_integer(energy as i128),
            inf: Rational::one(),
        }
    }

    pub fn std_part(&self) -> Rational {
        self.std
    }

    pub fn inf_part(&self) -> Rational {
        self.inf
    }

    pub fn is_standard(&self) -> bool {
        self.inf.is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.std.is_zero() && self.inf.is_zero()
    }

    /// Sign under the lexicographic order.
    pub fn signum(&self) -> i32 {
        match self.cmp(&Self::from_int(0)) {
            Ordering::Less => -1,
            Ordering::Equal => 0,
            Ordering::Greater => 1,
        }
    }

    /// Numeric value with `ε` replaced by a concrete small number.
    pub fn to_f64_at(&self, eps: f64) -> f64 {
        ratio_to_f64(&self.std) + eps * ratio_to_f64(&self.inf)
    }

    /// Division; `None` when the standard part of the divisor is zero.
    pub fn checked_div(&self, rhs: &Self) -> Option<Self> {
        if rhs.std.is_zero() {
            return None;
        }
        // (a + bε)/(c + dε) = a/c + (bc − ad)/c² ε + O(ε²)
        let std = self.std / rhs.std;
        let inf = (self.inf * rhs.std - self.std * rhs.inf) / (rhs.std * rhs.std);
        Some(Self { std, inf })
    }
}

pub(crate) fn ratio_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl Ord for DualRational {
    fn cmp(&self, other: &Self) -> Ordering {
        self.std
            .cmp(&other.std)
            .then_with(|| self.inf.cmp(&other.inf))
    }
}

impl PartialOrd for DualRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<i64> for DualRational {
    fn from(v: i64) -> Self {
        Self::from_int(v)
    }
}

impl From<Rational> for DualRational {
    fn from(r: Rational) -> Self {
        Self::standard(r)
    }
}

impl Add for DualRational {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            std: self.std + rhs.std,
            inf: self.inf + rhs.inf,
        }
    }
}

impl Sub for DualRational {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self {
            std: self.std - rhs.std,
            inf: self.inf - rhs.inf,
        }
    }
}

impl Neg for DualRational {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            std: -self.std,
            inf: -self.inf,
        }
    }
}

impl Mul for DualRational {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self {
            std: self.std * rhs.std,
            inf: self.std * rhs.inf + self.inf * rhs.std,
        }
    }
}

impl Div for DualRational {
    type Output = Self;

    /// Panics when the divisor's standard part is zero; use
    /// [`DualRational::checked_div`] when that can happen.
    fn div(self, rhs: Self) -> Self {
        self.checked_div(&rhs)
            .expect("division by a purely infinitesimal dual number")
    }
}

impl fmt::Display for DualRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inf.is_zero() {
            write!(f, "{}", self.std)
        } else if self.inf.is_negative() {
            write!(f, "{} - {}ε", self.std, -self.inf)
        } else {
            write!(f, "{} + {}ε", self.std, self.inf)
        }
    }
}
