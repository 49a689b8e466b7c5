//! Arithmetic shared by the exact (rational) and floating evaluations.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};

pub trait Scalar: Num + Clone {
    fn from_u128(n: u128) -> Self;
    fn to_f64(&self) -> f64;

    /// Sum of `items`; floating implementations compensate.
    fn sum_all<I: IntoIterator<Item = Self>>(items: I) -> Self {
        items.into_iter().fold(Self::zero(), |acc, x| acc + x)
    }

    fn powi(&self, exp: i32) -> Self {
        let base = if exp < 0 {
            Self::one() / self.clone()
        } else {
            self.clone()
        };
        let mut acc = Self::one();
        for _ in 0..exp.unsigned_abs() {
            acc = acc * base.clone();
        }
        acc
    }
}

impl Scalar for f64 {
    fn from_u128(n: u128) -> Self {
        n as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    /// Neumaier summation.
    fn sum_all<I: IntoIterator<Item = Self>>(items: I) -> Self {
        let mut sum = 0.0;
        let mut carry = 0.0;
        for x in items {
            let t = sum + x;
            if sum.abs() >= x.abs() {
                carry += (sum - t) + x;
            } else {
                carry += (x - t) + sum;
            }
            sum = t;
        }
        sum + carry
    }
}

impl Scalar for BigRational {
    fn from_u128(n: u128) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Moments `μ_0..=μ_max`, `p`, and `u_a²` in one arithmetic.
#[derive(Debug, Clone)]
pub(crate) struct Inputs<T> {
    pub mu: Vec<T>,
    pub p: T,
    pub u_sq: Vec<T>,
}
