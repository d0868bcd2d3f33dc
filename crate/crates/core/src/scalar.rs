//! Scalar abstraction for probability arithmetic.
//!
//! Counting is always done on big integers. Probabilities built from those
//! counts are evaluated in any [`Scalar`]: `f32`, `f64`, or the exact
//! [`BigRational`], which makes every closed-form probability computable
//! without rounding when the inputs are rationals.

use std::fmt::Debug;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive};

/// Number type that probability formulas are generic over.
pub trait Scalar:
    Clone + Debug + PartialOrd + Signed + FromPrimitive + Send + Sync + 'static
{
    /// Nearest value to `num / den`. `den` must be non-zero.
    fn from_ratio(num: &BigUint, den: &BigUint) -> Self;

    fn from_biguint(value: &BigUint) -> Self;

    /// Lossy conversion used for reporting.
    fn as_f64(&self) -> f64;

    fn from_count(value: usize) -> Self {
        <Self as FromPrimitive>::from_usize(value).expect("usize is representable")
    }

    /// `self` lies in `[0, 1]`; NaN never does.
    fn is_probability(&self) -> bool {
        *self >= Self::zero() && *self <= Self::one()
    }

    /// Integer power by squaring.
    fn powu(&self, exp: usize) -> Self {
        num_traits::pow(self.clone(), exp)
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_ratio(num: &BigUint, den: &BigUint) -> Self {
                let ratio = BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()));
                ratio.to_f64().unwrap_or(f64::NAN) as $t
            }

            fn from_biguint(value: &BigUint) -> Self {
                value.to_f64().unwrap_or(f64::INFINITY) as $t
            }

            fn as_f64(&self) -> f64 {
                *self as f64
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl Scalar for BigRational {
    fn from_ratio(num: &BigUint, den: &BigUint) -> Self {
        BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
    }

    fn from_biguint(value: &BigUint) -> Self {
        BigRational::from_integer(BigInt::from(value.clone()))
    }

    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Exact rational image of a finite `f64`.
pub fn exact_from_f64(value: f64) -> Option<BigRational> {
    BigRational::from_float(value)
}

/// Neumaier-compensated running sum.
///
/// For exact scalars the compensation term stays zero and the result is the
/// exact sum.
#[derive(Clone, Debug)]
pub struct CompensatedSum<T: Scalar> {
    sum: T,
    compensation: T,
}

impl<T: Scalar> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn add(&mut self, value: T) {
        let total = self.sum.clone() + value.clone();
        if self.sum.abs() >= value.abs() {
            self.compensation = self.compensation.clone() + ((self.sum.clone() - total.clone()) + value);
        } else {
            self.compensation = self.compensation.clone() + ((value - total.clone()) + self.sum.clone());
        }
        self.sum = total;
    }

    pub fn total(&self) -> T {
        self.sum.clone() + self.compensation.clone()
    }
}

impl<T: Scalar> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::default();
        for value in iter {
            acc.add(value);
        }
        acc
    }
}
