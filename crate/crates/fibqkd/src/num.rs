//! Scalar arithmetic for the state algebra.
//!
//! The engine runs over two scalar fields behind the [`Field`] trait:
//! `f64` for sweeps and simulation, and [`SqrtExt`] — exact rationals
//! extended by √2 — for matrix verification. Every amplitude that appears
//! in the protocol is a Gaussian rational times a power of 1/√2, so
//! `Q(√2, i)` closes over all inner products and squared magnitudes, and
//! the probabilities themselves come out as plain rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Field operations the projection engine needs from its scalar type.
pub trait Field:
    Clone
    + PartialEq
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Exact rational constant `num/den`.
    fn from_ratio(num: i64, den: i64) -> Self;
    /// √2 in the field.
    fn sqrt2() -> Self;
    /// Multiplicative inverse. Panics on zero.
    fn recip(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn to_f64(&self) -> f64;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn sqrt2() -> Self {
        SQRT_2
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

/// Element of `Q(√2)`: `a + b·√2` with exact rational coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct SqrtExt {
    pub a: BigRational,
    pub b: BigRational,
}

impl SqrtExt {
    pub fn new(a: BigRational, b: BigRational) -> Self {
        SqrtExt { a, b }
    }

    pub fn from_int(n: i64) -> Self {
        SqrtExt {
            a: BigRational::from_integer(BigInt::from(n)),
            b: BigRational::zero(),
        }
    }

    /// The √2 part must vanish for a value that is a plain rational
    /// (all final probabilities are). Returns `None` otherwise.
    pub fn as_rational(&self) -> Option<&BigRational> {
        if self.b.is_zero() {
            Some(&self.a)
        } else {
            None
        }
    }
}

impl fmt::Debug for SqrtExt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            write!(f, "{}", self.a)
        } else {
            write!(f, "{} + {}√2", self.a, self.b)
        }
    }
}

impl Add for SqrtExt {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        SqrtExt {
            a: self.a + rhs.a,
            b: self.b + rhs.b,
        }
    }
}

impl Sub for SqrtExt {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        SqrtExt {
            a: self.a - rhs.a,
            b: self.b - rhs.b,
        }
    }
}

impl Mul for SqrtExt {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        // (a1 + b1√2)(a2 + b2√2) = a1a2 + 2 b1b2 + (a1b2 + b1a2)√2
        let two = BigRational::from_integer(BigInt::from(2));
        SqrtExt {
            a: &self.a * &rhs.a + two * &self.b * &rhs.b,
            b: &self.a * &rhs.b + &self.b * &rhs.a,
        }
    }
}

impl Neg for SqrtExt {
    type Output = Self;
    fn neg(self) -> Self {
        SqrtExt {
            a: -self.a,
            b: -self.b,
        }
    }
}

impl Field for SqrtExt {
    fn zero() -> Self {
        SqrtExt::from_int(0)
    }
    fn one() -> Self {
        SqrtExt::from_int(1)
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        SqrtExt {
            a: BigRational::new(BigInt::from(num), BigInt::from(den)),
            b: BigRational::zero(),
        }
    }
    fn sqrt2() -> Self {
        SqrtExt {
            a: BigRational::zero(),
            b: BigRational::one(),
        }
    }
    fn recip(&self) -> Self {
        // 1/(a + b√2) = (a − b√2)/(a² − 2b²); the norm vanishes only at zero
        // because √2 is irrational.
        let two = BigRational::from_integer(BigInt::from(2));
        let norm = &self.a * &self.a - two * &self.b * &self.b;
        assert!(!norm.is_zero(), "inverse of zero");
        SqrtExt {
            a: &self.a / &norm,
            b: -(&self.b / &norm),
        }
    }
    fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
    fn to_f64(&self) -> f64 {
        self.a.to_f64().unwrap_or(f64::NAN) + self.b.to_f64().unwrap_or(f64::NAN) * SQRT_2
    }
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Complex number over a [`Field`].
#[derive(Clone, PartialEq, Debug)]
pub struct Cx<F: Field> {
    pub re: F,
    pub im: F,
}

impl<F: Field> Cx<F> {
    pub fn new(re: F, im: F) -> Self {
        Cx { re, im }
    }

    pub fn zero() -> Self {
        Cx {
            re: F::zero(),
            im: F::zero(),
        }
    }

    pub fn real(re: F) -> Self {
        Cx {
            re,
            im: F::zero(),
        }
    }

    pub fn imag(im: F) -> Self {
        Cx {
            re: F::zero(),
            im,
        }
    }

    pub fn conj(&self) -> Self {
        Cx {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    pub fn norm_sqr(&self) -> F {
        self.re.clone() * self.re.clone() + self.im.clone() * self.im.clone()
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn scale(&self, s: &F) -> Self {
        Cx {
            re: self.re.clone() * s.clone(),
            im: self.im.clone() * s.clone(),
        }
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }
}

impl<F: Field> Add for Cx<F> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Cx {
            re: self.re + rhs.re,
            im: self.im + rhs.im,
        }
    }
}

impl<F: Field> Sub for Cx<F> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Cx {
            re: self.re - rhs.re,
            im: self.im - rhs.im,
        }
    }
}

impl<F: Field> Mul for Cx<F> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Cx {
            re: self.re.clone() * rhs.re.clone() - self.im.clone() * rhs.im.clone(),
            im: self.re * rhs.im + self.im * rhs.re,
        }
    }
}

/// `1/√2` in the field: √2 / 2.
pub fn inv_sqrt2<F: Field>() -> F {
    F::sqrt2() * F::from_ratio(1, 2)
}
