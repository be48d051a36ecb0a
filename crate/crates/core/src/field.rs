//! Exact arithmetic in the prime field `Z_d`.
//!
//! Every share, coefficient and shadow in the protocol lives here. Products
//! are taken in 128-bit intermediates so any prime below `2^64` is exact.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("operands belong to different fields (mod {0} vs mod {1})")]
    ModulusMismatch(u64, u64),
    #[error("evaluation point {0} appears more than once")]
    DuplicatePoint(u64),
    #[error("evaluation points must be nonzero")]
    ZeroPoint,
    #[error("point {0} is not part of the interpolation set")]
    PointNotInSet(u64),
    #[error("polynomial needs at least one coefficient")]
    EmptyPolynomial,
    #[error("interpolation needs at least one point")]
    NoPoints,
}

/// A prime modulus `d`, checked at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct PrimeModulus(u64);

impl PrimeModulus {
    pub fn new(d: u64) -> Result<Self, FieldError> {
        if is_prime(d) {
            Ok(PrimeModulus(d))
        } else {
            Err(FieldError::NotPrime(d))
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }

    /// Reduces an arbitrary integer into the field.
    pub fn element(self, value: u64) -> FieldElement {
        FieldElement {
            value: value % self.0,
            modulus: self,
        }
    }

    pub fn zero(self) -> FieldElement {
        self.element(0)
    }

    pub fn one(self) -> FieldElement {
        self.element(1)
    }

    /// Iterates over every element of the field in increasing order.
    pub fn elements(self) -> impl Iterator<Item = FieldElement> {
        (0..self.0).map(move |v| self.element(v))
    }
}

impl TryFrom<u64> for PrimeModulus {
    type Error = FieldError;

    fn try_from(d: u64) -> Result<Self, Self::Error> {
        PrimeModulus::new(d)
    }
}

impl From<PrimeModulus> for u64 {
    fn from(d: PrimeModulus) -> u64 {
        d.0
    }
}

impl fmt::Display for PrimeModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An element of `Z_d`. The value is always reduced.
///
/// The arithmetic operators panic when the two operands come from different
/// fields; the fallible entry points in this module check moduli up front
/// and report [`FieldError::ModulusMismatch`] instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    modulus: PrimeModulus,
}

impl FieldElement {
    pub fn value(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> PrimeModulus {
        self.modulus
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    fn same_field(self, other: FieldElement) -> Result<(), FieldError> {
        if self.modulus == other.modulus {
            Ok(())
        } else {
            Err(FieldError::ModulusMismatch(self.modulus.0, other.modulus.0))
        }
    }

    pub fn pow(self, mut exp: u64) -> FieldElement {
        let d = self.modulus.0;
        let mut base = self.value;
        let mut acc = 1 % d;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = mul_mod(acc, base, d);
            }
            base = mul_mod(base, base, d);
            exp >>= 1;
        }
        self.modulus.element(acc)
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(self) -> Result<FieldElement, FieldError> {
        if self.value == 0 {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.pow(self.modulus.0 - 2))
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Serialize for FieldElement {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u64(self.value)
    }
}

fn mul_mod(a: u64, b: u64, d: u64) -> u64 {
    ((a as u128 * b as u128) % d as u128) as u64
}

fn add_mod(a: u64, b: u64, d: u64) -> u64 {
    ((a as u128 + b as u128) % d as u128) as u64
}

impl Add for FieldElement {
    type Output = FieldElement;

    fn add(self, rhs: FieldElement) -> FieldElement {
        assert_eq!(self.modulus, rhs.modulus, "field modulus mismatch");
        self.modulus.element(add_mod(self.value, rhs.value, self.modulus.0))
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;

    fn neg(self) -> FieldElement {
        if self.value == 0 {
            self
        } else {
            self.modulus.element(self.modulus.0 - self.value)
        }
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;

    fn sub(self, rhs: FieldElement) -> FieldElement {
        self + (-rhs)
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;

    fn mul(self, rhs: FieldElement) -> FieldElement {
        assert_eq!(self.modulus, rhs.modulus, "field modulus mismatch");
        self.modulus.element(mul_mod(self.value, rhs.value, self.modulus.0))
    }
}

impl std::iter::Sum for FieldElement {
    /// Panics on an empty iterator since the field would be unknown.
    fn sum<I: Iterator<Item = FieldElement>>(mut iter: I) -> FieldElement {
        let first = iter.next().expect("sum of an empty sequence of field elements");
        iter.fold(first, |acc, x| acc + x)
    }
}

/// Deterministic Miller-Rabin, exact for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// A polynomial over `Z_d`, constant term first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    coefficients: Vec<FieldElement>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<FieldElement>) -> Result<Self, FieldError> {
        let first = *coefficients.first().ok_or(FieldError::EmptyPolynomial)?;
        for c in &coefficients[1..] {
            first.same_field(*c)?;
        }
        Ok(Polynomial { coefficients })
    }

    pub fn coefficients(&self) -> &[FieldElement] {
        &self.coefficients
    }

    pub fn constant_term(&self) -> FieldElement {
        self.coefficients[0]
    }

    pub fn modulus(&self) -> PrimeModulus {
        self.coefficients[0].modulus
    }

    /// Horner evaluation at a (nonzero) player point.
    pub fn eval(&self, x: FieldElement) -> Result<FieldElement, FieldError> {
        self.constant_term().same_field(x)?;
        if x.is_zero() {
            return Err(FieldError::ZeroPoint);
        }
        Ok(self
            .coefficients
            .iter()
            .rev()
            .fold(self.modulus().zero(), |acc, &c| acc * x + c))
    }
}

/// Free-function form of [`Polynomial::eval`].
pub fn eval_poly(p: &Polynomial, x: FieldElement) -> Result<FieldElement, FieldError> {
    p.eval(x)
}

fn check_points(xs: &[FieldElement]) -> Result<(), FieldError> {
    let first = *xs.first().ok_or(FieldError::NoPoints)?;
    for (i, x) in xs.iter().enumerate() {
        first.same_field(*x)?;
        if x.is_zero() {
            return Err(FieldError::ZeroPoint);
        }
        if xs[..i].contains(x) {
            return Err(FieldError::DuplicatePoint(x.value));
        }
    }
    Ok(())
}

/// Lagrange basis coefficient at zero: `prod_{j != r} x_j / (x_j - x_r)`.
pub fn lagrange_coeff(x_r: FieldElement, xs: &[FieldElement]) -> Result<FieldElement, FieldError> {
    check_points(xs)?;
    xs[0].same_field(x_r)?;
    if !xs.contains(&x_r) {
        return Err(FieldError::PointNotInSet(x_r.value));
    }
    xs.iter()
        .filter(|&&x_j| x_j != x_r)
        .try_fold(x_r.modulus.one(), |acc, &x_j| Ok(acc * x_j * (x_j - x_r).inv()?))
}

/// A share pre-multiplied by its Lagrange coefficient. Shadows of a
/// qualified subset sum to the shared constant term.
pub fn shadow(share_value: FieldElement, x_r: FieldElement, xs: &[FieldElement]) -> Result<FieldElement, FieldError> {
    let coeff = lagrange_coeff(x_r, xs)?;
    share_value.same_field(coeff)?;
    Ok(share_value * coeff)
}

/// Recovers `f(0)` from `t` points on a degree `t - 1` polynomial.
pub fn interpolate_at_zero(points: &[(FieldElement, FieldElement)]) -> Result<FieldElement, FieldError> {
    let xs: Vec<FieldElement> = points.iter().map(|&(x, _)| x).collect();
    check_points(&xs)?;
    points
        .iter()
        .try_fold(xs[0].modulus.zero(), |acc, &(x, y)| Ok(acc + shadow(y, x, &xs)?))
}
