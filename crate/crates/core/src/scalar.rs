//! Coefficient fields: exact rationals, exact Gaussian rationals and complex floats.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact Gaussian rational `re + i·im`.
pub type GaussianRational = Complex<BigRational>;

/// Which coefficient field a value belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CoeffKind {
    Rational,
    GaussianRational,
    ComplexFloat,
}

/// Field operations shared by every coefficient kind.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const KIND: CoeffKind;
    /// Exact kinds compare with `==`; the float kind needs tolerances.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn from_i64(n: i64) -> Self;
    fn from_rational(r: &BigRational) -> Self;
    /// Exact conversion for the exact kinds (every finite `f64` is dyadic).
    fn from_f64(x: f64) -> Self;
    fn abs_f64(&self) -> f64;
    fn to_complex64(&self) -> Complex64;
    fn parse_parts(re: &str, im: &str) -> Result<Self>;
    fn format_parts(&self) -> (String, String);
    /// The value as an exact rational, when it is one.
    fn as_rational(&self) -> Option<BigRational>;

    fn from_ratio(n: i64, d: i64) -> Self {
        Self::from_rational(&BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    /// Zero test used for pivoting: exact for exact kinds, `|x| <= tol` otherwise.
    fn is_negligible(&self, tol: f64) -> bool {
        if Self::EXACT {
            self.is_zero()
        } else {
            self.abs_f64() <= tol
        }
    }
}

/// Parses `"p/q"`, an integer, or a finite decimal such as `"-0.125"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty number".into()));
    }
    if let Ok(r) = BigRational::from_str(s) {
        return Ok(r);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (mant, exp) = match body.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = body[pos + 1..]
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent in {s:?}")))?;
            (&body[..pos], e)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = match mant.find('.') {
        Some(pos) => (&mant[..pos], &mant[pos + 1..]),
        None => (mant, ""),
    };
    if (int_part.is_empty() && frac_part.is_empty())
        || !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(Error::Parse(format!("not a number: {s:?}")));
    }
    let digits = format!("{int_part}{frac_part}");
    let num = BigInt::from_str(if digits.is_empty() { "0" } else { &digits })
        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(num);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -r } else { r })
}

/// Formats a rational as `"p"` or `"p/q"`.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_else(<BigRational as Zero>::zero)
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl Scalar for BigRational {
    const KIND: CoeffKind = CoeffKind::Rational;
    const EXACT: bool = true;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn from_i64(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn from_f64(x: f64) -> Self {
        rational_from_f64(x)
    }
    fn abs_f64(&self) -> f64 {
        rational_to_f64(&self.abs())
    }
    fn to_complex64(&self) -> Complex64 {
        Complex64::new(rational_to_f64(self), 0.0)
    }
    fn parse_parts(re: &str, im: &str) -> Result<Self> {
        let i = parse_rational(im)?;
        if !Zero::is_zero(&i) {
            return Err(Error::Parse(format!(
                "nonzero imaginary part {im:?} for a rational coefficient"
            )));
        }
        parse_rational(re)
    }
    fn format_parts(&self) -> (String, String) {
        (format_rational(self), "0".into())
    }
    fn as_rational(&self) -> Option<BigRational> {
        Some(self.clone())
    }
}

impl Scalar for GaussianRational {
    const KIND: CoeffKind = CoeffKind::GaussianRational;
    const EXACT: bool = true;

    fn zero() -> Self {
        Complex::new(Zero::zero(), Zero::zero())
    }
    fn one() -> Self {
        Complex::new(One::one(), Zero::zero())
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(&self.re) && Zero::is_zero(&self.im)
    }
    fn from_i64(n: i64) -> Self {
        Complex::new(BigRational::from_integer(BigInt::from(n)), Zero::zero())
    }
    fn from_rational(r: &BigRational) -> Self {
        Complex::new(r.clone(), Zero::zero())
    }
    fn from_f64(x: f64) -> Self {
        Complex::new(rational_from_f64(x), Zero::zero())
    }
    fn abs_f64(&self) -> f64 {
        self.to_complex64().norm()
    }
    fn to_complex64(&self) -> Complex64 {
        Complex64::new(rational_to_f64(&self.re), rational_to_f64(&self.im))
    }
    fn parse_parts(re: &str, im: &str) -> Result<Self> {
        Ok(Complex::new(parse_rational(re)?, parse_rational(im)?))
    }
    fn format_parts(&self) -> (String, String) {
        (format_rational(&self.re), format_rational(&self.im))
    }
    fn as_rational(&self) -> Option<BigRational> {
        Zero::is_zero(&self.im).then(|| self.re.clone())
    }
}

impl Scalar for Complex64 {
    const KIND: CoeffKind = CoeffKind::ComplexFloat;
    const EXACT: bool = false;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn from_i64(n: i64) -> Self {
        Complex64::new(n as f64, 0.0)
    }
    fn from_rational(r: &BigRational) -> Self {
        Complex64::new(rational_to_f64(r), 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn abs_f64(&self) -> f64 {
        self.norm()
    }
    fn to_complex64(&self) -> Complex64 {
        *self
    }
    fn parse_parts(re: &str, im: &str) -> Result<Self> {
        let p = |s: &str| -> Result<f64> {
            match s.trim().parse::<f64>() {
                Ok(x) => Ok(x),
                Err(_) => parse_rational(s).map(|r| rational_to_f64(&r)),
            }
        };
        Ok(Complex64::new(p(re)?, p(im)?))
    }
    fn format_parts(&self) -> (String, String) {
        (format!("{}", self.re), format!("{}", self.im))
    }
    fn as_rational(&self) -> Option<BigRational> {
        None
    }
}

/// Shorthand for an exact rational `n/d`.
pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Shorthand for an exact integer rational.
pub fn qi(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}
