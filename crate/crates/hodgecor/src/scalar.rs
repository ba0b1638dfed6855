//! Scalar abstraction shared by the exact and numeric layers.
//!
//! The symbolic machinery (cyclic words, free Lie algebras, derivations) is
//! generic over a field of scalars. Exact computations run over [`Rat`] or
//! [`GaussRat`]; the correlator tables and everything downstream of numeric
//! integration use [`C64`].

use num::complex::Complex64;
use num::{BigInt, BigRational, Complex, One, Zero};
use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Exact rational scalars.
pub type Rat = BigRational;
/// Exact Gaussian rationals a + b·i with rational a, b.
pub type GaussRat = Complex<BigRational>;
/// Complex floating-point scalars for the numeric layer.
pub type C64 = Complex64;

/// Field operations needed by the symbolic layer.
pub trait Scalar:
    Clone
    + PartialEq
    + Debug
    + Display
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_i64(n: i64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    /// Lossy view into ℂ, used when exact data feeds the numeric layer.
    fn to_c64(&self) -> C64;
}

impl Scalar for Rat {
    fn from_i64(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_c64(&self) -> C64 {
        let n = bigint_to_f64(self.numer());
        let d = bigint_to_f64(self.denom());
        C64::new(n / d, 0.0)
    }
}

impl Scalar for GaussRat {
    fn from_i64(n: i64) -> Self {
        Complex::new(Rat::from_i64(n), Rat::zero())
    }

    fn to_c64(&self) -> C64 {
        C64::new(self.re.to_c64().re, self.im.to_c64().re)
    }
}

impl Scalar for C64 {
    fn from_i64(n: i64) -> Self {
        C64::new(n as f64, 0.0)
    }

    fn to_c64(&self) -> C64 {
        *self
    }
}

fn bigint_to_f64(x: &BigInt) -> f64 {
    num::ToPrimitive::to_f64(x).unwrap_or(f64::NAN)
}

/// Parses an exact scalar in the model-file syntax: "num/den" or
/// "a/b+c/d*i" (Gaussian). A bare integer is accepted as "n/1".
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = num.parse().map_err(|_| format!("bad numerator in {s:?}"))?;
    let d: BigInt = den.parse().map_err(|_| format!("bad denominator in {s:?}"))?;
    if d.is_zero() {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(BigRational::new(n, d))
}

/// Parses "a/b", "a/b+c/d*i", "a/b-c/d*i" or "c/d*i".
pub fn parse_gauss(s: &str) -> Result<GaussRat, String> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if let Some(body) = s.strip_suffix("*i") {
        // Split the imaginary tail off at the last +/- that is not leading.
        for (idx, ch) in body.char_indices().rev() {
            if (ch == '+' || ch == '-') && idx != 0 {
                let re = parse_rat(&body[..idx])?;
                let im_str = if ch == '+' { &body[idx + 1..] } else { &body[idx..] };
                let im = parse_rat(im_str)?;
                return Ok(Complex::new(re, im));
            }
        }
        return Ok(Complex::new(Rat::zero(), parse_rat(body)?));
    }
    Ok(Complex::new(parse_rat(&s)?, Rat::zero()))
}

/// Serializes a rational in the model-file syntax.
pub fn rat_to_string(x: &Rat) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn gauss_to_string(x: &GaussRat) -> String {
    if x.im.is_zero() {
        rat_to_string(&x.re)
    } else if x.re.is_zero() {
        format!("{}*i", rat_to_string(&x.im))
    } else if x.im >= Rat::zero() {
        format!("{}+{}*i", rat_to_string(&x.re), rat_to_string(&x.im))
    } else {
        format!("{}{}*i", rat_to_string(&x.re), rat_to_string(&x.im))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_arithmetic_is_exact() {
        let x = Rat::from_ratio(1, 3) + Rat::from_ratio(1, 6);
        assert_eq!(x, Rat::from_ratio(1, 2));
    }

    #[test]
    fn parse_and_print_round_trip() {
        for s in ["3/4", "-7/2", "0/1", "12"] {
            let x = parse_rat(s).unwrap();
            assert_eq!(parse_rat(&rat_to_string(&x)).unwrap(), x);
        }
        for s in ["1/2+3/4*i", "-1/2-3/4*i", "5/1", "2/3*i", "-2/3*i"] {
            let x = parse_gauss(s).unwrap();
            assert_eq!(parse_gauss(&gauss_to_string(&x)).unwrap(), x);
        }
    }

    #[test]
    fn gauss_multiplication() {
        let i = GaussRat::new(Rat::zero(), Rat::from_i64(1));
        assert_eq!(i.clone() * i, GaussRat::from_i64(-1));
    }
}
