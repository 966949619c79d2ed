//! Wigner 3j symbols by the Racah sum in exact rational arithmetic.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::NuclearError;
use crate::scalar::Real;

/// Half-integer stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const fn from_doubled(twice: i32) -> Self {
        Self(twice)
    }

    pub const fn integer(n: i32) -> Self {
        Self(2 * n)
    }

    pub const fn doubled(self) -> i32 {
        self.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    /// Number of magnetic sublevels, `2j + 1`.
    pub fn multiplicity(self) -> usize {
        (self.0 + 1).max(0) as usize
    }

    /// Projections `-j, -j+1, ..., j`.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        (0..=2 * self.0.max(0)).step_by(2).map(move |k| HalfInt(k - self.0))
    }
}

impl std::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl FromStr for HalfInt {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: i32 = num.trim().parse().map_err(|_| format!("bad spin `{s}`"))?;
            match den.trim() {
                "2" => Ok(HalfInt(num)),
                "1" => Ok(HalfInt(2 * num)),
                _ => Err(format!("spin `{s}` is not a half-integer")),
            }
        } else {
            let n: i32 = s.parse().map_err(|_| format!("bad spin `{s}`"))?;
            Ok(HalfInt(2 * n))
        }
    }
}

/// Exact value `sign * sqrt(square)` of a 3j symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wigner3j {
    pub sign: i8,
    pub square: BigRational,
}

impl Wigner3j {
    fn zero() -> Self {
        Self {
            sign: 0,
            square: BigRational::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn to_real<T: Real>(&self) -> T {
        if self.sign == 0 {
            return T::zero();
        }
        let v = ratio_to_f64(&self.square).sqrt();
        T::lit(if self.sign < 0 { -v } else { v })
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    // Scale down huge numerators/denominators before converting.
    let (n, d) = (r.numer(), r.denom());
    let shift = n.bits().max(d.bits()).saturating_sub(900);
    let (n, d) = (n >> shift, d >> shift);
    n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
}

fn factorial(n: i32) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn check(j: HalfInt, m: HalfInt) -> Result<(), NuclearError> {
    if j.0 < 0 {
        return Err(NuclearError::Argument(format!("negative angular momentum {j}")));
    }
    if (j.0 - m.0) % 2 != 0 {
        return Err(NuclearError::Argument(format!("projection {m} inconsistent with j = {j}")));
    }
    if m.0.abs() > j.0 {
        return Err(NuclearError::Argument(format!("|m| = {m} exceeds j = {j}")));
    }
    Ok(())
}

/// Exact 3j symbol `(j1 j2 j3; m1 m2 m3)`.
pub fn wigner_3j_exact(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m3: HalfInt,
) -> Result<Wigner3j, NuclearError> {
    check(j1, m1)?;
    check(j2, m2)?;
    check(j3, m3)?;
    let (a, b, c) = (j1.0, j2.0, j3.0);
    if m1.0 + m2.0 + m3.0 != 0 || (a + b + c) % 2 != 0 {
        return Ok(Wigner3j::zero());
    }
    if c > a + b || a > b + c || b > a + c {
        return Ok(Wigner3j::zero());
    }
    // Everything below is an ordinary integer once halved.
    let h = |x: i32| x / 2;
    let (x1, x2, x3) = (h(a + b - c), h(a - b + c), h(-a + b + c));
    let delta = BigRational::new(
        factorial(x1) * factorial(x2) * factorial(x3),
        factorial(h(a + b + c) + 1),
    );
    let mut prefactor = BigInt::one();
    for (j, m) in [(a, m1.0), (b, m2.0), (c, m3.0)] {
        prefactor *= factorial(h(j + m)) * factorial(h(j - m));
    }
    let k_min = 0.max(h(b - c - m1.0)).max(h(a - c + m2.0));
    let k_max = x1.min(h(a - m1.0)).min(h(b + m2.0));
    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let den = factorial(k)
            * factorial(h(c - b + m1.0) + k)
            * factorial(h(c - a - m2.0) + k)
            * factorial(x1 - k)
            * factorial(h(a - m1.0) - k)
            * factorial(h(b + m2.0) - k);
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return Ok(Wigner3j::zero());
    }
    let phase_odd = h(a - b - m3.0).rem_euclid(2) == 1;
    let negative = sum.is_negative() != phase_odd;
    let square = &sum * &sum * delta * BigRational::from_integer(prefactor);
    Ok(Wigner3j {
        sign: if negative { -1 } else { 1 },
        square,
    })
}

/// 3j symbol converted to floating point.
pub fn wigner_3j<T: Real>(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m3: HalfInt,
) -> Result<T, NuclearError> {
    Ok(wigner_3j_exact(j1, j2, j3, m1, m2, m3)?.to_real())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hi(x: f64) -> HalfInt {
        HalfInt::from_doubled((2.0 * x) as i32)
    }

    fn w(j1: f64, j2: f64, j3: f64, m1: f64, m2: f64, m3: f64) -> f64 {
        wigner_3j(hi(j1), hi(j2), hi(j3), hi(m1), hi(m2), hi(m3)).unwrap()
    }

    #[test]
    fn one_one_zero() {
        let v = wigner_3j_exact(hi(1.0), hi(1.0), hi(0.0), hi(0.0), hi(0.0), hi(0.0)).unwrap();
        assert_eq!(v.sign, -1);
        assert_eq!(v.square, BigRational::new(1.into(), 3.into()));
        assert!((w(1.0, 1.0, 0.0, 0.0, 0.0, 0.0) + 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn tabulated_values() {
        // (1/2 1/2 1; 1/2 -1/2 0) = 1/sqrt(6)
        assert!((w(0.5, 0.5, 1.0, 0.5, -0.5, 0.0) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        // (1 1 1; 1 -1 0) = 1/sqrt(6)
        assert!((w(1.0, 1.0, 1.0, 1.0, -1.0, 0.0) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        // (2 1 1; 0 0 0) = sqrt(2/15)
        assert!((w(2.0, 1.0, 1.0, 0.0, 0.0, 0.0) - (2.0f64 / 15.0).sqrt()).abs() < 1e-15);
        // (3/2 1 1/2; 3/2 -1 -1/2) = -1/2
        assert!((w(1.5, 1.0, 0.5, 1.5, -1.0, -0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn selection_rules_give_zero() {
        assert_eq!(w(1.0, 1.0, 1.0, 1.0, 0.0, 0.0), 0.0);
        assert_eq!(w(1.0, 1.0, 3.0, 0.0, 0.0, 0.0), 0.0);
        // j1 + j2 + j3 odd with all m = 0
        assert_eq!(w(1.0, 1.0, 1.0, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn inconsistent_arguments_rejected() {
        let e = wigner_3j::<f64>(hi(1.0), hi(1.0), hi(1.0), hi(0.5), hi(-0.5), hi(0.0));
        assert!(matches!(e, Err(NuclearError::Argument(_))));
        let e = wigner_3j::<f64>(hi(1.0), hi(1.0), hi(1.0), hi(2.0), hi(-1.0), hi(-1.0));
        assert!(e.is_err());
        let e = wigner_3j::<f64>(HalfInt::from_doubled(-2), hi(1.0), hi(1.0), hi(0.0), hi(0.0), hi(0.0));
        assert!(e.is_err());
    }

    #[test]
    fn symmetry_under_column_swap() {
        // odd permutation multiplies by (-1)^(j1+j2+j3)
        let a = w(1.5, 1.0, 0.5, 0.5, 0.0, -0.5);
        let b = w(1.0, 1.5, 0.5, 0.0, 0.5, -0.5);
        assert!((a + b).abs() < 1e-15, "{a} {b}");
    }

    #[test]
    fn half_int_parsing() {
        assert_eq!("3/2".parse::<HalfInt>().unwrap(), HalfInt::from_doubled(3));
        assert_eq!("2".parse::<HalfInt>().unwrap(), HalfInt::integer(2));
        assert!("3/4".parse::<HalfInt>().is_err());
        assert_eq!(HalfInt::from_doubled(3).to_string(), "3/2");
        assert_eq!(HalfInt::from_doubled(3).projections().count(), 4);
    }
}
