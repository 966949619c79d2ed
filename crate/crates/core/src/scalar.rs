//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point type the physics is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count or index into `Self`.
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over a [`Real`] scalar.
pub type C<T> = Complex<T>;

/// Imaginary unit.
#[inline]
pub fn im_unit<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::one())
}

/// Purely real complex number.
#[inline]
pub fn re<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

/// `(e^z - 1) / z`, accurate near `z = 0`.
pub fn exprel<T: Real>(z: C<T>) -> C<T> {
    if z.norm() < T::lit(0.1) {
        let mut term = C::new(T::one(), T::zero());
        let mut sum = term;
        for k in 2..30 {
            term = term * z / T::from_usize_lossy(k);
            sum += term;
            if term.norm() <= T::epsilon() * sum.norm() {
                break;
            }
        }
        sum
    } else {
        (z.exp() - T::one()) / z
    }
}

/// Square root on the branch with non-negative real part.
pub fn sqrt_re_pos<T: Real>(z: C<T>) -> C<T> {
    let s = z.sqrt();
    if s.re < T::zero() {
        -s
    } else {
        s
    }
}

/// Square root on the branch with non-negative imaginary part.
pub fn sqrt_im_pos<T: Real>(z: C<T>) -> C<T> {
    let s = z.sqrt();
    if s.im < T::zero() {
        -s
    } else {
        s
    }
}
