//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::num::ParseFloatError;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the solvers are generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FromStr<Err = ParseFloatError>
    + Debug
    + Display
    + Sum
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal not representable")
}

#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("integer not representable")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Γ(k/2) for a positive integer `k`, by the half-integer recursion.
pub fn gamma_half<T: Real>(k: usize) -> T {
    assert!(k > 0, "gamma_half needs a positive argument");
    let (mut acc, mut twice) = if k.is_multiple_of(2) {
        (T::one(), 2usize)
    } else {
        (T::PI().sqrt(), 1usize)
    };
    while twice < k {
        acc = acc * from_usize::<T>(twice) / lit(2.0);
        twice += 2;
    }
    acc
}

/// Surface area of the unit sphere S^{n-1} ⊂ R^n.
pub fn unit_sphere_area<T: Real>(n: usize) -> T {
    let two: T = lit(2.0);
    two * T::PI().powf(from_usize::<T>(n) / two) / gamma_half::<T>(n)
}

/// Volume of the ball of radius `radius` in R^n.
pub fn ball_volume<T: Real>(n: usize, radius: T) -> T {
    unit_sphere_area::<T>(n) * radius.powi(n as i32) / from_usize(n)
}

/// Critical Sobolev exponent q + 1 = 2n/(n-2).
pub fn critical_power<T: Real>(n: usize) -> T {
    from_usize::<T>(2 * n) / from_usize(n - 2)
}

/// Best constant of the Sobolev embedding D^{1,2}(R^n) ⊂ L^{2n/(n-2)}:
/// S = n(n-2)/4 · |S^n|^{2/n}.
pub fn sobolev_constant<T: Real>(n: usize) -> T {
    let nf: T = from_usize(n);
    let sphere = unit_sphere_area::<T>(n + 1);
    nf * (nf - lit(2.0)) / lit(4.0) * sphere.powf(lit::<T>(2.0) / nf)
}
