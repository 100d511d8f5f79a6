//! Scalar abstraction shared by the algebraic and discretization layers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point scalar used throughout the crate (implemented for `f32` and `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Binomial coefficient as a real number; zero outside `0 <= k <= n`.
pub fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    T::lit(acc.round())
}

/// Natural log of the gamma function for positive half-integers and integers.
fn gamma_half_integer(twice: usize) -> f64 {
    // Gamma(m/2) for m = twice >= 1
    if twice.is_multiple_of(2) {
        (1..twice / 2).map(|j| j as f64).product()
    } else {
        let mut acc = std::f64::consts::PI.sqrt();
        let mut x = 0.5;
        while x < twice as f64 / 2.0 - 0.25 {
            acc *= x;
            x += 1.0;
        }
        acc
    }
}

/// Volume of the unit sphere S^m embedded in R^{m+1}: 2 pi^{(m+1)/2} / Gamma((m+1)/2).
pub fn sphere_volume<T: Real>(m: usize) -> T {
    let g = gamma_half_integer(m + 1);
    T::lit(2.0 * std::f64::consts::PI.powf((m as f64 + 1.0) / 2.0) / g)
}
