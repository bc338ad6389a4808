//! Scalar abstraction shared by the two-spin kernels.
//!
//! The model zoo, saddle-point evidence and confidence computations are
//! written against [`Real`] so they can run in `f32` or `f64`. Everything
//! downstream of the pairwise classifier (graphs, sampling, baselines) is
//! plain `f64`.

use num_traits::{Float, FloatConst, FromPrimitive};
use std::fmt::{Debug, Display};

/// Floating point type usable by the evidence kernels.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` constant.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion from a count.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    /// Residual tolerance used by the saddle-point Newton solver.
    fn newton_tol() -> Self {
        Self::lit(1e-10).max(Self::epsilon() * Self::lit(100.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `ln cosh x`, exact for every finite `x`.
#[inline]
pub fn ln_cosh<T: Real>(x: T) -> T {
    let a = x.abs();
    a + (-(a + a)).exp().ln_1p() - T::LN_2()
}

/// `1 - |tanh x|` without cancellation.
#[inline]
pub fn tanh_gap<T: Real>(x: T) -> T {
    let e = (-(x.abs() * T::lit(2.0))).exp();
    (e + e) / (T::one() + e)
}

/// `ln(1 + tanh x_1 · tanh x_2 · … )` without cancellation when the
/// product approaches −1.
pub fn ln_one_plus_tanh_product<T: Real>(xs: &[T]) -> T {
    let mut negative = false;
    for &x in xs {
        if x == T::zero() {
            return T::zero();
        }
        if x < T::zero() {
            negative = !negative;
        }
    }
    if negative {
        // 1 - prod(1 - u_i)
        let s = xs
            .iter()
            .fold(T::zero(), |acc, &x| acc + (-tanh_gap(x)).ln_1p());
        (-s.exp_m1()).ln()
    } else {
        let p = xs
            .iter()
            .fold(T::one(), |acc, &x| acc * (T::one() - tanh_gap(x)));
        p.ln_1p()
    }
}

/// `ln(e^a + e^b + …)` with max subtraction.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let m = xs.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    if m == T::neg_infinity() || m == T::infinity() {
        return m;
    }
    let s = xs.iter().fold(T::zero(), |acc, &x| acc + (x - m).exp());
    m + s.ln()
}
