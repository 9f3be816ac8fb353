//! Truncated logarithmic nonlinearity.
//!
//! The source term `u log u²` is split as `g = -h + f`, where `h` is the
//! concave sub-quadratic part (frozen at `±2/e` beyond the threshold `1/e`)
//! and `f` is the convex super-quadratic part that only switches on above
//! `1/e`. `H`, `F`, `G` are the antiderivatives vanishing at zero.
//!
//! Every map has a checked public entry point (`eval_*`) rejecting non-finite
//! input and an unchecked `#[inline]` kernel used by the field-level code.
//! Branch predicates use `<=` at the threshold, so ties go to the
//! sub-threshold branch.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// The truncation threshold `1/e`.
#[inline]
pub fn threshold<T: Real>() -> T {
    T::one() / T::E()
}

/// `s log s²`, with the removable singularity at `s = 0` filled in.
#[inline]
fn s_log_s2<T: Real>(s: T) -> T {
    if s == T::zero() {
        T::zero()
    } else {
        let two = T::lit(2.0);
        two * s * s.abs().ln()
    }
}

/// `½ s² log s²`, zero at the origin.
#[inline]
fn half_s2_log_s2<T: Real>(s: T) -> T {
    if s == T::zero() {
        T::zero()
    } else {
        s * s * s.abs().ln()
    }
}

#[inline]
pub fn h<T: Real>(s: T) -> T {
    let e1 = threshold::<T>();
    let two = T::lit(2.0);
    if s.abs() <= e1 {
        -s_log_s2(s)
    } else if s > e1 {
        two * e1
    } else {
        -two * e1
    }
}

#[inline]
pub fn f<T: Real>(s: T) -> T {
    let e1 = threshold::<T>();
    if s <= e1 {
        T::zero()
    } else {
        T::lit(2.0) * e1 + s_log_s2(s)
    }
}

#[inline]
pub fn g<T: Real>(s: T) -> T {
    let e1 = threshold::<T>();
    if s >= -e1 {
        s_log_s2(s)
    } else {
        T::lit(2.0) * e1
    }
}

#[inline]
#[allow(non_snake_case)]
pub fn H<T: Real>(s: T) -> T {
    let e1 = threshold::<T>();
    let a = s.abs();
    let half = T::lit(0.5);
    if a <= e1 {
        -half_s2_log_s2(s) + half * s * s
    } else {
        T::lit(2.0) * e1 * a - half * e1 * e1
    }
}

#[inline]
#[allow(non_snake_case)]
pub fn F<T: Real>(s: T) -> T {
    let e1 = threshold::<T>();
    let half = T::lit(0.5);
    if s <= e1 {
        return T::zero();
    }
    // with s = (1 + y)/e, F = e⁻²((1 + y)² L(y) - y⁴/2) where
    // L(y) = log(1 + y) - y + y²/2; this avoids the cancellation of the
    // closed form just above the threshold
    let y = s / e1 - T::one();
    if y < T::one() {
        let x = T::one() + y;
        e1 * e1 * (x * x * log1p_tail(y) - half * y.powi(4))
    } else {
        half_s2_log_s2(s) - half * s * s + T::lit(2.0) * e1 * s - half * e1 * e1
    }
}

/// `log(1 + y) - y + y²/2` for `0 ≤ y < 1`, by its series below `0.1`.
fn log1p_tail<T: Real>(y: T) -> T {
    if y >= T::lit(0.1) {
        return y.ln_1p() - y + T::lit(0.5) * y * y;
    }
    // y³/3 - y⁴/4 + y⁵/5 - …; 20 terms reach rounding for y < 0.1
    let mut term = y * y * y;
    let mut sum = T::zero();
    for k in 3..23 {
        let t = term / T::from_usize_lossy(k);
        sum = if k % 2 == 1 { sum + t } else { sum - t };
        term = term * y;
    }
    sum
}

#[inline]
#[allow(non_snake_case)]
pub fn G<T: Real>(s: T) -> T {
    -H(s) + F(s)
}

/// Derivative of `g`, `log s² + 2` on `[-1/e, ∞) \ {0}` and zero below `-1/e`.
///
/// The singularity at zero is regularised by evaluating at `floor` whenever
/// `|s| < floor`.
#[inline]
pub fn g_prime<T: Real>(s: T, floor: T) -> T {
    let e1 = threshold::<T>();
    if s < -e1 {
        return T::zero();
    }
    let a = s.abs().max(floor);
    T::lit(2.0) * a.ln() + T::lit(2.0)
}

fn finite<T: Real>(s: T) -> Result<T> {
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::NonFinite(s.as_f64()))
    }
}

pub fn eval_h<T: Real>(s: T) -> Result<T> {
    finite(s).map(h)
}

pub fn eval_f<T: Real>(s: T) -> Result<T> {
    finite(s).map(f)
}

pub fn eval_g<T: Real>(s: T) -> Result<T> {
    finite(s).map(g)
}

#[allow(non_snake_case)]
pub fn eval_H<T: Real>(s: T) -> Result<T> {
    finite(s).map(H)
}

#[allow(non_snake_case)]
pub fn eval_F<T: Real>(s: T) -> Result<T> {
    finite(s).map(F)
}

#[allow(non_snake_case)]
pub fn eval_G<T: Real>(s: T) -> Result<T> {
    finite(s).map(G)
}
