//! Complementary error function, generic over the scalar type.

use crate::scalar::{lit, Real};

/// `erfc(x) = 2/sqrt(pi) * int_x^inf exp(-t^2) dt`.
///
/// Series with an `exp(-x^2)` prefactor below 1 and a Lentz-evaluated
/// continued fraction above it; relative accuracy is close to machine epsilon
/// across the range that does not underflow.
pub fn erfc<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    if x < T::zero() {
        return lit::<T>(2.0) - erfc(-x);
    }
    if x < T::one() {
        T::one() - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// `erf(x)` from `2/sqrt(pi) exp(-x^2) sum (2x^2)^n x / (1*3*...*(2n+1))`.
fn erf_series<T: Real>(x: T) -> T {
    let two_x2 = lit::<T>(2.0) * x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0u32;
    while n < 500 {
        n += 1;
        term = term * two_x2 / lit::<T>(f64::from(2 * n + 1));
        sum = sum + term;
        if term <= sum * T::epsilon() {
            break;
        }
    }
    sum * lit::<T>(2.0) / T::PI().sqrt() * (-x * x).exp()
}

/// `erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`.
fn erfc_continued_fraction<T: Real>(x: T) -> T {
    let tiny = T::min_positive_value() / T::epsilon();
    let mut f = x;
    let mut c = x;
    let mut d = T::zero();
    for k in 1..2000u32 {
        let a = lit::<T>(f64::from(k) * 0.5);
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let delta = c * d;
        f = f * delta;
        if (delta - T::one()).abs() <= T::epsilon() {
            break;
        }
    }
    (-x * x).exp() / (T::PI().sqrt() * f)
}
