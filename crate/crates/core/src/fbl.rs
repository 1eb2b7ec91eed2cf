//! Finite-blocklength normal approximation: capacity, dispersion, Q-function
//! and the decoding error probability of a code of length `n` and rate `R`.

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;
use crate::scalar::{lit, to_f64, Real};
use crate::sinr::SinrDistribution;
use crate::special::erfc;

/// Blocklengths below this are rejected unless explicitly allowed.
pub const MIN_BLOCKLENGTH: usize = 100;

/// Largest SINR searched by [`sinr_threshold`].
const BRACKET_MAX: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DispersionKind {
    /// `2 gamma / (1 + gamma) log2(e)^2`, for non-Gaussian interference.
    #[default]
    NearestNeighbor,
    /// `(1 - (1 + gamma)^-2) log2(e)^2`.
    Awgn,
    /// `(1 - 1 / (1 + gamma^2)) log2(e)^2`, a typeset variant of the AWGN form kept for replication.
    AwgnPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FblParams<T> {
    /// Channel uses per packet.
    pub blocklength: usize,
    /// Bits per channel use.
    pub rate: T,
    pub dispersion: DispersionKind,
    /// Target error probability defining the outage threshold.
    pub target_error: T,
    /// Accept `blocklength < 100`, where the dropped `O(log n / n)` term is no longer negligible.
    pub allow_short_blocklength: bool,
}

impl<T: Real> FblParams<T> {
    pub fn new(blocklength: usize, rate: T) -> Self {
        Self {
            blocklength,
            rate,
            dispersion: DispersionKind::default(),
            target_error: lit(1e-3),
            allow_short_blocklength: false,
        }
    }

    /// Same parameters with the short-blocklength override enabled.
    pub fn allowing_short_blocklength(mut self) -> Self {
        self.allow_short_blocklength = true;
        self
    }

    pub fn with_target_error(mut self, target_error: T) -> Self {
        self.target_error = target_error;
        self
    }

    pub fn with_dispersion(mut self, dispersion: DispersionKind) -> Self {
        self.dispersion = dispersion;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocklength == 0 {
            return Err(Error::invalid("n", "block length must be positive"));
        }
        if self.blocklength < MIN_BLOCKLENGTH {
            if !self.allow_short_blocklength {
                return Err(Error::invalid(
                    "n",
                    format!("{} < {MIN_BLOCKLENGTH}; set allow_short_blocklength to override", self.blocklength),
                ));
            }
            static WARN: std::sync::Once = std::sync::Once::new();
            WARN.call_once(|| {
                log::warn!(
                    "block length n = {} below {MIN_BLOCKLENGTH}: normal approximation without the log(n)/n term",
                    self.blocklength
                )
            });
        }
        if !(self.rate > T::zero() && self.rate.is_finite()) {
            return Err(Error::invalid("R", "code rate must be positive and finite"));
        }
        if !(self.target_error > T::zero() && self.target_error < T::one()) {
            return Err(Error::invalid("eps_th", "target error must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// `log2(1 + gamma)` bits per channel use.
pub fn capacity<T: Real>(gamma: T) -> T {
    gamma.ln_1p() * T::LOG2_E()
}

/// Channel dispersion in squared bits.
pub fn dispersion<T: Real>(gamma: T, kind: DispersionKind) -> T {
    let log2e_sq = T::LOG2_E() * T::LOG2_E();
    let one = T::one();
    let factor = match kind {
        DispersionKind::NearestNeighbor => lit::<T>(2.0) * gamma / (one + gamma),
        DispersionKind::Awgn => one - (one + gamma).powi(-2),
        DispersionKind::AwgnPrinted => one - (one + gamma * gamma).recip(),
    };
    factor * log2e_sq
}

/// Gaussian tail `Q(z) = P[N(0,1) > z]`.
pub fn q_func<T: Real>(z: T) -> T {
    erfc(z / T::SQRT_2()) * lit(0.5)
}

/// Inverse of [`q_func`] on `(0, 1)`.
///
/// The root is bracketed and bisected in `z`, then polished with Newton steps;
/// upper-half probabilities are mapped through `Q(-z) = 1 - Q(z)` so the solve
/// always works on the accurate small-tail side.
pub fn q_inv<T: Real>(p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::Domain { op: "q_inv", reason: format!("probability {} outside (0, 1)", to_f64(p)) });
    }
    let half = lit::<T>(0.5);
    if p > half {
        return q_inv(T::one() - p).map(|z| -z);
    }
    if p == half {
        return Ok(T::zero());
    }
    let (mut lo, mut hi) = (T::zero(), T::one());
    while q_func(hi) > p {
        lo = hi;
        hi = hi + hi;
        if hi > lit(64.0) {
            return Err(Error::Domain { op: "q_inv", reason: format!("probability {} below representable tail", to_f64(p)) });
        }
    }
    for _ in 0..200 {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        if q_func(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut z = (lo + hi) * half;
    let inv_sqrt_2pi = (T::TAU()).sqrt().recip();
    for _ in 0..3 {
        let density = (-(z * z) * half).exp() * inv_sqrt_2pi;
        if density <= T::zero() {
            break;
        }
        let next = z + (q_func(z) - p) / density;
        if !next.is_finite() || (next - z).abs() >= (hi - lo).max(T::epsilon()) {
            break;
        }
        z = next;
    }
    Ok(z)
}

/// Normal-approximation error probability at SINR `gamma`.
///
/// At `gamma = 0` the dispersion vanishes with capacity below the rate, and the
/// continuous limit 1 is returned.
pub fn error_prob_instant<T: Real>(gamma: T, params: &FblParams<T>) -> T {
    if !(gamma > T::zero()) {
        return T::one();
    }
    let v = dispersion(gamma, params.dispersion);
    let gap = capacity(gamma) - params.rate;
    if !(v > T::zero()) {
        return if gap > T::zero() { T::zero() } else { T::one() };
    }
    let n = lit::<T>(params.blocklength as f64);
    q_func((n / v).sqrt() * gap)
}

/// SINR at which [`error_prob_instant`] equals `params.target_error`, by bisection.
pub fn sinr_threshold<T: Real>(params: &FblParams<T>) -> Result<T> {
    let target = params.target_error;
    if !(target > T::zero() && target < T::one()) {
        return Err(Error::Bracket { target: to_f64(target), reason: "target must lie in (0, 1)".into() });
    }
    let half = lit::<T>(0.5);
    let at_rate = params.rate.exp2() - T::one();
    if target == half {
        return Ok(at_rate);
    }
    let eps = |g: T| error_prob_instant(g, params);
    let (mut lo, mut hi) = if target < half { (at_rate, at_rate.max(T::one())) } else { (T::zero(), at_rate) };
    if target < half {
        while eps(hi) > target {
            lo = hi;
            hi = hi + hi;
            if hi > lit(BRACKET_MAX) {
                return Err(Error::Bracket {
                    target: to_f64(target),
                    reason: format!("error probability stays above target up to gamma = {BRACKET_MAX:e}"),
                });
            }
        }
    }
    for _ in 0..400 {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        if eps(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick whichever bracket end is closer in probability
    let (el, eh) = ((eps(lo) - target).abs(), (eps(hi) - target).abs());
    Ok(if el < eh { lo } else { hi })
}

/// `E[error_prob_instant(SINR) | U_a]` under the tabulated conditional SINR density.
pub fn error_prob_conditional<T: Real>(sinr: &SinrDistribution<T>, params: &FblParams<T>) -> T {
    let q = Quadrature {
        abs_tol: lit(1e-13),
        rel_tol: lit(1e-11),
        max_segments: sinr.sinr_grid.len() + 8000,
    };
    let est = q.integrate_with_breaks(|g: T| error_prob_instant(g, params) * sinr.pdf(g), &sinr.sinr_grid);
    est.value.max(T::zero()).min(T::one())
}
