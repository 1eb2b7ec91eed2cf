//! Slotted ALOHA with (or without) capture over the optical cell.

use std::sync::Once;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fbl::{error_prob_conditional, error_prob_instant, sinr_threshold, FblParams};
use crate::optics::DerivedConstants;
use crate::quadrature::Quadrature;
use crate::scalar::{lit, Real};
use crate::sinr::{InversionOptions, SinrDistribution, SinrTables};

/// Binomial weights below this are dropped from the mixtures.
pub const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig<T> {
    /// Total number of devices `U`.
    pub users: usize,
    /// Per-slot activation probability `p_a`.
    pub access_prob: T,
    /// Whether the receiver decodes the strongest of several colliding packets.
    pub capture: bool,
}

impl<T: Real> ProtocolConfig<T> {
    pub fn new(users: usize, access_prob: T) -> Self {
        Self { users, access_prob, capture: true }
    }

    pub fn without_capture(mut self) -> Self {
        self.capture = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::invalid("U", "at least one device is required"));
        }
        if !(self.access_prob >= T::zero() && self.access_prob <= T::one()) {
            return Err(Error::invalid("p_a", "activation probability must lie in [0, 1]"));
        }
        Ok(())
    }

    /// `P[U_a >= 1] = 1 - (1 - p_a)^U`.
    pub fn activity(&self) -> T {
        T::one() - active_prob(0, self.users, self.access_prob).unwrap_or(T::one())
    }

    /// Largest `k` whose binomial weight reaches [`WEIGHT_FLOOR`] (0 if none).
    pub fn max_relevant_k(&self) -> usize {
        (1..=self.users)
            .rev()
            .find(|&k| active_prob(k, self.users, self.access_prob).is_ok_and(|w| w >= lit(WEIGHT_FLOOR)))
            .unwrap_or(0)
    }
}

/// `P[U_a = k] = C(U, k) p_a^k (1 - p_a)^{U - k}`, evaluated in log space.
pub fn active_prob<T: Real>(k: usize, users: usize, p_a: T) -> Result<T> {
    if k > users {
        return Err(Error::Domain { op: "active_prob", reason: format!("k = {k} exceeds U = {users}") });
    }
    if !(p_a >= T::zero() && p_a <= T::one()) {
        return Err(Error::invalid("p_a", "activation probability must lie in [0, 1]"));
    }
    if p_a == T::zero() {
        return Ok(if k == 0 { T::one() } else { T::zero() });
    }
    if p_a == T::one() {
        return Ok(if k == users { T::one() } else { T::zero() });
    }
    let ln_choose = (1..=k).fold(0.0_f64, |acc, i| acc + (((users - k + i) as f64) / i as f64).ln());
    let p = p_a.to_f64().unwrap_or(f64::NAN);
    let ln_w = ln_choose + k as f64 * p.ln() + (users - k) as f64 * (-p).ln_1p();
    Ok(lit(ln_w.exp()))
}

/// `1 - p_out`.
pub fn reliability<T: Real>(p_out: T) -> T {
    T::one() - p_out
}

/// Tuning of the analytic pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions<T> {
    pub inversion: InversionOptions<T>,
    /// Largest `U_a` with its own conditional distribution; larger counts reuse this one.
    pub u_a_cap: usize,
}

impl<T: Real> Default for AnalysisOptions<T> {
    fn default() -> Self {
        Self { inversion: InversionOptions::default(), u_a_cap: 32 }
    }
}

/// Conditional SINR distributions of one cell geometry, reusable across
/// activation probabilities, rates and block lengths.
#[derive(Debug, Clone)]
pub struct ConditionalStats<T> {
    tables: SinrTables<T>,
    u_a_cap: usize,
}

impl<T: Real> ConditionalStats<T> {
    /// Builds distributions for `U_a = 1..=min(max_u_a, cap)`.
    pub fn build(constants: &DerivedConstants<T>, max_u_a: usize, opts: &AnalysisOptions<T>) -> Result<Self> {
        if opts.u_a_cap == 0 {
            return Err(Error::invalid("u_a_cap", "must be at least 1"));
        }
        let upto = max_u_a.clamp(1, opts.u_a_cap);
        Ok(Self { tables: SinrTables::build(constants, upto, &opts.inversion)?, u_a_cap: opts.u_a_cap })
    }

    /// Builds exactly what `protocol` needs.
    pub fn for_protocol(constants: &DerivedConstants<T>, protocol: &ProtocolConfig<T>, opts: &AnalysisOptions<T>) -> Result<Self> {
        let needed = if protocol.capture { protocol.max_relevant_k() } else { 1 };
        Self::build(constants, needed, opts)
    }

    pub fn constants(&self) -> &DerivedConstants<T> {
        &self.tables.constants
    }

    pub fn max_u_a(&self) -> usize {
        self.tables.max_u_a()
    }

    /// Conditional SINR distribution for `k` active users, reusing the cap's beyond it.
    pub fn distribution(&self, k: usize) -> Result<&SinrDistribution<T>> {
        if k == 0 {
            return Err(Error::invalid("u_a", "conditioning requires at least one active user"));
        }
        if k > self.max_u_a() {
            if self.max_u_a() < self.u_a_cap {
                return Err(Error::invalid("u_a", format!("U_a = {k} beyond the {} tabulated distributions", self.max_u_a())));
            }
            static WARN: Once = Once::new();
            WARN.call_once(|| log::warn!("U_a above {} reuses the U_a = {} distribution", self.u_a_cap, self.u_a_cap));
        }
        Ok(self.tables.get(k.min(self.max_u_a())).expect("index within tabulated range"))
    }
}

/// `P[SINR < gamma_th | U_a = k]`.
pub fn outage_conditional<T: Real>(k: usize, gamma_th: T, stats: &ConditionalStats<T>) -> Result<T> {
    Ok(stats.distribution(k)?.cdf(gamma_th))
}

/// Error probability of a lone active user from the interference-free SNR density.
pub fn single_user_error<T: Real>(constants: &DerivedConstants<T>, fbl: &FblParams<T>) -> T {
    let (a, b) = (constants.gamma_min, constants.gamma_max);
    let breaks: Vec<T> = (0..=64).map(|i| a * (b / a).powf(lit::<T>(i as f64) / lit(64.0))).collect();
    let q = Quadrature { abs_tol: lit(1e-14), rel_tol: lit(1e-12), max_segments: 8000 };
    let est = q.integrate_with_breaks(|g: T| error_prob_instant(g, fbl) * constants.snr_pdf(g), &breaks);
    est.value.max(T::zero()).min(T::one())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerK<T> {
    pub k: usize,
    pub weight: T,
    pub epsilon: T,
    pub p_out: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport<T> {
    /// Unconditional error probability (activity-weighted).
    pub epsilon: T,
    /// Throughput in bits per channel use, clamped at zero.
    pub throughput: T,
    /// Throughput before clamping.
    pub throughput_raw: T,
    pub p_out: T,
    pub reliability: T,
    pub gamma_th: T,
    pub per_k: Vec<PerK<T>>,
}

/// Per-`k` error and outage probabilities of one cell and one code, independent
/// of the activation probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMetrics<T> {
    pub gamma_th: T,
    /// `(eps(k), P_out(k))` for `k = 1..=max_u_a` with capture.
    pub capture: Vec<(T, T)>,
    /// `(eps, P_out)` of a lone user from the interference-free SNR law.
    pub single_user: (T, T),
    /// Whether `capture` ends at the `U_a` cap (larger counts reuse its last entry).
    pub capped: bool,
}

impl<T: Real> ConditionalMetrics<T> {
    /// Integrates every tabulated conditional distribution (in parallel).
    pub fn compute(stats: &ConditionalStats<T>, fbl: &FblParams<T>) -> Result<Self> {
        fbl.validate()?;
        let gamma_th = sinr_threshold(fbl)?;
        let capture = (1..=stats.max_u_a())
            .into_par_iter()
            .map(|k| {
                let dist = stats.distribution(k).expect("tabulated");
                (error_prob_conditional(dist, fbl), dist.cdf(gamma_th))
            })
            .collect();
        let constants = stats.constants();
        Ok(Self {
            gamma_th,
            capture,
            single_user: (single_user_error(constants, fbl), constants.snr_cdf(gamma_th)),
            capped: stats.max_u_a() >= stats.u_a_cap,
        })
    }

    fn at(&self, k: usize) -> Result<(T, T)> {
        match self.capture.get(k - 1) {
            Some(&v) => Ok(v),
            None if self.capped => {
                static WARN: Once = Once::new();
                WARN.call_once(|| log::warn!("U_a above {} reuses the U_a = {} statistics", self.capture.len(), self.capture.len()));
                Ok(self.capture[self.capture.len() - 1])
            }
            None => Err(Error::invalid("u_a", format!("U_a = {k} beyond the {} tabulated distributions", self.capture.len()))),
        }
    }

    /// Mixes the per-`k` values with the binomial activity law of `protocol`.
    pub fn report(&self, protocol: &ProtocolConfig<T>, rate: T) -> Result<MetricsReport<T>> {
        protocol.validate()?;
        let mut per_k = vec![];
        let (mut epsilon, mut p_out) = (T::zero(), T::zero());
        for (k, weight) in relevant_weights(protocol)? {
            let (eps_k, out_k) = match (protocol.capture, k) {
                (true, _) => self.at(k)?,
                (false, 1) => self.single_user,
                (false, _) => (T::zero(), T::zero()),
            };
            epsilon = epsilon + weight * eps_k;
            p_out = p_out + weight * out_k;
            per_k.push(PerK { k, weight, epsilon: eps_k, p_out: out_k });
        }
        let epsilon = epsilon.max(T::zero()).min(T::one());
        let p_out = p_out.max(T::zero()).min(T::one());
        let throughput_raw = if protocol.capture {
            throughput_capture(protocol, rate, epsilon)
        } else {
            throughput_no_capture(protocol, rate, epsilon)
        };
        Ok(MetricsReport {
            epsilon,
            throughput: throughput_raw.max(T::zero()),
            throughput_raw,
            p_out,
            reliability: reliability(p_out),
            gamma_th: self.gamma_th,
            per_k,
        })
    }
}

/// Unconditional error probability `sum_k eps(k) P[U_a = k]`.
pub fn error_prob_unconditional<T: Real>(stats: &ConditionalStats<T>, protocol: &ProtocolConfig<T>, fbl: &FblParams<T>) -> Result<T> {
    Ok(evaluate(stats, protocol, fbl)?.epsilon)
}

/// Unconditional outage probability `sum_k P_out(k) P[U_a = k]`.
pub fn outage_unconditional<T: Real>(stats: &ConditionalStats<T>, protocol: &ProtocolConfig<T>, gamma_th: T) -> Result<T> {
    protocol.validate()?;
    let mut total = T::zero();
    for (k, w) in relevant_weights(protocol)? {
        let p = if protocol.capture {
            outage_conditional(k, gamma_th, stats)?
        } else if k == 1 {
            stats.constants().snr_cdf(gamma_th)
        } else {
            T::zero()
        };
        total = total + w * p;
    }
    Ok(total.max(T::zero()).min(T::one()))
}

/// `R (1 - (1 - p_a)^U - eps)`, unclamped.
pub fn throughput_capture<T: Real>(protocol: &ProtocolConfig<T>, rate: T, epsilon: T) -> T {
    rate * (protocol.activity() - epsilon)
}

/// `R (P[U_a = 1] - eps)`, unclamped.
pub fn throughput_no_capture<T: Real>(protocol: &ProtocolConfig<T>, rate: T, epsilon: T) -> T {
    let single = active_prob(1, protocol.users, protocol.access_prob).unwrap_or(T::zero());
    rate * (single - epsilon)
}

fn relevant_weights<T: Real>(protocol: &ProtocolConfig<T>) -> Result<Vec<(usize, T)>> {
    let mut out = vec![];
    for k in 1..=protocol.users {
        let w = active_prob(k, protocol.users, protocol.access_prob)?;
        if w >= lit(WEIGHT_FLOOR) {
            out.push((k, w));
        }
    }
    Ok(out)
}

/// Error probability, throughput and outage of one operating point.
pub fn evaluate<T: Real>(stats: &ConditionalStats<T>, protocol: &ProtocolConfig<T>, fbl: &FblParams<T>) -> Result<MetricsReport<T>> {
    protocol.validate()?;
    ConditionalMetrics::compute(stats, fbl)?.report(protocol, fbl.rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn binomial_edge_cases() {
        assert_eq!(active_prob(0, 10, 0.0).unwrap(), 1.0);
        assert_eq!(active_prob(3, 10, 0.0).unwrap(), 0.0);
        assert_eq!(active_prob(1, 1, 0.3).unwrap(), 0.3);
        assert_eq!(active_prob(10, 10, 1.0).unwrap(), 1.0);
        assert!(active_prob(11, 10, 0.5).is_err());
        assert_relative_eq!(active_prob(0, 50, 0.02).unwrap(), 0.36416968008711707, max_relative = 1e-13);
    }

    #[test]
    fn binomial_weights_sum_to_one() {
        for users in [1usize, 7, 50, 1000] {
            for p in [0.001, 0.05, 0.5, 0.97] {
                let s: f64 = (0..=users).map(|k| active_prob(k, users, p).unwrap()).sum();
                assert!((s - 1.0).abs() < 1e-9, "U = {users}, p = {p}: {s}");
            }
        }
    }

    #[test]
    fn relevant_k_cutoff() {
        let p = ProtocolConfig::new(50, 0.05);
        let k = p.max_relevant_k();
        assert!(active_prob(k, 50, 0.05).unwrap() >= WEIGHT_FLOOR);
        assert!(active_prob(k + 1, 50, 0.05).unwrap() < WEIGHT_FLOOR);
        assert_eq!(ProtocolConfig::new(50, 0.0).max_relevant_k(), 0);
    }

    #[test]
    fn reliability_is_complement() {
        assert_eq!(reliability(0.0), 1.0);
        assert_eq!(reliability(1.0), 0.0);
    }

    #[test]
    fn validation() {
        assert!(ProtocolConfig::new(0, 0.1).validate().is_err());
        assert!(ProtocolConfig::new(3, 1.1).validate().is_err());
        assert!(ProtocolConfig::new(3, 0.0).validate().is_ok());
    }
}
