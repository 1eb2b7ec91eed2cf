//! Slot-level Monte Carlo simulation of the cell.
//!
//! Every slot draws from its own ChaCha8 stream selected by the slot index, so
//! sample streams and estimates are identical for a given seed whatever the
//! number of worker threads.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fbl::{error_prob_instant, FblParams};
use crate::optics::{sample_radius, DerivedConstants};
use crate::protocol::ProtocolConfig;
use crate::scalar::{lit, to_f64, Real};

/// Identifies the sampling scheme; part of the reproducibility contract.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/stream-per-slot";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Condition {
    /// `U_a ~ Binomial(U, p_a)`.
    #[default]
    Unconditional,
    /// `U_a` fixed to the given count.
    FixedActive(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub n_slots: u64,
    pub seed: u64,
    pub condition: Condition,
}

impl SimConfig {
    pub fn new(n_slots: u64, seed: u64) -> Self {
        Self { n_slots, seed, condition: Condition::Unconditional }
    }

    pub fn conditioned(mut self, u_a: usize) -> Self {
        self.condition = Condition::FixedActive(u_a);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots == 0 {
            return Err(Error::invalid("slots", "at least one slot is required"));
        }
        if self.condition == Condition::FixedActive(0) {
            return Err(Error::invalid("u_a", "conditioning requires at least one active user"));
        }
        Ok(())
    }
}

/// One occupied slot as seen by the randomly chosen reference user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotSample<T> {
    pub u_a: usize,
    pub reference_gamma: T,
    pub interference_sum: T,
    pub sinr: T,
}

/// Random stream of slot `slot` under `seed`.
pub fn slot_rng(seed: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(slot);
    rng
}

/// Draws one slot; `None` marks a slot with no active device.
pub fn simulate_slot<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    constants: &DerivedConstants<T>,
    protocol: &ProtocolConfig<T>,
    condition: Condition,
) -> Option<SlotSample<T>> {
    let u_a = match condition {
        Condition::FixedActive(k) => k,
        Condition::Unconditional => {
            let p = to_f64(protocol.access_prob).clamp(0.0, 1.0);
            Binomial::new(protocol.users as u64, p).map(|b| b.sample(rng) as usize).unwrap_or(0)
        }
    };
    if u_a == 0 {
        return None;
    }
    let gammas: Vec<T> = (0..u_a)
        .map(|_| constants.snr_unchecked(sample_radius(lit::<T>(rng.random::<f64>()), constants.radius)))
        .collect();
    let reference = rng.random_range(0..u_a);
    let reference_gamma = gammas[reference];
    let interference_sum = gammas
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != reference)
        .fold(T::zero(), |s, (_, &g)| s + g);
    Some(SlotSample { u_a, reference_gamma, interference_sum, sinr: reference_gamma / (interference_sum + T::one()) })
}

/// Simulates `sim.n_slots` slots in parallel, returned in slot order.
pub fn simulate<T: Real>(sim: &SimConfig, constants: &DerivedConstants<T>, protocol: &ProtocolConfig<T>) -> Result<Vec<Option<SlotSample<T>>>> {
    sim.validate()?;
    protocol.validate()?;
    Ok((0..sim.n_slots)
        .into_par_iter()
        .map(|slot| simulate_slot(&mut slot_rng(sim.seed, slot), constants, protocol, sim.condition))
        .collect())
}

/// SINR draws conditioned on `u_a` active users.
pub fn conditioned_sinr<T: Real>(n_slots: u64, seed: u64, u_a: usize, constants: &DerivedConstants<T>) -> Result<Vec<T>> {
    let sim = SimConfig::new(n_slots, seed).conditioned(u_a);
    let protocol = ProtocolConfig::new(u_a.max(1), T::one());
    Ok(simulate(&sim, constants, &protocol)?.into_iter().flatten().map(|s| s.sinr).collect())
}

/// Fraction of `samples` at or below each grid point.
pub fn empirical_cdf<T: Real>(samples: &[T], grid: &[T]) -> Vec<T> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = lit::<T>(sorted.len().max(1) as f64);
    grid.iter().map(|&g| lit::<T>(sorted.partition_point(|&s| s <= g) as f64) / n).collect()
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_distance<T: Real>(samples: &[T], cdf: impl Fn(T) -> T) -> T {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = lit::<T>(sorted.len() as f64);
    sorted.iter().enumerate().fold(T::zero(), |d, (i, &x)| {
        let f = cdf(x);
        let below = lit::<T>(i as f64) / n;
        let above = lit::<T>((i + 1) as f64) / n;
        d.max((f - below).abs()).max((above - f).abs())
    })
}

/// Monte Carlo estimates with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate<T> {
    pub n_slots: usize,
    pub activity: T,
    pub epsilon: T,
    pub throughput: T,
    pub p_out: T,
    pub reliability: T,
    pub se_epsilon: T,
    pub se_throughput: T,
    pub se_p_out: T,
}

/// Per-slot estimators of error probability, throughput and outage.
///
/// Without capture only slots with a single active device can succeed, and only
/// those contribute error and outage events.
pub fn estimate_metrics<T: Real>(samples: &[Option<SlotSample<T>>], fbl: &FblParams<T>, gamma_th: T, capture: bool) -> McEstimate<T> {
    let rate = fbl.rate;
    let per_slot = |s: &Option<SlotSample<T>>| -> [f64; 4] {
        match s {
            Some(s) if capture || s.u_a == 1 => {
                let e = error_prob_instant(s.sinr, fbl);
                let o = if s.sinr < gamma_th { T::one() } else { T::zero() };
                [1.0, to_f64(e), to_f64(rate * (T::one() - e)), to_f64(o)]
            }
            Some(_) => [1.0, 0.0, 0.0, 0.0],
            None => [0.0; 4],
        }
    };
    let n = samples.len().max(1) as f64;
    let mut mean = [0.0f64; 4];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(per_slot(s)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0f64; 4];
    for s in samples {
        for ((acc, m), v) in var.iter_mut().zip(&mean).zip(per_slot(s)) {
            *acc += (v - m) * (v - m);
        }
    }
    let se = var.map(|v| if n > 1.0 { (v / (n - 1.0) / n).sqrt() } else { 0.0 });
    let p_out = lit::<T>(mean[3]);
    McEstimate {
        n_slots: samples.len(),
        activity: lit(mean[0]),
        epsilon: lit(mean[1]),
        throughput: lit(mean[2]),
        p_out,
        reliability: T::one() - p_out,
        se_epsilon: lit(se[1]),
        se_throughput: lit(se[2]),
        se_p_out: lit(se[3]),
    }
}

/// Text dump of occupied slots: one `u_a sinr` pair per line.
pub fn write_samples<T: Real, W: Write>(mut w: W, samples: &[Option<SlotSample<T>>]) -> io::Result<()> {
    writeln!(w, "# u_a sinr")?;
    for s in samples.iter().flatten() {
        writeln!(w, "{} {}", s.u_a, to_f64(s.sinr))?;
    }
    Ok(())
}
