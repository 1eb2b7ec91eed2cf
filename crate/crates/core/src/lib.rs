//! Slotted ALOHA with capture in an indoor optical-wireless IoT cell.
//!
//! The analysis runs from the Lambertian line-of-sight channel to the
//! single-user SNR distribution, the conditional SINR of a reference user among
//! `U_a` active devices, and finite-blocklength error, throughput and outage
//! metrics. A slot-level Monte Carlo simulator provides an independent check.
//!
//! All numerics are generic over the scalar ([`Real`]: `f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.
//!
//! ```
//! use owc_aloha::{AnalysisOptions, ConditionalStats, FblParams, ProtocolConfig, SystemConfig};
//!
//! let constants = SystemConfig::reference().derive().unwrap();
//! let protocol = ProtocolConfig::new(10, 0.02);
//! let stats = ConditionalStats::for_protocol(&constants, &protocol, &AnalysisOptions::default()).unwrap();
//! let fbl = FblParams::new(128, 0.5);
//! let report = owc_aloha::evaluate(&stats, &protocol, &fbl).unwrap();
//! assert!(report.throughput <= 0.5);
//! ```

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fbl;
pub mod montecarlo;
pub mod optics;
pub mod protocol;
pub mod quadrature;
pub mod scalar;
pub mod sinr;
pub mod special;

pub use error::{Error, Result};
pub use fbl::DispersionKind;
pub use montecarlo::{Condition, SimConfig};
pub use protocol::evaluate;
pub use scalar::Real;
pub use sinr::InversionMethod;

pub type OpticalFrontend = optics::OpticalFrontend<f64>;
pub type CellGeometry = optics::CellGeometry<f64>;
pub type SystemConfig = optics::SystemConfig<f64>;
pub type DerivedConstants = optics::DerivedConstants<f64>;
pub type FblParams = fbl::FblParams<f64>;
pub type ProtocolConfig = protocol::ProtocolConfig<f64>;
pub type AnalysisOptions = protocol::AnalysisOptions<f64>;
pub type ConditionalStats = protocol::ConditionalStats<f64>;
pub type MetricsReport = protocol::MetricsReport<f64>;
pub type ConditionalMetrics = protocol::ConditionalMetrics<f64>;
pub type InversionOptions = sinr::InversionOptions<f64>;
pub type CfGrid = sinr::CfGrid<f64>;
pub type InterferenceDistribution = sinr::InterferenceDistribution<f64>;
pub type SinrDistribution = sinr::SinrDistribution<f64>;
pub type SlotSample = montecarlo::SlotSample<f64>;
pub type McEstimate = montecarlo::McEstimate<f64>;
