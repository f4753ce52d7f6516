//! Both generations of the German Corona-Warn-App risk model, a desk-scale
//! simulation of the decentralized exposure-notification protocol they run
//! inside, and Monte Carlo analysis of how much exposure the app registers.
//!
//! - [`basic`]: the v1.7 per-encounter score and combined risk.
//! - [`updated`]: the v1.9+ exposure-window model with per-day summation.
//! - [`contact_sim`]: contacts to scan samples, samples to encounters and windows.
//! - [`enf`]: daily IDs, key upload, server broadcast, on-device matching.
//! - [`coverage`]: adoption, reporting and short-contact losses.
//! - [`scenario`]: scenario files and end-to-end runs behind the `cwa-sim` binary.
//! - [`output`]: table, JSON and CSV rendering of reports.
//!
//! Runnable walkthroughs live in `examples/`; `cargo run --example` lists them.

pub mod basic;
pub mod contact_sim;
pub mod coverage;
pub mod enf;
pub mod error;
pub mod model;
pub mod output;
pub mod scenario;
mod seed;
pub mod updated;

pub use error::{Error, Result};
pub use model::{
    AttenuationDb, DaysSinceExposure, DeviceId, IdToken, ModelVersion, PersonId, RiskClass,
    RiskConfig, TransmissionRiskLevel,
};
