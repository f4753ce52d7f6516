//! Shared domain types, the externalized risk configuration, and the
//! days-since-exposure to transmission-risk-level mapping used by both model
//! generations.

use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

string_id!(
    /// A person in the simulated world.
    PersonId
);
string_id!(
    /// A phone running the app.
    DeviceId
);
string_id!(
    /// Opaque rotating identifier a device broadcasts for one day.
    IdToken
);

/// Ordinal infectiousness estimate of the infected person on a given day, 0..=8.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(try_from = "i64", into = "u8")]
pub struct TransmissionRiskLevel(u8);

impl TransmissionRiskLevel {
    pub const ZERO: Self = Self(0);
    pub const MAX: Self = Self(8);

    pub fn new(level: u8) -> Result<Self> {
        if level > 8 {
            return Err(Error::LevelOutOfRange(i64::from(level)));
        }
        Ok(Self(level))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// All representable levels, lowest first.
    pub fn all() -> impl Iterator<Item = Self> {
        (0..=8).map(Self)
    }
}

impl TryFrom<i64> for TransmissionRiskLevel {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self> {
        u8::try_from(value)
            .map_err(|_| Error::LevelOutOfRange(value))
            .and_then(Self::new)
    }
}

impl From<TransmissionRiskLevel> for u8 {
    fn from(level: TransmissionRiskLevel) -> u8 {
        level.0
    }
}

impl fmt::Display for TransmissionRiskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Whole days between an encounter and the day it is evaluated.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct DaysSinceExposure(u32);

impl DaysSinceExposure {
    pub fn new(days: u32) -> Self {
        Self(days)
    }

    /// Days from `day` to `reference`. Encounters dated after the reference
    /// day count as same-day.
    pub fn between(day: NaiveDate, reference: NaiveDate) -> Self {
        let days = (reference - day).num_days().clamp(0, i64::from(u32::MAX));
        Self(days as u32)
    }

    pub fn days(self) -> u32 {
        self.0
    }
}

/// Bluetooth signal attenuation in dB. Lower means closer.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AttenuationDb(f64);

impl AttenuationDb {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidAttenuation(value));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for AttenuationDb {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<AttenuationDb> for f64 {
    fn from(db: AttenuationDb) -> f64 {
        db.0
    }
}

impl fmt::Display for AttenuationDb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1} dB", self.0)
    }
}

/// Warning level shown to the user, ordered `None < Low < High`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum RiskClass {
    #[default]
    None,
    Low,
    High,
}

impl fmt::Display for RiskClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskClass::None => "NONE",
            RiskClass::Low => "LOW",
            RiskClass::High => "HIGH",
        })
    }
}

/// Which risk model generation to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVersion {
    /// Up to 1.7.1: combined risk over all encounters.
    V1,
    /// 1.9 onwards: exposure windows summed per day.
    V2,
}

impl std::str::FromStr for ModelVersion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "v1" => Ok(Self::V1),
            "v2" => Ok(Self::V2),
            other => Err(format!(
                "unknown model version {other:?}, expected v1 or v2"
            )),
        }
    }
}

impl fmt::Display for ModelVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::V1 => "v1",
            Self::V2 => "v2",
        })
    }
}

/// Attenuation bucket a scan sample or a minute of exposure falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceClass {
    /// Below `close_sa_db`.
    Close,
    /// From `close_sa_db` up to and including `sa_gate_db`.
    Medium,
    /// Above `sa_gate_db`.
    Far,
}

/// How the v1 per-encounter score combines its indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrsFormula {
    /// `10 * TR` when every gate passes, else 0. Reachable scores are
    /// {0, 10, 30, 50, 60, 80} under the default table.
    #[default]
    Gated,
    /// The product `10 * dED * dSA * dDE * TR` with `dDE = delta_de_value`
    /// and `dSA = delta_sa_value` taken as multipliers. Gives 800 for an
    /// encounter the gated form scores 80; kept for comparison only.
    LiteralWeights,
}

/// Which v1 encounters contribute their minutes to the weighted exposure sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExposureSumScope {
    /// Every encounter inside the days-since-exposure horizon.
    #[default]
    AllInHorizon,
    /// Only encounters whose own score survives the minimum risk score.
    MrsSurviving,
}

/// Every threshold, weight, and table of both model generations.
///
/// Missing JSON fields take their defaults; unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskConfig {
    /// Transmission risk level by days since exposure, indexed 0..=14.
    pub tr_by_de: Vec<TransmissionRiskLevel>,
    pub delta_de_value: u32,
    pub de_cutoff_days: u32,
    pub ed_threshold_minutes: f64,
    pub delta_sa_value: u32,
    pub sa_gate_db: f64,
    pub mrs: u32,
    pub ars: u32,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub v1_high_threshold_minutes: f64,
    pub window_minutes: f64,
    pub v2_min_qualifying_minutes: f64,
    pub v2_min_trl: u8,
    pub close_sa_db: f64,
    /// Scaling factor for levels I..=VIII.
    pub trl_to_trv: Vec<f64>,
    pub v2_low_threshold_minutes: f64,
    pub v2_high_threshold_minutes: f64,
    pub trs_formula: TrsFormula,
    pub exposure_sum_scope: ExposureSumScope,
}

/// Levels for DE = 0..=14. DE 0 copies DE 1; DE 14 is zero.
const DEFAULT_TR_BY_DE: [u8; 15] = [6, 6, 8, 8, 8, 5, 3, 1, 1, 1, 1, 1, 1, 1, 0];

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            tr_by_de: DEFAULT_TR_BY_DE
                .iter()
                .map(|&l| TransmissionRiskLevel(l))
                .collect(),
            delta_de_value: 5,
            de_cutoff_days: 14,
            ed_threshold_minutes: 10.0,
            delta_sa_value: 2,
            sa_gate_db: 73.0,
            mrs: 11,
            ars: 50,
            w1: 1.0,
            w2: 0.5,
            w3: 0.0,
            w4: 0.0,
            v1_high_threshold_minutes: 15.0,
            window_minutes: 30.0,
            v2_min_qualifying_minutes: 5.0,
            v2_min_trl: 3,
            close_sa_db: 55.0,
            trl_to_trv: vec![0.0, 0.0, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6],
            v2_low_threshold_minutes: 5.0,
            v2_high_threshold_minutes: 15.0,
            trs_formula: TrsFormula::Gated,
            exposure_sum_scope: ExposureSumScope::AllInHorizon,
        }
    }
}

/// One broken configuration invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigViolation {
    pub field: &'static str,
    pub constraint: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

impl RiskConfig {
    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut bad = |field: &'static str, constraint: &str| {
            errs.push(ConfigViolation {
                field,
                constraint: constraint.to_string(),
            })
        };

        if self.tr_by_de.len() != 15 {
            bad("tr_by_de", "must have exactly 15 entries (DE 0..=14)");
        }
        if self.delta_de_value == 0 {
            bad("delta_de_value", "must be at least 1");
        }
        if self.de_cutoff_days > 14 {
            bad("de_cutoff_days", "must be at most 14");
        }
        if !non_negative(self.ed_threshold_minutes) {
            bad("ed_threshold_minutes", "must be finite and >= 0");
        }
        if self.delta_sa_value == 0 {
            bad("delta_sa_value", "must be at least 1");
        }
        if !positive(self.sa_gate_db) {
            bad("sa_gate_db", "must be finite and > 0");
        }
        if !positive(self.close_sa_db) {
            bad("close_sa_db", "must be finite and > 0");
        } else if self.close_sa_db >= self.sa_gate_db {
            bad("close_sa_db", "must be below sa_gate_db");
        }
        if self.ars == 0 {
            bad("ars", "must be at least 1");
        }
        for (field, w) in [
            ("w1", self.w1),
            ("w2", self.w2),
            ("w3", self.w3),
            ("w4", self.w4),
        ] {
            if !non_negative(w) {
                bad(field, "weights must be finite and >= 0");
            }
        }
        if !positive(self.v1_high_threshold_minutes) {
            bad("v1_high_threshold_minutes", "must be finite and > 0");
        }
        if !positive(self.window_minutes) {
            bad("window_minutes", "must be finite and > 0");
        }
        if !non_negative(self.v2_min_qualifying_minutes) {
            bad("v2_min_qualifying_minutes", "must be finite and >= 0");
        } else if self.v2_min_qualifying_minutes > self.window_minutes {
            bad(
                "v2_min_qualifying_minutes",
                "must not exceed window_minutes",
            );
        }
        if self.v2_min_trl > 8 {
            bad("v2_min_trl", "must be a level in 0..=8");
        }
        if self.trl_to_trv.len() != 8 {
            bad(
                "trl_to_trv",
                "must have exactly 8 entries (levels I..=VIII)",
            );
        }
        if self.trl_to_trv.iter().any(|&v| !non_negative(v)) {
            bad("trl_to_trv", "values must be finite and >= 0");
        }
        if self.trl_to_trv.windows(2).any(|p| p[1] < p[0]) {
            bad("trl_to_trv", "must be non-decreasing (monotonicity)");
        }
        if !non_negative(self.v2_low_threshold_minutes) {
            bad("v2_low_threshold_minutes", "must be finite and >= 0");
        } else if self.v2_low_threshold_minutes >= self.v2_high_threshold_minutes {
            bad(
                "v2_low_threshold_minutes",
                "must be below v2_high_threshold_minutes",
            );
        }
        if !self.v2_high_threshold_minutes.is_finite() {
            bad("v2_high_threshold_minutes", "must be finite");
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }

    /// Consumes the config, returning it only if it is valid.
    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config = Self::from_json(&text).map_err(|source| Error::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        config.validated()
    }

    pub fn distance_class(&self, attenuation: AttenuationDb) -> DistanceClass {
        let db = attenuation.value();
        if db < self.close_sa_db {
            DistanceClass::Close
        } else if db <= self.sa_gate_db {
            DistanceClass::Medium
        } else {
            DistanceClass::Far
        }
    }
}

fn non_negative(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Transmission risk level for an encounter `de` days before the reference day.
///
/// Zero at and beyond `de_cutoff_days`.
pub fn trl_from_days_since_exposure(
    de: DaysSinceExposure,
    config: &RiskConfig,
) -> TransmissionRiskLevel {
    if de.days() >= config.de_cutoff_days {
        return TransmissionRiskLevel::ZERO;
    }
    config
        .tr_by_de
        .get(de.days() as usize)
        .copied()
        .unwrap_or(TransmissionRiskLevel::ZERO)
}
