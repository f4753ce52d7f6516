//! The v1.9+ risk model.
//!
//! Exposure is cut into 30-minute windows. A window counts only if it holds
//! enough minutes at or below the attenuation gate and the peer's transmission
//! risk level is high enough. Counted windows score their proximity-weighted
//! minutes times the level's scaling factor, and the scores of one day are
//! summed into that day's risk.

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DeviceId, IdToken, RiskClass, RiskConfig, TransmissionRiskLevel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureWindow {
    pub observer: DeviceId,
    pub peer_id: IdToken,
    pub day: NaiveDate,
    pub window_start: NaiveDateTime,
    pub minutes_close: f64,
    pub minutes_medium: f64,
    pub minutes_far: f64,
    pub trl: TransmissionRiskLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyRiskSummary {
    pub day: NaiveDate,
    pub total_weighted_minutes: f64,
    pub class: RiskClass,
    pub contributing_windows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RiskDayCounts {
    pub low_days: usize,
    pub high_days: usize,
}

pub fn window_qualifies(w: &ExposureWindow, config: &RiskConfig) -> bool {
    w.minutes_close + w.minutes_medium >= config.v2_min_qualifying_minutes
        && w.trl.get() >= config.v2_min_trl
}

/// Scaling factor for a level; level 0 has none.
pub fn transmission_risk_value(trl: TransmissionRiskLevel, config: &RiskConfig) -> f64 {
    match trl.get() {
        0 => 0.0,
        l => config
            .trl_to_trv
            .get(usize::from(l) - 1)
            .copied()
            .unwrap_or(0.0),
    }
}

pub fn weighted_exposure_minutes(w: &ExposureWindow, config: &RiskConfig) -> f64 {
    w.minutes_close * config.w1
        + w.minutes_medium * config.w2
        + w.minutes_far * config.w3
        + config.w4
}

/// Score of one window in minutes, zero unless it qualifies.
pub fn encounter_score_v2(w: &ExposureWindow, config: &RiskConfig) -> f64 {
    if !window_qualifies(w, config) {
        return 0.0;
    }
    weighted_exposure_minutes(w, config) * transmission_risk_value(w.trl, config)
}

/// Sums the window scores of one day. An empty slice needs the day passed
/// separately, see [`daily_summary_for`].
pub fn daily_combined_risk(
    windows: &[ExposureWindow],
    config: &RiskConfig,
) -> Result<DailyRiskSummary> {
    let Some(first) = windows.first() else {
        return Err(Error::NoWindows);
    };
    daily_summary_for(first.day, windows, config)
}

pub fn daily_summary_for(
    day: NaiveDate,
    windows: &[ExposureWindow],
    config: &RiskConfig,
) -> Result<DailyRiskSummary> {
    if let Some(w) = windows.iter().find(|w| w.day != day) {
        return Err(Error::MixedDays {
            first: day,
            other: w.day,
        });
    }
    let mut total = 0.0;
    let mut contributing = 0;
    for w in windows {
        let score = encounter_score_v2(w, config);
        if score > 0.0 {
            contributing += 1;
        }
        total += score;
    }
    Ok(DailyRiskSummary {
        day,
        total_weighted_minutes: total,
        class: classify_day(total, config),
        contributing_windows: contributing,
    })
}

pub fn classify_day(total_weighted_minutes: f64, config: &RiskConfig) -> RiskClass {
    if total_weighted_minutes >= config.v2_high_threshold_minutes {
        RiskClass::High
    } else if total_weighted_minutes > config.v2_low_threshold_minutes {
        RiskClass::Low
    } else {
        RiskClass::None
    }
}

pub fn days_with_risk(summaries: &[DailyRiskSummary]) -> RiskDayCounts {
    summaries
        .iter()
        .fold(RiskDayCounts::default(), |mut acc, s| {
            match s.class {
                RiskClass::Low => acc.low_days += 1,
                RiskClass::High => acc.high_days += 1,
                RiskClass::None => {}
            }
            acc
        })
}
