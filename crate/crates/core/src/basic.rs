//! The v1.7 risk model: a gated per-encounter Total Risk Score, minimum-risk
//! filtering, and the Total Combined Risk across all encounters.
//!
//! The per-encounter score is `10 * TR` when the duration, attenuation and
//! days-since-exposure gates all pass. The combined risk is a weighted
//! exposure time scaled by the highest surviving score over the average risk
//! score:
//!
//! ```text
//! TCR = (t_close*w1 + t_medium*w2 + t_far*w3 + w4) * R_max / ARS
//! ```

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{
    trl_from_days_since_exposure, AttenuationDb, DaysSinceExposure, DeviceId, ExposureSumScope,
    IdToken, RiskClass, RiskConfig, TransmissionRiskLevel, TrsFormula,
};

/// Everything one device observed of one peer ID on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterAggregate {
    pub observer: DeviceId,
    pub peer_id: IdToken,
    pub day: NaiveDate,
    pub exposure_minutes_close: f64,
    pub exposure_minutes_medium: f64,
    pub exposure_minutes_far: f64,
    pub min_attenuation: AttenuationDb,
    pub days_since_exposure: DaysSinceExposure,
    pub trl: TransmissionRiskLevel,
}

impl EncounterAggregate {
    /// Minutes that count toward the duration gate: everything at or below
    /// the attenuation gate.
    pub fn gated_minutes(&self) -> f64 {
        self.exposure_minutes_close + self.exposure_minutes_medium
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TotalRiskScore(pub u32);

impl TotalRiskScore {
    pub fn score(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedRisk {
    pub tcr_minutes: f64,
    pub r_max: TotalRiskScore,
    pub weighted_minutes: f64,
    pub class: RiskClass,
}

impl CombinedRisk {
    pub const NONE: Self = Self {
        tcr_minutes: 0.0,
        r_max: TotalRiskScore(0),
        weighted_minutes: 0.0,
        class: RiskClass::None,
    };
}

/// Duration indicator: set only once exposure exceeds the threshold.
pub fn delta_ed(ed_minutes: f64, config: &RiskConfig) -> bool {
    ed_minutes > config.ed_threshold_minutes
}

/// Attenuation gate, inclusive at the threshold.
pub fn delta_sa(sa: AttenuationDb, config: &RiskConfig) -> bool {
    sa.value() <= config.sa_gate_db
}

pub fn delta_de(de: DaysSinceExposure, config: &RiskConfig) -> bool {
    de.days() <= config.de_cutoff_days
}

/// Score for already-evaluated gates. Shared by [`total_risk_score`] and the
/// score-set enumeration.
pub fn score_from_gates(
    trl: TransmissionRiskLevel,
    ed_pass: bool,
    sa_pass: bool,
    de_pass: bool,
    config: &RiskConfig,
) -> TotalRiskScore {
    let tr = u32::from(trl.get());
    let score = match config.trs_formula {
        TrsFormula::Gated => {
            if ed_pass && sa_pass && de_pass {
                10 * tr
            } else {
                0
            }
        }
        TrsFormula::LiteralWeights => {
            let ed = u32::from(ed_pass);
            let sa = if sa_pass { config.delta_sa_value } else { 0 };
            let de = if de_pass { config.delta_de_value } else { 0 };
            10 * ed * sa * de * tr
        }
    };
    TotalRiskScore(score)
}

pub fn total_risk_score(enc: &EncounterAggregate, config: &RiskConfig) -> TotalRiskScore {
    score_from_gates(
        enc.trl,
        delta_ed(enc.gated_minutes(), config),
        delta_sa(enc.min_attenuation, config),
        delta_de(enc.days_since_exposure, config),
        config,
    )
}

/// Drops scores below the minimum risk score, keeping order.
pub fn filter_mrs(scores: &[TotalRiskScore], config: &RiskConfig) -> Vec<TotalRiskScore> {
    scores
        .iter()
        .copied()
        .filter(|s| s.0 >= config.mrs)
        .collect()
}

fn weighted_sum(encounters: &[&EncounterAggregate], config: &RiskConfig) -> f64 {
    if encounters.is_empty() {
        return 0.0;
    }
    let (t1, t2, t3) = encounters.iter().fold((0.0, 0.0, 0.0), |(a, b, c), e| {
        (
            a + e.exposure_minutes_close,
            b + e.exposure_minutes_medium,
            c + e.exposure_minutes_far,
        )
    });
    t1 * config.w1 + t2 * config.w2 + t3 * config.w3 + config.w4
}

/// Total Combined Risk over every encounter a device matched.
///
/// `R_max` is the highest score that survives the minimum risk score. Which
/// encounters feed the minute sums is set by `exposure_sum_scope`; by default
/// every encounter inside the days-since-exposure horizon counts.
pub fn combined_risk(encounters: &[EncounterAggregate], config: &RiskConfig) -> CombinedRisk {
    let in_horizon: Vec<&EncounterAggregate> = encounters
        .iter()
        .filter(|e| delta_de(e.days_since_exposure, config))
        .collect();

    let scored: Vec<(&EncounterAggregate, TotalRiskScore)> = in_horizon
        .iter()
        .map(|&e| (e, total_risk_score(e, config)))
        .collect();
    let surviving: Vec<&EncounterAggregate> = scored
        .iter()
        .filter(|(_, s)| s.0 >= config.mrs)
        .map(|&(e, _)| e)
        .collect();
    let r_max = scored
        .iter()
        .filter(|(_, s)| s.0 >= config.mrs)
        .map(|&(_, s)| s)
        .max()
        .unwrap_or_default();

    let weighted_minutes = match config.exposure_sum_scope {
        ExposureSumScope::AllInHorizon => weighted_sum(&in_horizon, config),
        ExposureSumScope::MrsSurviving => weighted_sum(&surviving, config),
    };
    let tcr_minutes = weighted_minutes * f64::from(r_max.0) / f64::from(config.ars);

    CombinedRisk {
        tcr_minutes,
        r_max,
        weighted_minutes,
        class: classify_v1(tcr_minutes, config),
    }
}

pub fn classify_v1(tcr_minutes: f64, config: &RiskConfig) -> RiskClass {
    if tcr_minutes <= 0.0 {
        RiskClass::None
    } else if tcr_minutes >= config.v1_high_threshold_minutes {
        RiskClass::High
    } else {
        RiskClass::Low
    }
}

/// Simplified combined risk: the highest transmission risk relative to the
/// average, times close minutes plus half the medium minutes.
///
/// Matches [`combined_risk`] exactly under the default weights whenever the
/// encounter with the highest level passes every gate and the minimum risk
/// score.
pub fn approx_tcr(encounters: &[EncounterAggregate], config: &RiskConfig) -> f64 {
    let in_horizon = encounters
        .iter()
        .filter(|e| delta_de(e.days_since_exposure, config));
    let mut max_tr = 0u32;
    let mut minutes = 0.0;
    for e in in_horizon {
        max_tr = max_tr.max(u32::from(e.trl.get()));
        minutes += e.exposure_minutes_close + e.exposure_minutes_medium / 2.0;
    }
    if max_tr == 0 {
        return 0.0;
    }
    // 10 * TR / ARS is TR / 5 at the default ARS of 50.
    minutes * f64::from(10 * max_tr) / f64::from(config.ars)
}

/// Every score the per-encounter formula can produce, by brute force over
/// days since exposure 0..=20 and both outcomes of the duration and
/// attenuation gates.
pub fn enumerate_possible_trs(config: &RiskConfig) -> BTreeSet<u32> {
    let mut scores = BTreeSet::new();
    for days in 0..=20 {
        let de = DaysSinceExposure::new(days);
        let trl = trl_from_days_since_exposure(de, config);
        let de_pass = delta_de(de, config);
        for ed_pass in [false, true] {
            for sa_pass in [false, true] {
                scores.insert(score_from_gates(trl, ed_pass, sa_pass, de_pass, config).0);
            }
        }
    }
    scores
}
