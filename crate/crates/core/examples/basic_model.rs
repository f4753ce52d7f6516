//! The v1 score for Bob's bus rides with Alice, and the combined risk of
//! the 20th.

use chrono::NaiveDate;
use cwa_risk::basic::{self, EncounterAggregate};
use cwa_risk::{AttenuationDb, DaysSinceExposure, RiskConfig, TransmissionRiskLevel};

fn ride(day: u32, close_minutes: f64, de: u32, trl: u8) -> EncounterAggregate {
    EncounterAggregate {
        observer: "bob".into(),
        peer_id: format!("alice-{day}").as_str().into(),
        day: NaiveDate::from_ymd_opt(2021, 3, day).unwrap(),
        exposure_minutes_close: close_minutes,
        exposure_minutes_medium: 0.0,
        exposure_minutes_far: 0.0,
        min_attenuation: AttenuationDb::new(50.0).unwrap(),
        days_since_exposure: DaysSinceExposure::new(de),
        trl: TransmissionRiskLevel::new(trl).unwrap(),
    }
}

fn main() {
    let config = RiskConfig::default();
    // Two 10-minute rides on the 16th, one on the 9th.
    let encounters = [ride(16, 20.0, 4, 8), ride(9, 10.0, 11, 1)];
    for e in &encounters {
        println!(
            "TRS({}) = {}",
            e.day,
            basic::total_risk_score(e, &config).score()
        );
    }
    let risk = basic::combined_risk(&encounters, &config);
    println!(
        "R_max {} weighted {} min -> TCR {} min, {}",
        risk.r_max.score(),
        risk.weighted_minutes,
        risk.tcr_minutes,
        risk.class
    );
    println!(
        "approximation: {} min",
        basic::approx_tcr(&encounters, &config)
    );
}
