//! The v2 exposure windows of Bob's 16th: two rides with Alice, two with
//! Charlie, each in its own 30-minute window.

use chrono::NaiveDate;
use cwa_risk::updated::{self, ExposureWindow};
use cwa_risk::{RiskConfig, TransmissionRiskLevel};

fn main() -> cwa_risk::Result<()> {
    let config = RiskConfig::default();
    let day = NaiveDate::from_ymd_opt(2021, 3, 16).unwrap();
    let window = |peer: &str, hour, close, medium, trl| ExposureWindow {
        observer: "bob".into(),
        peer_id: peer.into(),
        day,
        window_start: day.and_hms_opt(hour, 0, 0).unwrap(),
        minutes_close: close,
        minutes_medium: medium,
        minutes_far: 0.0,
        trl: TransmissionRiskLevel::new(trl).unwrap(),
    };
    let windows = [
        window("alice", 8, 10.0, 0.0, 8),
        window("alice", 18, 10.0, 0.0, 8),
        window("charlie", 8, 0.0, 10.0, 5),
        window("charlie", 18, 0.0, 10.0, 5),
    ];
    for w in &windows {
        println!(
            "{} {:02}:00  TRV {:.1}  score {}",
            w.peer_id,
            w.window_start.format("%H"),
            updated::transmission_risk_value(w.trl, &config),
            updated::encounter_score_v2(w, &config)
        );
    }
    let summary = updated::daily_combined_risk(&windows, &config)?;
    println!(
        "{}: {} min, {}",
        summary.day, summary.total_weighted_minutes, summary.class
    );
    Ok(())
}
