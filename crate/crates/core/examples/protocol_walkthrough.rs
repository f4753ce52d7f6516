//! Day by day through the protocol: daily IDs, scans, key uploads, and what
//! Bob's phone shows each evening.

use chrono::NaiveDate;
use cwa_risk::contact_sim::{ContactEvent, ScanSettings};
use cwa_risk::enf::World;
use cwa_risk::{ModelVersion, PersonId, RiskConfig};

fn main() -> cwa_risk::Result<()> {
    let day = |d| NaiveDate::from_ymd_opt(2021, 3, d).unwrap();
    let mut world = World::new(7, RiskConfig::default(), ScanSettings::default(), day(1));
    world.install_app("alice".into(), day(1), true);
    world.install_app("bob".into(), day(1), true);
    for hour in [8, 18] {
        world.add_contact(ContactEvent {
            person_a: "bob".into(),
            person_b: "alice".into(),
            start: day(16).and_hms_opt(hour, 0, 0).unwrap(),
            duration_minutes: 10.0,
            distance_m: 1.0,
        });
    }
    world.schedule_upload("alice".into(), day(20), 0);

    let bob = PersonId::from("bob");
    while world.date() < day(21) {
        let log = world.advance_day()?;
        if log.samples_recorded + log.uploads_published == 0 {
            continue;
        }
        println!(
            "{}: {} scan samples, {} uploads, Bob's ID {}",
            log.date,
            log.samples_recorded,
            log.uploads_published,
            world.current_ids()[&"bob".into()].token
        );
        if let Some(report) = world.evaluate(&bob, ModelVersion::V2) {
            println!(
                "  Bob sees {}",
                serde_json::to_string(&report).expect("report serializes")
            );
        }
    }
    println!("keys on the server: {}", world.server().keys().len());
    Ok(())
}
