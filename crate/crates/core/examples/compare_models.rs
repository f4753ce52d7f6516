//! Plays the Alice/Bob/Charlie bus scenario through the protocol simulator
//! and prints both models' verdicts for Bob, per exposure day.

use cwa_risk::scenario::{self, Scenario};
use cwa_risk::ModelVersion;

const FIXTURE: &str = include_str!("../fixtures/alice-bob-charlie.json");

fn main() -> cwa_risk::Result<()> {
    let scenario = Scenario::from_json(FIXTURE).expect("bundled fixture parses");

    for model in [ModelVersion::V1, ModelVersion::V2] {
        let run = scenario::run(&scenario, model)?;
        for r in run.reports.iter().filter(|r| r.person.as_str() == "bob") {
            println!(
                "{model} {}",
                serde_json::to_string(&r.report).expect("report serializes")
            );
        }
    }

    println!("\nperson  evaluated   day         v1 TCR  v1      v2 sum  v2      agree");
    for row in scenario::compare(&scenario)? {
        println!(
            "{:<7} {} {} {:>6.1}  {:<7} {:>6.1}  {:<7} {}",
            row.person,
            row.evaluation_date,
            row.day,
            row.v1_tcr_minutes,
            row.v1_class,
            row.v2_weighted_minutes,
            row.v2_class,
            row.agree
        );
    }
    Ok(())
}
