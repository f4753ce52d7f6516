//! Scenario files and end-to-end runs.
//!
//! A scenario is the ground truth: who has the app since when, who met whom,
//! and who tested positive. [`run`] plays it through the protocol simulator
//! and scores every device on each evaluation date; [`compare`] puts the two
//! model generations side by side per exposure day.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::basic::{self, CombinedRisk};
use crate::contact_sim::{ContactEvent, ScanSettings};
use crate::enf::{self, RiskReport, World};
use crate::error::{Error, Result};
use crate::model::{ModelVersion, PersonId, RiskClass, RiskConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonSpec {
    pub name: PersonId,
    /// No date means the person never installs the app.
    #[serde(default)]
    pub install_date: Option<NaiveDate>,
    #[serde(default = "yes")]
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    pub person: PersonId,
    pub test_date: NaiveDate,
    /// Days between the test and publishing the result.
    #[serde(default)]
    pub report_delay_days: i64,
    #[serde(default = "yes")]
    pub shares_result: bool,
}

impl TestSpec {
    pub fn report_date(&self) -> NaiveDate {
        self.test_date + Duration::days(self.report_delay_days)
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub people: Vec<PersonSpec>,
    #[serde(default)]
    pub contacts: Vec<ContactEvent>,
    #[serde(default)]
    pub tests: Vec<TestSpec>,
    #[serde(default)]
    pub evaluation_dates: Vec<NaiveDate>,
    /// Only the fields that differ from the defaults need to be given.
    #[serde(default)]
    pub config: RiskConfig,
    #[serde(default)]
    pub scan: ScanSettings,
}

impl Scenario {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Normalized JSON: every config field spelled out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Every violation, not just the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut names = BTreeSet::new();
        for (i, p) in self.people.iter().enumerate() {
            if p.name.as_str().is_empty() {
                errs.push(format!("people[{i}]: name is empty"));
            } else if !names.insert(p.name.as_str()) {
                errs.push(format!("people[{i}]: duplicate name {}", p.name));
            }
        }

        for (i, c) in self.contacts.iter().enumerate() {
            for who in [&c.person_a, &c.person_b] {
                if !names.contains(who.as_str()) {
                    errs.push(format!("contacts[{i}]: unknown person {who}"));
                }
            }
            if c.person_a == c.person_b {
                errs.push(format!("contacts[{i}]: {} meets themselves", c.person_a));
            }
            if !(c.duration_minutes.is_finite() && c.duration_minutes >= 0.0) {
                errs.push(format!("contacts[{i}]: duration_minutes must be >= 0"));
            }
            if !(c.distance_m.is_finite() && c.distance_m > 0.0) {
                errs.push(format!("contacts[{i}]: distance_m must be > 0"));
            }
        }

        for (i, t) in self.tests.iter().enumerate() {
            if !names.contains(t.person.as_str()) {
                errs.push(format!("tests[{i}]: unknown person {}", t.person));
            }
            if t.report_delay_days < 0 {
                errs.push(format!(
                    "tests[{i}]: report date {} is before test date {}",
                    t.report_date(),
                    t.test_date
                ));
            }
        }

        if let Err(e) = self.config.validate() {
            errs.extend(e.messages().into_iter().map(|m| format!("config.{m}")));
        }
        if let Err(e) = self.scan.validate() {
            errs.extend(e.messages().into_iter().map(|m| format!("scan: {m}")));
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(errs))
        }
    }

    fn first_day(&self) -> Option<NaiveDate> {
        let installs = self.people.iter().filter_map(|p| p.install_date);
        let contacts = self.contacts.iter().map(|c| c.start.date());
        let tests = self.tests.iter().map(|t| t.test_date);
        installs
            .chain(contacts)
            .chain(tests)
            .chain(self.evaluation_dates.iter().copied())
            .min()
    }

    /// A world with everything in the scenario queued, ready to advance.
    pub fn world(&self) -> Option<World> {
        let mut world = World::new(self.seed, self.config.clone(), self.scan, self.first_day()?);
        for p in &self.people {
            if let Some(day) = p.install_date {
                world.install_app(p.name.clone(), day, p.active);
            }
        }
        for c in &self.contacts {
            world.add_contact(c.clone());
        }
        for t in self.tests.iter().filter(|t| t.shares_result) {
            world.schedule_upload(t.person.clone(), t.test_date, t.report_delay_days as u32);
        }
        Some(world)
    }
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a JSON file; errors carry the path, line and column.
pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_file(path)?).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let scenario: Scenario = read_json_file(path.as_ref())?;
    scenario.validate()?;
    Ok(scenario)
}

/// Overlays the fields of a partial config JSON object onto `base`.
pub fn apply_config_overrides(base: &RiskConfig, overrides: &str) -> Result<RiskConfig> {
    let bad = |m: String| Error::InvalidScenario(vec![format!("config overrides: {m}")]);
    let patch: serde_json::Value =
        serde_json::from_str(overrides).map_err(|e| bad(e.to_string()))?;
    let serde_json::Value::Object(patch) = patch else {
        return Err(bad("expected a JSON object".into()));
    };
    let serde_json::Value::Object(mut merged) =
        serde_json::to_value(base).expect("config serializes")
    else {
        unreachable!("config serializes to an object");
    };
    merged.extend(patch);
    let config: RiskConfig = serde_json::from_value(serde_json::Value::Object(merged))
        .map_err(|e| bad(e.to_string()))?;
    config.validated()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceReport {
    pub person: PersonId,
    pub report: RiskReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: ModelVersion,
    pub reports: Vec<DeviceReport>,
}

/// Advances the world through each evaluation date in order and hands every
/// running device to `visit`.
fn for_each_evaluation(
    scenario: &Scenario,
    mut visit: impl FnMut(&World, &enf::Device, NaiveDate),
) -> Result<()> {
    scenario.validate()?;
    let Some(mut world) = scenario.world() else {
        return Ok(());
    };
    let dates: BTreeSet<NaiveDate> = scenario.evaluation_dates.iter().copied().collect();
    for date in dates {
        world.run_until(date)?;
        for device in world.devices() {
            if device.is_running_on(date) {
                visit(&world, device, date);
            }
        }
    }
    Ok(())
}

/// Scores every running device on every evaluation date.
pub fn run(scenario: &Scenario, model: ModelVersion) -> Result<RunReport> {
    let mut reports = Vec::new();
    for_each_evaluation(scenario, |world, device, _| {
        if let Some(report) = world.evaluate(&device.person, model) {
            reports.push(DeviceReport {
                person: device.person.clone(),
                report,
            });
        }
    })?;
    Ok(RunReport { model, reports })
}

/// Both models' verdict on one exposure day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub person: PersonId,
    pub evaluation_date: NaiveDate,
    pub day: NaiveDate,
    pub v1_tcr_minutes: f64,
    pub v1_class: RiskClass,
    pub v2_weighted_minutes: f64,
    pub v2_class: RiskClass,
    pub agree: bool,
}

/// Per exposure day, the v1 combined risk of that day's encounters next to
/// the v2 daily sum.
pub fn compare(scenario: &Scenario) -> Result<Vec<CompareRow>> {
    let mut rows = Vec::new();
    for_each_evaluation(scenario, |world, device, date| {
        let config = world.config();
        let interval = world.scan_settings().scan_interval_minutes;
        let mut v1_by_day: BTreeMap<NaiveDate, Vec<basic::EncounterAggregate>> = BTreeMap::new();
        for e in enf::matched_encounters(device, world.server(), date, config, interval) {
            v1_by_day.entry(e.day).or_default().push(e);
        }
        let windows = enf::matched_windows(device, world.server(), date, config, interval);
        let v2_by_day: BTreeMap<NaiveDate, _> = enf::summarize_days(&windows, config)
            .into_iter()
            .map(|s| (s.day, s))
            .collect();

        let days: BTreeSet<NaiveDate> = v1_by_day.keys().chain(v2_by_day.keys()).copied().collect();
        for day in days {
            let v1 = v1_by_day
                .get(&day)
                .map_or(CombinedRisk::NONE, |es| basic::combined_risk(es, config));
            let (v2_minutes, v2_class) = v2_by_day.get(&day).map_or((0.0, RiskClass::None), |s| {
                (s.total_weighted_minutes, s.class)
            });
            rows.push(CompareRow {
                person: device.person.clone(),
                evaluation_date: date,
                day,
                v1_tcr_minutes: v1.tcr_minutes,
                v1_class: v1.class,
                v2_weighted_minutes: v2_minutes,
                v2_class,
                agree: v1.class == v2_class,
            });
        }
    })?;
    Ok(rows)
}
