//! Decentralized exposure notification, simulated one day at a time.
//!
//! Devices broadcast a fresh anonymous ID every day and keep what they
//! observe for 14 days. A person who tests positive and agrees to share
//! publishes the IDs of the 14 days before the report; every device downloads
//! the published keys and scores its own matches locally.
//!
//! A published key carries the transmission risk level of its day, fixed at
//! upload from the days between that day and the report. The days-since-
//! exposure horizon is applied when a device evaluates.

use std::collections::{BTreeMap, HashMap};

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basic::{self, CombinedRisk, EncounterAggregate};
use crate::contact_sim::{self, Beacon, BeaconDirectory, ContactEvent, ScanSample, ScanSettings};
use crate::error::{Error, Result};
use crate::model::{
    trl_from_days_since_exposure, DaysSinceExposure, DeviceId, IdToken, ModelVersion, PersonId,
    RiskConfig, TransmissionRiskLevel,
};
use crate::seed::derive_seed;
use crate::updated::{self, DailyRiskSummary, ExposureWindow, RiskDayCounts};

/// Observations and published keys cover this many days.
pub const RETENTION_DAYS: i64 = 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub device_id: DeviceId,
    pub person: PersonId,
    pub install_date: NaiveDate,
    pub active: bool,
    observation_store: Vec<ScanSample>,
}

impl Device {
    pub fn new(
        device_id: DeviceId,
        person: PersonId,
        install_date: NaiveDate,
        active: bool,
    ) -> Self {
        Self {
            device_id,
            person,
            install_date,
            active,
            observation_store: Vec::new(),
        }
    }

    pub fn observations(&self) -> &[ScanSample] {
        &self.observation_store
    }

    /// Stores samples taken by this device on or after its install day.
    pub fn record(&mut self, samples: impl IntoIterator<Item = ScanSample>) -> usize {
        let before = self.observation_store.len();
        let (id, installed) = (&self.device_id, self.install_date);
        self.observation_store.extend(
            samples
                .into_iter()
                .filter(|s| &s.observer == id && s.day() >= installed),
        );
        self.observation_store.len() - before
    }

    /// Drops observations more than [`RETENTION_DAYS`] before `today`.
    pub fn purge(&mut self, today: NaiveDate) -> usize {
        let before = self.observation_store.len();
        self.observation_store
            .retain(|s| (today - s.day()).num_days() <= RETENTION_DAYS);
        before - self.observation_store.len()
    }

    pub fn is_running_on(&self, day: NaiveDate) -> bool {
        self.active && day >= self.install_date
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DailyId {
    pub token: IdToken,
    pub device_id: DeviceId,
    pub day: NaiveDate,
}

/// The anonymous ID `device` broadcasts on `day`.
///
/// A keyed hash of (seed, device, day): stable across calls, distinct across
/// devices and days.
pub fn generate_daily_id(device: &Device, day: NaiveDate, seed: u64) -> Result<DailyId> {
    if !device.active {
        return Err(Error::Inactive(device.device_id.to_string()));
    }
    if day < device.install_date {
        return Err(Error::NotInstalled {
            device: device.device_id.to_string(),
            day,
            installed: device.install_date,
        });
    }
    let digest = Sha256::new()
        .chain_update(b"daily-id\0")
        .chain_update(seed.to_le_bytes())
        .chain_update(device.device_id.as_str().as_bytes())
        .chain_update([0])
        .chain_update(day.to_string().as_bytes())
        .finalize();
    let token: String = digest[..16].iter().map(|b| format!("{b:02x}")).collect();
    Ok(DailyId {
        token: IdToken(token),
        device_id: device.device_id.clone(),
        day,
    })
}

/// One published diagnosis key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublishedKey {
    pub token: IdToken,
    pub day: NaiveDate,
    pub trl: TransmissionRiskLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisUpload {
    pub device_id: DeviceId,
    pub test_date: NaiveDate,
    pub report_date: NaiveDate,
    pub published_ids: Vec<PublishedKey>,
}

/// Append-only store of diagnosis uploads.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KeyServer {
    published: Vec<DiagnosisUpload>,
}

impl KeyServer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&mut self, upload: DiagnosisUpload) {
        self.published.push(upload);
    }

    pub fn uploads(&self) -> &[DiagnosisUpload] {
        &self.published
    }

    /// Every published key by token.
    pub fn keys(&self) -> HashMap<&IdToken, &PublishedKey> {
        self.published
            .iter()
            .flat_map(|u| &u.published_ids)
            .map(|k| (&k.token, k))
            .collect()
    }
}

/// Publishes the device's IDs for the 14 days before the report date, starting
/// no earlier than the install date.
pub fn upload_keys(
    device: &Device,
    test_date: NaiveDate,
    report_delay_days: u32,
    seed: u64,
    config: &RiskConfig,
    server: &mut KeyServer,
) -> Result<DiagnosisUpload> {
    if !device.active {
        return Err(Error::Inactive(device.device_id.to_string()));
    }
    let report_date = test_date + Duration::days(i64::from(report_delay_days));
    let first = (report_date - Duration::days(RETENTION_DAYS)).max(device.install_date);
    let published_ids = first
        .iter_days()
        .take_while(|d| *d < report_date)
        .map(|day| {
            let id = generate_daily_id(device, day, seed)?;
            let trl =
                trl_from_days_since_exposure(DaysSinceExposure::between(day, report_date), config);
            Ok(PublishedKey {
                token: id.token,
                day,
                trl,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let upload = DiagnosisUpload {
        device_id: device.device_id.clone(),
        test_date,
        report_date,
        published_ids,
    };
    server.publish(upload.clone());
    Ok(upload)
}

/// What a device shows its user. Holds no peer IDs and nothing finer than a
/// day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum RiskReport {
    V1 {
        evaluation_date: NaiveDate,
        #[serde(flatten)]
        combined: CombinedRisk,
    },
    V2 {
        evaluation_date: NaiveDate,
        days: Vec<DailyRiskSummary>,
        #[serde(flatten)]
        counts: RiskDayCounts,
    },
}

impl RiskReport {
    pub fn evaluation_date(&self) -> NaiveDate {
        match self {
            RiskReport::V1 {
                evaluation_date, ..
            }
            | RiskReport::V2 {
                evaluation_date, ..
            } => *evaluation_date,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            RiskReport::V1 { combined, .. } => {
                combined.weighted_minutes == 0.0 && combined.r_max.0 == 0
            }
            RiskReport::V2 { days, .. } => days.is_empty(),
        }
    }
}

fn matched_samples<'a>(
    device: &'a Device,
    keys: &'a HashMap<&IdToken, &PublishedKey>,
    evaluation_date: NaiveDate,
    config: &'a RiskConfig,
) -> Vec<ScanSample> {
    device
        .observations()
        .iter()
        .filter(|s| keys.contains_key(&s.observed))
        .filter(|s| s.day() <= evaluation_date)
        .filter(|s| basic::delta_de(DaysSinceExposure::between(s.day(), evaluation_date), config))
        .cloned()
        .collect()
}

fn key_trl<'a>(
    keys: &'a HashMap<&IdToken, &PublishedKey>,
) -> impl Fn(&IdToken, NaiveDate) -> TransmissionRiskLevel + 'a {
    move |token, _| {
        keys.get(token)
            .map_or(TransmissionRiskLevel::ZERO, |k| k.trl)
    }
}

/// The device's matched encounters, one per (published ID, day). Exposes peer
/// IDs; not part of any user-facing report.
pub fn matched_encounters(
    device: &Device,
    server: &KeyServer,
    evaluation_date: NaiveDate,
    config: &RiskConfig,
    scan_interval_minutes: f64,
) -> Vec<EncounterAggregate> {
    let keys = server.keys();
    let samples = matched_samples(device, &keys, evaluation_date, config);
    contact_sim::aggregate_daily(
        &samples,
        evaluation_date,
        scan_interval_minutes,
        config,
        key_trl(&keys),
    )
}

/// The device's matched exposure windows.
pub fn matched_windows(
    device: &Device,
    server: &KeyServer,
    evaluation_date: NaiveDate,
    config: &RiskConfig,
    scan_interval_minutes: f64,
) -> Vec<ExposureWindow> {
    let keys = server.keys();
    let samples = matched_samples(device, &keys, evaluation_date, config);
    contact_sim::build_windows(&samples, scan_interval_minutes, config, key_trl(&keys))
}

/// On-device evaluation against everything the server has published.
pub fn match_and_score(
    device: &Device,
    server: &KeyServer,
    evaluation_date: NaiveDate,
    model: ModelVersion,
    config: &RiskConfig,
    scan_interval_minutes: f64,
) -> RiskReport {
    match model {
        ModelVersion::V1 => {
            let encounters = matched_encounters(
                device,
                server,
                evaluation_date,
                config,
                scan_interval_minutes,
            );
            RiskReport::V1 {
                evaluation_date,
                combined: basic::combined_risk(&encounters, config),
            }
        }
        ModelVersion::V2 => {
            let windows = matched_windows(
                device,
                server,
                evaluation_date,
                config,
                scan_interval_minutes,
            );
            let days = summarize_days(&windows, config);
            RiskReport::V2 {
                evaluation_date,
                counts: updated::days_with_risk(&days),
                days,
            }
        }
    }
}

/// One summary per day that has any window, in day order.
pub fn summarize_days(windows: &[ExposureWindow], config: &RiskConfig) -> Vec<DailyRiskSummary> {
    let mut by_day: BTreeMap<NaiveDate, Vec<ExposureWindow>> = BTreeMap::new();
    for w in windows {
        by_day.entry(w.day).or_default().push(w.clone());
    }
    by_day
        .into_iter()
        .map(|(day, ws)| updated::daily_summary_for(day, &ws, config).expect("grouped by day"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct PendingUpload {
    person: PersonId,
    test_date: NaiveDate,
    report_delay_days: u32,
}

/// What happened during one simulated day.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DayLog {
    pub date: NaiveDate,
    pub samples_recorded: usize,
    pub observations_purged: usize,
    pub uploads_published: usize,
}

/// The simulated world: devices, a contact timeline, scheduled uploads, and
/// the key server, advanced one day at a time.
///
/// `date()` is the last fully simulated day; evaluations see everything that
/// happened up to and including it.
#[derive(Debug, Clone)]
pub struct World {
    seed: u64,
    config: RiskConfig,
    scan: ScanSettings,
    date: NaiveDate,
    devices: BTreeMap<PersonId, Device>,
    contacts: BTreeMap<NaiveDate, Vec<ContactEvent>>,
    uploads: BTreeMap<NaiveDate, Vec<PendingUpload>>,
    server: KeyServer,
    current_ids: BTreeMap<DeviceId, DailyId>,
}

impl World {
    /// An empty world whose first simulated day will be `first_day`.
    pub fn new(seed: u64, config: RiskConfig, scan: ScanSettings, first_day: NaiveDate) -> Self {
        Self {
            seed,
            config,
            scan,
            date: first_day.pred_opt().expect("date in range"),
            devices: BTreeMap::new(),
            contacts: BTreeMap::new(),
            uploads: BTreeMap::new(),
            server: KeyServer::new(),
            current_ids: BTreeMap::new(),
        }
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn config(&self) -> &RiskConfig {
        &self.config
    }

    pub fn scan_settings(&self) -> &ScanSettings {
        &self.scan
    }

    pub fn server(&self) -> &KeyServer {
        &self.server
    }

    pub fn device(&self, person: &PersonId) -> Option<&Device> {
        self.devices.get(person)
    }

    pub fn devices(&self) -> impl Iterator<Item = &Device> {
        self.devices.values()
    }

    /// IDs broadcast today by every running device.
    pub fn current_ids(&self) -> &BTreeMap<DeviceId, DailyId> {
        &self.current_ids
    }

    /// Gives `person` a phone with the app. Device IDs equal person names.
    pub fn install_app(&mut self, person: PersonId, install_date: NaiveDate, active: bool) {
        let device = Device::new(
            DeviceId::new(person.as_str()),
            person.clone(),
            install_date,
            active,
        );
        self.devices.insert(person, device);
    }

    /// Queues a contact. A contact that runs past midnight is split so each
    /// day only records its own part.
    pub fn add_contact(&mut self, event: ContactEvent) {
        let end = event.end();
        let mut start = event.start;
        while start < end {
            let midnight = (start.date() + Duration::days(1)).and_time(NaiveTime::MIN);
            let part_end = end.min(midnight);
            let ms = (part_end - start).num_milliseconds();
            self.contacts
                .entry(start.date())
                .or_default()
                .push(ContactEvent {
                    start,
                    duration_minutes: ms as f64 / 60_000.0,
                    ..event.clone()
                });
            start = part_end;
        }
    }

    /// Queues a key upload on `test_date + report_delay_days`. Ignored at that
    /// point if the person has no running app.
    pub fn schedule_upload(
        &mut self,
        person: PersonId,
        test_date: NaiveDate,
        report_delay_days: u32,
    ) {
        let report_date = test_date + Duration::days(i64::from(report_delay_days));
        self.uploads
            .entry(report_date)
            .or_default()
            .push(PendingUpload {
                person,
                test_date,
                report_delay_days,
            });
    }

    /// Simulates the next day: rotate IDs, purge stale observations, record the
    /// day's contacts, then publish the day's uploads.
    pub fn advance_day(&mut self) -> Result<DayLog> {
        self.date = self.date.succ_opt().expect("date in range");
        let today = self.date;
        let mut log = DayLog {
            date: today,
            ..DayLog::default()
        };

        self.current_ids.clear();
        for device in self.devices.values() {
            if device.is_running_on(today) {
                let id = generate_daily_id(device, today, self.seed)?;
                self.current_ids.insert(device.device_id.clone(), id);
            }
        }

        for device in self.devices.values_mut() {
            log.observations_purged += device.purge(today);
        }

        if let Some(events) = self.contacts.get(&today) {
            let seed = derive_seed(self.seed, &format!("scans/{today}"));
            let samples = contact_sim::simulate_scans(events, &*self, &self.scan, seed);
            let mut by_observer: BTreeMap<DeviceId, Vec<ScanSample>> = BTreeMap::new();
            for s in samples {
                by_observer.entry(s.observer.clone()).or_default().push(s);
            }
            for device in self.devices.values_mut() {
                if let Some(samples) = by_observer.remove(&device.device_id) {
                    log.samples_recorded += device.record(samples);
                }
            }
        }

        if let Some(due) = self.uploads.get(&today) {
            for pending in due {
                let Some(device) = self.devices.get(&pending.person) else {
                    continue;
                };
                if !device.is_running_on(pending.test_date) {
                    continue;
                }
                upload_keys(
                    device,
                    pending.test_date,
                    pending.report_delay_days,
                    self.seed,
                    &self.config,
                    &mut self.server,
                )?;
                log.uploads_published += 1;
            }
        }

        Ok(log)
    }

    /// Advances until `date()` equals `day`.
    pub fn run_until(&mut self, day: NaiveDate) -> Result<Vec<DayLog>> {
        let mut logs = Vec::new();
        while self.date < day {
            logs.push(self.advance_day()?);
        }
        Ok(logs)
    }

    /// Evaluates one person's device at the end of the current day.
    pub fn evaluate(&self, person: &PersonId, model: ModelVersion) -> Option<RiskReport> {
        let device = self.devices.get(person)?;
        if !device.is_running_on(self.date) {
            return None;
        }
        Some(match_and_score(
            device,
            &self.server,
            self.date,
            model,
            &self.config,
            self.scan.scan_interval_minutes,
        ))
    }
}

impl BeaconDirectory for World {
    fn beacon(&self, person: &PersonId, at: NaiveDateTime) -> Option<Beacon> {
        let device = self.devices.get(person)?;
        let day = at.date();
        if !device.is_running_on(day) {
            return None;
        }
        let id = match self.current_ids.get(&device.device_id) {
            Some(id) if id.day == day => id.clone(),
            _ => generate_daily_id(device, day, self.seed).ok()?,
        };
        Some(Beacon {
            device: device.device_id.clone(),
            id: id.token,
        })
    }
}
