//! Turns ground-truth contacts into the Bluetooth scan samples a phone would
//! record, and folds samples back into per-day encounters (v1) and 30-minute
//! exposure windows (v2).
//!
//! Every device scans on a fixed cadence with a per-device phase drawn from
//! the seed. A contact is seen only at scan ticks that fall inside it, so a
//! contact shorter than the scan interval can be missed entirely. Each sample
//! is credited with one full scan interval of exposure.

use std::collections::BTreeMap;

use chrono::{NaiveDate, NaiveDateTime};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::basic::EncounterAggregate;
use crate::error::{Error, Result};
use crate::model::{
    trl_from_days_since_exposure, AttenuationDb, DaysSinceExposure, DeviceId, DistanceClass,
    IdToken, PersonId, RiskConfig, TransmissionRiskLevel,
};
use crate::seed;
use crate::updated::ExposureWindow;

const MS_PER_MINUTE: f64 = 60_000.0;

/// Two people within Bluetooth range of each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactEvent {
    pub person_a: PersonId,
    pub person_b: PersonId,
    pub start: NaiveDateTime,
    pub duration_minutes: f64,
    pub distance_m: f64,
}

impl ContactEvent {
    pub fn end(&self) -> NaiveDateTime {
        self.start + chrono::Duration::milliseconds(minutes_to_ms(self.duration_minutes))
    }
}

/// One observation of a broadcast ID.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub observer: DeviceId,
    pub observed: IdToken,
    pub timestamp: NaiveDateTime,
    pub attenuation: AttenuationDb,
}

impl ScanSample {
    pub fn day(&self) -> NaiveDate {
        self.timestamp.date()
    }
}

/// Log-distance path loss: `reference + 10 * exponent * log10(d)` plus
/// optional Gaussian noise.
///
/// The defaults put 1 m at 50 dB (close) and 2 m at about 59 dB (medium).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossModel {
    pub reference_db_at_1m: f64,
    pub path_loss_exponent: f64,
    pub noise_sigma_db: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            reference_db_at_1m: 50.0,
            path_loss_exponent: 3.0,
            noise_sigma_db: 0.0,
        }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.reference_db_at_1m.is_finite() && self.reference_db_at_1m > 0.0) {
            errs.push("path_loss.reference_db_at_1m must be > 0".to_string());
        }
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 0.0) {
            errs.push("path_loss.path_loss_exponent must be > 0".to_string());
        }
        if !(self.noise_sigma_db.is_finite() && self.noise_sigma_db >= 0.0) {
            errs.push("path_loss.noise_sigma_db must be >= 0".to_string());
        }
        errs
    }
}

/// Scan cadence and radio model shared by all devices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSettings {
    pub scan_interval_minutes: f64,
    pub path_loss: PathLossModel,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            scan_interval_minutes: 5.0,
            path_loss: PathLossModel::default(),
        }
    }
}

impl ScanSettings {
    pub fn validate(&self) -> Result<()> {
        let mut errs = self.path_loss.validate();
        if !(self.scan_interval_minutes.is_finite() && self.scan_interval_minutes > 0.0) {
            errs.push("scan_interval_minutes must be > 0".to_string());
        } else if minutes_to_ms(self.scan_interval_minutes) == 0 {
            errs.push("scan_interval_minutes must be at least one millisecond".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(errs))
        }
    }
}

/// The device a person carries and the ID it broadcasts at a given instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Beacon {
    pub device: DeviceId,
    pub id: IdToken,
}

/// Answers which people carry a running app, and what they broadcast.
pub trait BeaconDirectory {
    /// `None` when the person has no active, installed app at `at`.
    fn beacon(&self, person: &PersonId, at: NaiveDateTime) -> Option<Beacon>;
}

pub fn attenuation_from_distance<R: Rng + ?Sized>(
    distance_m: f64,
    model: &PathLossModel,
    rng: &mut R,
) -> AttenuationDb {
    let mut db = model.reference_db_at_1m + 10.0 * model.path_loss_exponent * distance_m.log10();
    if model.noise_sigma_db > 0.0 {
        let noise = Normal::new(0.0, model.noise_sigma_db).expect("sigma validated");
        db += noise.sample(rng);
    }
    AttenuationDb::new(db.max(0.0)).unwrap_or_default()
}

pub(crate) fn minutes_to_ms(minutes: f64) -> i64 {
    (minutes * MS_PER_MINUTE).round() as i64
}

fn epoch_ms(at: NaiveDateTime) -> i64 {
    at.and_utc().timestamp_millis()
}

fn from_epoch_ms(ms: i64) -> NaiveDateTime {
    chrono::DateTime::from_timestamp_millis(ms)
        .expect("timestamp in range")
        .naive_utc()
}

/// Scan instants `phase + k * interval` in `[start, end)`, all in
/// milliseconds on a common clock.
pub fn scan_ticks(
    start_ms: i64,
    end_ms: i64,
    interval_ms: i64,
    phase_ms: i64,
) -> impl Iterator<Item = i64> {
    debug_assert!(interval_ms > 0);
    let k = (start_ms - phase_ms).div_euclid(interval_ms);
    let mut first = phase_ms + k * interval_ms;
    if first < start_ms {
        first += interval_ms;
    }
    (0..)
        .map(move |i| first + i * interval_ms)
        .take_while(move |&t| t < end_ms)
}

/// The scan phase of a device, uniform in `[0, interval)`.
pub fn scan_phase_ms(seed: u64, device: &DeviceId, interval_ms: i64) -> i64 {
    seed::rng_for(seed, &format!("scan-phase/{device}")).random_range(0..interval_ms)
}

/// Samples every app-carrying participant records during the given contacts.
///
/// Each direction is scanned on the observer's own cadence. A device seeing
/// the same ID twice at one tick (overlapping contacts) keeps the strongest
/// signal. Output is sorted by observer, time, then observed ID.
pub fn simulate_scans<D: BeaconDirectory + ?Sized>(
    events: &[ContactEvent],
    directory: &D,
    settings: &ScanSettings,
    seed: u64,
) -> Vec<ScanSample> {
    let interval_ms = minutes_to_ms(settings.scan_interval_minutes);
    let mut noise_rng = seed::rng_for(seed, "attenuation-noise");
    let mut phases: BTreeMap<DeviceId, i64> = BTreeMap::new();
    let mut seen: BTreeMap<(DeviceId, i64, IdToken), AttenuationDb> = BTreeMap::new();

    for event in events {
        if event.duration_minutes <= 0.0 {
            continue;
        }
        let start = epoch_ms(event.start);
        let end = epoch_ms(event.end());
        for (observer, observed) in [
            (&event.person_a, &event.person_b),
            (&event.person_b, &event.person_a),
        ] {
            // The observer's device may change across the contact only if it
            // was installed mid-contact; look it up at the first instant.
            let Some(first_beacon) = directory.beacon(observer, event.start).or_else(|| {
                directory.beacon(observer, event.end() - chrono::Duration::milliseconds(1))
            }) else {
                continue;
            };
            let phase = *phases
                .entry(first_beacon.device.clone())
                .or_insert_with(|| scan_phase_ms(seed, &first_beacon.device, interval_ms));
            for tick in scan_ticks(start, end, interval_ms, phase) {
                let at = from_epoch_ms(tick);
                let (Some(me), Some(peer)) = (
                    directory.beacon(observer, at),
                    directory.beacon(observed, at),
                ) else {
                    continue;
                };
                let db = attenuation_from_distance(
                    event.distance_m,
                    &settings.path_loss,
                    &mut noise_rng,
                );
                seen.entry((me.device, tick, peer.id))
                    .and_modify(|old| {
                        if db < *old {
                            *old = db;
                        }
                    })
                    .or_insert(db);
            }
        }
    }

    seen.into_iter()
        .map(|((observer, tick, observed), attenuation)| ScanSample {
            observer,
            observed,
            timestamp: from_epoch_ms(tick),
            attenuation,
        })
        .collect()
}

/// Transmission risk level derived from the days between the encounter and a
/// fixed reference day.
pub fn trl_relative_to(
    reference: NaiveDate,
    config: &RiskConfig,
) -> impl Fn(&IdToken, NaiveDate) -> TransmissionRiskLevel + '_ {
    move |_, day| trl_from_days_since_exposure(DaysSinceExposure::between(day, reference), config)
}

#[derive(Default)]
struct MinuteBuckets {
    close: f64,
    medium: f64,
    far: f64,
}

impl MinuteBuckets {
    fn add(&mut self, class: DistanceClass, minutes: f64) {
        match class {
            DistanceClass::Close => self.close += minutes,
            DistanceClass::Medium => self.medium += minutes,
            DistanceClass::Far => self.far += minutes,
        }
    }

    fn total(&self) -> f64 {
        self.close + self.medium + self.far
    }
}

/// One aggregate per (observer, observed ID, day).
///
/// `trl_of` supplies the peer's transmission risk level for an ID and day.
pub fn aggregate_daily<F>(
    samples: &[ScanSample],
    evaluation_date: NaiveDate,
    scan_interval_minutes: f64,
    config: &RiskConfig,
    trl_of: F,
) -> Vec<EncounterAggregate>
where
    F: Fn(&IdToken, NaiveDate) -> TransmissionRiskLevel,
{
    let mut groups: BTreeMap<(DeviceId, IdToken, NaiveDate), (MinuteBuckets, AttenuationDb)> =
        BTreeMap::new();
    for s in samples {
        let (buckets, min_db) = groups
            .entry((s.observer.clone(), s.observed.clone(), s.day()))
            .or_insert_with(|| (MinuteBuckets::default(), s.attenuation));
        buckets.add(config.distance_class(s.attenuation), scan_interval_minutes);
        if s.attenuation < *min_db {
            *min_db = s.attenuation;
        }
    }

    groups
        .into_iter()
        .map(|((observer, peer_id, day), (m, min_attenuation))| {
            let trl = trl_of(&peer_id, day);
            EncounterAggregate {
                observer,
                peer_id,
                day,
                exposure_minutes_close: m.close,
                exposure_minutes_medium: m.medium,
                exposure_minutes_far: m.far,
                min_attenuation,
                days_since_exposure: DaysSinceExposure::between(day, evaluation_date),
                trl,
            }
        })
        .collect()
}

/// Cuts each (observer, observed ID, day) sample stream into tumbling windows
/// anchored at its first sample.
///
/// No window is credited more than `window_minutes`.
pub fn build_windows<F>(
    samples: &[ScanSample],
    scan_interval_minutes: f64,
    config: &RiskConfig,
    trl_of: F,
) -> Vec<ExposureWindow>
where
    F: Fn(&IdToken, NaiveDate) -> TransmissionRiskLevel,
{
    let mut streams: BTreeMap<(DeviceId, IdToken, NaiveDate), Vec<&ScanSample>> = BTreeMap::new();
    for s in samples {
        streams
            .entry((s.observer.clone(), s.observed.clone(), s.day()))
            .or_default()
            .push(s);
    }

    let window_ms = minutes_to_ms(config.window_minutes).max(1);
    let mut windows = Vec::new();
    for ((observer, peer_id, day), mut stream) in streams {
        stream.sort_by_key(|s| s.timestamp);
        let anchor = epoch_ms(stream[0].timestamp);
        let trl = trl_of(&peer_id, day);

        let mut slots: BTreeMap<i64, MinuteBuckets> = BTreeMap::new();
        for s in stream {
            let slot = (epoch_ms(s.timestamp) - anchor).div_euclid(window_ms);
            let buckets = slots.entry(slot).or_default();
            let credit = scan_interval_minutes.min(config.window_minutes - buckets.total());
            if credit > 0.0 {
                buckets.add(config.distance_class(s.attenuation), credit);
            }
        }
        for (slot, m) in slots {
            windows.push(ExposureWindow {
                observer: observer.clone(),
                peer_id: peer_id.clone(),
                day,
                window_start: from_epoch_ms(anchor + slot * window_ms),
                minutes_close: m.close,
                minutes_medium: m.medium,
                minutes_far: m.far,
                trl,
            });
        }
    }
    windows
}
