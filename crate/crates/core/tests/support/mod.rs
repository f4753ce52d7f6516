//! Randomized invariant checks shared by the property and acceptance targets.
//! Each check runs at least [`CASES`] generated cases.

#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use cwa_risk::basic::{self, EncounterAggregate, TotalRiskScore};
use cwa_risk::contact_sim::{self, ContactEvent, PathLossModel, ScanSettings};
use cwa_risk::coverage::{self, CoverageParams, DurationDistribution};
use cwa_risk::enf::{self, Device, KeyServer, World, RETENTION_DAYS};
use cwa_risk::model::ExposureSumScope;
use cwa_risk::scenario::{self, PersonSpec, Scenario, TestSpec};
use cwa_risk::updated::{self, ExposureWindow};
use cwa_risk::{AttenuationDb, DaysSinceExposure, ModelVersion, RiskConfig, TransmissionRiskLevel};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

pub const CASES: u32 = 1000;

pub struct Property {
    pub name: &'static str,
    pub check: fn() -> Result<(), String>,
}

pub const PROPERTIES: &[Property] = &[
    Property {
        name: "gate-zeroing",
        check: gate_zeroing,
    },
    Property {
        name: "score monotone in level",
        check: score_monotone_in_trl,
    },
    Property {
        name: "combined risk monotone",
        check: combined_risk_monotone,
    },
    Property {
        name: "v1 class monotone",
        check: classify_v1_monotone,
    },
    Property {
        name: "v2 daily sum additive",
        check: daily_sum_additive,
    },
    Property {
        name: "v2 window score bounded",
        check: window_score_bounded,
    },
    Property {
        name: "window partitioning",
        check: window_partitioning,
    },
    Property {
        name: "scan tick count",
        check: scan_tick_count,
    },
    Property {
        name: "14-day purge",
        check: fourteen_day_purge,
    },
    Property {
        name: "upload span",
        check: upload_span,
    },
    Property {
        name: "end-to-end determinism",
        check: end_to_end_determinism,
    },
    Property {
        name: "privacy field audit",
        check: privacy_field_audit,
    },
    Property {
        name: "scenario round trip",
        check: scenario_round_trip,
    },
    Property {
        name: "coverage fractions ordered",
        check: coverage_fractions_ordered,
    },
    Property {
        name: "coverage determinism",
        check: coverage_determinism,
    },
    Property {
        name: "miss rate monotone in duration",
        check: miss_rate_monotone,
    },
    Property {
        name: "underestimation factor >= 1",
        check: factor_at_least_one,
    },
    Property {
        name: "approximation under surviving maximum",
        check: approx_matches_when_max_survives,
    },
];

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

fn check<S: Strategy>(
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner().run(&strategy, test).map_err(|e| e.to_string())
}

fn day(d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 3, 1).unwrap() + Duration::days(i64::from(d))
}

fn trl() -> impl Strategy<Value = TransmissionRiskLevel> {
    (0u8..=8).prop_map(|l| TransmissionRiskLevel::new(l).unwrap())
}

fn minutes() -> impl Strategy<Value = f64> {
    (0u32..=120).prop_map(|m| f64::from(m) / 2.0)
}

pub fn encounter() -> impl Strategy<Value = EncounterAggregate> {
    (
        minutes(),
        minutes(),
        minutes(),
        30.0..90.0f64,
        0u32..=20,
        trl(),
    )
        .prop_map(|(close, medium, far, db, de, trl)| EncounterAggregate {
            observer: "me".into(),
            peer_id: "peer".into(),
            day: day(0),
            exposure_minutes_close: close,
            exposure_minutes_medium: medium,
            exposure_minutes_far: far,
            min_attenuation: AttenuationDb::new(db).unwrap(),
            days_since_exposure: DaysSinceExposure::new(de),
            trl,
        })
}

fn window() -> impl Strategy<Value = ExposureWindow> {
    (minutes(), minutes(), minutes(), trl(), 0u32..48).prop_map(
        |(close, medium, far, trl, slot)| ExposureWindow {
            observer: "me".into(),
            peer_id: "peer".into(),
            day: day(0),
            window_start: day(0).and_hms_opt(0, 0, 0).unwrap()
                + Duration::minutes(i64::from(slot) * 30),
            minutes_close: close,
            minutes_medium: medium,
            minutes_far: far,
            trl,
        },
    )
}

fn gates(e: &EncounterAggregate, c: &RiskConfig) -> bool {
    basic::delta_ed(e.gated_minutes(), c)
        && basic::delta_sa(e.min_attenuation, c)
        && basic::delta_de(e.days_since_exposure, c)
}

fn gate_zeroing() -> Result<(), String> {
    let c = RiskConfig::default();
    check(encounter(), |e| {
        let score = basic::total_risk_score(&e, &c).score();
        if !gates(&e, &c) {
            prop_assert_eq!(score, 0);
        } else {
            prop_assert_eq!(score, 10 * u32::from(e.trl.get()));
        }
        Ok(())
    })
}

fn score_monotone_in_trl() -> Result<(), String> {
    let c = RiskConfig::default();
    check((encounter(), trl(), trl()), |(e, a, b)| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let score = |t| {
            basic::total_risk_score(
                &EncounterAggregate {
                    trl: t,
                    ..e.clone()
                },
                &c,
            )
            .score()
        };
        if gates(&e, &c) {
            prop_assert!(score(lo) <= score(hi));
        }
        Ok(())
    })
}

fn combined_risk_monotone() -> Result<(), String> {
    check(
        (
            prop::collection::vec(encounter(), 1..6),
            0usize..6,
            0usize..3,
            minutes(),
            any::<bool>(),
        ),
        |(mut es, idx, class, extra, surviving_scope)| {
            let c = RiskConfig {
                exposure_sum_scope: if surviving_scope {
                    ExposureSumScope::MrsSurviving
                } else {
                    ExposureSumScope::AllInHorizon
                },
                ..RiskConfig::default()
            };
            let before = basic::combined_risk(&es, &c);
            // Extra minutes in one bucket of an encounter whose score cannot
            // change (already past the duration gate).
            let i = idx % es.len();
            let e = &mut es[i];
            let was_past_gate = basic::delta_ed(e.gated_minutes(), &c);
            match class {
                0 => e.exposure_minutes_close += extra,
                1 => e.exposure_minutes_medium += extra,
                _ => e.exposure_minutes_far += extra,
            }
            let after = basic::combined_risk(&es, &c);
            if was_past_gate || class == 2 {
                prop_assert_eq!(after.r_max, before.r_max);
                prop_assert!(after.tcr_minutes >= before.tcr_minutes);
            }
            // Fixed minutes, larger maximum.
            let w = before.weighted_minutes;
            let scaled = |r: u32| w * f64::from(r) / f64::from(c.ars);
            prop_assert!(scaled(before.r_max.0) <= scaled(before.r_max.0 + 10));
            prop_assert!(before.r_max >= TotalRiskScore(0));
            Ok(())
        },
    )
}

fn classify_v1_monotone() -> Result<(), String> {
    let c = RiskConfig::default();
    check((0.0..100.0f64, 0.0..100.0f64), |(a, b)| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(basic::classify_v1(lo, &c) <= basic::classify_v1(hi, &c));
        prop_assert!(updated::classify_day(lo, &c) <= updated::classify_day(hi, &c));
        Ok(())
    })
}

fn daily_sum_additive() -> Result<(), String> {
    let c = RiskConfig::default();
    let windows = || prop::collection::vec(window(), 0..8);
    check((windows(), windows()), |(a, b)| {
        let total = |ws: &[ExposureWindow]| {
            updated::daily_summary_for(day(0), ws, &c)
                .unwrap()
                .total_weighted_minutes
        };
        let joined: Vec<_> = a.iter().chain(&b).cloned().collect();
        let direct: f64 = joined
            .iter()
            .map(|w| updated::encounter_score_v2(w, &c))
            .sum();
        prop_assert!((total(&joined) - (total(&a) + total(&b))).abs() < 1e-9);
        prop_assert!((total(&joined) - direct).abs() < 1e-9);
        Ok(())
    })
}

fn window_score_bounded() -> Result<(), String> {
    let c = RiskConfig::default();
    check(window(), |w| {
        let trv = updated::transmission_risk_value(w.trl, &c);
        prop_assert!((0.0..=1.6).contains(&trv));
        let score = updated::encounter_score_v2(&w, &c);
        if !updated::window_qualifies(&w, &c) {
            prop_assert_eq!(score, 0.0);
        } else {
            prop_assert_eq!(score, updated::weighted_exposure_minutes(&w, &c) * trv);
        }
        Ok(())
    })
}

fn contact() -> impl Strategy<Value = ContactEvent> {
    (0u32..3, 0u32..1440, 0u32..=90, 0.3..8.0f64, any::<bool>()).prop_map(
        |(d, minute, dur, dist, flip)| {
            let (a, b) = if flip { ("ann", "ben") } else { ("ben", "ann") };
            ContactEvent {
                person_a: a.into(),
                person_b: b.into(),
                start: day(d).and_hms_opt(0, 0, 0).unwrap() + Duration::minutes(i64::from(minute)),
                duration_minutes: f64::from(dur),
                distance_m: dist,
            }
        },
    )
}

fn two_person_world(seed: u64, sigma: f64) -> World {
    let scan = ScanSettings {
        scan_interval_minutes: 5.0,
        path_loss: PathLossModel {
            noise_sigma_db: sigma,
            ..PathLossModel::default()
        },
    };
    let mut w = World::new(seed, RiskConfig::default(), scan, day(0));
    w.install_app("ann".into(), day(0), true);
    w.install_app("ben".into(), day(0), true);
    w
}

fn window_partitioning() -> Result<(), String> {
    let c = RiskConfig::default();
    check(
        (
            prop::collection::vec(contact(), 0..5),
            any::<u64>(),
            0.0..6.0f64,
        ),
        |(events, seed, sigma)| {
            let world = two_person_world(seed, sigma);
            let samples = contact_sim::simulate_scans(&events, &world, world.scan_settings(), seed);
            let trl = |_: &_, _| TransmissionRiskLevel::MAX;
            let aggregates = contact_sim::aggregate_daily(&samples, day(10), 5.0, &c, trl);
            let windows = contact_sim::build_windows(&samples, 5.0, &c, trl);

            let mut from_windows: BTreeMap<_, f64> = BTreeMap::new();
            let mut starts: BTreeMap<_, Vec<NaiveDateTime>> = BTreeMap::new();
            for w in &windows {
                let total = w.minutes_close + w.minutes_medium + w.minutes_far;
                prop_assert!(total <= c.window_minutes);
                prop_assert_eq!(w.window_start.date(), w.day);
                let key = (w.observer.clone(), w.peer_id.clone(), w.day);
                *from_windows.entry(key.clone()).or_default() += total;
                starts.entry(key).or_default().push(w.window_start);
            }
            for e in &aggregates {
                let key = (e.observer.clone(), e.peer_id.clone(), e.day);
                let total =
                    e.exposure_minutes_close + e.exposure_minutes_medium + e.exposure_minutes_far;
                prop_assert_eq!(from_windows.get(&key).copied(), Some(total));
            }
            prop_assert_eq!(from_windows.len(), aggregates.len());
            for mut s in starts.into_values() {
                s.sort();
                for pair in s.windows(2) {
                    prop_assert!(pair[1] - pair[0] >= Duration::minutes(30));
                }
            }
            prop_assert_eq!(
                samples.len() as f64 * 5.0,
                from_windows.values().sum::<f64>()
            );
            Ok(())
        },
    )
}

fn scan_tick_count() -> Result<(), String> {
    check(
        (
            0i64..10_000_000,
            0i64..7_200_000,
            1i64..1_000_000,
            0i64..1_000_000,
        ),
        |(start, len, interval, phase)| {
            let ticks: Vec<i64> =
                contact_sim::scan_ticks(start, start + len, interval, phase % interval).collect();
            let floor = len / interval;
            prop_assert!(ticks.len() as i64 == floor || ticks.len() as i64 == floor + 1);
            for t in &ticks {
                prop_assert!(*t >= start && *t < start + len);
                prop_assert_eq!((t - phase % interval).rem_euclid(interval), 0);
            }
            Ok(())
        },
    )
}

fn fourteen_day_purge() -> Result<(), String> {
    check(
        (
            prop::collection::vec(contact(), 1..4),
            0u32..40,
            any::<u64>(),
        ),
        |(mut events, end, seed)| {
            for (i, e) in events.iter_mut().enumerate() {
                e.start += Duration::days((i as i64 * 7) % 30);
                e.duration_minutes = e.duration_minutes.max(10.0);
            }
            let mut world = two_person_world(seed, 0.0);
            for e in events {
                world.add_contact(e);
            }
            world
                .run_until(day(end))
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            for d in world.devices() {
                for s in d.observations() {
                    prop_assert!((world.date() - s.day()).num_days() <= RETENTION_DAYS);
                    prop_assert!(s.day() <= world.date());
                }
            }
            Ok(())
        },
    )
}

fn upload_span() -> Result<(), String> {
    let c = RiskConfig::default();
    check(
        (0u32..40, 0u32..40, 0u32..5, any::<u64>()),
        |(install, test, delay, seed)| {
            let device = Device::new("ann".into(), "ann".into(), day(install), true);
            let mut server = KeyServer::new();
            let up = enf::upload_keys(&device, day(test), delay, seed, &c, &mut server)
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(up.published_ids.len() as i64 <= RETENTION_DAYS);
            for k in &up.published_ids {
                prop_assert!(k.day < up.report_date);
                prop_assert!(k.day >= day(install));
                prop_assert!((up.report_date - k.day).num_days() <= RETENTION_DAYS);
            }
            Ok(())
        },
    )
}

pub fn scenario() -> impl Strategy<Value = Scenario> {
    let names = ["ann", "ben", "cat", "dan"];
    (
        2usize..=4,
        prop::collection::vec(
            (
                0usize..4,
                0usize..4,
                0u32..20,
                0u32..1440,
                0u32..60,
                0.5..6.0f64,
            ),
            0..8,
        ),
        prop::collection::vec((0usize..4, 5u32..20, 0i64..3, any::<bool>()), 0..3),
        prop::collection::vec(0u32..6, 4),
        prop::collection::vec(10u32..30, 1..3),
        any::<u64>(),
        0.0..4.0f64,
    )
        .prop_map(
            move |(n, contacts, tests, installs, evals, seed, sigma)| Scenario {
                description: None,
                seed,
                people: (0..n)
                    .map(|i| PersonSpec {
                        name: names[i].into(),
                        install_date: (installs[i] < 5).then(|| day(installs[i])),
                        active: installs[i] != 1,
                    })
                    .collect(),
                contacts: contacts
                    .into_iter()
                    .filter(|(a, b, ..)| a % n != b % n)
                    .map(|(a, b, d, minute, dur, dist)| ContactEvent {
                        person_a: names[a % n].into(),
                        person_b: names[b % n].into(),
                        start: day(d).and_hms_opt(0, 0, 0).unwrap()
                            + Duration::minutes(i64::from(minute)),
                        duration_minutes: f64::from(dur),
                        distance_m: dist,
                    })
                    .collect(),
                tests: tests
                    .into_iter()
                    .map(|(p, t, delay, shares)| TestSpec {
                        person: names[p % n].into(),
                        test_date: day(t),
                        report_delay_days: delay,
                        shares_result: shares,
                    })
                    .collect(),
                evaluation_dates: evals.into_iter().map(day).collect(),
                config: RiskConfig::default(),
                scan: ScanSettings {
                    scan_interval_minutes: 5.0,
                    path_loss: PathLossModel {
                        noise_sigma_db: sigma,
                        ..PathLossModel::default()
                    },
                },
            },
        )
}

fn reports_json(s: &Scenario) -> Result<String, TestCaseError> {
    let fail = |e: cwa_risk::Error| TestCaseError::fail(e.to_string());
    let v1 = scenario::run(s, ModelVersion::V1).map_err(fail)?;
    let v2 = scenario::run(s, ModelVersion::V2).map_err(fail)?;
    let cmp = scenario::compare(s).map_err(fail)?;
    Ok(serde_json::to_string(&(v1, v2, cmp)).unwrap())
}

fn end_to_end_determinism() -> Result<(), String> {
    check(scenario(), |s| {
        prop_assert_eq!(reports_json(&s)?, reports_json(&s.clone())?);
        Ok(())
    })
}

const REPORT_FIELDS: &[&str] = &[
    "model",
    "evaluation_date",
    "tcr_minutes",
    "r_max",
    "weighted_minutes",
    "class",
    "days",
    "day",
    "total_weighted_minutes",
    "contributing_windows",
    "low_days",
    "high_days",
];

fn audit(value: &serde_json::Value) -> Result<(), String> {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                if !REPORT_FIELDS.contains(&k.as_str()) {
                    return Err(format!("unexpected report field {k}"));
                }
                audit(v)?;
            }
            Ok(())
        }
        serde_json::Value::Array(items) => items.iter().try_for_each(audit),
        serde_json::Value::String(s) => {
            let is_date = NaiveDate::parse_from_str(s, "%Y-%m-%d").is_ok();
            let is_label = ["v1", "v2", "NONE", "LOW", "HIGH"].contains(&s.as_str());
            if is_date || is_label {
                Ok(())
            } else {
                Err(format!("unexpected string {s:?} in report"))
            }
        }
        _ => Ok(()),
    }
}

fn privacy_field_audit() -> Result<(), String> {
    check(scenario(), |s| {
        for model in [ModelVersion::V1, ModelVersion::V2] {
            let run = scenario::run(&s, model).map_err(|e| TestCaseError::fail(e.to_string()))?;
            for r in &run.reports {
                audit(&serde_json::to_value(&r.report).unwrap()).map_err(TestCaseError::fail)?;
            }
        }
        Ok(())
    })
}

fn scenario_round_trip() -> Result<(), String> {
    check(scenario(), |s| {
        let back =
            Scenario::from_json(&s.to_json()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.to_json(), s.to_json());
        Ok(())
    })
}

fn small_params() -> impl Strategy<Value = CoverageParams> {
    (
        0.0..=1.0f64,
        0.0..=1.0f64,
        0u32..=40,
        1u64..40,
        any::<u64>(),
        any::<bool>(),
    )
        .prop_map(|(a, r, minutes, trials, seed, v2)| CoverageParams {
            adoption_rate: a,
            reporting_rate: r,
            contact_duration: DurationDistribution::Fixed {
                minutes: f64::from(minutes),
            },
            population: 50,
            trials,
            seed,
            registration_model: if v2 {
                ModelVersion::V2
            } else {
                ModelVersion::V1
            },
            ..CoverageParams::default()
        })
}

fn coverage_fractions_ordered() -> Result<(), String> {
    check(small_params(), |p| {
        let r =
            coverage::monte_carlo_coverage(&p).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(r.effective_fraction.value <= r.registered_fraction.value);
        for e in [
            r.registered_fraction,
            r.effective_fraction,
            r.short_contact_miss_rate,
        ] {
            prop_assert!((0.0..=1.0).contains(&e.value));
            prop_assert!(
                e.ci_low >= 0.0 && e.ci_high <= 1.0 && e.ci_low <= e.value && e.value <= e.ci_high
            );
        }
        Ok(())
    })
}

fn coverage_determinism() -> Result<(), String> {
    check(small_params(), |p| {
        let a =
            coverage::monte_carlo_coverage(&p).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let b = coverage::monte_carlo_coverage(&p.clone())
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        Ok(())
    })
}

fn miss_rate_monotone() -> Result<(), String> {
    check(
        (0u32..=600, 0u32..=600, 1u64..200, any::<u64>()),
        |(a, b, trials, seed)| {
            let (lo, hi) = (a.min(b), a.max(b));
            let rate = |tenths: u32| {
                let d = DurationDistribution::Fixed {
                    minutes: f64::from(tenths) / 10.0,
                };
                coverage::short_contact_miss_rate(&d, 5.0, trials, seed)
                    .unwrap()
                    .value
            };
            prop_assert!(rate(lo) >= rate(hi));
            Ok(())
        },
    )
}

fn factor_at_least_one() -> Result<(), String> {
    // Durations that are whole scan intervals are credited exactly when seen.
    check((small_params(), 0u32..=8), |(mut p, intervals)| {
        p.contact_duration = DurationDistribution::Fixed {
            minutes: 5.0 * f64::from(intervals),
        };
        p.path_loss.noise_sigma_db = 0.0;
        let r =
            coverage::monte_carlo_coverage(&p).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for f in [
            r.underestimation_factor,
            r.individual_underestimation_factor,
        ]
        .into_iter()
        .flatten()
        {
            prop_assert!(f.value >= 1.0, "factor {}", f.value);
        }
        Ok(())
    })
}

/// Criterion check for the approximation: encounter sets where the encounter
/// with the highest level passes every gate. Returns (checked, mismatches).
pub fn approx_reduction(cases: u32, seed: u64) -> (u32, Vec<String>) {
    use rand::{Rng, SeedableRng};
    let c = RiskConfig::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let mut mismatches = Vec::new();
    while checked < cases {
        let n = rng.random_range(1..=6);
        let es: Vec<EncounterAggregate> = (0..n)
            .map(|_| {
                let de = rng.random_range(0..=20u32);
                let trl =
                    cwa_risk::model::trl_from_days_since_exposure(DaysSinceExposure::new(de), &c);
                EncounterAggregate {
                    observer: "me".into(),
                    peer_id: "peer".into(),
                    day: day(0),
                    exposure_minutes_close: f64::from(rng.random_range(0..=60u32)) / 2.0,
                    exposure_minutes_medium: f64::from(rng.random_range(0..=60u32)) / 2.0,
                    exposure_minutes_far: f64::from(rng.random_range(0..=60u32)) / 2.0,
                    min_attenuation: AttenuationDb::new(rng.random_range(40.0..80.0)).unwrap(),
                    days_since_exposure: DaysSinceExposure::new(de),
                    trl,
                }
            })
            .collect();
        let in_horizon: Vec<&EncounterAggregate> = es
            .iter()
            .filter(|e| basic::delta_de(e.days_since_exposure, &c))
            .collect();
        let Some(max) = in_horizon.iter().max_by_key(|e| e.trl) else {
            continue;
        };
        if !gates(max, &c) {
            continue;
        }
        checked += 1;
        let exact = basic::combined_risk(&es, &c).tcr_minutes;
        let approx = basic::approx_tcr(&es, &c);
        if exact != approx {
            mismatches.push(format!(
                "max TR {}: exact {exact}, approx {approx}",
                max.trl.get()
            ));
        }
    }
    (checked, mismatches)
}

fn approx_matches_when_max_survives() -> Result<(), String> {
    let c = RiskConfig::default();
    check(prop::collection::vec(encounter(), 1..6), |es| {
        let in_horizon: Vec<&EncounterAggregate> = es
            .iter()
            .filter(|e| basic::delta_de(e.days_since_exposure, &c))
            .collect();
        let Some(max) = in_horizon.iter().max_by_key(|e| e.trl) else {
            return Ok(());
        };
        if gates(max, &c) && basic::total_risk_score(max, &c).score() >= c.mrs {
            prop_assert_eq!(
                basic::combined_risk(&es, &c).tcr_minutes,
                basic::approx_tcr(&es, &c)
            );
        }
        Ok(())
    })
}
