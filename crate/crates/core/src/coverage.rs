//! How much of the true exposure the app ever sees.
//!
//! Three losses stack up: both people must run the app (adoption squared),
//! the infected person must share the result, and a contact shorter than the
//! scan interval may fall between two scans. The closed forms cover the first
//! two; the Monte Carlo runs all three through the scan simulator and the risk
//! models.
//!
//! Trials draw from per-trial random streams of the master seed, so results
//! are identical however the work is split across threads.

use chrono::NaiveDate;
use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::basic;
use crate::contact_sim::{self, minutes_to_ms, scan_ticks, PathLossModel, ScanSample};
use crate::error::{Error, Result};
use crate::model::{ModelVersion, RiskConfig, TransmissionRiskLevel};
use crate::seed;
use crate::updated;

/// Share of app users who published a positive result.
pub const APP_USER_SHARING_RATE: f64 = 0.6;
/// Shared results over all positive tests: 250,000 of about 2,820,000.
pub const POSITIVE_TEST_SHARING_RATE: f64 = 250_000.0 / 2_820_000.0;

/// Proportions from fewer trials get the exact binomial interval.
pub const EXACT_CI_MAX_TRIALS: u64 = 100;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// How long a contact lasts, in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DurationDistribution {
    Fixed {
        minutes: f64,
    },
    Uniform {
        min_minutes: f64,
        max_minutes: f64,
    },
    /// Fixed durations drawn with the given relative weights.
    Mixture {
        components: Vec<MixtureComponent>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub minutes: f64,
}

impl DurationDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Fixed { minutes } => *minutes,
            Self::Uniform {
                min_minutes,
                max_minutes,
            } => {
                if max_minutes > min_minutes {
                    rng.random_range(*min_minutes..*max_minutes)
                } else {
                    *min_minutes
                }
            }
            Self::Mixture { components } => {
                components
                    .choose_weighted(rng, |c| c.weight)
                    .expect("validated mixture")
                    .minutes
            }
        }
    }

    fn validate(&self, errs: &mut Vec<String>) {
        let ok = |m: f64| m.is_finite() && m >= 0.0;
        match self {
            Self::Fixed { minutes } => {
                if !ok(*minutes) {
                    errs.push("contact duration must be >= 0 minutes".into());
                }
            }
            Self::Uniform {
                min_minutes,
                max_minutes,
            } => {
                if !ok(*min_minutes) || !ok(*max_minutes) || min_minutes > max_minutes {
                    errs.push("uniform durations need 0 <= min_minutes <= max_minutes".into());
                }
            }
            Self::Mixture { components } => {
                if components.is_empty() {
                    errs.push("mixture needs at least one component".into());
                }
                if components.iter().any(|c| !ok(c.minutes)) {
                    errs.push("mixture durations must be >= 0 minutes".into());
                }
                if components.iter().any(|c| !ok(c.weight))
                    || components.iter().all(|c| c.weight == 0.0)
                {
                    errs.push("mixture weights must be >= 0 and not all zero".into());
                }
            }
        }
    }
}

/// Whose exposure the underestimation factor is measured for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perspective {
    /// Every contact in the population.
    Population,
    /// Only contacts of people who run the app themselves.
    Individual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageParams {
    pub adoption_rate: f64,
    pub reporting_rate: f64,
    pub scan_interval_minutes: f64,
    pub contact_duration: DurationDistribution,
    /// Ground-truth distance of every contact.
    pub distance_m: f64,
    pub path_loss: PathLossModel,
    /// Level of the infected peer on the contact day.
    pub transmission_risk_level: TransmissionRiskLevel,
    /// Which model decides how many minutes the app credits.
    pub registration_model: ModelVersion,
    pub population: u64,
    pub trials: u64,
    pub seed: u64,
    pub config: RiskConfig,
}

impl Default for CoverageParams {
    fn default() -> Self {
        Self {
            adoption_rate: 0.3,
            reporting_rate: APP_USER_SHARING_RATE,
            scan_interval_minutes: 5.0,
            contact_duration: DurationDistribution::Fixed { minutes: 30.0 },
            distance_m: 1.0,
            path_loss: PathLossModel::default(),
            transmission_risk_level: TransmissionRiskLevel::MAX,
            registration_model: ModelVersion::V1,
            population: 1_000_000,
            trials: 100_000,
            seed: 2021,
            config: RiskConfig::default(),
        }
    }
}

impl CoverageParams {
    /// 30% adoption, 60% of app users sharing, 30-minute close contacts.
    pub fn thirty_percent_adoption() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.adoption_rate) {
            errs.push("adoption_rate must be in [0, 1]".into());
        }
        if !prob(self.reporting_rate) {
            errs.push("reporting_rate must be in [0, 1]".into());
        }
        if !(self.scan_interval_minutes.is_finite() && self.scan_interval_minutes > 0.0)
            || minutes_to_ms(self.scan_interval_minutes) == 0
        {
            errs.push("scan_interval_minutes must be > 0".into());
        }
        if !(self.distance_m.is_finite() && self.distance_m > 0.0) {
            errs.push("distance_m must be > 0".into());
        }
        if self.population < 2 {
            errs.push("population must be > 1".into());
        }
        if self.trials == 0 {
            errs.push("trials must be > 0".into());
        }
        self.contact_duration.validate(&mut errs);
        errs.extend(self.path_loss.validate());
        if let Err(e) = self.config.validate() {
            errs.extend(e.messages().into_iter().map(|m| format!("config.{m}")));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errs))
        }
    }
}

/// A Monte Carlo estimate with its 95% normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    fn new(value: f64, std_error: f64) -> Self {
        Self {
            value,
            std_error,
            ci_low: value - Z95 * std_error,
            ci_high: value + Z95 * std_error,
        }
    }

    /// Binomial proportion, interval clipped to [0, 1].
    pub fn proportion(successes: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = successes as f64 / n;
        let mut e = Self::new(p, (p * (1.0 - p) / n).sqrt());
        e.ci_low = e.ci_low.max(0.0);
        e.ci_high = e.ci_high.min(1.0);
        e
    }

    /// Binomial proportion with the exact Clopper-Pearson interval. The
    /// standard error is still the normal one.
    pub fn exact_proportion(successes: u64, trials: u64) -> Self {
        let mut e = Self::proportion(successes, trials);
        let (k, n) = (successes as f64, trials as f64);
        let alpha = 1.0 - 0.95;
        e.ci_low = if successes == 0 {
            0.0
        } else {
            Beta::new(k, n - k + 1.0)
                .expect("positive shapes")
                .inverse_cdf(alpha / 2.0)
        };
        e.ci_high = if successes == trials {
            1.0
        } else {
            Beta::new(k + 1.0, n - k)
                .expect("positive shapes")
                .inverse_cdf(1.0 - alpha / 2.0)
        };
        e
    }

    /// Normal interval, or the exact one below [`EXACT_CI_MAX_TRIALS`].
    pub fn proportion_auto(successes: u64, trials: u64) -> Self {
        if trials < EXACT_CI_MAX_TRIALS {
            Self::exact_proportion(successes, trials)
        } else {
            Self::proportion(successes, trials)
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }

    /// True when `x` is within `k` standard errors.
    pub fn within_std_errors(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub trials: u64,
    pub registered_fraction: Estimate,
    pub effective_fraction: Estimate,
    pub short_contact_miss_rate: Estimate,
    /// `None` when the app registered nothing (factor unbounded).
    pub underestimation_factor: Option<Estimate>,
    pub individual_underestimation_factor: Option<Estimate>,
}

/// Both parties need the app: `adoption^2`.
pub fn registration_fraction_closed_form(adoption: f64) -> f64 {
    adoption * adoption
}

pub fn effective_fraction_closed_form(adoption: f64, reporting: f64) -> f64 {
    adoption * adoption * reporting
}

/// Expected underestimation factor for long contacts.
pub fn underestimation_closed_form(adoption: f64, reporting: f64, perspective: Perspective) -> f64 {
    match perspective {
        Perspective::Population => 1.0 / (adoption * adoption * reporting),
        Perspective::Individual => 1.0 / (adoption * reporting),
    }
}

#[derive(Debug, Clone, Copy)]
struct Trial {
    infected_has_app: bool,
    susceptible_has_app: bool,
    reported: bool,
    detected: bool,
    true_minutes: f64,
    /// Weighted minutes the app would credit if the keys matched.
    credited_minutes: f64,
}

impl Trial {
    fn registered(&self) -> bool {
        self.infected_has_app && self.susceptible_has_app && self.detected
    }

    fn effective(&self) -> bool {
        self.registered() && self.reported
    }
}

/// Scan samples of one contact starting at midnight, for one observer
/// scanning with `phase_ms`.
fn contact_samples<R: Rng + ?Sized>(
    duration_minutes: f64,
    phase_ms: i64,
    params: &CoverageParams,
    rng: &mut R,
) -> Vec<ScanSample> {
    let interval_ms = minutes_to_ms(params.scan_interval_minutes);
    let midnight = NaiveDate::from_ymd_opt(2021, 3, 1)
        .expect("valid date")
        .and_hms_opt(0, 0, 0)
        .expect("valid time");
    scan_ticks(0, minutes_to_ms(duration_minutes), interval_ms, phase_ms)
        .map(|t| ScanSample {
            observer: "susceptible".into(),
            observed: "infected".into(),
            timestamp: midnight + chrono::Duration::milliseconds(t),
            attenuation: contact_sim::attenuation_from_distance(
                params.distance_m,
                &params.path_loss,
                rng,
            ),
        })
        .collect()
}

/// Weighted minutes the chosen model credits for one contact's samples.
fn credited_minutes(samples: &[ScanSample], params: &CoverageParams) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let config = &params.config;
    let trl = |_: &_, _| params.transmission_risk_level;
    match params.registration_model {
        ModelVersion::V1 => {
            let day = samples[0].day();
            contact_sim::aggregate_daily(samples, day, params.scan_interval_minutes, config, trl)
                .iter()
                .filter(|e| basic::total_risk_score(e, config).score() >= config.mrs)
                .map(|e| {
                    e.exposure_minutes_close * config.w1
                        + e.exposure_minutes_medium * config.w2
                        + e.exposure_minutes_far * config.w3
                        + config.w4
                })
                .sum()
        }
        ModelVersion::V2 => {
            contact_sim::build_windows(samples, params.scan_interval_minutes, config, trl)
                .iter()
                .filter(|w| updated::window_qualifies(w, config))
                .map(|w| updated::weighted_exposure_minutes(w, config))
                .sum()
        }
    }
}

fn true_exposure_minutes<R: Rng + ?Sized>(
    duration: f64,
    params: &CoverageParams,
    rng: &mut R,
) -> f64 {
    // Ground truth has no noise: the distance alone decides the class.
    let noiseless = PathLossModel {
        noise_sigma_db: 0.0,
        ..params.path_loss
    };
    let db = contact_sim::attenuation_from_distance(params.distance_m, &noiseless, rng);
    if basic::delta_sa(db, &params.config) {
        duration
    } else {
        0.0
    }
}

fn run_trials(params: &CoverageParams) -> Result<Vec<Trial>> {
    params.validate()?;
    let mut cohort_rng = seed::rng_for(params.seed, "cohort");
    let adopters: Vec<bool> = (0..params.population)
        .map(|_| cohort_rng.random_bool(params.adoption_rate))
        .collect();
    let interval_ms = minutes_to_ms(params.scan_interval_minutes);
    let trial_seed = seed::derive_seed(params.seed, "trials");
    let n = params.population;

    let trials = (0..params.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::trial_rng(trial_seed, i);
            let infected = rng.random_range(0..n);
            let mut susceptible = rng.random_range(0..n - 1);
            if susceptible >= infected {
                susceptible += 1;
            }
            let reported = rng.random_bool(params.reporting_rate);
            let duration = params.contact_duration.sample(&mut rng);
            let phase = rng.random_range(0..interval_ms);
            let samples = contact_samples(duration, phase, params, &mut rng);
            Trial {
                infected_has_app: adopters[infected as usize],
                susceptible_has_app: adopters[susceptible as usize],
                reported,
                detected: !samples.is_empty(),
                true_minutes: true_exposure_minutes(duration, params, &mut rng),
                credited_minutes: credited_minutes(&samples, params),
            }
        })
        .collect();
    Ok(trials)
}

/// Ratio of sums with a delta-method standard error.
fn ratio_estimate(pairs: impl Iterator<Item = (f64, f64)> + Clone) -> Option<Estimate> {
    let (mut n, mut sx, mut sy) = (0u64, 0.0, 0.0);
    for (x, y) in pairs.clone() {
        n += 1;
        sx += x;
        sy += y;
    }
    if sy <= 0.0 {
        return None;
    }
    let ratio = sx / sy;
    let y_mean = sy / n as f64;
    let resid: f64 = pairs.map(|(x, y)| (x - ratio * y).powi(2)).sum();
    let se = if n > 1 {
        (resid / (n as f64 * (n - 1) as f64)).sqrt() / y_mean
    } else {
        f64::INFINITY
    };
    Some(Estimate::new(ratio, se))
}

fn factor(trials: &[Trial], perspective: Perspective) -> Option<Estimate> {
    let pairs = trials
        .iter()
        .filter(move |t| perspective == Perspective::Population || t.susceptible_has_app)
        .map(|t| {
            let registered = t.infected_has_app && t.susceptible_has_app && t.reported;
            (
                t.true_minutes,
                if registered { t.credited_minutes } else { 0.0 },
            )
        });
    ratio_estimate(pairs)
}

pub fn monte_carlo_coverage(params: &CoverageParams) -> Result<CoverageReport> {
    let trials = run_trials(params)?;
    let count = |f: fn(&Trial) -> bool| trials.iter().filter(|t| f(t)).count() as u64;
    let n = params.trials;
    Ok(CoverageReport {
        trials: n,
        registered_fraction: Estimate::proportion_auto(count(Trial::registered), n),
        effective_fraction: Estimate::proportion_auto(count(Trial::effective), n),
        short_contact_miss_rate: Estimate::proportion_auto(count(|t| !t.detected), n),
        underestimation_factor: factor(&trials, Perspective::Population),
        individual_underestimation_factor: factor(&trials, Perspective::Individual),
    })
}

/// Ground-truth exposure minutes over the minutes the app credits.
pub fn underestimation_factor(
    params: &CoverageParams,
    perspective: Perspective,
) -> Result<Estimate> {
    factor(&run_trials(params)?, perspective).ok_or(Error::UnboundedFactor)
}

/// Share of contacts that no scan tick falls into.
pub fn short_contact_miss_rate(
    durations: &DurationDistribution,
    scan_interval_minutes: f64,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    let params = CoverageParams {
        scan_interval_minutes,
        contact_duration: durations.clone(),
        trials,
        seed,
        ..CoverageParams::default()
    };
    let mut errs = Vec::new();
    durations.validate(&mut errs);
    if !(scan_interval_minutes.is_finite() && scan_interval_minutes > 0.0) {
        errs.push("scan_interval_minutes must be > 0".into());
    }
    if trials == 0 {
        errs.push("trials must be > 0".into());
    }
    if !errs.is_empty() {
        return Err(Error::InvalidParams(errs));
    }

    let interval_ms = minutes_to_ms(params.scan_interval_minutes);
    let trial_seed = seed::derive_seed(seed, "miss-rate");
    let missed = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = seed::trial_rng(trial_seed, i);
            let duration = durations.sample(&mut rng);
            let phase = rng.random_range(0..interval_ms);
            scan_ticks(0, minutes_to_ms(duration), interval_ms, phase)
                .next()
                .is_none()
        })
        .count() as u64;
    Ok(Estimate::proportion_auto(missed, trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(adoption: f64, reporting: f64, trials: u64) -> CoverageParams {
        CoverageParams {
            adoption_rate: adoption,
            reporting_rate: reporting,
            trials,
            population: 100_000,
            ..CoverageParams::default()
        }
    }

    #[test]
    fn closed_forms() {
        assert!((registration_fraction_closed_form(0.3) - 0.09).abs() < 1e-15);
        assert_eq!(registration_fraction_closed_form(0.0), 0.0);
        assert_eq!(registration_fraction_closed_form(1.0), 1.0);
        assert!((effective_fraction_closed_form(0.3, 0.6) - 0.054).abs() < 1e-15);
        assert_eq!(effective_fraction_closed_form(1.0, 1.0), 1.0);
        assert_eq!(effective_fraction_closed_form(0.3, 0.0), 0.0);
        assert!(
            (underestimation_closed_form(0.3, 0.6, Perspective::Individual) - 5.5556).abs() < 1e-4
        );
        assert!(
            (underestimation_closed_form(0.3, 0.6, Perspective::Population) - 18.5185).abs() < 1e-4
        );
    }

    #[test]
    fn sharing_presets() {
        assert!((POSITIVE_TEST_SHARING_RATE - 0.0887).abs() < 1e-4);
    }

    #[test]
    fn full_adoption_registers_everything() {
        let r = monte_carlo_coverage(&params(1.0, 1.0, 2_000)).unwrap();
        assert_eq!(r.registered_fraction.value, 1.0);
        assert_eq!(r.effective_fraction.value, 1.0);
        assert_eq!(r.underestimation_factor.unwrap().value, 1.0);
    }

    #[test]
    fn no_adoption_registers_nothing() {
        let p = params(0.0, 0.6, 1_000);
        let r = monte_carlo_coverage(&p).unwrap();
        assert_eq!(r.registered_fraction.value, 0.0);
        assert_eq!(r.effective_fraction.value, 0.0);
        assert!(r.underestimation_factor.is_none());
        assert!(matches!(
            underestimation_factor(&p, Perspective::Population),
            Err(Error::UnboundedFactor)
        ));
    }

    #[test]
    fn single_trial_is_valid_output() {
        let r = monte_carlo_coverage(&params(0.3, 0.6, 1)).unwrap();
        assert!(r.registered_fraction.ci_low >= 0.0 && r.registered_fraction.ci_high <= 1.0);
    }

    #[test]
    fn exact_interval() {
        // Clopper-Pearson for 0/10 has upper bound 1 - 0.025^(1/10).
        let e = Estimate::exact_proportion(0, 10);
        assert_eq!(e.ci_low, 0.0);
        assert!((e.ci_high - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-9);
        let e = Estimate::exact_proportion(5, 10);
        assert!((e.ci_low - 0.187_086).abs() < 1e-5 && (e.ci_high - 0.812_914).abs() < 1e-5);
        let one = Estimate::exact_proportion(1, 1);
        assert_eq!(one.ci_high, 1.0);
        assert!((one.ci_low - 0.025).abs() < 1e-9);
    }

    #[test]
    fn miss_rate_edges() {
        let fixed = |m| DurationDistribution::Fixed { minutes: m };
        assert_eq!(
            short_contact_miss_rate(&fixed(10.0), 5.0, 1_000, 1)
                .unwrap()
                .value,
            0.0
        );
        assert_eq!(
            short_contact_miss_rate(&fixed(0.0), 5.0, 1_000, 1)
                .unwrap()
                .value,
            1.0
        );
        assert!(short_contact_miss_rate(&fixed(3.0), 0.0, 1_000, 1).is_err());
    }

    #[test]
    fn invalid_params_listed() {
        let p = CoverageParams {
            adoption_rate: 1.5,
            trials: 0,
            population: 1,
            ..CoverageParams::default()
        };
        let Err(Error::InvalidParams(errs)) = p.validate() else {
            panic!("expected errors");
        };
        assert_eq!(errs.len(), 3);
    }

    #[test]
    fn mixture_sampling_respects_weights() {
        let d = DurationDistribution::Mixture {
            components: vec![
                MixtureComponent {
                    weight: 0.0,
                    minutes: 1.0,
                },
                MixtureComponent {
                    weight: 1.0,
                    minutes: 30.0,
                },
            ],
        };
        let mut rng = seed::trial_rng(1, 1);
        assert!((0..100).all(|_| d.sample(&mut rng) == 30.0));
    }
}
