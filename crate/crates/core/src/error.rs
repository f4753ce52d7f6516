use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

use crate::model::ConfigViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transmission risk level {0} is outside 0..=8")]
    LevelOutOfRange(i64),

    #[error("attenuation must be a finite non-negative dB value, got {0}")]
    InvalidAttenuation(f64),

    #[error("invalid risk configuration: {}", join_violations(.0))]
    InvalidConfig(Vec<ConfigViolation>),

    #[error("device {device} is not installed on {day} (installed {installed})")]
    NotInstalled {
        device: String,
        day: NaiveDate,
        installed: NaiveDate,
    },

    #[error("device {0} is not active")]
    Inactive(String),

    #[error("exposure windows span several days ({first} and {other})")]
    MixedDays { first: NaiveDate, other: NaiveDate },

    #[error("no exposure windows to combine")]
    NoWindows,

    #[error(
        "no app-registered exposure minutes in any trial; underestimation factor is unbounded"
    )]
    UnboundedFactor,

    #[error("invalid coverage parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),

    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Flat list of messages, one per underlying problem.
    pub fn messages(&self) -> Vec<String> {
        match self {
            Error::InvalidConfig(v) => v.iter().map(ToString::to_string).collect(),
            Error::InvalidParams(v) | Error::InvalidScenario(v) => v.clone(),
            other => vec![other.to_string()],
        }
    }
}

fn join_violations(v: &[ConfigViolation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
