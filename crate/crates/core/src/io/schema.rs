//! JSON artifacts. Every document carries `schema_version` (`"major.minor"`);
//! readers reject majors other than [`SCHEMA_MAJOR`].

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::characterize::{EventClass, EventKind as ClassKind, FitResult};
use crate::detect::DetectedEvent;
use crate::error::{Error, Result};
use crate::fiber_sim::{Event, MeasurementSchedule};

pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA_VERSION: &str = "1.0";

fn default_version() -> String {
    SCHEMA_VERSION.to_string()
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: Option<String>,
}

/// Checks that `schema_version` is present with a supported major.
pub fn check_version(path: &Path, value: &serde_json::Value) -> Result<()> {
    let probe: VersionProbe = serde_json::from_value(value.clone()).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let found = probe.schema_version.unwrap_or_else(|| "<missing>".into());
    let major = found.split('.').next().and_then(|m| m.parse::<u32>().ok());
    if major != Some(SCHEMA_MAJOR) {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            found,
            expected: SCHEMA_MAJOR,
        });
    }
    Ok(())
}

/// Reads a versioned JSON document.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    check_version(path, &value)?;
    serde_json::from_value(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Fit parameters and label of one event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(rename = "C_rad_per_s")]
    pub slope: f64,
    #[serde(rename = "A_rad")]
    pub amplitude: f64,
    #[serde(rename = "f_Hz")]
    pub frequency: f64,
    #[serde(rename = "phi0_rad")]
    pub phase_offset: f64,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `None` when classification was refused (see `diagnostic`).
    pub class: Option<ClassKind>,
    #[serde(rename = "temp_rate_C_per_s", skip_serializing_if = "Option::is_none", default)]
    pub temp_rate: Option<f64>,
    #[serde(rename = "vib_frequency_Hz", skip_serializing_if = "Option::is_none", default)]
    pub vib_frequency: Option<f64>,
    #[serde(rename = "vib_amplitude_rad", skip_serializing_if = "Option::is_none", default)]
    pub vib_amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
}

impl FitReport {
    pub fn new(fit: &FitResult, class: Option<&EventClass>, diagnostic: Option<String>) -> Self {
        FitReport {
            slope: fit.slope(),
            amplitude: fit.amplitude(),
            frequency: fit.frequency(),
            phase_offset: fit.phase_offset(),
            residual_rms: fit.residual_rms,
            converged: fit.converged,
            iterations: fit.iterations,
            class: class.map(|c| c.kind),
            temp_rate: class.and_then(|c| c.temp_rate),
            vib_frequency: class.and_then(|c| c.vib_frequency),
            vib_amplitude: class.and_then(|c| c.vib_amplitude),
            diagnostic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    #[serde(flatten)]
    pub detection: DetectedEvent,
    /// Pairs whose summed phase was fitted.
    pub span: [usize; 2],
    pub fit: FitReport,
}

/// Detections of one burst.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurstReport {
    #[serde(default = "default_version")]
    pub schema_version: String,
    pub scenario: usize,
    pub burst: usize,
    pub time_window_s: [f64; 2],
    pub events: Vec<EventReport>,
}

impl BurstReport {
    pub fn new(scenario: usize, burst: usize, time_window_s: [f64; 2], events: Vec<EventReport>) -> Self {
        BurstReport {
            schema_version: SCHEMA_VERSION.into(),
            scenario,
            burst,
            time_window_s,
            events,
        }
    }
}

/// Ground truth of one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub id: usize,
    pub fiber_seed: u64,
    pub events: Vec<Event>,
    /// `[start, end]` of every burst, s.
    pub bursts: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    #[serde(default = "default_version")]
    pub schema_version: String,
    pub schedule: MeasurementSchedule,
    pub scenarios: Vec<ScenarioTruth>,
}
