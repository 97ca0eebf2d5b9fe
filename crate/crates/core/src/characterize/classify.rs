use serde::{Deserialize, Serialize};

use super::fit::FitResult;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Temperature,
    Vibration,
    Mixed,
    Negligible,
}

impl EventKind {
    pub fn has_temperature(self) -> bool {
        matches!(self, EventKind::Temperature | EventKind::Mixed)
    }

    pub fn has_vibration(self) -> bool {
        matches!(self, EventKind::Vibration | EventKind::Mixed)
    }

    pub fn from_components(temperature: bool, vibration: bool) -> Self {
        match (temperature, vibration) {
            (true, true) => EventKind::Mixed,
            (true, false) => EventKind::Temperature,
            (false, true) => EventKind::Vibration,
            (false, false) => EventKind::Negligible,
        }
    }
}

/// Decision thresholds plus the constants needed to turn a slope into a
/// temperature rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    /// `|C|` above this (rad/s) marks a temperature component.
    pub slope_threshold: f64,
    /// `A` above this (rad) marks a vibration component.
    pub amplitude_threshold: f64,
    /// Fiber length over which the temperature changes, m.
    pub heated_length_m: f64,
    /// One-way temperature-to-phase coupling, rad/(K m).
    pub k_t: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            slope_threshold: 0.5,
            amplitude_threshold: 0.05,
            heated_length_m: 5.0,
            k_t: crate::fiber_sim::DEFAULT_K_T,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventClass {
    pub kind: EventKind,
    /// °C/s, present when the event has a temperature component.
    pub temp_rate: Option<f64>,
    /// Round-trip tone amplitude in rad, present for vibrations.
    pub vib_amplitude: Option<f64>,
    pub vib_frequency: Option<f64>,
}

/// Temperature rate implied by a fitted slope: `C / (2 k_t L)`, the factor
/// two being the round trip.
pub fn temperature_rate(fit: &FitResult, heated_length_m: f64, k_t: f64) -> Result<f64> {
    if !(heated_length_m > 0.0) {
        return Err(Error::config("analysis.heated_length_m", "must be positive"));
    }
    if !(k_t > 0.0) {
        return Err(Error::config("fiber.k_t_rad_per_k_m", "must be positive"));
    }
    Ok(fit.slope() / (2.0 * k_t * heated_length_m))
}

/// Labels a converged fit by comparing `|C|` and `A` against thresholds.
pub fn classify(fit: &FitResult, cfg: &ClassifyConfig) -> Result<EventClass> {
    if !fit.converged {
        return Err(Error::Numerical(format!(
            "refusing to classify unconverged fit (C = {:.4e}, A = {:.4e}, f = {:.3} Hz, {} iterations)",
            fit.slope(),
            fit.amplitude(),
            fit.frequency(),
            fit.iterations
        )));
    }
    let temperature = fit.slope().abs() > cfg.slope_threshold;
    let vibration = fit.amplitude() > cfg.amplitude_threshold;
    let kind = EventKind::from_components(temperature, vibration);
    Ok(EventClass {
        kind,
        temp_rate: if temperature {
            Some(temperature_rate(fit, cfg.heated_length_m, cfg.k_t)?)
        } else {
            None
        },
        vib_amplitude: vibration.then_some(fit.amplitude()),
        vib_frequency: vibration.then_some(fit.frequency()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characterize::model::PhaseModel;

    fn fit(slope: f64, amplitude: f64, frequency: f64) -> FitResult {
        FitResult {
            model: PhaseModel {
                slope,
                amplitude,
                frequency,
                phase_offset: 0.0,
            },
            residual_rms: 0.0,
            converged: true,
            iterations: 3,
            degenerate: false,
        }
    }

    #[test]
    fn labels() {
        let cfg = ClassifyConfig::default();
        assert_eq!(classify(&fit(20.0, 0.0, 10.0), &cfg).unwrap().kind, EventKind::Temperature);
        let v = classify(&fit(0.0, 1.0, 48.0), &cfg).unwrap();
        assert_eq!(v.kind, EventKind::Vibration);
        assert_eq!(v.vib_frequency, Some(48.0));
        assert_eq!(classify(&fit(20.0, 1.0, 48.0), &cfg).unwrap().kind, EventKind::Mixed);
        assert_eq!(classify(&fit(0.0, 0.0, 1.0), &cfg).unwrap().kind, EventKind::Negligible);
    }

    #[test]
    fn unconverged_is_refused() {
        let mut f = fit(1.0, 1.0, 1.0);
        f.converged = false;
        assert!(matches!(classify(&f, &ClassifyConfig::default()), Err(Error::Numerical(_))));
    }

    #[test]
    fn rate_inversion() {
        let r = temperature_rate(&fit(45.9, 0.0, 1.0), 5.0, 45.9).unwrap();
        assert!((r - 0.1).abs() < 1e-15);
        assert_eq!(temperature_rate(&fit(0.0, 0.0, 1.0), 5.0, 45.9).unwrap(), 0.0);
        assert!(temperature_rate(&fit(1.0, 0.0, 1.0), 0.0, 45.9).is_err());
    }
}
