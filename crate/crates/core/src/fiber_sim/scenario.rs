use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::layout::{CellGrid, FiberLayout};
use crate::error::{Error, Result};

/// One-way temperature-to-phase coupling at 1550 nm, rad per kelvin per meter.
pub const DEFAULT_K_T: f64 = 45.9;

/// Burst-sampled acquisition: `n_bursts` bursts of `burst_duration`, each
/// separated by `burst_gap` of dead time, frames every `frame_period`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSchedule {
    pub burst_duration: f64,
    pub burst_gap: f64,
    pub n_bursts: usize,
    pub frame_period: f64,
}

impl MeasurementSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_period.is_finite() && self.frame_period > 0.0) {
            return Err(Error::config("schedule.frame_period_s", "must be positive"));
        }
        if !(self.burst_duration.is_finite() && self.burst_duration >= self.frame_period) {
            return Err(Error::config(
                "schedule.burst_duration_s",
                "must be at least one frame period",
            ));
        }
        if !(self.burst_gap.is_finite() && self.burst_gap >= 0.0) {
            return Err(Error::config("schedule.burst_gap_s", "must be non-negative"));
        }
        if self.n_bursts == 0 {
            return Err(Error::config("schedule.n_bursts", "must be at least 1"));
        }
        Ok(())
    }

    pub fn frames_per_burst(&self) -> usize {
        (self.burst_duration / self.frame_period + 1e-9).floor() as usize
    }

    pub fn burst_start(&self, burst: usize) -> f64 {
        burst as f64 * (self.burst_duration + self.burst_gap)
    }

    pub fn frame_time(&self, burst: usize, frame: usize) -> f64 {
        self.burst_start(burst) + frame as f64 * self.frame_period
    }

    pub fn frame_times(&self, burst: usize) -> Vec<f64> {
        (0..self.frames_per_burst())
            .map(|k| self.frame_time(burst, k))
            .collect()
    }

    /// End of the last burst.
    pub fn horizon(&self) -> f64 {
        self.burst_start(self.n_bursts - 1) + self.burst_duration
    }

    /// Nyquist frequency of the frame cadence.
    pub fn nyquist(&self) -> f64 {
        0.5 / self.frame_period
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Linear temperature change at `rate_c_per_s` between `start_s` and
    /// `stop_s`, constant before and after.
    TemperatureRamp {
        rate_c_per_s: f64,
        start_s: f64,
        stop_s: f64,
    },
    /// Sinusoidal phase of `amplitude_rad` (one-way, accumulated over the
    /// whole range).
    Vibration {
        amplitude_rad: f64,
        frequency_hz: f64,
        phase_offset_rad: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// `[start, end]` in meters along the fiber.
    pub range_m: [f64; 2],
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.range_m[0] + self.range_m[1])
    }

    pub fn length(&self) -> f64 {
        self.range_m[1] - self.range_m[0]
    }

    /// Temperature change since t = 0, or 0 for vibrations.
    pub fn temperature_change(&self, t: f64) -> f64 {
        match self.kind {
            EventKind::TemperatureRamp {
                rate_c_per_s,
                start_s,
                stop_s,
            } => rate_c_per_s * (t - start_s).clamp(0.0, (stop_s - start_s).max(0.0)),
            EventKind::Vibration { .. } => 0.0,
        }
    }

    /// Accumulated one-way vibration phase over the range, or 0 for ramps.
    pub fn vibration_phase(&self, t: f64) -> f64 {
        match self.kind {
            EventKind::Vibration {
                amplitude_rad,
                frequency_hz,
                phase_offset_rad,
            } => amplitude_rad * (TAU * frequency_hz * t + phase_offset_rad).sin(),
            EventKind::TemperatureRamp { .. } => 0.0,
        }
    }

    /// Whether the event changes the fiber during `[t0, t1]`.
    pub fn active_during(&self, t0: f64, t1: f64) -> bool {
        match self.kind {
            EventKind::TemperatureRamp {
                rate_c_per_s,
                start_s,
                stop_s,
            } => rate_c_per_s != 0.0 && start_s < t1 && stop_s > t0,
            EventKind::Vibration { amplitude_rad, .. } => amplitude_rad != 0.0,
        }
    }
}

/// Ground-truth perturbations applied to a fiber over a measurement schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventScenario {
    pub events: Vec<Event>,
    pub schedule: MeasurementSchedule,
}

impl EventScenario {
    pub fn null(schedule: MeasurementSchedule) -> Self {
        EventScenario {
            events: Vec::new(),
            schedule,
        }
    }

    pub fn validate(&self, layout: &FiberLayout) -> Result<()> {
        self.schedule.validate()?;
        for (i, e) in self.events.iter().enumerate() {
            let field = |f: &str| format!("scenario.events[{i}].{f}");
            let [a, b] = e.range_m;
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::config(field("range_m"), "must be an increasing pair"));
            }
            if !layout.within_sensor(a, b) {
                return Err(Error::config(
                    field("range_m"),
                    format!("[{a}, {b}] m is not within the sensor sections"),
                ));
            }
            match e.kind {
                EventKind::TemperatureRamp {
                    rate_c_per_s,
                    start_s,
                    stop_s,
                } => {
                    if !rate_c_per_s.is_finite() {
                        return Err(Error::config(field("rate_c_per_s"), "must be finite"));
                    }
                    if !(start_s.is_finite() && stop_s.is_finite() && start_s <= stop_s) {
                        return Err(Error::config(field("stop_s"), "must not precede start_s"));
                    }
                }
                EventKind::Vibration {
                    amplitude_rad,
                    frequency_hz,
                    phase_offset_rad,
                } => {
                    if !(amplitude_rad.is_finite() && phase_offset_rad.is_finite()) {
                        return Err(Error::config(field("amplitude_rad"), "must be finite"));
                    }
                    if !(frequency_hz > 0.0 && frequency_hz < self.schedule.nyquist()) {
                        return Err(Error::config(
                            field("frequency_hz"),
                            format!(
                                "must lie in (0, {:.1}) Hz, the frame-rate Nyquist band",
                                self.schedule.nyquist()
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// One-way phase perturbation accrued inside each cell at time `t`.
    ///
    /// Temperature contributes `k_t * dT * overlap`, vibration spreads its
    /// accumulated phase uniformly across its range.
    pub fn phase_profile(&self, grid: &CellGrid, k_t: f64, t: f64) -> Result<Vec<f64>> {
        let horizon = self.schedule.horizon();
        if !(t >= 0.0 && t <= horizon * (1.0 + 1e-12)) {
            return Err(Error::Range { t, horizon });
        }
        let mut profile = vec![0.0; grid.n_cells];
        for e in &self.events {
            let [a, b] = e.range_m;
            let per_meter = k_t * e.temperature_change(t) + e.vibration_phase(t) / e.length();
            if per_meter == 0.0 {
                continue;
            }
            let first = ((a / grid.cell_length).floor() as usize).min(grid.n_cells);
            let last = ((b / grid.cell_length).ceil() as usize).min(grid.n_cells);
            for (cell, slot) in profile.iter_mut().enumerate().take(last).skip(first) {
                *slot += per_meter * grid.overlap(cell, a, b);
            }
        }
        Ok(profile)
    }
}

/// Round-trip phase seen by backscatter from each cell:
/// `2 * sum_{k <= j} profile[k]`.
pub fn round_trip_phase(profile: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    profile
        .iter()
        .map(|p| {
            acc += p;
            2.0 * acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule(duration: f64) -> MeasurementSchedule {
        MeasurementSchedule {
            burst_duration: duration,
            burst_gap: 0.0,
            n_bursts: 1,
            frame_period: 72.768e-6,
        }
    }

    fn grid() -> CellGrid {
        CellGrid {
            cell_length: 0.8,
            n_cells: 532,
        }
    }

    #[test]
    fn null_profile_is_zero() {
        let s = EventScenario::null(schedule(2.0));
        for t in [0.0, 0.3, 2.0] {
            assert!(s.phase_profile(&grid(), DEFAULT_K_T, t).unwrap().iter().all(|&p| p == 0.0));
        }
    }

    #[test]
    fn ramp_accumulates_over_segment() {
        let s = EventScenario {
            events: vec![Event {
                range_m: [200.0, 205.0],
                kind: EventKind::TemperatureRamp {
                    rate_c_per_s: 0.1,
                    start_s: 0.0,
                    stop_s: 10.0,
                },
            }],
            schedule: schedule(2.0),
        };
        let profile = s.phase_profile(&grid(), 45.9, 1.0).unwrap();
        let past: f64 = profile.iter().sum();
        assert!((past - 22.95).abs() < 1e-9, "{past}");
        let rt = round_trip_phase(&profile);
        assert!((rt[300] - 45.9).abs() < 1e-9);
        assert_eq!(rt[249], 0.0);
    }

    #[test]
    fn vibration_quarter_period() {
        let s = EventScenario {
            events: vec![Event {
                range_m: [205.0, 210.0],
                kind: EventKind::Vibration {
                    amplitude_rad: 0.5,
                    frequency_hz: 48.0,
                    phase_offset_rad: 0.0,
                },
            }],
            schedule: schedule(0.05),
        };
        let profile = s.phase_profile(&grid(), DEFAULT_K_T, 1.0 / (4.0 * 48.0)).unwrap();
        let past: f64 = profile.iter().sum();
        assert!((past - 0.5).abs() < 1e-12);
    }

    #[test]
    fn outside_horizon_is_range_error() {
        let s = EventScenario::null(schedule(0.05));
        assert!(matches!(
            s.phase_profile(&grid(), DEFAULT_K_T, 1.0),
            Err(Error::Range { .. })
        ));
        assert!(s.phase_profile(&grid(), DEFAULT_K_T, -1e-3).is_err());
    }

    #[test]
    fn validation() {
        let layout = FiberLayout::default();
        let mut s = EventScenario {
            events: vec![Event {
                range_m: [205.0, 210.0],
                kind: EventKind::Vibration {
                    amplitude_rad: 0.5,
                    frequency_hz: 8000.0,
                    phase_offset_rad: 0.0,
                },
            }],
            schedule: schedule(0.05),
        };
        assert!(s.validate(&layout).is_err());
        s.events[0].kind = EventKind::Vibration {
            amplitude_rad: 0.5,
            frequency_hz: 48.0,
            phase_offset_rad: 0.0,
        };
        s.validate(&layout).unwrap();
        s.events[0].range_m = [100.0, 105.0];
        assert!(s.validate(&layout).is_err());
    }

    #[test]
    fn paper_schedule_frames() {
        let s = MeasurementSchedule {
            burst_duration: 0.05,
            burst_gap: 28.0,
            n_bursts: 125,
            frame_period: 72.768e-6,
        };
        assert_eq!(s.frames_per_burst(), 687);
        assert!((s.horizon() - (124.0 * 28.05 + 0.05)).abs() < 1e-9);
    }
}
