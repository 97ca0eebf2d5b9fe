//! End-to-end orchestration: burst synthesis, calibration on an event-free
//! burst, and per-burst detection plus characterization.

mod campaign;
mod metrics;

pub use campaign::{
    generate_scenarios, run_campaign, run_scenario, CampaignMix, CampaignOutcome, CampaignSpec, ScenarioOutcome,
    ScenarioSpec,
};
pub use campaign::scenario_truth;
pub use metrics::{evaluate, locate, BurstTruth, LocatedEvent, CampaignMetrics, FrequencyStats, TruthLabel, TEMP_RATE_SPLIT};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characterize::{accumulate_span_trace, accumulate_trace, classify, fit_trace, ClassifyConfig};
use crate::correlator::{Correlator, Fingerprint};
use crate::detect::{detect_events, Baseline, DetectionConfig, MATCH_GATE_M};
use crate::error::{Error, Result};
use crate::fiber_sim::{
    build_fiber, synthesize_fingerprint, synthesize_received_waveform, BackscatterParams, EventScenario,
    FiberLayout, FiberModel, FrameId, MeasurementSchedule, NoiseSpec, DEFAULT_K_T,
};
use crate::io::schema::{BurstReport, EventReport, FitReport};
use crate::probe::ProbeFrame;
use crate::waterfall::{build_waterfall, select_peaks, PeakSet, WaterfallMatrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Synthesis {
    /// Fingerprints drawn directly (correlator output model).
    #[default]
    Fast,
    /// Received waveforms synthesized and correlated.
    Waveform,
}

/// Everything needed to synthesize bursts for any fiber seed.
#[derive(Clone, Debug)]
pub struct SimContext {
    pub probe: ProbeFrame,
    pub layout: FiberLayout,
    pub backscatter_db: f64,
    pub k_t: f64,
    /// Receiver noise power per sample relative to launch, dB.
    pub receiver_noise_db: f64,
    pub laser_linewidth_hz: f64,
    pub schedule: MeasurementSchedule,
    pub synthesis: Synthesis,
}

impl SimContext {
    /// Default probe, layout and noise with the given schedule.
    pub fn with_schedule(burst_duration: f64, burst_gap: f64, n_bursts: usize) -> Self {
        let probe = crate::probe::default_probe();
        let schedule = MeasurementSchedule {
            burst_duration,
            burst_gap,
            n_bursts,
            frame_period: probe.frame_duration(),
        };
        SimContext {
            probe,
            layout: FiberLayout::default(),
            backscatter_db: -55.0,
            k_t: DEFAULT_K_T,
            receiver_noise_db: -42.0,
            laser_linewidth_hz: 0.0,
            schedule,
            synthesis: Synthesis::Fast,
        }
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            variance: 10f64.powf(self.receiver_noise_db / 10.0),
            laser_linewidth_hz: self.laser_linewidth_hz,
        }
    }

    /// Per-cell noise power after correlation: the receiver noise divided by
    /// the number of nonzero probe samples.
    pub fn fingerprint_noise_variance(&self) -> f64 {
        self.noise_spec().variance / (self.probe.nonzero_count() * self.probe.samples_per_symbol) as f64
    }

    pub fn build_fiber(&self, seed: u64) -> Result<FiberModel> {
        build_fiber(
            &self.layout,
            &BackscatterParams {
                symbol_rate: self.probe.symbol_rate as f64,
                backscatter_db: self.backscatter_db,
            },
            seed,
        )
    }

    /// Frames of one burst. `burst = None` is the event-free calibration
    /// burst, acquired over the timing of burst 0 with its own noise streams.
    pub fn simulate_burst(
        &self,
        model: &FiberModel,
        scenario: &EventScenario,
        burst: Option<usize>,
    ) -> Result<Vec<Fingerprint>> {
        let (scenario, index, stream) = match burst {
            None => (EventScenario::null(scenario.schedule), 0, 0u32),
            Some(b) => (scenario.clone(), b, b as u32 + 1),
        };
        let times = scenario.schedule.frame_times(index);
        let fp_noise = self.fingerprint_noise_variance();
        let noise = self.noise_spec();
        let correlator = Correlator::new(&self.probe, model.grid.cell_length);
        times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let id = FrameId {
                    burst: stream,
                    frame: k as u32,
                };
                match self.synthesis {
                    Synthesis::Fast => synthesize_fingerprint(model, &scenario, self.k_t, t, fp_noise, id),
                    Synthesis::Waveform => {
                        let rx =
                            synthesize_received_waveform(model, &self.probe, &scenario, self.k_t, t, &noise, id)?;
                        let mut fp = correlator.correlate(&rx, t)?;
                        fp.truncate(model.grid.n_cells);
                        Ok(fp)
                    }
                }
            })
            .collect()
    }
}

/// Analysis parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub min_magnitude_db: f64,
    pub min_distance_m: f64,
    pub temp_threshold_sigma: f64,
    pub vib_threshold_sigma: f64,
    /// Classification thresholds are this many noise-normalized RMS values
    /// of the parameters fitted on event-free traces.
    pub class_threshold_multiplier: f64,
    /// Event-free single-pair traces fitted for the classification
    /// calibration (evenly spaced over the pairs).
    pub calibration_fit_pairs: usize,
    pub heated_length_m: f64,
    pub k_t: f64,
    pub match_gate_m: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            min_magnitude_db: -55.0,
            min_distance_m: 2.0,
            temp_threshold_sigma: 5.0,
            vib_threshold_sigma: 5.0,
            class_threshold_multiplier: 2.0,
            calibration_fit_pairs: 32,
            heated_length_m: 5.0,
            k_t: DEFAULT_K_T,
            match_gate_m: MATCH_GATE_M,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, f: &str| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(Error::config(format!("analysis.{f}"), "must be positive"))
            }
        };
        positive(self.min_distance_m, "min_distance_m")?;
        positive(self.temp_threshold_sigma, "temp_threshold_sigma")?;
        positive(self.vib_threshold_sigma, "vib_threshold_sigma")?;
        positive(self.class_threshold_multiplier, "class_threshold_multiplier")?;
        positive(self.heated_length_m, "heated_length_m")?;
        positive(self.k_t, "k_t")?;
        positive(self.match_gate_m, "match_gate_m")?;
        if !self.min_magnitude_db.is_finite() {
            return Err(Error::config("analysis.min_magnitude_db", "must be finite"));
        }
        if self.calibration_fit_pairs == 0 {
            return Err(Error::config("analysis.calibration_fit_pairs", "must be at least 1"));
        }
        Ok(())
    }

    fn detection(&self, baseline: Baseline) -> DetectionConfig {
        DetectionConfig {
            temp_threshold_sigma: self.temp_threshold_sigma,
            vib_threshold_sigma: self.vib_threshold_sigma,
            baseline: Some(baseline),
        }
    }
}

/// State derived from an event-free burst.
#[derive(Clone, Debug)]
pub struct Calibration {
    pub peaks: PeakSet,
    pub baseline: Baseline,
    pub waterfall: WaterfallMatrix,
    /// RMS of fitted `C / sigma` over event-free traces, where `sigma` is
    /// the increment deviation of the traced pair(s).
    pub slope_rms_per_sigma: f64,
    /// Same for the fitted amplitude `A`.
    pub amplitude_rms_per_sigma: f64,
}

fn burst_window(w: &WaterfallMatrix) -> (f64, f64) {
    (w.start_time, *w.frame_times.last().unwrap_or(&w.start_time))
}

fn increment_std(column: &[f64]) -> f64 {
    let n = column.len() as f64;
    let mean = column.iter().sum::<f64>() / n;
    (column.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Selects peaks on the first calibration frame and derives the detection
/// baseline and the classification noise scale.
pub fn calibrate(fps: &[Fingerprint], cfg: &AnalysisConfig) -> Result<Calibration> {
    let reference = fps
        .first()
        .ok_or_else(|| Error::Analysis("empty calibration burst".into()))?;
    let peaks = select_peaks(reference, cfg.min_magnitude_db, cfg.min_distance_m)?;
    let waterfall = build_waterfall(fps, &peaks)?;
    let baseline = Baseline::calibrate(std::slice::from_ref(&waterfall))?;

    let n_pairs = waterfall.n_cols;
    let n_fit = cfg.calibration_fit_pairs.min(n_pairs);
    let window = burst_window(&waterfall);
    let normalized: Vec<(f64, f64)> = (0..n_fit)
        .map(|k| k * n_pairs / n_fit)
        .map(|pair| -> Result<(f64, f64)> {
            let sigma = baseline.increment_variance[pair].sqrt();
            let fit = fit_trace(&accumulate_trace(&waterfall, pair, window)?)?;
            Ok((fit.slope() / sigma, fit.amplitude() / sigma))
        })
        .collect::<Result<_>>()?;
    let rms = |sel: fn(&(f64, f64)) -> f64| {
        (normalized.iter().map(|v| sel(v).powi(2)).sum::<f64>() / normalized.len() as f64).sqrt()
    };
    Ok(Calibration {
        slope_rms_per_sigma: rms(|v| v.0),
        amplitude_rms_per_sigma: rms(|v| v.1),
        peaks,
        baseline,
        waterfall,
    })
}

impl Calibration {
    /// Classification thresholds for a trace over `pairs`, scaled by that
    /// span's event-free increment deviation.
    pub fn classify_config(&self, pairs: std::ops::RangeInclusive<usize>, cfg: &AnalysisConfig) -> ClassifyConfig {
        let sigma = increment_std(&self.waterfall.span_column(pairs));
        ClassifyConfig {
            slope_threshold: cfg.class_threshold_multiplier * self.slope_rms_per_sigma * sigma,
            amplitude_threshold: cfg.class_threshold_multiplier * self.amplitude_rms_per_sigma * sigma,
            heated_length_m: cfg.heated_length_m,
            k_t: cfg.k_t,
        }
    }
}

/// Pairs traced for characterization: the flagged run widened by one pair
/// on each side, so the trace spans the whole perturbed stretch.
pub fn characterization_span(pair_range: [usize; 2], n_pairs: usize) -> std::ops::RangeInclusive<usize> {
    pair_range[0].saturating_sub(1)..=(pair_range[1] + 1).min(n_pairs - 1)
}

/// Waterfall, detection and characterization of one burst.
pub fn analyze_burst(
    cal: &Calibration,
    fps: &[Fingerprint],
    cfg: &AnalysisConfig,
    scenario: usize,
    burst: usize,
) -> Result<(WaterfallMatrix, BurstReport)> {
    let waterfall = build_waterfall(fps, &cal.peaks)?;
    let detections = detect_events(&waterfall, &cfg.detection(cal.baseline.clone()))?;
    let window = burst_window(&waterfall);
    let events = detections
        .into_iter()
        .map(|d| -> Result<EventReport> {
            let span = characterization_span(d.pair_range, waterfall.n_cols);
            let trace = accumulate_span_trace(&waterfall, span.clone(), window)?;
            let fit = fit_trace(&trace)?;
            let class_cfg = cal.classify_config(span.clone(), cfg);
            let (class, diagnostic) = match classify(&fit, &class_cfg) {
                Ok(c) => (Some(c), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Ok(EventReport {
                detection: d,
                span: [*span.start(), *span.end()],
                fit: FitReport::new(&fit, class.as_ref(), diagnostic),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        waterfall,
        BurstReport::new(scenario, burst, [window.0, window.1], events),
    ))
}

/// Synthesizes and analyzes every burst of a scenario on one fiber.
pub fn simulate_and_analyze(
    ctx: &SimContext,
    cfg: &AnalysisConfig,
    model: &FiberModel,
    scenario: &EventScenario,
    id: usize,
) -> Result<Vec<BurstReport>> {
    let cal = calibrate(&ctx.simulate_burst(model, scenario, None)?, cfg)?;
    (0..scenario.schedule.n_bursts)
        .into_par_iter()
        .map(|b| {
            let fps = ctx.simulate_burst(model, scenario, Some(b))?;
            analyze_burst(&cal, &fps, cfg, id, b).map(|(_, report)| report)
        })
        .collect()
}
