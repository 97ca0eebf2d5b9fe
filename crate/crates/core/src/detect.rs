//! Threshold detection and localization from waterfall column statistics.
//!
//! The temporal mean of a column responds to a steady phase drift
//! (temperature change); its variance responds to oscillation (vibration).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber_sim::{Event, EventScenario};
use crate::waterfall::WaterfallMatrix;

/// Column-wise mean of the wrapped increments.
pub fn mean_increment_profile(w: &WaterfallMatrix) -> Result<Vec<f64>> {
    if w.n_rows < 1 {
        return Err(Error::Analysis("mean profile needs at least 2 frames".into()));
    }
    let n = w.n_rows as f64;
    Ok((0..w.n_cols).map(|c| w.column(c).sum::<f64>() / n).collect())
}

/// Column-wise unbiased variance of the increments.
pub fn variance_increment_profile(w: &WaterfallMatrix) -> Result<Vec<f64>> {
    if w.n_rows < 2 {
        return Err(Error::Analysis("variance profile needs at least 3 frames".into()));
    }
    let means = mean_increment_profile(w)?;
    let n = w.n_rows as f64;
    Ok(means
        .iter()
        .enumerate()
        .map(|(c, m)| w.column(c).map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
        .collect())
}

/// Per-pair noise statistics measured on event-free frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    /// Pooled unbiased increment variance of every pair, rad².
    pub increment_variance: Vec<f64>,
    /// Event-free frames the estimate was drawn from.
    pub n_frames: usize,
}

/// Fewest event-free frames accepted for a baseline.
pub const MIN_BASELINE_FRAMES: usize = 10;

impl Baseline {
    /// Pools the increment variance over one or more event-free waterfalls
    /// sharing one peak set.
    pub fn calibrate(waterfalls: &[WaterfallMatrix]) -> Result<Self> {
        let first = waterfalls
            .first()
            .ok_or_else(|| Error::Analysis("no calibration waterfalls".into()))?;
        let n_cols = first.n_cols;
        let mut ss = vec![0.0; n_cols];
        let mut dof = 0usize;
        let mut frames = 0usize;
        for w in waterfalls {
            if w.n_cols != n_cols {
                return Err(Error::Analysis("calibration waterfalls disagree on pair count".into()));
            }
            if w.n_rows < 2 {
                continue;
            }
            let var = variance_increment_profile(w)?;
            for (acc, v) in ss.iter_mut().zip(var) {
                *acc += v * (w.n_rows - 1) as f64;
            }
            dof += w.n_rows - 1;
            frames += w.n_rows + 1;
        }
        if frames < MIN_BASELINE_FRAMES {
            return Err(Error::Analysis(format!(
                "baseline needs at least {MIN_BASELINE_FRAMES} event-free frames, got {frames}"
            )));
        }
        Ok(Baseline {
            increment_variance: ss.into_iter().map(|s| s / dof as f64).collect(),
            n_frames: frames,
        })
    }

    /// Standard deviation of the column mean over `n_increments` increments.
    ///
    /// With white pair-phase noise the mean telescopes to
    /// `(psi_last - psi_first) / n`, so its deviation is `sqrt(var) / n`.
    pub fn mean_std(&self, pair: usize, n_increments: usize) -> f64 {
        self.increment_variance[pair].sqrt() / n_increments as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Temperature threshold in multiples of the baseline deviation of the
    /// mean statistic.
    pub temp_threshold_sigma: f64,
    /// Vibration threshold in multiples of the baseline increment variance.
    pub vib_threshold_sigma: f64,
    pub baseline: Option<Baseline>,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            temp_threshold_sigma: 5.0,
            vib_threshold_sigma: 5.0,
            baseline: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionKind {
    Temperature,
    Vibration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectedEvent {
    pub position_m: f64,
    pub kind: DetectionKind,
    /// Mean increment (rad) or increment variance (rad²) at the strongest pair.
    pub statistic_value: f64,
    /// The threshold the statistic was compared against.
    pub threshold: f64,
    /// Strongest pair of the merged run.
    pub pair_index: usize,
    /// First and last flagged pair of the merged run.
    pub pair_range: [usize; 2],
    pub time_window: [f64; 2],
}

fn flag_runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().chain(std::iter::once(&false)).enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    runs
}

/// Flags pairs whose mean or variance exceeds its calibrated threshold, then
/// merges contiguous flagged pairs into one event located at the pair with
/// the largest statistic.
pub fn detect_events(w: &WaterfallMatrix, cfg: &DetectionConfig) -> Result<Vec<DetectedEvent>> {
    let baseline = cfg
        .baseline
        .as_ref()
        .ok_or_else(|| Error::Analysis("detection config has no calibrated baseline".into()))?;
    if baseline.increment_variance.len() != w.n_cols {
        return Err(Error::Analysis(format!(
            "baseline covers {} pairs, waterfall has {}",
            baseline.increment_variance.len(),
            w.n_cols
        )));
    }
    if !(cfg.temp_threshold_sigma > 0.0 && cfg.vib_threshold_sigma > 0.0) {
        return Err(Error::config("analysis.thresholds", "thresholds must be positive"));
    }
    let means = mean_increment_profile(w)?;
    let vars = variance_increment_profile(w)?;
    let window = [w.start_time, *w.frame_times.last().unwrap_or(&w.start_time)];

    let temp_thr: Vec<f64> = (0..w.n_cols)
        .map(|p| cfg.temp_threshold_sigma * baseline.mean_std(p, w.n_rows))
        .collect();
    let vib_thr: Vec<f64> = baseline
        .increment_variance
        .iter()
        .map(|v| cfg.vib_threshold_sigma * v)
        .collect();

    let mut events = Vec::new();
    let mut emit = |kind: DetectionKind, stat: &[f64], score: &dyn Fn(usize) -> f64, thr: &[f64]| {
        let flags: Vec<bool> = (0..w.n_cols).map(|p| score(p) > thr[p]).collect();
        for (a, b) in flag_runs(&flags) {
            // Ties resolve to the lowest pair index.
            let best = (a..=b).fold(a, |best, p| if score(p) > score(best) { p } else { best });
            events.push(DetectedEvent {
                position_m: w.pair_positions[best],
                kind,
                statistic_value: stat[best],
                threshold: thr[best],
                pair_index: best,
                pair_range: [a, b],
                time_window: window,
            });
        }
    };
    emit(DetectionKind::Temperature, &means, &|p| means[p].abs(), &temp_thr);
    emit(DetectionKind::Vibration, &vars, &|p| vars[p], &vib_thr);
    events.sort_by(|a, b| a.pair_index.cmp(&b.pair_index).then(a.kind.cmp(&b.kind)));
    Ok(events)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationStats {
    pub mae_m: f64,
    /// Population standard deviation of the signed errors.
    pub std_m: f64,
    pub pct_within_5m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    /// Signed `detected - truth` error per matched pair.
    pub errors_m: Vec<f64>,
    pub stats: Option<LocalizationStats>,
    pub unmatched_detections: usize,
    pub missed_truth: usize,
}

/// Default nearest-neighbour matching gate.
pub const MATCH_GATE_M: f64 = 10.0;

/// One-to-one greedy nearest matching of detected positions to truth
/// positions within `gate_m`. Returns `(detection, truth)` index pairs.
pub fn match_positions(detected: &[f64], truth: &[f64], gate_m: f64) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(f64, usize, usize)> = detected
        .iter()
        .enumerate()
        .flat_map(|(d, &x)| truth.iter().enumerate().map(move |(t, &y)| ((x - y).abs(), d, t)))
        .filter(|&(dist, _, _)| dist <= gate_m)
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_d = vec![false; detected.len()];
    let mut used_t = vec![false; truth.len()];
    let mut out = Vec::new();
    for (_, d, t) in candidates {
        if !used_d[d] && !used_t[t] {
            used_d[d] = true;
            used_t[t] = true;
            out.push((d, t));
        }
    }
    out.sort_unstable();
    out
}

pub fn summarize_errors(errors: &[f64]) -> Option<LocalizationStats> {
    if errors.is_empty() {
        return None;
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    Some(LocalizationStats {
        mae_m: errors.iter().map(|e| e.abs()).sum::<f64>() / n,
        std_m: (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt(),
        pct_within_5m: 100.0 * errors.iter().filter(|e| e.abs() <= 5.0).count() as f64 / n,
    })
}

/// Localization error of detections against the midpoints of the truth
/// event ranges. Unmatched detections are excluded from the statistics and
/// counted separately.
pub fn localization_error(detected: &[DetectedEvent], truth: &EventScenario, gate_m: f64) -> LocalizationReport {
    let truth_pos: Vec<f64> = truth.events.iter().map(Event::midpoint).collect();
    let det_pos: Vec<f64> = detected.iter().map(|d| d.position_m).collect();
    localization_from_positions(&det_pos, &truth_pos, gate_m)
}

pub fn localization_from_positions(detected: &[f64], truth: &[f64], gate_m: f64) -> LocalizationReport {
    let matches = match_positions(detected, truth, gate_m);
    let errors_m: Vec<f64> = matches.iter().map(|&(d, t)| detected[d] - truth[t]).collect();
    LocalizationReport {
        stats: summarize_errors(&errors_m),
        unmatched_detections: detected.len() - matches.len(),
        missed_truth: truth.len() - matches.len(),
        errors_m,
    }
}
