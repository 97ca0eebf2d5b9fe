use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waterfall::WaterfallMatrix;

/// Cumulative (unwrapped) pair phase over one burst, referenced so that
/// both the first time and the first phase are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    /// Seconds since the first sample.
    pub times: Vec<f64>,
    pub phase: Vec<f64>,
    /// Absolute time of the first sample.
    pub start_time: f64,
}

impl PhaseTrace {
    /// Builds a trace from absolute times and phases, re-referencing both to
    /// the first sample.
    pub fn new(times: &[f64], phase: &[f64]) -> Result<Self> {
        if times.len() != phase.len() {
            return Err(Error::Data(format!(
                "{} times but {} phase samples",
                times.len(),
                phase.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::Data("empty trace".into()));
        }
        if let Some(i) = times.iter().chain(phase).position(|x| !x.is_finite()) {
            return Err(Error::Data(format!("non-finite value at sample {}", i % times.len())));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Data(format!("times not strictly increasing at sample {}", i + 1)));
        }
        let (t0, p0) = (times[0], phase[0]);
        Ok(PhaseTrace {
            times: times.iter().map(|t| t - t0).collect(),
            phase: phase.iter().map(|p| p - p0).collect(),
            start_time: t0,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// Fewest frames a trace may span.
pub const MIN_TRACE_FRAMES: usize = 4;

fn frame_bounds(w: &WaterfallMatrix, burst: (f64, f64)) -> Result<(usize, usize)> {
    let times = w.all_frame_times();
    let first = times.iter().position(|&t| t >= burst.0);
    let last = times.iter().rposition(|&t| t <= burst.1);
    match (first, last) {
        (Some(a), Some(b)) if b + 1 >= a + MIN_TRACE_FRAMES => Ok((a, b)),
        _ => Err(Error::Analysis(format!(
            "burst [{}, {}] s spans fewer than {MIN_TRACE_FRAMES} frames",
            burst.0, burst.1
        ))),
    }
}

fn cumulative(times: &[f64], increments: &[f64], a: usize, b: usize) -> PhaseTrace {
    let mut phase = Vec::with_capacity(b - a + 1);
    let mut acc = 0.0;
    phase.push(0.0);
    // Row r is the increment from frame r to frame r + 1.
    for inc in &increments[a..b] {
        acc += inc;
        phase.push(acc);
    }
    let t0 = times[a];
    PhaseTrace {
        times: times[a..=b].iter().map(|t| t - t0).collect(),
        phase,
        start_time: t0,
    }
}

/// Cumulative phase of one pair over the frames inside `burst`
/// (inclusive absolute times).
///
/// Summing wrapped increments is the same as unwrapping the pair phase in
/// time and re-referencing it to the first frame.
pub fn accumulate_trace(w: &WaterfallMatrix, pair: usize, burst: (f64, f64)) -> Result<PhaseTrace> {
    if pair >= w.n_cols {
        return Err(Error::Analysis(format!("pair {pair} out of range ({} pairs)", w.n_cols)));
    }
    let (a, b) = frame_bounds(w, burst)?;
    let col: Vec<f64> = w.column(pair).collect();
    Ok(cumulative(&w.all_frame_times(), &col, a, b))
}

/// Cumulative phase across a run of consecutive pairs, i.e. between the
/// first peak of `pairs.start()` and the last peak of `pairs.end()`.
pub fn accumulate_span_trace(
    w: &WaterfallMatrix,
    pairs: std::ops::RangeInclusive<usize>,
    burst: (f64, f64),
) -> Result<PhaseTrace> {
    if pairs.is_empty() || *pairs.end() >= w.n_cols {
        return Err(Error::Analysis(format!("pair span {pairs:?} out of range ({} pairs)", w.n_cols)));
    }
    let (a, b) = frame_bounds(w, burst)?;
    Ok(cumulative(&w.all_frame_times(), &w.span_column(pairs), a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(incs: Vec<f64>) -> WaterfallMatrix {
        let n = incs.len();
        WaterfallMatrix {
            values: incs,
            n_rows: n,
            n_cols: 1,
            pair_positions: vec![1.0],
            pair_bounds: vec![[0.0, 2.0]],
            frame_times: (1..=n).map(|k| k as f64 * 0.01).collect(),
            start_time: 0.0,
        }
    }

    #[test]
    fn zero_and_constant_increments() {
        let z = accumulate_trace(&column(vec![0.0; 9]), 0, (0.0, 1.0)).unwrap();
        assert_eq!(z.phase, vec![0.0; 10]);
        let c = accumulate_trace(&column(vec![0.25; 9]), 0, (0.0, 1.0)).unwrap();
        for (k, p) in c.phase.iter().enumerate() {
            assert!((p - 0.25 * k as f64).abs() < 1e-12);
        }
        assert!((c.times[3] - 0.03).abs() < 1e-15);
    }

    #[test]
    fn sub_burst_is_re_referenced() {
        let t = accumulate_trace(&column(vec![0.1; 9]), 0, (0.035, 0.085)).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.phase[0], 0.0);
        assert!((t.start_time - 0.04).abs() < 1e-15);
    }

    #[test]
    fn short_burst_rejected() {
        assert!(accumulate_trace(&column(vec![0.1; 9]), 0, (0.0, 0.025)).is_err());
        assert!(accumulate_trace(&column(vec![0.1; 9]), 1, (0.0, 1.0)).is_err());
    }

    #[test]
    fn trace_validation() {
        assert!(PhaseTrace::new(&[0.0, 1.0], &[1.0, f64::NAN]).is_err());
        assert!(PhaseTrace::new(&[0.0, 0.0], &[1.0, 2.0]).is_err());
        let t = PhaseTrace::new(&[5.0, 6.0], &[1.0, 2.0]).unwrap();
        assert_eq!(t.phase, vec![0.0, 1.0]);
        assert_eq!(t.times, vec![0.0, 1.0]);
    }
}
