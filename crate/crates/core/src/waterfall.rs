//! Peak selection on a reference fingerprint, spatial-differential phase
//! between consecutive peaks, and the temporal phase-increment waterfall.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::correlator::Fingerprint;
use crate::error::{Error, Result};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    PI - (PI - x).rem_euclid(TAU)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub cell_index: usize,
    pub distance_m: f64,
    pub magnitude_db: f64,
}

/// Peaks sorted by distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    pub min_magnitude_db: f64,
    pub min_distance_m: f64,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn n_pairs(&self) -> usize {
        self.peaks.len().saturating_sub(1)
    }

    /// Midpoint of each consecutive peak pair.
    pub fn pair_positions(&self) -> Vec<f64> {
        self.peaks
            .windows(2)
            .map(|w| 0.5 * (w[0].distance_m + w[1].distance_m))
            .collect()
    }

    /// `[start, end]` distance of each consecutive peak pair.
    pub fn pair_bounds(&self) -> Vec<[f64; 2]> {
        self.peaks
            .windows(2)
            .map(|w| [w[0].distance_m, w[1].distance_m])
            .collect()
    }
}

/// Greedy peak picking.
///
/// Local maxima of `|cell|` at or above `min_magnitude_db` are accepted in
/// descending magnitude order (ties: lowest cell index first); a candidate
/// closer than `min_distance_m` to an accepted peak is dropped.
pub fn select_peaks(fp: &Fingerprint, min_magnitude_db: f64, min_distance_m: f64) -> Result<PeakSet> {
    if !(min_distance_m >= fp.cell_length) {
        return Err(Error::config(
            "analysis.min_distance_m",
            format!(
                "{min_distance_m} m is below the {:.3} m cell length",
                fp.cell_length
            ),
        ));
    }
    let mag: Vec<f64> = fp.cells.iter().map(|c| c.norm()).collect();
    let floor = 10f64.powf(min_magnitude_db / 20.0);
    let mut candidates: Vec<usize> = (0..mag.len())
        .filter(|&j| {
            let left = j.checked_sub(1).map_or(f64::NEG_INFINITY, |i| mag[i]);
            let right = mag.get(j + 1).copied().unwrap_or(f64::NEG_INFINITY);
            mag[j] >= floor && mag[j] >= left && mag[j] >= right
        })
        .collect();
    candidates.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));

    let mut accepted: Vec<usize> = Vec::new();
    for c in candidates {
        let clear = accepted
            .iter()
            .all(|&a| (a.abs_diff(c) as f64) * fp.cell_length >= min_distance_m);
        if clear {
            accepted.push(c);
        }
    }
    if accepted.len() < 2 {
        return Err(Error::Analysis(format!(
            "{} peak(s) above {min_magnitude_db} dB; at least 2 needed for phase pairs",
            accepted.len()
        )));
    }
    accepted.sort_unstable();
    Ok(PeakSet {
        peaks: accepted
            .into_iter()
            .map(|j| Peak {
                cell_index: j,
                distance_m: fp.distance(j),
                magnitude_db: fp.magnitude_db(j),
            })
            .collect(),
        min_magnitude_db,
        min_distance_m,
    })
}

/// `arg(cells[p+1] * conj(cells[p]))` for each consecutive peak pair.
pub fn pair_phase(fp: &Fingerprint, peaks: &PeakSet) -> Vec<f64> {
    peaks
        .peaks
        .windows(2)
        .map(|w| {
            let z: Complex64 = fp.cells[w[1].cell_index] * fp.cells[w[0].cell_index].conj();
            wrap_phase(z.arg())
        })
        .collect()
}

/// Phase increments `[frame x pair]`.
///
/// Row `r` holds `wrap(psi(r + 1) - psi(r))`, the change from frame `r` to
/// frame `r + 1`; there is no row for the first frame. `frame_times[r]` is
/// the time of frame `r + 1`, `start_time` the time of frame 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaterfallMatrix {
    pub values: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub pair_positions: Vec<f64>,
    pub pair_bounds: Vec<[f64; 2]>,
    pub frame_times: Vec<f64>,
    pub start_time: f64,
}

impl WaterfallMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows).map(move |r| self.get(r, col))
    }

    /// Times of all frames, including the first.
    pub fn all_frame_times(&self) -> Vec<f64> {
        std::iter::once(self.start_time)
            .chain(self.frame_times.iter().copied())
            .collect()
    }

    /// Sum of columns `cols`, the increments of the phase between the first
    /// peak of the first pair and the last peak of the last pair.
    pub fn span_column(&self, cols: std::ops::RangeInclusive<usize>) -> Vec<f64> {
        (0..self.n_rows)
            .map(|r| wrap_phase(cols.clone().map(|c| self.get(r, c)).sum()))
            .collect()
    }
}

/// Stacks per-frame pair-phase increments. Peaks are fixed (chosen on a
/// reference frame) and reused for every fingerprint.
pub fn build_waterfall(fps: &[Fingerprint], peaks: &PeakSet) -> Result<WaterfallMatrix> {
    let first = fps
        .first()
        .ok_or_else(|| Error::Analysis("no fingerprints".into()))?;
    if let Some((i, fp)) = fps.iter().enumerate().find(|(_, fp)| fp.len() != first.len()) {
        return Err(Error::Analysis(format!(
            "fingerprint {i} has {} cells, expected {}",
            fp.len(),
            first.len()
        )));
    }
    if let Some(p) = peaks.peaks.iter().find(|p| p.cell_index >= first.len()) {
        return Err(Error::Analysis(format!(
            "peak at cell {} outside {}-cell fingerprint",
            p.cell_index,
            first.len()
        )));
    }
    let n_cols = peaks.n_pairs();
    let mut prev = pair_phase(first, peaks);
    let mut values = Vec::with_capacity((fps.len() - 1) * n_cols);
    for fp in &fps[1..] {
        let cur = pair_phase(fp, peaks);
        values.extend(cur.iter().zip(&prev).map(|(c, p)| wrap_phase(c - p)));
        prev = cur;
    }
    Ok(WaterfallMatrix {
        values,
        n_rows: fps.len() - 1,
        n_cols,
        pair_positions: peaks.pair_positions(),
        pair_bounds: peaks.pair_bounds(),
        frame_times: fps[1..].iter().map(|f| f.frame_time).collect(),
        start_time: first.frame_time,
    })
}
