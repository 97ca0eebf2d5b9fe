//! CSV files read by people and plotting scripts.

use std::path::Path;

use num_complex::Complex64;

use crate::correlator::Fingerprint;
use crate::error::{Error, Result};
use crate::waterfall::WaterfallMatrix;

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Data(format!("{}: {:?}", path.display(), other)),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn write_rows<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One fingerprint as `cell_index, distance_m, magnitude_dB, phase_rad`.
pub fn write_fingerprint_csv(path: &Path, fp: &Fingerprint) -> Result<()> {
    let header = ["cell_index", "distance_m", "magnitude_dB", "phase_rad"].map(String::from);
    write_rows(
        path,
        &header,
        (0..fp.len()).map(|c| {
            [
                c.to_string(),
                fp.distance(c).to_string(),
                fp.magnitude_db(c).to_string(),
                fp.phase(c).to_string(),
            ]
        }),
    )
}

/// A burst of fingerprints in long form: one row per frame and cell, with
/// the exact complex value in `re, im`.
pub fn write_series_csv(path: &Path, fps: &[Fingerprint]) -> Result<()> {
    let header = [
        "frame", "time_s", "cell_index", "distance_m", "re", "im", "magnitude_dB", "phase_rad",
    ]
    .map(String::from);
    write_rows(
        path,
        &header,
        fps.iter().enumerate().flat_map(|(f, fp)| {
            (0..fp.len()).map(move |c| {
                [
                    f.to_string(),
                    fp.frame_time.to_string(),
                    c.to_string(),
                    fp.distance(c).to_string(),
                    fp.cells[c].re.to_string(),
                    fp.cells[c].im.to_string(),
                    fp.magnitude_db(c).to_string(),
                    fp.phase(c).to_string(),
                ]
            })
        }),
    )
}

fn parse_field(path: &Path, row: usize, name: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Data(format!("{}: row {row}: `{name}` is not a number: {s:?}", path.display())))
}

/// Reads a series written by [`write_series_csv`].
pub fn read_series_csv(path: &Path, cell_length: f64) -> Result<Vec<Fingerprint>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut fps: Vec<Fingerprint> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = i + 2;
        let field = |k: usize, name: &str| parse_field(path, row, name, rec.get(k).unwrap_or(""));
        let frame = field(0, "frame")? as usize;
        let time = field(1, "time_s")?;
        let z = Complex64::new(field(4, "re")?, field(5, "im")?);
        if frame == fps.len() {
            fps.push(Fingerprint {
                cells: Vec::new(),
                cell_length,
                frame_time: time,
            });
        } else if frame + 1 != fps.len() {
            return Err(Error::Data(format!("{}: row {row}: frames out of order", path.display())));
        }
        fps[frame].cells.push(z);
    }
    Ok(fps)
}

/// Waterfall as a matrix: the header row holds the pair positions (m), the
/// first column the frame times (s).
pub fn write_waterfall_csv(path: &Path, w: &WaterfallMatrix) -> Result<()> {
    let header: Vec<String> = std::iter::once("time_s \\ position_m".to_string())
        .chain(w.pair_positions.iter().map(|p| p.to_string()))
        .collect();
    write_rows(
        path,
        &header,
        (0..w.n_rows).map(|r| {
            std::iter::once(w.frame_times[r].to_string())
                .chain(w.row(r).iter().map(|v| v.to_string()))
                .collect::<Vec<_>>()
        }),
    )
}

/// Reads a two-column `t_s, phase_rad` trace. A non-numeric first line is
/// taken as a header. Blank lines and `#` comments are skipped.
pub fn read_trace_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let (mut t, mut y) = (Vec::new(), Vec::new());
    let mut first = true;
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() < 2 {
            return Err(Error::Data(format!(
                "{}: row {row}: expected two columns (t_s, phase_rad)",
                path.display()
            )));
        }
        if std::mem::take(&mut first) && rec[0].parse::<f64>().is_err() {
            continue;
        }
        let tv = parse_field(path, row, "t_s", &rec[0])?;
        let yv = parse_field(path, row, "phase_rad", &rec[1])?;
        if !tv.is_finite() || !yv.is_finite() {
            return Err(Error::Data(format!("{}: row {row}: non-finite value", path.display())));
        }
        t.push(tv);
        y.push(yv);
    }
    Ok((t, y))
}

/// Fixed-width histogram over `[lo, hi)` as `bin_lo, bin_hi, count`.
pub fn write_histogram_csv(path: &Path, values: &[f64], lo: f64, hi: f64, bin: f64) -> Result<()> {
    let n = ((hi - lo) / bin).ceil().max(1.0) as usize;
    let mut counts = vec![0usize; n];
    for &v in values {
        if v >= lo && v < hi {
            counts[(((v - lo) / bin) as usize).min(n - 1)] += 1;
        }
    }
    let header = ["bin_lo", "bin_hi", "count"].map(String::from);
    write_rows(
        path,
        &header,
        counts.iter().enumerate().map(|(k, c)| {
            let a = lo + k as f64 * bin;
            [a.to_string(), (a + bin).to_string(), c.to_string()]
        }),
    )
}
