//! Simulated datasets on disk.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/truth.json
//! <dir>/scenario_0000/calibration.{bin,json}
//! <dir>/scenario_0000/burst_0000.{bin,json}
//! ```
//!
//! Each fingerprint series is a frame-major array of little-endian
//! `complex64` values (`f32` real, `f32` imaginary) or a long-form CSV, with
//! a JSON sidecar describing its shape and frame times.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, StorageFormat};
use super::schema::{read_json, write_json, SCHEMA_VERSION};
use super::tabular::{read_series_csv, write_series_csv};
use crate::correlator::Fingerprint;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRUTH_FILE: &str = "truth.json";
pub const CALIBRATION_STEM: &str = "calibration";
pub const BINARY_DTYPE: &str = "complex64-le";
pub const CSV_DTYPE: &str = "csv";

pub fn scenario_dir(id: usize) -> String {
    format!("scenario_{id:04}")
}

pub fn burst_stem(burst: usize) -> String {
    format!("burst_{burst:04}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSidecar {
    pub schema_version: String,
    pub n_frames: usize,
    pub n_cells: usize,
    pub cell_length_m: f64,
    pub frame_times_s: Vec<f64>,
    pub dtype: String,
    pub data_file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestScenario {
    pub id: usize,
    pub fiber_seed: u64,
    pub dir: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: String,
    pub generator: String,
    pub seed: Option<u64>,
    pub n_bursts: usize,
    pub frames_per_burst: usize,
    pub n_cells: usize,
    pub cell_length_m: f64,
    pub scenarios: Vec<ManifestScenario>,
    /// The configuration that produced the dataset, defaults filled in.
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(config: &RunConfig, frames_per_burst: usize, n_cells: usize, cell_length_m: f64) -> Self {
        Manifest {
            schema_version: SCHEMA_VERSION.into(),
            generator: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).into(),
            seed: config.campaign_spec().and_then(|c| c.seed).or(config.seed),
            n_bursts: config.schedule.n_bursts,
            frames_per_burst,
            n_cells,
            cell_length_m,
            scenarios: Vec::new(),
            config: config.clone(),
        }
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Err(Error::Data(format!("no dataset manifest at {}", path.display())));
        }
        read_json(&path)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }
}

/// Writes `<dir>/<stem>.{bin|csv}` and the `<stem>.json` sidecar.
pub fn write_series(dir: &Path, stem: &str, fps: &[Fingerprint], format: StorageFormat) -> Result<()> {
    let n_cells = fps.first().map_or(0, Fingerprint::len);
    if fps.iter().any(|f| f.len() != n_cells) {
        return Err(Error::Data("fingerprints of one series differ in length".into()));
    }
    let (dtype, data_file) = match format {
        StorageFormat::Binary => (BINARY_DTYPE, format!("{stem}.bin")),
        StorageFormat::Csv => (CSV_DTYPE, format!("{stem}.csv")),
    };
    let data_path = dir.join(&data_file);
    match format {
        StorageFormat::Binary => {
            let mut bytes = Vec::with_capacity(fps.len() * n_cells * 8);
            for z in fps.iter().flat_map(|f| &f.cells) {
                bytes.extend_from_slice(&(z.re as f32).to_le_bytes());
                bytes.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
            std::fs::write(&data_path, bytes).map_err(|e| Error::io(&data_path, e))?;
        }
        StorageFormat::Csv => write_series_csv(&data_path, fps)?,
    }
    let sidecar = SeriesSidecar {
        schema_version: SCHEMA_VERSION.into(),
        n_frames: fps.len(),
        n_cells,
        cell_length_m: fps.first().map_or(0.0, |f| f.cell_length),
        frame_times_s: fps.iter().map(|f| f.frame_time).collect(),
        dtype: dtype.into(),
        data_file,
    };
    write_json(&dir.join(format!("{stem}.json")), &sidecar)
}

/// Reads a series written by [`write_series`].
pub fn read_series(dir: &Path, stem: &str) -> Result<Vec<Fingerprint>> {
    let sidecar: SeriesSidecar = read_json(&dir.join(format!("{stem}.json")))?;
    let data_path: PathBuf = dir.join(&sidecar.data_file);
    if sidecar.frame_times_s.len() != sidecar.n_frames {
        return Err(Error::Data(format!(
            "{stem}.json: {} frame times for {} frames",
            sidecar.frame_times_s.len(),
            sidecar.n_frames
        )));
    }
    let fps = match sidecar.dtype.as_str() {
        BINARY_DTYPE => {
            let bytes = std::fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
            let expected = sidecar.n_frames * sidecar.n_cells * 8;
            if bytes.len() != expected {
                return Err(Error::Data(format!(
                    "{}: {} bytes, expected {expected}",
                    data_path.display(),
                    bytes.len()
                )));
            }
            let f32_at = |k: usize| f32::from_le_bytes(bytes[k..k + 4].try_into().expect("4-byte slice")) as f64;
            sidecar
                .frame_times_s
                .iter()
                .enumerate()
                .map(|(f, &t)| Fingerprint {
                    cells: (0..sidecar.n_cells)
                        .map(|c| {
                            let k = (f * sidecar.n_cells + c) * 8;
                            Complex64::new(f32_at(k), f32_at(k + 4))
                        })
                        .collect(),
                    cell_length: sidecar.cell_length_m,
                    frame_time: t,
                })
                .collect()
        }
        CSV_DTYPE => {
            let fps = read_series_csv(&data_path, sidecar.cell_length_m)?;
            if fps.len() != sidecar.n_frames || fps.iter().any(|f| f.len() != sidecar.n_cells) {
                return Err(Error::Data(format!("{}: shape disagrees with sidecar", data_path.display())));
            }
            fps
        }
        other => return Err(Error::Data(format!("{stem}.json: unknown dtype {other:?}"))),
    };
    Ok(fps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> Vec<Fingerprint> {
        (0..2)
            .map(|f| Fingerprint {
                cells: vec![Complex64::new(0.5, -0.25), Complex64::new(f as f64, 1e-3)],
                cell_length: 0.8,
                frame_time: f as f64 * 0.5,
            })
            .collect()
    }

    #[test]
    fn binary_round_trip_is_exact_for_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        write_series(dir.path(), "b", &series(), StorageFormat::Binary).unwrap();
        let back = read_series(dir.path(), "b").unwrap();
        assert_eq!(back[0].cells[0], Complex64::new(0.5, -0.25));
        assert_eq!(back[1].frame_time, 0.5);
        assert_eq!(std::fs::metadata(dir.path().join("b.bin")).unwrap().len(), 32);
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_series(dir.path(), "b", &series(), StorageFormat::Binary).unwrap();
        std::fs::write(dir.path().join("b.bin"), [0u8; 12]).unwrap();
        assert!(matches!(read_series(dir.path(), "b"), Err(Error::Data(_))));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write_series(dir.path(), "c", &series(), StorageFormat::Csv).unwrap();
        assert_eq!(read_series(dir.path(), "c").unwrap(), series());
    }
}
