use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Salt mixed into the fiber seed for the scatterer stream.
const SCATTER_SALT: u64 = 0x5ca7_7e12_0000_0001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    LeadIn,
    SensorSegment,
    Termination,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub length_m: f64,
    pub kind: SectionKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Connector {
    pub position_m: f64,
    pub return_loss_db: f64,
}

impl Connector {
    /// Field reflectivity `10^(-RL/20)`; power reflectivity is its square.
    pub fn amplitude(&self) -> f64 {
        10f64.powf(-self.return_loss_db / 20.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberLayout {
    pub sections: Vec<Section>,
    pub connectors: Vec<Connector>,
    pub group_index: f64,
}

impl Default for FiberLayout {
    /// 200 m lead-in, five 5 m sensor segments, 200 m termination, with
    /// connectors where the sensor patch cord joins the two long fibers.
    fn default() -> Self {
        let mut sections = vec![Section {
            length_m: 200.0,
            kind: SectionKind::LeadIn,
        }];
        sections.extend((0..5).map(|_| Section {
            length_m: 5.0,
            kind: SectionKind::SensorSegment,
        }));
        sections.push(Section {
            length_m: 200.0,
            kind: SectionKind::Termination,
        });
        FiberLayout {
            sections,
            connectors: vec![
                Connector {
                    position_m: 200.0,
                    return_loss_db: 38.0,
                },
                Connector {
                    position_m: 225.0,
                    return_loss_db: 45.0,
                },
            ],
            group_index: 1.5,
        }
    }
}

const BOUNDARY_TOL: f64 = 1e-9;

impl FiberLayout {
    pub fn total_length(&self) -> f64 {
        self.sections.iter().map(|s| s.length_m).sum()
    }

    /// Start positions of every section plus the fiber end.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.sections.len() + 1);
        let mut z = 0.0;
        out.push(z);
        for s in &self.sections {
            z += s.length_m;
            out.push(z);
        }
        out
    }

    /// `[start, end)` of every sensor segment, in order.
    pub fn sensor_segments(&self) -> Vec<[f64; 2]> {
        let bounds = self.boundaries();
        self.sections
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind == SectionKind::SensorSegment)
            .map(|(i, _)| [bounds[i], bounds[i + 1]])
            .collect()
    }

    /// True when `[a, b]` lies within a contiguous run of sensor sections.
    pub fn within_sensor(&self, a: f64, b: f64) -> bool {
        let bounds = self.boundaries();
        let mut covered = a;
        for (i, s) in self.sections.iter().enumerate() {
            let (lo, hi) = (bounds[i], bounds[i + 1]);
            if s.kind == SectionKind::SensorSegment
                && lo <= covered + BOUNDARY_TOL
                && hi > covered
            {
                covered = hi;
                if covered + BOUNDARY_TOL >= b {
                    return true;
                }
            }
        }
        false
    }

    pub fn validate(&self) -> Result<()> {
        if self.sections.is_empty() {
            return Err(Error::config("fiber.sections", "at least one section required"));
        }
        for (i, s) in self.sections.iter().enumerate() {
            if !(s.length_m.is_finite() && s.length_m > 0.0) {
                return Err(Error::config(
                    format!("fiber.sections[{i}].length_m"),
                    "must be positive and finite",
                ));
            }
        }
        if !(self.group_index.is_finite() && self.group_index > 0.0) {
            return Err(Error::config("fiber.group_index", "must be positive"));
        }
        let bounds = self.boundaries();
        for (i, c) in self.connectors.iter().enumerate() {
            if !bounds
                .iter()
                .any(|b| (b - c.position_m).abs() <= BOUNDARY_TOL)
            {
                return Err(Error::config(
                    format!("fiber.connectors[{i}].position_m"),
                    format!("{} m is not a section boundary", c.position_m),
                ));
            }
            if !(c.return_loss_db.is_finite() && c.return_loss_db > 0.0) {
                return Err(Error::config(
                    format!("fiber.connectors[{i}].return_loss_db"),
                    "must be positive",
                ));
            }
        }
        Ok(())
    }

    /// One resolution cell: the distance light travels forth and back in one
    /// symbol period.
    pub fn cell_length(&self, symbol_rate: f64) -> f64 {
        SPEED_OF_LIGHT / self.group_index / symbol_rate / 2.0
    }
}

/// Distance grid of resolution cells. Cell `j` spans `[j, j+1) * cell_length`
/// and reflects with a round-trip delay of `j` symbol periods.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub cell_length: f64,
    pub n_cells: usize,
}

impl CellGrid {
    pub fn distance(&self, cell: usize) -> f64 {
        cell as f64 * self.cell_length
    }

    pub fn cell_at(&self, distance: f64) -> usize {
        ((distance / self.cell_length).round() as usize).min(self.n_cells - 1)
    }

    /// Length of `[a, b)` that falls within cell `j`.
    pub fn overlap(&self, cell: usize, a: f64, b: f64) -> f64 {
        let lo = self.distance(cell);
        let hi = lo + self.cell_length;
        (b.min(hi) - a.max(lo)).max(0.0)
    }
}

/// Parameters of the scatterer field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackscatterParams {
    pub symbol_rate: f64,
    /// Mean Rayleigh power per cell relative to launch.
    pub backscatter_db: f64,
}

impl Default for BackscatterParams {
    fn default() -> Self {
        BackscatterParams {
            symbol_rate: 125e6,
            backscatter_db: -55.0,
        }
    }
}

/// Static complex reflectivity of every resolution cell. Immutable after
/// construction.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberModel {
    pub grid: CellGrid,
    pub scatterers: Vec<Complex64>,
    /// `(cell, amplitude)` of each connector reflection.
    pub connectors: Vec<(usize, Complex64)>,
    pub layout: FiberLayout,
    pub seed: u64,
}

/// Draws the Rayleigh field and places the connectors.
pub fn build_fiber(layout: &FiberLayout, params: &BackscatterParams, seed: u64) -> Result<FiberModel> {
    layout.validate()?;
    if !(params.symbol_rate.is_finite() && params.symbol_rate > 0.0) {
        return Err(Error::config("probe.symbol_rate_hz", "must be positive"));
    }
    let cell_length = layout.cell_length(params.symbol_rate);
    let n_cells = (layout.total_length() / cell_length - 1e-9).ceil() as usize;
    let grid = CellGrid {
        cell_length,
        n_cells,
    };
    let sigma = (10f64.powf(params.backscatter_db / 10.0) / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SCATTER_SALT);
    let scatterers = (0..n_cells)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * sigma
        })
        .collect();
    let connectors = layout
        .connectors
        .iter()
        .map(|c| (grid.cell_at(c.position_m), Complex64::new(c.amplitude(), 0.0)))
        .collect();
    Ok(FiberModel {
        grid,
        scatterers,
        connectors,
        layout: layout.clone(),
        seed,
    })
}

impl FiberModel {
    /// A model from explicit cell reflectivities, for small test fibers.
    pub fn from_cells(cells: Vec<Complex64>, cell_length: f64, layout: FiberLayout, seed: u64) -> Self {
        FiberModel {
            grid: CellGrid {
                cell_length,
                n_cells: cells.len(),
            },
            scatterers: cells,
            connectors: Vec::new(),
            layout,
            seed,
        }
    }

    /// Unperturbed reflectivity per cell: scatterers plus connectors.
    pub fn reflectivity(&self) -> Vec<Complex64> {
        let mut out = self.scatterers.clone();
        for &(cell, amp) in &self.connectors {
            out[cell] += amp;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_cells() {
        let layout = FiberLayout::default();
        layout.validate().unwrap();
        assert_eq!(layout.total_length(), 425.0);
        let model = build_fiber(&layout, &BackscatterParams::default(), 7).unwrap();
        assert!((model.grid.cell_length - 0.7994).abs() < 1e-3);
        // 531 full cells plus one partial.
        assert_eq!(model.grid.n_cells, 532);
        assert_eq!(model.connectors[0].0, 250);
    }

    #[test]
    fn seed_determines_field() {
        let layout = FiberLayout::default();
        let p = BackscatterParams::default();
        let a = build_fiber(&layout, &p, 11).unwrap();
        let b = build_fiber(&layout, &p, 11).unwrap();
        let c = build_fiber(&layout, &p, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.scatterers, c.scatterers);
    }

    #[test]
    fn connector_must_sit_on_boundary() {
        let mut layout = FiberLayout::default();
        layout.connectors[0].position_m = 201.0;
        let err = layout.validate().unwrap_err().to_string();
        assert!(err.contains("connectors[0]"), "{err}");
    }

    #[test]
    fn sensor_range_checks() {
        let layout = FiberLayout::default();
        assert!(layout.within_sensor(200.0, 205.0));
        assert!(layout.within_sensor(205.0, 225.0));
        assert!(!layout.within_sensor(195.0, 205.0));
        assert!(!layout.within_sensor(220.0, 230.0));
        assert_eq!(layout.sensor_segments().len(), 5);
    }

    #[test]
    fn connector_level() {
        let c = Connector {
            position_m: 0.0,
            return_loss_db: 38.0,
        };
        assert!((20.0 * c.amplitude().log10() + 38.0).abs() < 1e-12);
    }
}
