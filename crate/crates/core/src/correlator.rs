//! Pulse-compression correlation of received waveforms against the probe.
//!
//! Output cells sit on the symbol-period lag grid, one cell per resolution
//! cell, and are divided by the probe energy so a unit reflector produces a
//! unit-magnitude cell.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::probe::{sample_frame, ProbeFrame};

/// Distance-resolved complex reflectivity of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Fingerprint {
    pub cells: Vec<Complex64>,
    pub cell_length: f64,
    pub frame_time: f64,
}

impl Fingerprint {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn distance(&self, cell: usize) -> f64 {
        cell as f64 * self.cell_length
    }

    /// `20 log10 |cell|`, referenced to a unit (full) reflector.
    pub fn magnitude_db(&self, cell: usize) -> f64 {
        20.0 * self.cells[cell].norm().log10()
    }

    pub fn phase(&self, cell: usize) -> f64 {
        crate::waterfall::wrap_phase(self.cells[cell].arg())
    }

    pub fn truncate(&mut self, n_cells: usize) {
        self.cells.truncate(n_cells);
    }
}

/// Matched filter for one probe frame.
pub struct Correlator {
    reference: Vec<Complex64>,
    samples_per_symbol: usize,
    energy: f64,
    cell_length: f64,
}

impl Correlator {
    pub fn new(probe: &ProbeFrame, cell_length: f64) -> Self {
        let reference = sample_frame(probe);
        let energy = reference.iter().map(|z| z.norm_sqr()).sum();
        Correlator {
            reference,
            samples_per_symbol: probe.samples_per_symbol,
            energy,
            cell_length,
        }
    }

    fn output_len(&self, received: usize) -> Result<usize> {
        if received < self.reference.len() {
            return Err(Error::Analysis(format!(
                "received waveform of {received} samples shorter than the {}-sample probe",
                self.reference.len()
            )));
        }
        if self.energy == 0.0 {
            return Err(Error::Analysis("probe has zero energy".into()));
        }
        Ok((received - self.reference.len()) / self.samples_per_symbol + 1)
    }

    /// FFT fast-convolution correlation.
    pub fn correlate(&self, received: &[Complex64], frame_time: f64) -> Result<Fingerprint> {
        let n_out = self.output_len(received.len())?;
        let size = (received.len() + self.reference.len() - 1).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);

        let mut rx = vec![Complex64::new(0.0, 0.0); size];
        rx[..received.len()].copy_from_slice(received);
        let mut tx = vec![Complex64::new(0.0, 0.0); size];
        tx[..self.reference.len()].copy_from_slice(&self.reference);
        fwd.process(&mut rx);
        fwd.process(&mut tx);
        for (r, t) in rx.iter_mut().zip(&tx) {
            *r *= t.conj();
        }
        inv.process(&mut rx);

        let scale = 1.0 / (size as f64 * self.energy);
        let cells = (0..n_out)
            .map(|j| rx[j * self.samples_per_symbol] * scale)
            .collect();
        Ok(Fingerprint {
            cells,
            cell_length: self.cell_length,
            frame_time,
        })
    }

    /// Direct-summation correlation over the nonzero probe samples.
    pub fn correlate_direct(&self, received: &[Complex64], frame_time: f64) -> Result<Fingerprint> {
        let n_out = self.output_len(received.len())?;
        let support: Vec<(usize, Complex64)> = self
            .reference
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm_sqr() > 0.0)
            .map(|(n, z)| (n, z.conj()))
            .collect();
        let cells = (0..n_out)
            .map(|j| {
                let lag = j * self.samples_per_symbol;
                let acc: Complex64 = support.iter().map(|&(n, p)| received[n + lag] * p).sum();
                acc / self.energy
            })
            .collect();
        Ok(Fingerprint {
            cells,
            cell_length: self.cell_length,
            frame_time,
        })
    }
}

/// Correlates `received` against `probe` with the FFT path.
pub fn correlate(received: &[Complex64], probe: &ProbeFrame, cell_length: f64) -> Result<Fingerprint> {
    Correlator::new(probe, cell_length).correlate(received, 0.0)
}

/// Theoretical pulse-compression SNR gain over a single symbol of equal peak
/// power, in dB.
pub fn correlation_gain(probe: &ProbeFrame) -> f64 {
    10.0 * (probe.nonzero_count() as f64).log10()
}
