use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::layout::FiberModel;
use super::scenario::{round_trip_phase, EventScenario};
use crate::correlator::Fingerprint;
use crate::error::{Error, Result};
use crate::probe::{symbol_field, ProbeFrame};

const NOISE_SALT: u64 = 0x0e15_e000_0000_0002;
const PHASE_WALK_SALT: u64 = 0x1a5e_4000_0000_0003;

/// Identifies an independent random stream for one acquired frame.
///
/// Streams depend only on `(fiber seed, burst, frame)`, so frames can be
/// synthesized in any order or in parallel with identical results.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FrameId {
    /// 0 is reserved for the event-free calibration burst; measurement bursts
    /// start at 1.
    pub burst: u32,
    pub frame: u32,
}

impl FrameId {
    pub fn stream(&self) -> u64 {
        ((self.burst as u64) << 32) | self.frame as u64
    }
}

fn frame_rng(seed: u64, salt: u64, id: FrameId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    rng.set_stream(id.stream());
    rng
}

fn complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let sigma = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * sigma
}

/// Receiver impairments for the waveform path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Complex white-noise power per receiver sample, `E|n|^2`.
    pub variance: f64,
    /// Lorentzian laser linewidth for the optional Wiener phase walk; 0 disables it.
    pub laser_linewidth_hz: f64,
}

/// Per-cell perturbed reflectivity at time `t`, no noise.
pub fn perturbed_reflectivity(
    model: &FiberModel,
    scenario: &EventScenario,
    k_t: f64,
    t: f64,
) -> Result<Vec<Complex64>> {
    let phase = round_trip_phase(&scenario.phase_profile(&model.grid, k_t, t)?);
    Ok(model
        .reflectivity()
        .into_iter()
        .zip(phase)
        .map(|(r, p)| if p == 0.0 { r } else { r * Complex64::from_polar(1.0, p) })
        .collect())
}

/// Fast path: the correlator output modeled directly as the perturbed
/// reflectivity plus complex Gaussian noise of `noise_variance` per cell.
pub fn synthesize_fingerprint(
    model: &FiberModel,
    scenario: &EventScenario,
    k_t: f64,
    t: f64,
    noise_variance: f64,
    id: FrameId,
) -> Result<Fingerprint> {
    let mut cells = perturbed_reflectivity(model, scenario, k_t, t)?;
    if noise_variance > 0.0 {
        let mut rng = frame_rng(model.seed, NOISE_SALT, id);
        for c in &mut cells {
            *c += complex_gaussian(&mut rng, noise_variance);
        }
    }
    Ok(Fingerprint {
        cells,
        cell_length: model.grid.cell_length,
        frame_time: t,
    })
}

/// Length of the received window that holds the full fiber response:
/// probe samples plus one symbol of delay per additional cell.
pub fn received_len(model: &FiberModel, probe: &ProbeFrame) -> usize {
    probe.sample_len() + model.grid.n_cells.saturating_sub(1) * probe.samples_per_symbol
}

/// High-fidelity path: sampled probe convolved with the fiber impulse
/// response (one tap per cell at a delay of `cell` symbol periods), plus
/// white receiver noise and an optional laser phase walk.
pub fn synthesize_received_waveform(
    model: &FiberModel,
    probe: &ProbeFrame,
    scenario: &EventScenario,
    k_t: f64,
    t: f64,
    noise: &NoiseSpec,
    id: FrameId,
) -> Result<Vec<Complex64>> {
    if probe.zero_pad_len() < model.grid.n_cells {
        return Err(Error::config(
            "probe.zero_pad",
            format!(
                "{} padding symbols shorter than the {}-symbol fiber round trip",
                probe.zero_pad_len(),
                model.grid.n_cells
            ),
        ));
    }
    let taps = perturbed_reflectivity(model, scenario, k_t, t)?;
    let sps = probe.samples_per_symbol;
    let active = probe.active_len();
    let mut rx = vec![Complex64::new(0.0, 0.0); received_len(model, probe)];

    // Work at symbol rate then expand: each symbol is a rectangular pulse.
    let mut symbol_rx = vec![Complex64::new(0.0, 0.0); active + taps.len()];
    for (delay, &h) in taps.iter().enumerate() {
        if h == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (k, &s) in probe.symbols[..active].iter().enumerate() {
            symbol_rx[delay + k] += h * symbol_field(s);
        }
    }
    for (k, v) in symbol_rx.iter().enumerate() {
        let lo = k * sps;
        if lo >= rx.len() {
            break;
        }
        let hi = (lo + sps).min(rx.len());
        rx[lo..hi].fill(*v);
    }

    if noise.laser_linewidth_hz > 0.0 {
        let mut rng = frame_rng(model.seed, PHASE_WALK_SALT, id);
        let step = (std::f64::consts::TAU * noise.laser_linewidth_hz / probe.sample_rate()).sqrt();
        let mut theta = 0.0;
        for x in &mut rx {
            let d: f64 = StandardNormal.sample(&mut rng);
            theta += step * d;
            *x *= Complex64::from_polar(1.0, theta);
        }
    }
    if noise.variance > 0.0 {
        let mut rng = frame_rng(model.seed, NOISE_SALT, id);
        for x in &mut rx {
            *x += complex_gaussian(&mut rng, noise.variance);
        }
    }
    Ok(rx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber_sim::layout::FiberLayout;
    use crate::fiber_sim::scenario::MeasurementSchedule;
    use crate::probe::{build_probe_frame, sample_frame};

    fn schedule() -> MeasurementSchedule {
        MeasurementSchedule {
            burst_duration: 1e-3,
            burst_gap: 0.0,
            n_bursts: 1,
            frame_period: 1e-4,
        }
    }

    #[test]
    fn single_reflector_gives_delayed_copy() {
        let mut cells = vec![Complex64::new(0.0, 0.0); 6];
        cells[3] = Complex64::new(0.25, -0.5);
        let model = FiberModel::from_cells(cells, 0.8, FiberLayout::default(), 1);
        let probe = build_probe_frame(&[1, -1, 1, 1, -1, -1, -1], 8, 1000, 3).unwrap();
        let rx = synthesize_received_waveform(
            &model,
            &probe,
            &EventScenario::null(schedule()),
            0.0,
            0.0,
            &NoiseSpec::default(),
            FrameId { burst: 1, frame: 0 },
        )
        .unwrap();
        let tx = sample_frame(&probe);
        assert_eq!(rx.len(), tx.len() + 5 * 3);
        for (n, x) in rx.iter().enumerate() {
            let expect = if n >= 9 && n - 9 < tx.len() {
                tx[n - 9] * Complex64::new(0.25, -0.5)
            } else {
                Complex64::new(0.0, 0.0)
            };
            assert!((x - expect).norm() < 1e-15, "sample {n}");
        }
    }

    #[test]
    fn short_padding_is_rejected() {
        let model = FiberModel::from_cells(vec![Complex64::new(1.0, 0.0); 10], 0.8, FiberLayout::default(), 1);
        let probe = build_probe_frame(&[1, -1, 1], 4, 1000, 1).unwrap();
        let err = synthesize_received_waveform(
            &model,
            &probe,
            &EventScenario::null(schedule()),
            0.0,
            0.0,
            &NoiseSpec::default(),
            FrameId { burst: 1, frame: 0 },
        );
        assert!(matches!(err, Err(Error::Config { .. })));
    }

    #[test]
    fn noise_streams_are_order_independent() {
        let model = FiberModel::from_cells(vec![Complex64::new(1.0, 0.0); 8], 0.8, FiberLayout::default(), 5);
        let s = EventScenario::null(schedule());
        let a = synthesize_fingerprint(&model, &s, 0.0, 0.0, 0.1, FrameId { burst: 1, frame: 3 }).unwrap();
        let _ = synthesize_fingerprint(&model, &s, 0.0, 0.0, 0.1, FrameId { burst: 1, frame: 4 }).unwrap();
        let b = synthesize_fingerprint(&model, &s, 0.0, 0.0, 0.1, FrameId { burst: 1, frame: 3 }).unwrap();
        let c = synthesize_fingerprint(&model, &s, 0.0, 0.0, 0.1, FrameId { burst: 2, frame: 3 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
