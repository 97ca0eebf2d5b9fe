use std::f64::consts::TAU;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::model::PhaseModel;
use super::trace::PhaseTrace;
use crate::error::{Error, Result};

/// Fewest samples the four-parameter fit accepts.
pub const MIN_FIT_SAMPLES: usize = 8;
/// Relative cost decrease below which an accepted step ends the fit.
pub const REL_COST_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 200;
/// Zero padding factor of the initial-guess periodogram.
const PERIODOGRAM_OVERSAMPLE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: PhaseModel,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
    /// The trace carried no variation to fit (constant input).
    pub degenerate: bool,
}

impl FitResult {
    pub fn slope(&self) -> f64 {
        self.model.slope
    }
    pub fn amplitude(&self) -> f64 {
        self.model.amplitude
    }
    pub fn frequency(&self) -> f64 {
        self.model.frequency
    }
    pub fn phase_offset(&self) -> f64 {
        self.model.phase_offset
    }
}

fn check_len(trace: &PhaseTrace) -> Result<()> {
    if trace.len() < MIN_FIT_SAMPLES {
        return Err(Error::Analysis(format!(
            "trace has {} samples, fit needs at least {MIN_FIT_SAMPLES}",
            trace.len()
        )));
    }
    Ok(())
}

/// Half the summed squared residuals of `model` against the trace.
pub fn cost(trace: &PhaseTrace, model: &PhaseModel) -> f64 {
    0.5 * trace
        .times
        .iter()
        .zip(&trace.phase)
        .map(|(&t, &y)| (model.eval(t) - y).powi(2))
        .sum::<f64>()
}

/// Gradient of [`cost`] with respect to `(C, A, f, phi0)`.
pub fn cost_gradient(trace: &PhaseTrace, model: &PhaseModel) -> [f64; 4] {
    let mut g = [0.0; 4];
    for (&t, &y) in trace.times.iter().zip(&trace.phase) {
        let r = model.eval(t) - y;
        for (gk, dk) in g.iter_mut().zip(model.gradient(t)) {
            *gk += r * dk;
        }
    }
    g
}

/// Mean sample spacing, and whether the spacing is uniform to 1e-6.
fn sample_spacing(trace: &PhaseTrace) -> (f64, bool) {
    let n = trace.len();
    let dt = trace.duration() / (n - 1) as f64;
    let uniform = trace
        .times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt);
    (dt, uniform)
}

/// Frequencies the tone may take: at least half a cycle over the trace and
/// at most 0.9 of the Nyquist frequency of the mean sample spacing. Outside
/// this band the tone is not identifiable from the slope (low end) or its
/// amplitude from its phase (Nyquist).
pub fn frequency_band(trace: &PhaseTrace) -> (f64, f64) {
    let (dt, _) = sample_spacing(trace);
    (0.5 / trace.duration(), 0.45 / dt)
}

/// Frequency of the strongest periodogram line of `x` (mean removed) within
/// `band`, refined by parabolic interpolation.
fn periodogram_peak(times: &[f64], x: &[f64], dt: f64, uniform: bool, band: (f64, f64)) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let size = (n * PERIODOGRAM_OVERSAMPLE).next_power_of_two();
    let df = 1.0 / (size as f64 * dt);
    let half = size / 2;
    let power: Vec<f64> = if uniform {
        let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
        buf.resize(size, Complex64::new(0.0, 0.0));
        FftPlanner::new().plan_fft_forward(size).process(&mut buf);
        buf[..=half].iter().map(|z| z.norm_sqr()).collect()
    } else {
        (0..=half)
            .map(|k| {
                let w = TAU * k as f64 * df;
                let z: Complex64 = times
                    .iter()
                    .zip(x)
                    .map(|(&t, &v)| Complex64::from_polar(v - mean, -w * t))
                    .sum();
                z.norm_sqr()
            })
            .collect()
    };
    let k_lo = ((band.0 / df).ceil() as usize).max(1);
    let k_hi = ((band.1 / df).floor() as usize).clamp(k_lo, half);
    let k = (k_lo..=k_hi)
        .max_by(|&a, &b| power[a].total_cmp(&power[b]).then(b.cmp(&a)))
        .unwrap_or(k_lo);
    let mut offset = 0.0;
    if k > k_lo && k < k_hi {
        let (pm, p0, pp) = (power[k - 1], power[k], power[k + 1]);
        let denom = pm - 2.0 * p0 + pp;
        if denom < 0.0 {
            offset = (0.5 * (pm - pp) / denom).clamp(-0.5, 0.5);
        }
    }
    ((k as f64 + offset) * df).clamp(band.0, band.1)
}

/// Starting point for the fit.
///
/// Slope from a least-squares line; frequency from the strongest line of the
/// detrended periodogram; amplitude `sqrt(2) * rms(residual)`; phase offset
/// from the quadrature projection of the residual at that frequency. A
/// constant trace returns `C = A = 0` flagged `degenerate`.
pub fn initial_guess(trace: &PhaseTrace) -> Result<FitResult> {
    check_len(trace)?;
    let n = trace.len() as f64;
    let (dt, uniform) = sample_spacing(trace);
    let t_mean = trace.times.iter().sum::<f64>() / n;
    let y_mean = trace.phase.iter().sum::<f64>() / n;
    let stt: f64 = trace.times.iter().map(|t| (t - t_mean).powi(2)).sum();
    let sty: f64 = trace
        .times
        .iter()
        .zip(&trace.phase)
        .map(|(t, y)| (t - t_mean) * (y - y_mean))
        .sum();
    let slope = sty / stt;
    let resid: Vec<f64> = trace
        .times
        .iter()
        .zip(&trace.phase)
        .map(|(t, y)| y - y_mean - slope * (t - t_mean))
        .collect();
    let rms = (resid.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let degenerate = trace.phase.iter().all(|&y| y == trace.phase[0]);
    if degenerate {
        return Ok(FitResult {
            model: PhaseModel {
                slope: 0.0,
                amplitude: 0.0,
                frequency: frequency_band(trace).0,
                phase_offset: 0.0,
            },
            residual_rms: 0.0,
            converged: false,
            iterations: 0,
            degenerate: true,
        });
    }

    let frequency = periodogram_peak(&trace.times, &resid, dt, uniform, frequency_band(trace));
    // r ~ A sin(w t + phi) = (A cos phi) sin(w t) + (A sin phi) cos(w t)
    let (mut sin_part, mut cos_part) = (0.0, 0.0);
    for (&t, &r) in trace.times.iter().zip(&resid) {
        let (s, c) = (TAU * frequency * t).sin_cos();
        sin_part += r * s;
        cos_part += r * c;
    }
    let phase_offset = cos_part.atan2(sin_part);
    Ok(FitResult {
        model: PhaseModel {
            slope,
            amplitude: std::f64::consts::SQRT_2 * rms,
            frequency,
            phase_offset,
        },
        residual_rms: rms,
        converged: false,
        iterations: 0,
        degenerate: false,
    })
}

/// With the frequency held fixed the model is linear in
/// `(C, A cos phi0, A sin phi0)`; solves that problem exactly.
fn project_at_frequency(trace: &PhaseTrace, frequency: f64) -> Option<PhaseModel> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for (&t, &y) in trace.times.iter().zip(&trace.phase) {
        let (s, c) = (TAU * frequency * t).sin_cos();
        let row = Vector3::new(t, s, c - 1.0);
        ata += row * row.transpose();
        aty += row * y;
    }
    let x = ata.cholesky()?.solve(&aty);
    Some(PhaseModel {
        slope: x[0],
        amplitude: x[1].hypot(x[2]),
        frequency,
        phase_offset: x[2].atan2(x[1]),
    })
}

struct LmOutcome {
    model: PhaseModel,
    cost: f64,
    converged: bool,
    iterations: usize,
}

fn normal_equations(trace: &PhaseTrace, model: &PhaseModel) -> (Matrix4<f64>, Vector4<f64>, f64) {
    let mut h = Matrix4::<f64>::zeros();
    let mut g = Vector4::<f64>::zeros();
    let mut c = 0.0;
    for (&t, &y) in trace.times.iter().zip(&trace.phase) {
        let r = model.eval(t) - y;
        let d = Vector4::from(model.gradient(t));
        h += d * d.transpose();
        g += d * r;
        c += r * r;
    }
    (h, g, 0.5 * c)
}

/// Levenberg-Marquardt with Marquardt diagonal scaling and analytic Jacobian.
/// After each accepted step the linear parameters are re-solved at the new
/// frequency.
/// Trial frequencies are projected onto `band`.
fn levenberg_marquardt(trace: &PhaseTrace, start: PhaseModel, cost_floor: f64, band: (f64, f64)) -> LmOutcome {
    let mut p = Vector4::from(start.as_array());
    p[2] = p[2].clamp(band.0, band.1);
    let mut model = PhaseModel::from_array(p.into());
    let (mut h, mut g, mut c) = normal_equations(trace, &model);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        if c <= cost_floor {
            converged = true;
            break;
        }
        // Residual orthogonal to the Jacobian columns: stationary point.
        if g.norm() <= 1e-12 * h.trace().sqrt() * (2.0 * c).sqrt() {
            converged = true;
            break;
        }
        iterations += 1;
        let mut damped = h;
        let diag_floor = 1e-12 * h.diagonal().max();
        for k in 0..4 {
            damped[(k, k)] += lambda * h[(k, k)].max(diag_floor);
        }
        let Some(chol) = damped.cholesky() else {
            lambda *= 10.0;
            continue;
        };
        let mut step = chol.solve(&(-g));
        step[2] = (p[2] + step[2]).clamp(band.0, band.1) - p[2];
        let trial = PhaseModel::from_array((p + step).into());
        let (mut th, mut tg, mut tc) = normal_equations(trace, &trial);
        if tc < c {
            let rel = (c - tc) / c;
            p += step;
            model = trial;
            // Re-solve the linear parameters exactly at the new frequency;
            // this removes the curved frequency/phase valley.
            if let Some(projected) = project_at_frequency(trace, model.frequency) {
                let (ph, pg, pc) = normal_equations(trace, &projected);
                if pc < tc {
                    model = projected;
                    p = Vector4::from(model.as_array());
                    (th, tg, tc) = (ph, pg, pc);
                }
            }
            (h, g, c) = (th, tg, tc);
            lambda = (lambda / 10.0).max(1e-15);
            if rel < REL_COST_TOL {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e16 {
                // No representable improvement left; accept only if the step
                // is already negligible against the parameters.
                converged = step.norm() <= 1e-12 * (p.norm() + 1e-300);
                break;
            }
        }
    }
    LmOutcome {
        model,
        cost: c,
        converged,
        iterations,
    }
}

/// Nonlinear least-squares fit of the phase model.
///
/// Runs Levenberg-Marquardt from the supplied guess and from linear
/// projections at `f0` and `f0 ± 1/T` (one periodogram bin), keeping the
/// lowest cost. The result is canonical: `A >= 0`, `f > 0`,
/// `phi0` in `(-pi, pi]`.
pub fn fit_phase_model(trace: &PhaseTrace, init: &FitResult) -> Result<FitResult> {
    check_len(trace)?;
    let p = init.model.as_array();
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("initial guess is not finite".into()));
    }
    let scale = 0.5 * trace.phase.iter().map(|y| y * y).sum::<f64>();
    let cost_floor = 1e-28 * scale;
    let (dt, _) = sample_spacing(trace);
    let bin = 1.0 / (trace.len() as f64 * dt);
    let band = frequency_band(trace);
    let f0 = init.model.frequency.abs();

    let mut starts = vec![init.model];
    for f in [f0, f0 + bin, f0 - bin] {
        if let Some(m) = project_at_frequency(trace, f.clamp(band.0, band.1)) {
            starts.push(m);
        }
    }

    let best = starts
        .into_iter()
        .map(|s| levenberg_marquardt(trace, s, cost_floor, band))
        .min_by(|a, b| a.cost.total_cmp(&b.cost).then(b.converged.cmp(&a.converged)))
        .expect("at least one start");

    let model = best.model.canonical();
    Ok(FitResult {
        model,
        residual_rms: (2.0 * best.cost / trace.len() as f64).sqrt(),
        converged: best.converged,
        iterations: best.iterations,
        degenerate: init.degenerate,
    })
}

/// `initial_guess` followed by `fit_phase_model`.
pub fn fit_trace(trace: &PhaseTrace) -> Result<FitResult> {
    let init = initial_guess(trace)?;
    fit_phase_model(trace, &init)
}
