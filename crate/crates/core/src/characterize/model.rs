use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::waterfall::wrap_phase;

/// Parameters of the drift-plus-tone phase model
///
/// ```text
/// y(t) = C t + A sin(2 pi f t + phi0) - A sin(phi0)
/// ```
///
/// The constant term pins `y(0) = 0` exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseModel {
    /// Drift slope `C`, rad/s.
    pub slope: f64,
    /// Tone amplitude `A`, rad.
    pub amplitude: f64,
    /// Tone frequency `f`, Hz.
    pub frequency: f64,
    /// Tone phase offset `phi0`, rad.
    pub phase_offset: f64,
}

impl PhaseModel {
    pub fn as_array(&self) -> [f64; 4] {
        [self.slope, self.amplitude, self.frequency, self.phase_offset]
    }

    pub fn from_array(p: [f64; 4]) -> Self {
        PhaseModel {
            slope: p[0],
            amplitude: p[1],
            frequency: p[2],
            phase_offset: p[3],
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let arg = TAU * self.frequency * t + self.phase_offset;
        self.slope * t + self.amplitude * (arg.sin() - self.phase_offset.sin())
    }

    /// Partial derivatives with respect to `(C, A, f, phi0)`.
    pub fn gradient(&self, t: f64) -> [f64; 4] {
        let arg = TAU * self.frequency * t + self.phase_offset;
        let (s, c) = arg.sin_cos();
        let (s0, c0) = self.phase_offset.sin_cos();
        [
            t,
            s - s0,
            self.amplitude * c * TAU * t,
            self.amplitude * (c - c0),
        ]
    }

    /// Folds sign ambiguities so that `A >= 0`, `f >= 0` and
    /// `phi0` is in `(-pi, pi]`. The model curve is unchanged.
    ///
    /// `(A, f, phi0) -> (-A, -f, -phi0)` and `(A, phi0) -> (-A, phi0 + pi)`
    /// both leave the curve invariant. With `A = 0` the phase is
    /// meaningless and set to 0; with `f = 0` the tone vanishes and `A` is
    /// set to 0.
    pub fn canonical(&self) -> Self {
        let mut m = *self;
        if m.frequency < 0.0 {
            m.frequency = -m.frequency;
            m.amplitude = -m.amplitude;
            m.phase_offset = -m.phase_offset;
        }
        if m.amplitude < 0.0 {
            m.amplitude = -m.amplitude;
            m.phase_offset += PI;
        }
        m.phase_offset = wrap_phase(m.phase_offset);
        if m.frequency == 0.0 {
            m.amplitude = 0.0;
        }
        if m.amplitude == 0.0 {
            m.phase_offset = 0.0;
        }
        m
    }
}
