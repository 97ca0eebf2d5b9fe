//! Probe frame generation: maximal-length PRBS payload, a trailing `-1`
//! symbol and zero padding, plus the rectangular-pulse sampled waveform.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `x^12 + x^6 + x^4 + x + 1`, primitive over GF(2).
pub const DEFAULT_POLYNOMIAL_12: u64 = (1 << 12) | (1 << 6) | (1 << 4) | (1 << 1) | 1;

/// Parameters of a Fibonacci LFSR.
///
/// `polynomial` is the feedback polynomial as a bitmask, bit `i` holding the
/// coefficient of `x^i`; bit `order` and bit 0 must both be set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrbsSpec {
    pub order: u32,
    pub polynomial: u64,
    pub seed: u64,
}

impl Default for PrbsSpec {
    fn default() -> Self {
        PrbsSpec {
            order: 12,
            polynomial: DEFAULT_POLYNOMIAL_12,
            seed: 1,
        }
    }
}

impl PrbsSpec {
    /// Period of a maximal-length sequence of this order.
    pub fn period(&self) -> usize {
        (1usize << self.order) - 1
    }

    fn check_shape(&self) -> Result<()> {
        if !(2..=32).contains(&self.order) {
            return Err(Error::config("prbs.order", "must be in 2..=32"));
        }
        if self.polynomial >> self.order != 1 {
            return Err(Error::config(
                "prbs.polynomial",
                format!("degree does not match order {}", self.order),
            ));
        }
        if self.polynomial & 1 == 0 {
            return Err(Error::config(
                "prbs.polynomial",
                "constant term missing; register would not be invertible",
            ));
        }
        if self.seed == 0 || self.seed >> self.order != 0 {
            return Err(Error::config(
                "prbs.seed",
                format!("must be a nonzero {}-bit state", self.order),
            ));
        }
        Ok(())
    }
}

/// Fibonacci LFSR. Register bit `i` holds sequence element `a[k + i]`;
/// the recurrence is `a[k + n] = sum_i c_i a[k + i]` over GF(2).
#[derive(Clone, Debug)]
pub struct Lfsr {
    state: u64,
    taps: u64,
    order: u32,
}

impl Lfsr {
    pub fn new(spec: &PrbsSpec) -> Result<Self> {
        spec.check_shape()?;
        Ok(Lfsr {
            state: spec.seed,
            taps: spec.polynomial & ((1u64 << spec.order) - 1),
            order: spec.order,
        })
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    /// Emits one bit and advances the register.
    pub fn step(&mut self) -> u8 {
        let out = (self.state & 1) as u8;
        let feedback = (self.state & self.taps).count_ones() as u64 & 1;
        self.state = (self.state >> 1) | (feedback << (self.order - 1));
        out
    }
}

/// Length of the state cycle through `spec.seed`.
pub fn cycle_length(spec: &PrbsSpec) -> Result<usize> {
    let mut lfsr = Lfsr::new(spec)?;
    let limit = 1usize << spec.order;
    for n in 1..=limit {
        lfsr.step();
        if lfsr.state() == spec.seed {
            return Ok(n);
        }
    }
    // Unreachable for an invertible register, kept for safety against bad taps.
    Err(Error::config("prbs.polynomial", "register never returns to seed"))
}

/// Generates one period of the m-sequence, mapped `1 -> +1`, `0 -> -1`.
///
/// Fails with a configuration error if the polynomial is not maximal-length,
/// i.e. the register cycle through the seed is shorter than `2^order - 1`.
pub fn generate_prbs(spec: &PrbsSpec) -> Result<Vec<i8>> {
    let cycle = cycle_length(spec)?;
    if cycle != spec.period() {
        return Err(Error::config(
            "prbs.polynomial",
            format!(
                "not maximal-length: cycle of {cycle} states, expected {}",
                spec.period()
            ),
        ));
    }
    let mut lfsr = Lfsr::new(spec)?;
    Ok((0..cycle).map(|_| 2 * lfsr.step() as i8 - 1).collect())
}

/// One transmitted frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeFrame {
    pub symbols: Vec<i8>,
    /// Symbols per second. Integral so the frame duration is an exact rational.
    pub symbol_rate: u64,
    pub samples_per_symbol: usize,
}

impl ProbeFrame {
    /// Number of leading nonzero symbols (PRBS plus trailing `-1`).
    pub fn active_len(&self) -> usize {
        self.symbols.iter().take_while(|&&s| s != 0).count()
    }

    pub fn zero_pad_len(&self) -> usize {
        self.symbols.len() - self.active_len()
    }

    pub fn nonzero_count(&self) -> usize {
        self.symbols.iter().filter(|&&s| s != 0).count()
    }

    pub fn sample_len(&self) -> usize {
        self.symbols.len() * self.samples_per_symbol
    }

    pub fn sample_rate(&self) -> f64 {
        self.symbol_rate as f64 * self.samples_per_symbol as f64
    }

    pub fn symbol_period(&self) -> f64 {
        1.0 / self.symbol_rate as f64
    }

    /// Frame duration as the unreduced fraction `(symbols, symbol_rate)` seconds.
    pub fn frame_duration_ratio(&self) -> (u64, u64) {
        (self.symbols.len() as u64, self.symbol_rate)
    }

    /// Frame duration in seconds, a single correctly rounded division.
    pub fn frame_duration(&self) -> f64 {
        let (num, den) = self.frame_duration_ratio();
        num as f64 / den as f64
    }
}

/// Appends the trailing `-1` and `zero_pad` zeros to a ±1 PRBS.
pub fn build_probe_frame(
    prbs: &[i8],
    zero_pad: usize,
    symbol_rate: u64,
    samples_per_symbol: usize,
) -> Result<ProbeFrame> {
    if prbs.is_empty() || prbs.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::config("probe.prbs", "must be a nonempty ±1 sequence"));
    }
    if symbol_rate == 0 {
        return Err(Error::config("probe.symbol_rate_hz", "must be positive"));
    }
    if samples_per_symbol == 0 {
        return Err(Error::config("probe.samples_per_symbol", "must be at least 1"));
    }
    let mut symbols = Vec::with_capacity(prbs.len() + 1 + zero_pad);
    symbols.extend_from_slice(prbs);
    symbols.push(-1);
    symbols.resize(prbs.len() + 1 + zero_pad, 0);
    Ok(ProbeFrame {
        symbols,
        symbol_rate,
        samples_per_symbol,
    })
}

/// Binary phase state of one symbol: `exp(i s pi/2)`, and 0 for padding.
pub fn symbol_field(symbol: i8) -> Complex64 {
    Complex64::new(0.0, symbol as f64)
}

/// Rectangular NRZ upsampling of the frame.
pub fn sample_frame(frame: &ProbeFrame) -> Vec<Complex64> {
    frame
        .symbols
        .iter()
        .flat_map(|&s| std::iter::repeat_n(symbol_field(s), frame.samples_per_symbol))
        .collect()
}

/// The default probe: 4095-bit PRBS, 5000 padding symbols, 125 MBd,
/// 5 samples per symbol (625 MS/s).
pub fn default_probe() -> ProbeFrame {
    let prbs = generate_prbs(&PrbsSpec::default()).expect("default polynomial is primitive");
    build_probe_frame(&prbs, 5000, 125_000_000, 5).expect("default probe parameters are valid")
}
