//! Transmit-side signal construction: PN training sequences, QPSK mapping,
//! and time-domain frame assembly.
//!
//! A frame symbol is `[guard | data]`: a known +/-1 pseudo-noise guard of
//! length M (or `[c; c]` for the dual-guard variant) followed by an
//! N-sample OFDM data block. The data block is scaled so its average
//! time-domain sample power is 1, matching the unit-power guard.

use thiserror::Error;

use crate::numerics::{fft, ifft, C64, CVec, NumericsError, OpCounter};

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("bit buffer length must be even, got {0}")]
    OddBitCount(usize),
    #[error("bit value {0} is not 0 or 1")]
    BadBit(u8),
    #[error("sequence length {0} outside supported range 2..=4096")]
    UnsupportedPnLength(usize),
    #[error("frame config invalid: {0}")]
    BadFrameConfig(String),
    #[error("numerics: {0}")]
    Numerics(#[from] NumericsError),
}

/// Maximal-length LFSR feedback taps (polynomial exponents) per degree.
const LFSR_TAPS: &[(u32, &[u32])] = &[
    (2, &[2, 1]),
    (3, &[3, 1]),
    (4, &[4, 1]),
    (5, &[5, 2]),
    (6, &[6, 1]),
    (7, &[7, 1]),
    (8, &[8, 6, 5, 4]),
    (9, &[9, 4]),
    (10, &[10, 3]),
    (11, &[11, 2]),
    (12, &[12, 6, 4, 1]),
];

/// Binary +/-1 pseudo-noise sequence of length `m`, from the shortest
/// maximal-length LFSR whose period covers `m - 1` samples; the stream is
/// continued periodically when `m` exceeds the period by one (e.g. a
/// period-255 register serving a 256-sample guard).
pub fn pn_sequence(m: usize) -> Result<Vec<f64>, SignalError> {
    if m < 2 || m > 4096 {
        return Err(SignalError::UnsupportedPnLength(m));
    }
    let degree = LFSR_TAPS
        .iter()
        .map(|(d, _)| *d)
        .find(|d| (1u64 << d) - 1 >= (m as u64) - 1)
        .ok_or(SignalError::UnsupportedPnLength(m))?;
    let taps = LFSR_TAPS
        .iter()
        .find(|(d, _)| *d == degree)
        .map(|(_, t)| *t)
        .expect("degree from same table");
    let d = degree as usize;
    let mut state = vec![1u8; d];
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let bit = state[d - 1];
        out.push(1.0 - 2.0 * f64::from(bit));
        let fb = taps
            .iter()
            .fold(0u8, |acc, &t| acc ^ state[t as usize - 1]);
        for i in (1..d).rev() {
            state[i] = state[i - 1];
        }
        state[0] = fb;
    }
    Ok(out)
}

/// Gray-mapped QPSK: bit pair (b0, b1) -> ((1-2*b0) + i(1-2*b1)) / sqrt(2).
pub fn qpsk_map(bits: &[u8]) -> Result<CVec, SignalError> {
    if bits.len() % 2 != 0 {
        return Err(SignalError::OddBitCount(bits.len()));
    }
    if let Some(&b) = bits.iter().find(|&&b| b > 1) {
        return Err(SignalError::BadBit(b));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok(bits
        .chunks_exact(2)
        .map(|p| {
            C64::new(
                s * (1.0 - 2.0 * f64::from(p[0])),
                s * (1.0 - 2.0 * f64::from(p[1])),
            )
        })
        .collect())
}

/// Hard-decision demapper, inverse of [`qpsk_map`] on noiseless input:
/// bit0 = (re < 0), bit1 = (im < 0).
pub fn qpsk_demap(symbols: &[C64]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(symbols.len() * 2);
    for s in symbols {
        bits.push(u8::from(s.re < 0.0));
        bits.push(u8::from(s.im < 0.0));
    }
    bits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    /// Guard (training sequence) length M.
    pub m: usize,
    /// OFDM data block length N (subcarrier count).
    pub n: usize,
    /// Repeat the guard twice (`[c; c]`) instead of sending it once.
    pub dual_pn: bool,
}

impl FrameConfig {
    pub fn new(m: usize, n: usize, dual_pn: bool) -> Result<Self, SignalError> {
        if m < 2 {
            return Err(SignalError::BadFrameConfig(format!(
                "guard length {m} too short"
            )));
        }
        if n == 0 || !n.is_power_of_two() {
            return Err(SignalError::BadFrameConfig(format!(
                "data block length {n} must be a power of two"
            )));
        }
        Ok(Self { m, n, dual_pn })
    }

    pub fn guard_len(&self) -> usize {
        if self.dual_pn {
            2 * self.m
        } else {
            self.m
        }
    }

    pub fn symbol_len(&self) -> usize {
        self.guard_len() + self.n
    }

    /// Sample index where symbol `k`'s guard begins.
    pub fn guard_start(&self, k: usize) -> usize {
        k * self.symbol_len()
    }

    /// Sample index where symbol `k`'s data block begins.
    pub fn data_start(&self, k: usize) -> usize {
        k * self.symbol_len() + self.guard_len()
    }

    /// Bits carried per symbol (QPSK on all N subcarriers).
    pub fn bits_per_symbol(&self) -> usize {
        2 * self.n
    }
}

/// Map a symbol's bits onto subcarriers and inverse-transform to the time
/// domain. Subcarrier amplitudes are sqrt(N) * QPSK so the time-domain
/// block has unit average sample power, like the +/-1 guard around it.
pub fn modulate_block(bits: &[u8], n: usize) -> Result<CVec, SignalError> {
    let syms = qpsk_map(bits)?;
    if syms.len() != n {
        return Err(SignalError::BadFrameConfig(format!(
            "got {} subcarrier symbols for block length {n}",
            syms.len()
        )));
    }
    let scale = (n as f64).sqrt();
    let freq: CVec = syms.iter().map(|s| s * scale).collect();
    let mut scratch = OpCounter::new();
    Ok(ifft(&freq, &mut scratch)?)
}

/// Forward-transform a received time-domain block back to unit-power
/// subcarrier symbols (inverse of the [`modulate_block`] scaling).
pub fn block_to_subcarriers(time: &[C64]) -> Result<CVec, SignalError> {
    let mut scratch = OpCounter::new();
    let freq = fft(time, &mut scratch)?;
    let scale = 1.0 / (time.len() as f64).sqrt();
    Ok(freq.iter().map(|v| v * scale).collect())
}

/// One transmitted symbol: guard samples then data samples.
pub fn assemble_symbol(cfg: &FrameConfig, pn: &[f64], data: &[C64]) -> Result<CVec, SignalError> {
    if pn.len() != cfg.m {
        return Err(SignalError::BadFrameConfig(format!(
            "guard sequence length {} != M {}",
            pn.len(),
            cfg.m
        )));
    }
    if data.len() != cfg.n {
        return Err(SignalError::BadFrameConfig(format!(
            "data block length {} != N {}",
            data.len(),
            cfg.n
        )));
    }
    let mut out = Vec::with_capacity(cfg.symbol_len());
    let reps = if cfg.dual_pn { 2 } else { 1 };
    for _ in 0..reps {
        out.extend(pn.iter().map(|&v| C64::new(v, 0.0)));
    }
    out.extend_from_slice(data);
    Ok(out)
}

/// Concatenate symbols into one baseband stream.
pub fn assemble_stream(
    cfg: &FrameConfig,
    pn: &[f64],
    data_blocks: &[CVec],
) -> Result<CVec, SignalError> {
    let mut out = Vec::with_capacity(cfg.symbol_len() * data_blocks.len());
    for block in data_blocks {
        out.extend(assemble_symbol(cfg, pn, block)?);
    }
    Ok(out)
}
