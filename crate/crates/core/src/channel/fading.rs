//! Per-symbol tap-gain processes: fixed random-phase gains for static
//! channels, and a Gaussian sum-of-sinusoids Rayleigh process with the
//! classic Doppler spectrum for mobile ones. Gains are piecewise-constant
//! over each symbol (quasi-static).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::numerics::{C64, CVec};

use super::profile::TapSet;

/// Oscillators per tap for the sum-of-sinusoids process.
pub const JAKES_OSCILLATORS: usize = 32;

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub delays: Vec<usize>,
    /// gains[s][p] = complex gain of tap p during symbol s.
    pub gains: Vec<CVec>,
}

impl ChannelRealization {
    pub fn n_symbols(&self) -> usize {
        self.gains.len()
    }

    /// Dense CIR of max-delay+1 entries for symbol s.
    pub fn dense_cir(&self, s: usize) -> CVec {
        let l = self.cir_len();
        let mut h = vec![C64::new(0.0, 0.0); l];
        for (p, &d) in self.delays.iter().enumerate() {
            h[d] = self.gains[s][p];
        }
        h
    }

    /// Dense CIR zero-padded or clipped to `len` entries.
    pub fn dense_cir_padded(&self, s: usize, len: usize) -> CVec {
        let mut h = vec![C64::new(0.0, 0.0); len];
        for (p, &d) in self.delays.iter().enumerate() {
            if d < len {
                h[d] = self.gains[s][p];
            }
        }
        h
    }

    pub fn cir_len(&self) -> usize {
        self.delays.last().map_or(0, |&d| d + 1)
    }

    /// Build directly from explicit per-symbol dense gain assignments
    /// (test and oracle hook).
    pub fn from_gains(delays: Vec<usize>, gains: Vec<CVec>) -> Self {
        assert!(gains.iter().all(|g| g.len() == delays.len()));
        Self { delays, gains }
    }
}

/// Static channel: each tap gets magnitude sqrt(mean power) and a phase
/// drawn uniformly once; identical for every symbol.
pub fn realize_static(taps: &TapSet, n_symbols: usize, rng: &mut impl Rng) -> ChannelRealization {
    let row: CVec = taps
        .powers
        .iter()
        .map(|&p| {
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            C64::from_polar(p.sqrt(), theta)
        })
        .collect();
    ChannelRealization {
        delays: taps.delays.clone(),
        gains: vec![row; n_symbols],
    }
}

struct Oscillator {
    freq_hz: f64,
    phase: f64,
    amp: C64,
}

/// Rayleigh process per tap as a sum of `JAKES_OSCILLATORS` complex
/// sinusoids with Doppler frequencies f_d*cos(alpha), alpha uniform, and
/// independent complex Gaussian amplitudes. Mean power equals the template
/// power; the lag autocorrelation approaches J0(2*pi*f_d*tau).
pub fn realize_jakes(
    taps: &TapSet,
    f_d_hz: f64,
    symbol_period_s: f64,
    n_symbols: usize,
    rng: &mut impl Rng,
) -> ChannelRealization {
    let k = JAKES_OSCILLATORS;
    let per_tap: Vec<(f64, Vec<Oscillator>)> = taps
        .powers
        .iter()
        .map(|&power| {
            let osc = (0..k)
                .map(|_| {
                    let alpha = rng.gen_range(0.0..std::f64::consts::TAU);
                    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = rng.sample(StandardNormal);
                    Oscillator {
                        freq_hz: f_d_hz * alpha.cos(),
                        phase,
                        amp: C64::new(a, b),
                    }
                })
                .collect();
            let scale = (power / (2.0 * k as f64)).sqrt();
            (scale, osc)
        })
        .collect();
    let gains: Vec<CVec> = (0..n_symbols)
        .map(|s| {
            let t = s as f64 * symbol_period_s;
            per_tap
                .iter()
                .map(|(scale, osc)| {
                    let sum: C64 = osc
                        .iter()
                        .map(|o| {
                            o.amp
                                * C64::from_polar(
                                    1.0,
                                    std::f64::consts::TAU * o.freq_hz * t + o.phase,
                                )
                        })
                        .sum();
                    sum * *scale
                })
                .collect()
        })
        .collect();
    ChannelRealization {
        delays: taps.delays.clone(),
        gains,
    }
}
