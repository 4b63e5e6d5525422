//! Pass a transmit stream through a multipath channel and expose the
//! received windows the estimators work on.
//!
//! The channel is applied at receive time: sample n of the output uses the
//! tap gains of the symbol that contains n (quasi-static per symbol), so
//! the tail of one symbol spills into the head of the next exactly the way
//! a real receiver sees it.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::numerics::{C64, CVec};
use crate::signal::FrameConfig;

use super::fading::ChannelRealization;
use super::ChannelError;

/// Received stream plus the frame geometry needed to slice it.
#[derive(Debug, Clone)]
pub struct RxStream {
    pub samples: CVec,
    pub frame: FrameConfig,
    pub n_symbols: usize,
}

/// Convolve `tx` with the realization (gains indexed by receive-time
/// symbol) and add white Gaussian noise at the given SNR (dB, relative to
/// unit signal power). `None` means noiseless. Output length equals input
/// length.
pub fn transmit(
    tx: &[C64],
    ch: &ChannelRealization,
    frame: &FrameConfig,
    snr_db: Option<f64>,
    rng: &mut impl Rng,
) -> Result<RxStream, ChannelError> {
    let l = ch.cir_len();
    if l > frame.m {
        return Err(ChannelError::GuardViolated { l, m: frame.m });
    }
    assert!(
        tx.len() % frame.symbol_len() == 0,
        "tx stream must be whole symbols"
    );
    let n_symbols = tx.len() / frame.symbol_len();
    assert!(
        ch.n_symbols() >= n_symbols,
        "realization too short: {} symbols for {}",
        ch.n_symbols(),
        n_symbols
    );
    let mut out = vec![C64::new(0.0, 0.0); tx.len()];
    for (n, y) in out.iter_mut().enumerate() {
        let s = n / frame.symbol_len();
        let gains = &ch.gains[s];
        let mut acc = C64::new(0.0, 0.0);
        for (p, &d) in ch.delays.iter().enumerate() {
            if n >= d {
                acc += gains[p] * tx[n - d];
            }
        }
        *y = acc;
    }
    if let Some(snr) = snr_db {
        let sigma2 = 10f64.powf(-snr / 10.0);
        let s = (sigma2 / 2.0).sqrt();
        for y in out.iter_mut() {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            *y += C64::new(s * a, s * b);
        }
    }
    Ok(RxStream {
        samples: out,
        frame: *frame,
        n_symbols,
    })
}

impl RxStream {
    fn check_symbol(&self, k: usize) -> Result<(), ChannelError> {
        if k >= self.n_symbols {
            return Err(ChannelError::BadWindow(format!(
                "symbol {} out of range ({} in stream)",
                k, self.n_symbols
            )));
        }
        Ok(())
    }

    /// Entire guard region of symbol k (M samples, or 2M for dual-PN
    /// framing).
    pub fn guard_window(&self, k: usize) -> Result<&[C64], ChannelError> {
        self.check_symbol(k)?;
        let s = self.frame.guard_start(k);
        Ok(&self.samples[s..s + self.frame.guard_len()])
    }

    /// Last M samples of the guard: the training-sequence window proper.
    /// For dual-PN framing this is the second, ISI-shielded copy.
    pub fn ts_window(&self, k: usize) -> Result<&[C64], ChannelError> {
        self.check_symbol(k)?;
        let end = self.frame.guard_start(k) + self.frame.guard_len();
        Ok(&self.samples[end - self.frame.m..end])
    }

    /// First `len` samples of the data region of symbol k, where the
    /// training-sequence tail spills over.
    pub fn data_head(&self, k: usize, len: usize) -> Result<&[C64], ChannelError> {
        self.check_symbol(k)?;
        if len > self.frame.n {
            return Err(ChannelError::BadWindow(format!(
                "data head of {} exceeds block length {}",
                len, self.frame.n
            )));
        }
        let s = self.frame.data_start(k);
        Ok(&self.samples[s..s + len])
    }

    /// Full data region (N samples) of symbol k.
    pub fn data_window(&self, k: usize) -> Result<&[C64], ChannelError> {
        self.check_symbol(k)?;
        let s = self.frame.data_start(k);
        Ok(&self.samples[s..s + self.frame.n])
    }

    /// Last g_hat = M - l_hat + 1 samples of the training-sequence window:
    /// beyond index l_hat - 1 the previous block's tail has died out, so
    /// these samples depend on the training sequence and the channel only.
    pub fn ibi_free(&self, k: usize, l_hat: usize) -> Result<&[C64], ChannelError> {
        self.check_symbol(k)?;
        if l_hat == 0 || l_hat > self.frame.m {
            return Err(ChannelError::BadWindow(format!(
                "delay-spread estimate {} outside 1..={}",
                l_hat, self.frame.m
            )));
        }
        let ts = self.ts_window(k)?;
        Ok(&ts[l_hat - 1..])
    }

    /// First `len` samples of symbol k's guard region (the build-up ramp of
    /// the next training sequence, needed to restore cyclicity of the
    /// preceding data block).
    pub fn guard_head(&self, k: usize, len: usize) -> Result<&[C64], ChannelError> {
        self.check_symbol(k)?;
        if len > self.frame.guard_len() {
            return Err(ChannelError::BadWindow(format!(
                "guard head of {} exceeds guard length {}",
                len,
                self.frame.guard_len()
            )));
        }
        let s = self.frame.guard_start(k);
        Ok(&self.samples[s..s + len])
    }
}
