//! Data-path demodulation used for BER measurements: cyclic
//! reconstruction of the guarded OFDM block, one-tap zero-forcing
//! equalization against an estimated CIR, and hard QPSK decisions.
//!
//! The chain is deliberately the simplest receiver that isolates channel
//! estimation quality; its arithmetic is not charged to any estimator's
//! operation count.

use crate::numerics::{fft, C64, CVec, OpCounter};
use crate::signal::{block_to_subcarriers, qpsk_demap};

use super::HarnessError;
use crate::channel::RxStream;

#[derive(Debug, Clone)]
pub struct DemodOutcome {
    pub bits: Vec<u8>,
    /// Some equalizer bin fell below the 1e-12 magnitude floor and was
    /// regularized instead of divided through.
    pub regularized: bool,
}

/// Recover the payload bits of symbol `k` using a dense CIR estimate.
///
/// Steps: (1) subtract the estimated tail of the training sequence that
/// spills into the head of the data block; (2) restore circularity by
/// adding the data block's own estimated tail, read from the head of the
/// next guard with the next training sequence's estimated build-up
/// removed; (3) transform to subcarriers; (4) zero-force by the estimated
/// channel frequency response; (5) hard QPSK decisions.
///
/// Needs symbol `k + 1` in the stream (its guard head carries the data
/// tail).
pub fn demodulate(
    rx: &RxStream,
    k: usize,
    pn: &[f64],
    est_dense: &[C64],
) -> Result<DemodOutcome, HarnessError> {
    let m = rx.frame.m;
    let n = rx.frame.n;
    if pn.len() != m {
        return Err(HarnessError::BadConfig(format!(
            "training sequence length {} != guard length {m}",
            pn.len()
        )));
    }
    if est_dense.len() != m {
        return Err(HarnessError::DenseLength {
            est: est_dense.len(),
            truth: m,
        });
    }

    let mut y = rx.data_window(k)?.to_vec();
    let taps: Vec<(usize, C64)> = est_dense
        .iter()
        .enumerate()
        .filter(|(_, g)| g.norm_sqr() > 0.0)
        .map(|(d, &g)| (d, g))
        .collect();
    // Estimated delay spread: how far any block's response spills into
    // its successor. Everything past that is left untouched so a short
    // channel does not pick up guard noise it never reached.
    let spread = taps.last().map_or(0, |&(d, _)| d).min(n);

    // (1) The previous guard's convolution tail rides on the first
    // `spread` data samples: sample t receives sum over taps d > t of
    // h[d] * c[m + t - d].
    for &(d, g) in &taps {
        for t in 0..d.min(n) {
            y[t] -= g * pn[m + t - d];
        }
    }

    // (2) The data block's own tail sits at the head of the next guard,
    // under the next training sequence's build-up ramp. Remove the
    // estimated ramp and fold the remainder back on the block head.
    if spread > 0 {
        let next_head = rx.guard_head(k + 1, spread)?;
        for (t, &v) in next_head.iter().enumerate() {
            y[t] += v;
        }
        for &(d, g) in &taps {
            for t in d..spread {
                y[t] -= g * pn[t - d];
            }
        }
    }

    // (3) + (4): per-subcarrier zero forcing. The block transform returns
    // unit-power symbols, so the channel response is the plain transform
    // of the zero-padded CIR.
    let freq = block_to_subcarriers(&y)?;
    let mut padded = vec![C64::new(0.0, 0.0); n];
    for &(d, g) in &taps {
        if d < n {
            padded[d] = g;
        }
    }
    let mut scratch = OpCounter::new();
    let h_freq: CVec = fft(&padded, &mut scratch)?;
    let mut regularized = false;
    let eq: CVec = freq
        .iter()
        .zip(&h_freq)
        .map(|(v, h)| {
            if h.norm() < 1e-12 {
                regularized = true;
                v / C64::new(1e-12, 0.0)
            } else {
                v / h
            }
        })
        .collect();

    Ok(DemodOutcome {
        bits: qpsk_demap(&eq),
        regularized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{transmit, ChannelRealization};
    use crate::signal::{assemble_stream, modulate_block, pn_sequence, FrameConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(count: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
        (0..count).map(|_| rng.gen_range(0..2)).collect()
    }

    fn build_stream(
        frame: &FrameConfig,
        pn: &[f64],
        bits: &[u8],
        n_sym: usize,
    ) -> CVec {
        let bps = frame.bits_per_symbol();
        let blocks: Vec<CVec> = (0..n_sym)
            .map(|k| modulate_block(&bits[k * bps..(k + 1) * bps], frame.n).unwrap())
            .collect();
        assemble_stream(frame, pn, &blocks).unwrap()
    }

    #[test]
    fn perfect_estimate_noiseless_is_bit_exact() {
        let frame = FrameConfig::new(32, 512, false).unwrap();
        let pn = pn_sequence(frame.m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n_sym = 11; // 10 demodulated symbols x 1024 bits > 1e4 bits
        let bits = random_bits(n_sym * frame.bits_per_symbol(), &mut rng);
        let tx = build_stream(&frame, &pn, &bits, n_sym);
        let delays = vec![0usize, 4, 13, 30];
        let gains = vec![
            C64::new(0.7, -0.2),
            C64::new(-0.35, 0.4),
            C64::new(0.2, 0.25),
            C64::new(-0.1, 0.05),
        ];
        let ch = ChannelRealization::from_gains(delays.clone(), vec![gains.clone(); n_sym]);
        let rx = transmit(&tx, &ch, &frame, None, &mut rng).unwrap();
        let mut dense = vec![C64::new(0.0, 0.0); frame.m];
        for (&d, &g) in delays.iter().zip(&gains) {
            dense[d] = g;
        }
        let bps = frame.bits_per_symbol();
        for k in 0..n_sym - 1 {
            let got = demodulate(&rx, k, &pn, &dense).unwrap();
            assert!(!got.regularized);
            assert_eq!(
                got.bits,
                &bits[k * bps..(k + 1) * bps],
                "bit errors in symbol {k}"
            );
        }
    }

    #[test]
    fn perfect_estimate_and_dual_pn_framing_also_exact() {
        let frame = FrameConfig::new(32, 128, true).unwrap();
        let pn = pn_sequence(frame.m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n_sym = 4;
        let bits = random_bits(n_sym * frame.bits_per_symbol(), &mut rng);
        let tx = build_stream(&frame, &pn, &bits, n_sym);
        let delays = vec![0usize, 7, 19];
        let gains = vec![C64::new(0.8, 0.0), C64::new(0.3, -0.3), C64::new(-0.2, 0.1)];
        let ch = ChannelRealization::from_gains(delays.clone(), vec![gains.clone(); n_sym]);
        let rx = transmit(&tx, &ch, &frame, None, &mut rng).unwrap();
        let mut dense = vec![C64::new(0.0, 0.0); frame.m];
        for (&d, &g) in delays.iter().zip(&gains) {
            dense[d] = g;
        }
        let bps = frame.bits_per_symbol();
        let got = demodulate(&rx, 1, &pn, &dense).unwrap();
        assert_eq!(got.bits, &bits[bps..2 * bps]);
    }

    #[test]
    fn awgn_single_tap_matches_qpsk_theory_within_3_sigma() {
        // Perfect CSI on h = [1]: hard-decision QPSK over AWGN has
        // per-bit error rate Q(sqrt(snr_linear)) with this scaling.
        let frame = FrameConfig::new(16, 256, false).unwrap();
        let pn = pn_sequence(frame.m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let snr_db = 4.0;
        let n_sym = 201; // 200 demodulated symbols x 512 bits = 102400 bits
        let bits = random_bits(n_sym * frame.bits_per_symbol(), &mut rng);
        let tx = build_stream(&frame, &pn, &bits, n_sym);
        let ch = ChannelRealization::from_gains(
            vec![0],
            vec![vec![C64::new(1.0, 0.0)]; n_sym],
        );
        let rx = transmit(&tx, &ch, &frame, Some(snr_db), &mut rng).unwrap();
        let mut dense = vec![C64::new(0.0, 0.0); frame.m];
        dense[0] = C64::new(1.0, 0.0);
        let bps = frame.bits_per_symbol();
        let mut errs = 0u64;
        let mut total = 0u64;
        for k in 0..n_sym - 1 {
            let got = demodulate(&rx, k, &pn, &dense).unwrap();
            errs += got
                .bits
                .iter()
                .zip(&bits[k * bps..(k + 1) * bps])
                .filter(|(a, b)| a != b)
                .count() as u64;
            total += bps as u64;
        }
        let ber = errs as f64 / total as f64;
        let snr = 10f64.powf(snr_db / 10.0);
        let p = 0.5 * statrs::function::erf::erfc((snr.sqrt()) / std::f64::consts::SQRT_2);
        let se = (p * (1.0 - p) / total as f64).sqrt();
        println!("ber {ber:.5} theory {p:.5} se {se:.6}");
        assert!(
            (ber - p).abs() <= 3.0 * se,
            "ber {ber} vs theory {p} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn zero_estimate_gives_coin_flip_ber_and_flags_regularization() {
        // All delays > 0 so every tap's phase sweeps full turns across the
        // band (a delay-0 tap would pin a constant offset and skew the
        // realization-level rate away from 1/2). Average a few independent
        // realizations because any single draw still wanders around 0.5.
        let frame = FrameConfig::new(32, 2048, false).unwrap();
        let pn = pn_sequence(frame.m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let delays = vec![3usize, 9, 17, 23, 31];
        let zero = vec![C64::new(0.0, 0.0); frame.m];
        let bps = frame.bits_per_symbol();
        let n_sym = 3;
        let mut errs = 0usize;
        let mut total = 0usize;
        for _ in 0..6 {
            let bits = random_bits(n_sym * bps, &mut rng);
            let tx = build_stream(&frame, &pn, &bits, n_sym);
            let gains: Vec<C64> = (0..delays.len())
                .map(|_| C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
                .collect();
            let ch = ChannelRealization::from_gains(delays.clone(), vec![gains; n_sym]);
            let rx = transmit(&tx, &ch, &frame, Some(25.0), &mut rng).unwrap();
            for k in 0..n_sym - 1 {
                let got = demodulate(&rx, k, &pn, &zero).unwrap();
                assert!(got.regularized);
                errs += got
                    .bits
                    .iter()
                    .zip(&bits[k * bps..(k + 1) * bps])
                    .filter(|(a, b)| a != b)
                    .count();
                total += bps;
            }
        }
        let ber = errs as f64 / total as f64;
        println!("zero-estimate ber {ber:.4} over {total} bits");
        assert!(ber > 0.4 && ber < 0.6, "ber {ber}");
    }

    #[test]
    fn needs_the_next_symbol_and_a_full_length_estimate() {
        let frame = FrameConfig::new(16, 64, false).unwrap();
        let pn = pn_sequence(frame.m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bits = random_bits(2 * frame.bits_per_symbol(), &mut rng);
        let tx = build_stream(&frame, &pn, &bits, 2);
        let ch = ChannelRealization::from_gains(vec![0], vec![vec![C64::new(1.0, 0.0)]; 2]);
        let rx = transmit(&tx, &ch, &frame, None, &mut rng).unwrap();
        let zero = vec![C64::new(0.0, 0.0); frame.m];
        let mut dense = zero.clone();
        dense[3] = C64::new(0.5, 0.0);
        // A spread-out estimate needs the successor guard for the tail
        // fold, and the last symbol has no successor.
        assert!(demodulate(&rx, 1, &pn, &dense).is_err());
        // A zero-spread estimate touches no successor, so it still works.
        assert!(demodulate(&rx, 1, &pn, &zero).is_ok());
        // Estimate must be a length-M dense view.
        assert!(demodulate(&rx, 0, &pn, &dense[..4]).is_err());
    }
}
