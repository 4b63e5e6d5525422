//! Baseline estimators: classical hard thresholding (no priors, raw
//! gradient values), compressive sampling matching pursuit with an
//! optional warm-started support, the main-window-only coarse stage that
//! feeds the warm start, and the dual-guard correlation estimator.

use super::{
    ChannelEstimate, CoarsePriors, EstimateStatus, EstimatorError, EthParams, Measurement, embed,
    residual_norm, support_of,
};
use crate::channel::RxStream;
use crate::numerics::{
    C64, CVec, CorrelatorPlan, DespreaderPlan, OpCounter, least_squares_dropping, norm,
    top_k_support,
};

/// Classical iterative hard thresholding: x <- H_S(x + phi^H (y - phi x))
/// from a zero start, keeping the raw gradient values. No step-size
/// normalization, so operators with spectral norm above one (such as the
/// +/-1 training-sequence band) make it diverge; that outcome is reported
/// via `EstimateStatus::Diverged`.
pub fn iht_classic(
    meas: &Measurement,
    s: usize,
    max_iters: usize,
    tol: f64,
) -> Result<ChannelEstimate, EstimatorError> {
    if s == 0 {
        return Err(EstimatorError::ZeroSparsity);
    }
    let mut ops = OpCounter::new();
    let l_hat = meas.phi.cols();
    let g = meas.phi.rows();
    let m = g + l_hat - 1;
    let y_norm = norm(&meas.y_bar);
    let blowup = 1e6 * y_norm.max(1e-300);

    let mut x = vec![C64::new(0.0, 0.0); l_hat];
    let mut r = meas.y_bar.clone();
    let mut res = y_norm;
    let mut iterations_used = 0usize;
    let mut status = EstimateStatus::MaxIters;
    for _ in 0..max_iters {
        let adj = meas.phi.apply_adjoint(&r, &mut ops)?;
        let mut z = x.clone();
        for (zi, ai) in z.iter_mut().zip(adj.iter()) {
            *zi += ai;
        }
        ops.complex_adds += l_hat as u64;
        let keep = top_k_support(&z, s.min(l_hat))?;
        let mut x_new = vec![C64::new(0.0, 0.0); l_hat];
        for &t in &keep {
            x_new[t] = z[t];
        }
        let (r_new, res_new) = residual_norm(&meas.y_bar, &meas.phi, &x_new, &mut ops)?;
        x = x_new;
        r = r_new;
        res = res_new;
        iterations_used += 1;
        if res > blowup {
            status = EstimateStatus::Diverged;
            break;
        }
        if res < tol {
            status = EstimateStatus::Converged;
            break;
        }
    }
    let support = support_of(&x);
    let gains: CVec = support.iter().map(|&t| x[t]).collect();
    Ok(ChannelEstimate {
        support,
        gains,
        dense: embed(&x, m),
        iterations_used,
        ops,
        status,
        residual: res,
    })
}

/// Compressive sampling matching pursuit. Runs the full iteration budget
/// (early exit only when the residual drops below `tol`) and returns the
/// best-residual iterate seen. `warm_support` seeds the support carried
/// into the first merge; warm taps outside the dictionary are ignored.
///
/// Per iteration: correlate the residual, take the 2S strongest
/// candidates, merge with the current support (at most 3S columns), fit
/// by least squares with dependent-column dropping, prune to the S
/// strongest coefficients without a second fit.
pub fn cosamp(
    meas: &Measurement,
    s: usize,
    max_iters: usize,
    warm_support: Option<&[usize]>,
    tol: f64,
) -> Result<ChannelEstimate, EstimatorError> {
    if s == 0 {
        return Err(EstimatorError::ZeroSparsity);
    }
    let mut ops = OpCounter::new();
    let l_hat = meas.phi.cols();
    let g = meas.phi.rows();
    let m = g + l_hat - 1;
    if 3 * s > l_hat {
        return Err(EstimatorError::SupportBudget {
            budget: 3 * s,
            l_hat,
        });
    }

    let mut current: Vec<usize> = warm_support
        .map(|w| {
            let mut v: Vec<usize> = w.iter().cloned().filter(|&t| t < l_hat).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .unwrap_or_default();

    let mut x = vec![C64::new(0.0, 0.0); l_hat];
    let mut r = meas.y_bar.clone();
    let mut res = norm(&meas.y_bar);
    let mut best_x = x.clone();
    let mut best_res = res;
    let mut iterations_used = 0usize;
    let mut status = EstimateStatus::MaxIters;

    for _ in 0..max_iters {
        let proxy = meas.phi.apply_adjoint(&r, &mut ops)?;
        let cand = top_k_support(&proxy, (2 * s).min(l_hat))?;
        let mut t_set = cand;
        t_set.extend_from_slice(&current);
        t_set.sort_unstable();
        t_set.dedup();
        let cols: Vec<CVec> = t_set.iter().map(|&j| meas.phi.column(j)).collect();
        let (coeffs, _dropped) = least_squares_dropping(&cols, &meas.y_bar, &mut ops)?;
        let keep = top_k_support(&coeffs, s.min(t_set.len()))?;
        let mut x_new = vec![C64::new(0.0, 0.0); l_hat];
        for &j in &keep {
            x_new[t_set[j]] = coeffs[j];
        }
        let (r_new, res_new) = residual_norm(&meas.y_bar, &meas.phi, &x_new, &mut ops)?;
        current = support_of(&x_new);
        x = x_new;
        r = r_new;
        res = res_new;
        iterations_used += 1;
        if res < best_res {
            best_res = res;
            best_x = x.clone();
        }
        if res < tol {
            status = EstimateStatus::Converged;
            break;
        }
    }
    let support = support_of(&best_x);
    let gains: CVec = support.iter().map(|&t| best_x[t]).collect();
    Ok(ChannelEstimate {
        support,
        gains,
        dense: embed(&best_x, m),
        iterations_used,
        ops,
        status,
        residual: best_res,
    })
}

/// Coarse acquisition from the raw guard windows only, as used by the
/// warm-started matching pursuit: despread the average of exactly the two
/// guards bracketing data block `i`, without overlap-add. Long echoes are
/// badly attenuated because only the in-window part of their convolution
/// lines up with the assumed circular structure.
pub fn dai_coarse(
    rx: &RxStream,
    pn: &[f64],
    i: usize,
    a_override: Option<usize>,
    b: usize,
    eth: &EthParams,
    ops: &mut OpCounter,
) -> Result<CoarsePriors, EstimatorError> {
    let m = rx.frame.m;
    if pn.len() != m {
        return Err(EstimatorError::BadInput(format!(
            "training sequence length {} != guard length {m}",
            pn.len()
        )));
    }
    let mut acc = rx.ts_window(i)?.to_vec();
    let w2 = rx.ts_window(i + 1)?;
    for (a, x) in acc.iter_mut().zip(w2.iter()) {
        *a += x;
    }
    ops.complex_adds += m as u64;
    for a in acc.iter_mut() {
        *a *= 0.5;
    }
    ops.complex_mults += m as u64;
    let pn_c: CVec = pn.iter().map(|&v| C64::new(v, 0.0)).collect();
    let plan = DespreaderPlan::new(&pn_c, ops)?;
    let h_tilde = plan.despread(&acc, ops)?;
    let h_bar: Vec<f64> = h_tilde.iter().map(|c| c.norm()).collect();
    ops.complex_mults += m as u64;

    let e_th = eth.threshold(&h_bar);
    let d0: Vec<usize> = if e_th > 0.0 {
        (0..m).filter(|&t| h_bar[t] >= e_th).collect()
    } else {
        Vec::new()
    };
    if d0.is_empty() {
        return Err(EstimatorError::NoPaths);
    }
    let max_d0 = *d0.last().unwrap();
    let a = a_override.unwrap_or_else(|| (0.1 * max_d0 as f64).round().max(1.0) as usize);
    let l_raw = max_d0 + a;
    let guard_limited = l_raw > m;
    let l_hat = l_raw.min(m);
    let g_hat = m - l_hat + 1;
    let s0 = d0.len();
    let s = (s0 + b).min(l_hat);
    Ok(CoarsePriors {
        d0,
        h_bar,
        h_bar_prime: h_tilde,
        l_hat,
        g_hat,
        s0,
        s,
        e_th,
        a,
        b,
        guard_limited,
    })
}

/// Correlation estimator for the doubled guard: the second guard copy
/// sees the full circular convolution (the first copy absorbs the data
/// tail), so averaging second-copy windows over `r_symbols` symbols and
/// correlating gives a dense channel estimate directly. The dense view is
/// returned raw — including the correlation sidelobe floor — because that
/// is what the equalizer consumes; `support` reports only the taps
/// clearing the detection threshold.
pub fn dpn_estimate(
    rx: &RxStream,
    pn: &[f64],
    r_symbols: usize,
    eth: &EthParams,
) -> Result<ChannelEstimate, EstimatorError> {
    let mut ops = OpCounter::new();
    if !rx.frame.dual_pn {
        return Err(EstimatorError::NeedsDualPn);
    }
    let m = rx.frame.m;
    if pn.len() != m {
        return Err(EstimatorError::BadInput(format!(
            "training sequence length {} != guard length {m}",
            pn.len()
        )));
    }
    if r_symbols == 0 || r_symbols > rx.n_symbols {
        return Err(EstimatorError::BadInput(format!(
            "averaging over {r_symbols} symbols but stream has {}",
            rx.n_symbols
        )));
    }
    let mut acc = vec![C64::new(0.0, 0.0); m];
    for k in 0..r_symbols {
        let w = rx.ts_window(k)?;
        for (a, x) in acc.iter_mut().zip(w.iter()) {
            *a += x;
        }
        ops.complex_adds += m as u64;
    }
    for a in acc.iter_mut() {
        *a *= 1.0 / (m as f64 * r_symbols as f64);
    }
    ops.complex_mults += m as u64;
    let pn_c: CVec = pn.iter().map(|&v| C64::new(v, 0.0)).collect();
    let plan = CorrelatorPlan::new(&pn_c, &mut ops)?;
    let h_tilde = plan.correlate(&acc, &mut ops)?;
    let profile: Vec<f64> = h_tilde.iter().map(|c| c.norm()).collect();
    ops.complex_mults += m as u64;
    let e_th = eth.threshold(&profile);
    let support: Vec<usize> = if e_th > 0.0 {
        (0..m).filter(|&t| profile[t] >= e_th).collect()
    } else {
        Vec::new()
    };
    let gains: CVec = support.iter().map(|&t| h_tilde[t]).collect();
    Ok(ChannelEstimate {
        support,
        gains,
        dense: h_tilde,
        iterations_used: 1,
        ops,
        status: EstimateStatus::Converged,
        residual: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelRealization, transmit};
    use crate::numerics::ToeplitzOperator;
    use crate::signal::{FrameConfig, pn_sequence};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pn_measurement(m: usize, l_hat: usize, h: &[C64]) -> Measurement {
        let pn = pn_sequence(m).unwrap();
        let g = m - l_hat + 1;
        let phi = ToeplitzOperator::from_training_sequence(&pn, g, l_hat).unwrap();
        let mut ops = OpCounter::new();
        let y = phi.apply(&h[..l_hat], &mut ops).unwrap();
        Measurement {
            y_bar: y,
            phi,
            averaged_over: 2,
            under_observed: false,
        }
    }

    fn gaussian_measurement(
        g: usize,
        l_hat: usize,
        h: &[C64],
        seed: u64,
    ) -> Measurement {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (g as f64).sqrt();
        let col: CVec = (0..g)
            .map(|_| {
                C64::new(
                    scale * rng.gen_range(-1.0..1.0f64),
                    scale * rng.gen_range(-1.0..1.0f64),
                )
            })
            .collect();
        let row: CVec = std::iter::once(col[0])
            .chain((1..l_hat).map(|_| {
                C64::new(
                    scale * rng.gen_range(-1.0..1.0f64),
                    scale * rng.gen_range(-1.0..1.0f64),
                )
            }))
            .collect();
        let phi = ToeplitzOperator::new(col, row).unwrap();
        let mut ops = OpCounter::new();
        let y = phi.apply(h, &mut ops).unwrap();
        Measurement {
            y_bar: y,
            phi,
            averaged_over: 2,
            under_observed: false,
        }
    }

    #[test]
    fn iht_diverges_on_training_band() {
        // the +/-1 band has spectral norm well above one; the raw
        // gradient iteration must blow up and say so
        let m = 64;
        let l_hat = 32;
        let mut h = vec![C64::new(0.0, 0.0); m];
        h[0] = C64::new(1.0, 0.0);
        h[5] = C64::new(0.5, 0.0);
        let meas = pn_measurement(m, l_hat, &h);
        let est = iht_classic(&meas, 2, 20, 1e-8).unwrap();
        assert_eq!(est.status, EstimateStatus::Diverged);
        println!(
            "classical iteration diverged after {} steps, residual {:.2e}",
            est.iterations_used, est.residual
        );
    }

    #[test]
    fn iht_recovers_when_operator_contracts() {
        // same band scaled to spectral norm below one: textbook recovery
        let m = 64;
        let l_hat = 32;
        let g = m - l_hat + 1;
        let pn = pn_sequence(m).unwrap();
        let scale = 1.0 / ((g * l_hat) as f64).sqrt();
        let scaled: Vec<f64> = pn.iter().map(|&v| v * scale).collect();
        let phi = ToeplitzOperator::from_training_sequence(&scaled, g, l_hat).unwrap();
        let mut h = vec![C64::new(0.0, 0.0); l_hat];
        h[0] = C64::new(1.0, 0.0);
        h[5] = C64::new(0.5, -0.25);
        let mut ops = OpCounter::new();
        let y = phi.apply(&h, &mut ops).unwrap();
        let meas = Measurement {
            y_bar: y,
            phi,
            averaged_over: 2,
            under_observed: false,
        };
        let est = iht_classic(&meas, 2, 3000, 1e-10 * norm(&meas.y_bar)).unwrap();
        assert_eq!(est.status, EstimateStatus::Converged);
        assert_eq!(est.support, vec![0, 5]);
        for (&t, gn) in est.support.iter().zip(est.gains.iter()) {
            assert!((gn - h[t]).norm() < 1e-6, "tap {t}");
        }
    }

    #[test]
    fn iht_rejects_zero_sparsity() {
        let m = 32;
        let mut h = vec![C64::new(0.0, 0.0); m];
        h[0] = C64::new(1.0, 0.0);
        let meas = pn_measurement(m, 8, &h);
        assert!(matches!(
            iht_classic(&meas, 0, 10, 1e-8),
            Err(EstimatorError::ZeroSparsity)
        ));
    }

    #[test]
    fn cosamp_exact_recovery_matches_exhaustive_oracle() {
        // noiseless, well-conditioned operator, G = 16 >= 4S: recovery is
        // exact and agrees with brute force over all C(10, 2) supports
        let l_hat = 10;
        let g = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for inst in 0..40 {
            let mut h = vec![C64::new(0.0, 0.0); l_hat];
            let mut picked: Vec<usize> = Vec::new();
            while picked.len() < 2 {
                let t = rng.gen_range(0..l_hat);
                if !picked.contains(&t) {
                    picked.push(t);
                }
            }
            picked.sort_unstable();
            for &t in &picked {
                h[t] = C64::new(rng.gen_range(0.4..1.0), rng.gen_range(-0.5..0.5));
            }
            let meas = gaussian_measurement(g, l_hat, &h, 900 + inst);
            let est = cosamp(&meas, 2, 10, None, 1e-10 * norm(&meas.y_bar)).unwrap();
            assert_eq!(est.support, picked, "instance {inst}");
            for (&t, gn) in est.support.iter().zip(est.gains.iter()) {
                assert!((gn - h[t]).norm() < 1e-8);
            }

            // exhaustive least-squares oracle
            let mut best = (f64::INFINITY, Vec::new());
            for t1 in 0..l_hat {
                for t2 in t1 + 1..l_hat {
                    let cols =
                        vec![meas.phi.column(t1), meas.phi.column(t2)];
                    let mut ops = OpCounter::new();
                    if let Ok((cf, _)) =
                        least_squares_dropping(&cols, &meas.y_bar, &mut ops)
                    {
                        let mut x = vec![C64::new(0.0, 0.0); l_hat];
                        x[t1] = cf[0];
                        x[t2] = cf[1];
                        let (_, res) =
                            residual_norm(&meas.y_bar, &meas.phi, &x, &mut ops).unwrap();
                        if res < best.0 {
                            best = (res, vec![t1, t2]);
                        }
                    }
                }
            }
            assert_eq!(est.support, best.1, "oracle disagreed on {inst}");
        }
    }

    #[test]
    fn cosamp_true_warm_support_converges_in_one() {
        let l_hat = 12;
        let g = 20;
        let mut h = vec![C64::new(0.0, 0.0); l_hat];
        h[1] = C64::new(0.9, 0.2);
        h[7] = C64::new(-0.4, 0.1);
        let meas = gaussian_measurement(g, l_hat, &h, 77);
        let est = cosamp(&meas, 2, 1, Some(&[1, 7]), 1e-10 * norm(&meas.y_bar)).unwrap();
        assert_eq!(est.status, EstimateStatus::Converged);
        assert_eq!(est.iterations_used, 1);
        assert_eq!(est.support, vec![1, 7]);
        assert!(est.residual < 1e-9);
    }

    #[test]
    fn cosamp_budget_precondition() {
        let l_hat = 8;
        let mut h = vec![C64::new(0.0, 0.0); l_hat];
        h[0] = C64::new(1.0, 0.0);
        let meas = gaussian_measurement(12, l_hat, &h, 5);
        let err = cosamp(&meas, 3, 5, None, 1e-8).unwrap_err();
        assert!(err.to_string().contains("exceeds dictionary"), "{err}");
        assert!(cosamp(&meas, 0, 5, None, 1e-8).is_err());
    }

    #[test]
    fn cosamp_runs_full_budget_and_keeps_best() {
        let l_hat = 12;
        let g = 18;
        let mut h = vec![C64::new(0.0, 0.0); l_hat];
        h[2] = C64::new(0.8, 0.0);
        h[9] = C64::new(0.5, 0.3);
        let mut meas = gaussian_measurement(g, l_hat, &h, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for v in meas.y_bar.iter_mut() {
            *v += C64::new(0.05 * rng.gen_range(-1.0..1.0), 0.05 * rng.gen_range(-1.0..1.0));
        }
        let est = cosamp(&meas, 2, 4, None, 0.0).unwrap();
        assert_eq!(est.status, EstimateStatus::MaxIters);
        assert_eq!(est.iterations_used, 4);
        assert!(est.residual.is_finite());
        // best-residual iterate is at least as good as a fresh one-shot fit
        let one = cosamp(&meas, 2, 1, None, 0.0).unwrap();
        assert!(est.residual <= one.residual + 1e-12);
    }

    fn zero_data_stream(
        fr: &FrameConfig,
        pn: &[f64],
        ch: &ChannelRealization,
        n_sym: usize,
        snr_db: Option<f64>,
        seed: u64,
    ) -> RxStream {
        let mut tx = Vec::new();
        for _ in 0..n_sym {
            for &p in pn {
                tx.push(C64::new(p, 0.0));
            }
            tx.extend(std::iter::repeat(C64::new(0.0, 0.0)).take(fr.n));
        }
        if fr.dual_pn {
            // assemble manually: guard is [c; c]
            tx.clear();
            for _ in 0..n_sym {
                for _ in 0..2 {
                    for &p in pn {
                        tx.push(C64::new(p, 0.0));
                    }
                }
                tx.extend(std::iter::repeat(C64::new(0.0, 0.0)).take(fr.n));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        transmit(&tx, ch, fr, snr_db, &mut rng).unwrap()
    }

    fn taps_ch(n_sym: usize, taps: &[(usize, f64)]) -> ChannelRealization {
        let delays: Vec<usize> = taps.iter().map(|t| t.0).collect();
        let gains: Vec<CVec> = (0..n_sym)
            .map(|_| taps.iter().map(|t| C64::new(t.1, 0.0)).collect())
            .collect();
        ChannelRealization::from_gains(delays, gains)
    }

    /// Apparent amplitude of a unit tap at delay `tau` in a raw (not
    /// overlap-added) guard window: the window misses the head spill, and
    /// despreading is linear, so apparent = |1 - despread(head)[tau]| with
    /// head[t] = c[(t - tau) mod M] for t < tau.
    fn raw_window_apparent(pn: &[f64], tau: usize) -> f64 {
        let m = pn.len();
        let pn_c: CVec = pn.iter().map(|&v| C64::new(v, 0.0)).collect();
        let mut ops = OpCounter::new();
        let plan = DespreaderPlan::new(&pn_c, &mut ops).unwrap();
        let head: CVec = (0..m)
            .map(|t| {
                if t < tau {
                    C64::new(pn[(t + m - tau) % m], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let d = plan.despread(&head, &mut ops).unwrap();
        (C64::new(1.0, 0.0) - d[tau]).norm()
    }

    #[test]
    fn dai_profile_attenuates_long_echo() {
        // zero data, noiseless, single tap at 200 of 256: the main window
        // misses the echo's head spill, so the despread amplitude drops
        // far below the true 1.0 — this is why the two-window coarse
        // stage loses long echoes
        let fr = FrameConfig::new(256, 2048, false).unwrap();
        let pn = pn_sequence(256).unwrap();
        let ch = taps_ch(6, &[(200, 1.0)]);
        let rx = zero_data_stream(&fr, &pn, &ch, 6, None, 3);
        let mut ops = OpCounter::new();
        let pr = dai_coarse(&rx, &pn, 2, None, 1, &EthParams::default(), &mut ops).unwrap();
        let want = raw_window_apparent(&pn, 200);
        assert!(
            (pr.h_bar[200] - want).abs() < 1e-12,
            "apparent amplitude {} vs linearity oracle {}",
            pr.h_bar[200],
            want
        );
        assert!(want < 0.3, "long echo barely attenuated: {want}");
    }

    #[test]
    fn dai_detects_short_delays_and_uses_two_windows_only() {
        let fr = FrameConfig::new(256, 2048, false).unwrap();
        let pn = pn_sequence(256).unwrap();
        // symbol 3 has a huge gain; dai at i=0 must not see it
        let gains: Vec<CVec> = (0..6)
            .map(|s| vec![C64::new(if s == 3 { 100.0 } else { 1.0 }, 0.0)])
            .collect();
        let ch = ChannelRealization::from_gains(vec![4], gains);
        let rx = zero_data_stream(&fr, &pn, &ch, 6, None, 9);
        let mut ops = OpCounter::new();
        let pr = dai_coarse(&rx, &pn, 0, None, 1, &EthParams::default(), &mut ops).unwrap();
        assert!(pr.d0.contains(&4));
        let want = raw_window_apparent(&pn, 4);
        assert!(
            (pr.h_bar[4] - want).abs() < 1e-12,
            "got {} want {} — a leak from the boosted symbol would dwarf both",
            pr.h_bar[4],
            want
        );
        assert!(want > 0.9, "short delay should be nearly unattenuated");
    }

    #[test]
    fn dai_empty_detection_errors() {
        let fr = FrameConfig::new(64, 128, false).unwrap();
        let pn = pn_sequence(64).unwrap();
        let ch = ChannelRealization::from_gains(
            vec![0],
            (0..4).map(|_| vec![C64::new(0.0, 0.0)]).collect(),
        );
        let rx = zero_data_stream(&fr, &pn, &ch, 4, None, 1);
        let mut ops = OpCounter::new();
        assert!(matches!(
            dai_coarse(&rx, &pn, 0, None, 1, &EthParams::default(), &mut ops),
            Err(EstimatorError::NoPaths)
        ));
    }

    #[test]
    fn dpn_requires_dual_guard() {
        let fr = FrameConfig::new(64, 128, false).unwrap();
        let pn = pn_sequence(64).unwrap();
        let ch = taps_ch(4, &[(0, 1.0)]);
        let rx = zero_data_stream(&fr, &pn, &ch, 4, None, 1);
        let _ops = OpCounter::new();
        assert!(matches!(
            dpn_estimate(&rx, &pn, 2, &EthParams::default()),
            Err(EstimatorError::NeedsDualPn)
        ));
    }

    #[test]
    fn dpn_single_tap_is_exact_on_clean_second_copy() {
        let fr = FrameConfig::new(256, 2048, true).unwrap();
        let pn = pn_sequence(256).unwrap();
        let ch = taps_ch(4, &[(0, 1.0)]);
        let rx = zero_data_stream(&fr, &pn, &ch, 4, None, 1);
        // sequence sidelobes peak near 0.08 of the main lobe; raise the
        // peak floor so the support reports the tap alone
        let eth = EthParams {
            peak_frac: 0.12,
            ..EthParams::default()
        };
        let est = dpn_estimate(&rx, &pn, 2, &eth).unwrap();
        assert!((est.dense[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(est.support, vec![0]);
        // raw dense keeps the sidelobe floor rather than zeroing it
        let floor: f64 = est.dense[1..].iter().map(|c| c.norm_sqr()).sum();
        assert!(floor > 1e-6, "sidelobe floor missing: {floor:.3e}");
    }

    #[test]
    fn dpn_delayed_tap_recovered_with_delay_offset() {
        // second copy sees the full circular convolution, so a delayed
        // tap lands exactly on its bin
        let fr = FrameConfig::new(256, 2048, true).unwrap();
        let pn = pn_sequence(256).unwrap();
        let ch = taps_ch(4, &[(37, 0.8)]);
        let rx = zero_data_stream(&fr, &pn, &ch, 4, None, 1);
        let _ops = OpCounter::new();
        let est = dpn_estimate(&rx, &pn, 2, &EthParams::default()).unwrap();
        assert!((est.dense[37] - C64::new(0.8, 0.0)).norm() < 1e-12);
        assert!(est.support.contains(&37));
    }

    #[test]
    fn dpn_variance_halves_with_double_averaging() {
        let fr = FrameConfig::new(64, 128, true).unwrap();
        let pn = pn_sequence(64).unwrap();
        let mut errs1 = Vec::new();
        let mut errs2 = Vec::new();
        for t in 0..400u64 {
            let ch = taps_ch(4, &[(0, 1.0)]);
            let rx = zero_data_stream(&fr, &pn, &ch, 4, Some(10.0), 1000 + t);
            let _ops = OpCounter::new();
            let e1 = dpn_estimate(&rx, &pn, 1, &EthParams::default()).unwrap();
            let e2 = dpn_estimate(&rx, &pn, 2, &EthParams::default()).unwrap();
            errs1.push((e1.dense[0] - C64::new(1.0, 0.0)).norm_sqr());
            errs2.push((e2.dense[0] - C64::new(1.0, 0.0)).norm_sqr());
        }
        let v1: f64 = errs1.iter().sum::<f64>() / errs1.len() as f64;
        let v2: f64 = errs2.iter().sum::<f64>() / errs2.len() as f64;
        let ratio = v1 / v2;
        println!("tap variance R=1 {v1:.3e}, R=2 {v2:.3e}, ratio {ratio:.2}");
        assert!(ratio > 1.5 && ratio < 2.6, "ratio {ratio}");
    }

    #[test]
    fn dpn_deep_fade_absent_from_support() {
        let fr = FrameConfig::new(256, 2048, true).unwrap();
        let pn = pn_sequence(256).unwrap();
        let ch = taps_ch(4, &[(0, 1.0), (50, 0.001)]);
        let rx = zero_data_stream(&fr, &pn, &ch, 4, None, 1);
        let eth = EthParams {
            peak_frac: 0.12,
            ..EthParams::default()
        };
        let est = dpn_estimate(&rx, &pn, 2, &eth).unwrap();
        assert!(!est.support.contains(&50));
    }

    #[test]
    fn dpn_bad_averaging_span_rejected() {
        let fr = FrameConfig::new(64, 128, true).unwrap();
        let pn = pn_sequence(64).unwrap();
        let ch = taps_ch(4, &[(0, 1.0)]);
        let rx = zero_data_stream(&fr, &pn, &ch, 4, None, 1);
        let _ops = OpCounter::new();
        assert!(dpn_estimate(&rx, &pn, 0, &EthParams::default()).is_err());
        assert!(dpn_estimate(&rx, &pn, 5, &EthParams::default()).is_err());
    }
}
