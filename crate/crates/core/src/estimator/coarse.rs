//! Coarse acquisition from the guard windows: overlap-add reconstruction,
//! averaged correlation profiles, delay detection, coarse gains, and the
//! averaged IBI-free measurement.

use super::{CoarsePriors, EstimatorError, EthParams, Measurement};
use crate::channel::{CoherenceParams, RxStream};
use crate::numerics::{C64, CVec, DespreaderPlan, OpCounter, ToeplitzOperator};

/// Guard window of symbol `k` with the guard's own convolution tail
/// (which spilled into the data region) folded back onto its head. The
/// first `tail_len` received data samples are added to the first
/// `tail_len` guard samples, approximating a circular convolution of the
/// training sequence.
pub fn overlap_add_ts(
    rx: &RxStream,
    k: usize,
    tail_len: usize,
    ops: &mut OpCounter,
) -> Result<CVec, EstimatorError> {
    let m = rx.frame.m;
    if tail_len > m || tail_len > rx.frame.n {
        return Err(EstimatorError::BadInput(format!(
            "overlap-add tail {tail_len} exceeds window (m={}, n={})",
            m, rx.frame.n
        )));
    }
    let mut w = rx.ts_window(k)?.to_vec();
    let tail = rx.data_head(k, tail_len)?;
    for (wi, ti) in w.iter_mut().zip(tail.iter()) {
        *wi += ti;
    }
    ops.complex_adds += tail_len as u64;
    Ok(w)
}

fn scale_in_place(v: &mut [C64], s: f64, ops: &mut OpCounter) {
    for x in v.iter_mut() {
        *x *= s;
    }
    ops.complex_mults += v.len() as u64;
}

/// Detect path delays from sliding averaged guard despreads.
///
/// Guard windows are grouped R_g1 at a time; the group start q runs
/// over the 2 R_d - R_g1 positions [i + 1 - R_d, i + R_d - R_g1], each
/// group is overlap-added, averaged, despread against the training
/// sequence (exact deconvolution, not plain correlation: the cycled
/// sequence's autocorrelation sidelobes would otherwise leave a
/// deterministic floor that buries weak paths), and the magnitudes are
/// averaged into the delay profile h_bar. Detection thresholds h_bar with
/// the E_th rule; the channel length estimate is max(D0) + a with a
/// defaulting to max(1, round(0.1 max(D0))).
pub fn coarse_delays(
    rx: &RxStream,
    pn: &[f64],
    params: &CoherenceParams,
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
    if params.r_g1 == 0 || params.r_d == 0 || 2 * params.r_d < params.r_g1 {
        return Err(EstimatorError::BadInput(format!(
            "bad averaging horizons r_g1={} r_d={}",
            params.r_g1, params.r_d
        )));
    }
    if i + 1 < params.r_d {
        return Err(EstimatorError::BadInput(format!(
            "estimation symbol {i} leaves no room for {} look-back symbols",
            params.r_d
        )));
    }
    let q_lo = i + 1 - params.r_d;
    let q_hi = i + params.r_d - params.r_g1; // inclusive
    let n_groups = q_hi - q_lo + 1; // == 2 r_d - r_g1

    // Cache the overlap-added windows the groups slide over.
    let k_hi = q_hi + params.r_g1 - 1;
    let mut windows: Vec<CVec> = Vec::with_capacity(k_hi - q_lo + 1);
    for k in q_lo..=k_hi {
        windows.push(overlap_add_ts(rx, k, m, ops)?);
    }

    let pn_c: CVec = pn.iter().map(|&v| C64::new(v, 0.0)).collect();
    let plan = DespreaderPlan::new(&pn_c, ops)?;

    // Running group sum (slide by one window per q).
    let mut acc = vec![C64::new(0.0, 0.0); m];
    for w in &windows[..params.r_g1] {
        for (a, x) in acc.iter_mut().zip(w.iter()) {
            *a += x;
        }
        ops.complex_adds += m as u64;
    }
    let scale = 1.0 / params.r_g1 as f64;
    let mut h_bar = vec![0.0f64; m];
    for g in 0..n_groups {
        let mut avg = acc.clone();
        scale_in_place(&mut avg, scale, ops);
        let corr = plan.despread(&avg, ops)?;
        for (hb, c) in h_bar.iter_mut().zip(corr.iter()) {
            *hb += c.norm();
        }
        ops.complex_mults += m as u64;
        ops.complex_adds += m as u64;
        if g + 1 < n_groups {
            let out = &windows[g];
            let inc = &windows[g + params.r_g1];
            for ((a, o), n) in acc.iter_mut().zip(out.iter()).zip(inc.iter()) {
                *a += n - o;
            }
            ops.complex_adds += 2 * m as u64;
        }
    }
    for hb in h_bar.iter_mut() {
        *hb /= n_groups as f64;
    }
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
    // Slack past the last detected delay covers grid straddle and a tap
    // just under the threshold; scaling it with the spread stays in the
    // few-sample range even for long echoes so it never starves the
    // observation window.
    let a = a_override.unwrap_or_else(|| (0.02 * max_d0 as f64).round().max(2.0) as usize);
    let l_raw = max_d0 + a;
    let guard_limited = l_raw > m;
    let l_hat = l_raw.min(m);
    let g_hat = m - l_hat + 1;
    let s0 = d0.len();
    let s = (s0 + b).min(l_hat);
    Ok(CoarsePriors {
        d0,
        h_bar,
        h_bar_prime: Vec::new(),
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

/// Complex coarse gains: despread the average of the 2 R_g2 overlap-added
/// guard windows around symbol `i` (folded tail truncated to the channel
/// length estimate) against the training sequence.
pub fn coarse_gains(
    rx: &RxStream,
    pn: &[f64],
    params: &CoherenceParams,
    i: usize,
    l_hat: usize,
    ops: &mut OpCounter,
) -> Result<CVec, EstimatorError> {
    let m = rx.frame.m;
    if pn.len() != m {
        return Err(EstimatorError::BadInput(format!(
            "training sequence length {} != guard length {m}",
            pn.len()
        )));
    }
    if params.r_g2 == 0 || i + 1 < params.r_g2 {
        return Err(EstimatorError::BadInput(format!(
            "estimation symbol {i} leaves no room for {} gain windows",
            params.r_g2
        )));
    }
    let tail = l_hat.min(m);
    let mut acc = vec![C64::new(0.0, 0.0); m];
    for k in (i + 1 - params.r_g2)..=(i + params.r_g2) {
        let w = overlap_add_ts(rx, k, tail, ops)?;
        for (a, x) in acc.iter_mut().zip(w.iter()) {
            *a += x;
        }
        ops.complex_adds += m as u64;
    }
    scale_in_place(&mut acc, 1.0 / (2.0 * params.r_g2 as f64), ops);
    let pn_c: CVec = pn.iter().map(|&v| C64::new(v, 0.0)).collect();
    let plan = DespreaderPlan::new(&pn_c, ops)?;
    Ok(plan.despread(&acc, ops)?)
}

/// Average the IBI-free tail of the 2 R_g2 guard windows around symbol
/// `i` and pair it with the banded convolution operator that explains it.
pub fn build_measurement(
    rx: &RxStream,
    pn: &[f64],
    priors: &CoarsePriors,
    params: &CoherenceParams,
    i: usize,
    ops: &mut OpCounter,
) -> Result<Measurement, EstimatorError> {
    let m = rx.frame.m;
    if pn.len() != m {
        return Err(EstimatorError::BadInput(format!(
            "training sequence length {} != guard length {m}",
            pn.len()
        )));
    }
    if params.r_g2 == 0 || i + 1 < params.r_g2 {
        return Err(EstimatorError::BadInput(format!(
            "estimation symbol {i} leaves no room for {} measurement windows",
            params.r_g2
        )));
    }
    let g = priors.g_hat;
    let mut y_bar = vec![C64::new(0.0, 0.0); g];
    let mut averaged_over = 0usize;
    for k in (i + 1 - params.r_g2)..=(i + params.r_g2) {
        let w = rx.ibi_free(k, priors.l_hat)?;
        debug_assert_eq!(w.len(), g);
        for (y, x) in y_bar.iter_mut().zip(w.iter()) {
            *y += x;
        }
        ops.complex_adds += g as u64;
        averaged_over += 1;
    }
    scale_in_place(&mut y_bar, 1.0 / averaged_over as f64, ops);
    let phi = ToeplitzOperator::from_training_sequence(pn, g, priors.l_hat)?;
    Ok(Measurement {
        y_bar,
        phi,
        averaged_over,
        under_observed: priors.g_hat < priors.s,
    })
}
