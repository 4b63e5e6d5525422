//! Prior-aided iterative hard thresholding, least-squares gain
//! refinement on a fixed support, and the estimation error bound.

use super::{
    ChannelEstimate, CoarsePriors, EstimateStatus, EstimatorError, Measurement, embed,
    residual_norm, support_of,
};
use crate::numerics::{C64, CVec, OpCounter, least_squares, norm, top_k_support};

/// Default stopping tolerance relative to the measurement energy.
pub fn default_tol(y_bar: &[C64]) -> f64 {
    1e-8 * norm(y_bar)
}

/// Support recovery by prior-aided hard thresholding.
///
/// Starts from the detected delays with their coarse gains, then
/// alternates a gradient proxy z = x + phi^H (y - phi x) with a top-S
/// support reselection. Reselected taps always take their *coarse* gain
/// value; gains are never re-fit here. Accepts an iterate only while the
/// residual strictly decreases; on a non-decrease the previous iterate is
/// returned. Stops early once the residual drops below `tol`.
pub fn pa_iht(
    meas: &Measurement,
    priors: &CoarsePriors,
    max_iters: usize,
    tol: f64,
) -> Result<ChannelEstimate, EstimatorError> {
    let mut ops = OpCounter::new();
    let l_hat = meas.phi.cols();
    let g = meas.phi.rows();
    let m = g + l_hat - 1;
    let s = priors.s;
    if s == 0 {
        return Err(EstimatorError::ZeroSparsity);
    }
    if priors.h_bar_prime.len() < l_hat {
        return Err(EstimatorError::BadInput(
            "coarse gains missing (run coarse_gains first)".into(),
        ));
    }

    let mut x = vec![C64::new(0.0, 0.0); l_hat];
    for &t in &priors.d0 {
        if t < l_hat {
            x[t] = priors.h_bar_prime[t];
        }
    }
    let (mut r, mut res) = residual_norm(&meas.y_bar, &meas.phi, &x, &mut ops)?;
    let mut iterations_used = 0usize;
    let mut status = EstimateStatus::MaxIters;
    if res < tol {
        status = EstimateStatus::Converged;
    } else {
        for _ in 0..max_iters {
            // gradient proxy, then reselect the S strongest taps
            let adj = meas.phi.apply_adjoint(&r, &mut ops)?;
            let mut z = x.clone();
            for (zi, ai) in z.iter_mut().zip(adj.iter()) {
                *zi += ai;
            }
            ops.complex_adds += l_hat as u64;
            let gamma = top_k_support(&z, s.min(l_hat))?;
            let mut x_new = x.clone();
            for &t in &gamma {
                x_new[t] = priors.h_bar_prime[t];
            }
            // prune back to the S strongest coarse gains
            let keep = top_k_support(&x_new, s.min(l_hat))?;
            let mut pruned = vec![C64::new(0.0, 0.0); l_hat];
            for &t in &keep {
                pruned[t] = x_new[t];
            }
            let (r_new, res_new) = residual_norm(&meas.y_bar, &meas.phi, &pruned, &mut ops)?;
            if res_new >= res {
                status = EstimateStatus::Stalled;
                break;
            }
            x = pruned;
            r = r_new;
            res = res_new;
            iterations_used += 1;
            if res < tol {
                status = EstimateStatus::Converged;
                break;
            }
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

/// Least-squares gain refinement on a fixed support. Errors with
/// "singular support" when the selected columns are rank-deficient
/// (including supports wider than the observation).
pub fn ml_refine(meas: &Measurement, support: &[usize]) -> Result<ChannelEstimate, EstimatorError> {
    let mut ops = OpCounter::new();
    let l_hat = meas.phi.cols();
    let g = meas.phi.rows();
    let m = g + l_hat - 1;
    if support.is_empty() {
        return Err(EstimatorError::BadInput("empty support".into()));
    }
    let mut d: Vec<usize> = support.to_vec();
    d.sort_unstable();
    d.dedup();
    if d.len() != support.len() {
        return Err(EstimatorError::BadInput("support has repeats".into()));
    }
    if *d.last().unwrap() >= l_hat {
        return Err(EstimatorError::BadInput(format!(
            "support index {} outside dictionary 0..{l_hat}",
            d.last().unwrap()
        )));
    }
    let cols: Vec<CVec> = d.iter().map(|&j| meas.phi.column(j)).collect();
    let gains = least_squares(&cols, &meas.y_bar, &mut ops).map_err(|e| match e {
        crate::numerics::NumericsError::SingularSystem => EstimatorError::SingularSupport,
        other => EstimatorError::Numerics(other),
    })?;
    let mut x = vec![C64::new(0.0, 0.0); l_hat];
    for (&t, &gn) in d.iter().zip(gains.iter()) {
        x[t] = gn;
    }
    let (_, res) = residual_norm(&meas.y_bar, &meas.phi, &x, &mut ops)?;
    Ok(ChannelEstimate {
        support: d,
        gains,
        dense: embed(&x, m),
        iterations_used: 1,
        ops,
        status: EstimateStatus::Converged,
        residual: res,
    })
}

/// Lower bound on the mean squared channel estimation error for an
/// S-sparse channel observed through G samples averaged over 2 R_g2
/// windows at linear SNR rho: S / (2 R_g2 G rho).
pub fn crlb(s: usize, g: usize, r_g2: usize, snr_linear: f64) -> Result<f64, EstimatorError> {
    if s == 0 || g == 0 || r_g2 == 0 {
        return Err(EstimatorError::BadInput(
            "bound needs positive sparsity, region size and averaging".into(),
        ));
    }
    if !(snr_linear > 0.0) {
        return Err(EstimatorError::BadInput(format!(
            "bound needs positive SNR, got {snr_linear}"
        )));
    }
    Ok(s as f64 / (2.0 * r_g2 as f64 * g as f64 * snr_linear))
}
