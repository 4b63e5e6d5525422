//! Sparse channel estimation from the guard-interval observations: coarse
//! acquisition (delay detection + gain correlation), prior-aided hard
//! thresholding for support recovery, least-squares gain refinement, the
//! matching-pursuit and correlation baselines, and the estimation error
//! bound.

pub mod baselines;
pub mod coarse;
pub mod pa_iht;

pub use baselines::{cosamp, dai_coarse, dpn_estimate, iht_classic};
pub use coarse::{build_measurement, coarse_delays, coarse_gains, overlap_add_ts};
pub use pa_iht::{crlb, default_tol, ml_refine, pa_iht};

use crate::channel::ChannelError;
use crate::numerics::{C64, CVec, NumericsError, OpCounter, ToeplitzOperator};

#[derive(Debug, thiserror::Error)]
pub enum EstimatorError {
    #[error("no paths detected")]
    NoPaths,
    #[error("singular support")]
    SingularSupport,
    #[error("sparsity must be at least 1")]
    ZeroSparsity,
    #[error("candidate budget 3S = {budget} exceeds dictionary size {l_hat}")]
    SupportBudget { budget: usize, l_hat: usize },
    #[error("dual-PN framing required")]
    NeedsDualPn,
    #[error("bad estimator input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Window(#[from] ChannelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Detection threshold rule: E_th = max(sigma_mult * sigma_hat,
/// peak_frac * max), where sigma_hat is a robust noise scale taken as
/// 1.4826 * median(profile) over the trailing guard band of the delay
/// axis (indices >= guard_frac * len).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EthParams {
    pub sigma_mult: f64,
    pub peak_frac: f64,
    pub guard_frac: f64,
}

impl Default for EthParams {
    fn default() -> Self {
        Self {
            sigma_mult: 3.0,
            peak_frac: 0.05,
            guard_frac: 0.5,
        }
    }
}

impl EthParams {
    /// Threshold for a nonnegative magnitude profile.
    pub fn threshold(&self, profile: &[f64]) -> f64 {
        let n = profile.len();
        let start = ((n as f64 * self.guard_frac) as usize).min(n.saturating_sub(1));
        let mut band: Vec<f64> = profile[start..].to_vec();
        band.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let median = if band.is_empty() {
            0.0
        } else if band.len() % 2 == 1 {
            band[band.len() / 2]
        } else {
            0.5 * (band[band.len() / 2 - 1] + band[band.len() / 2])
        };
        let sigma_hat = 1.4826 * median;
        let peak = profile.iter().cloned().fold(0.0f64, f64::max);
        (self.sigma_mult * sigma_hat).max(self.peak_frac * peak)
    }
}

/// Output of the coarse acquisition stage: detected delays, magnitude
/// profile, complex coarse gains, and the derived sizes.
#[derive(Debug, Clone)]
pub struct CoarsePriors {
    /// Detected delay set, ascending.
    pub d0: Vec<usize>,
    /// Averaged magnitude profile over the full guard length.
    pub h_bar: Vec<f64>,
    /// Complex coarse gain estimate over the full guard length (filled by
    /// `coarse_gains`; empty until then).
    pub h_bar_prime: CVec,
    /// Channel length estimate max(D0) + a, clamped to the guard length.
    pub l_hat: usize,
    /// IBI-free region size M - l_hat + 1.
    pub g_hat: usize,
    /// |D0|.
    pub s0: usize,
    /// Working sparsity S0 + b, capped at l_hat.
    pub s: usize,
    pub e_th: f64,
    pub a: usize,
    pub b: usize,
    /// Set when max(D0) + a had to be clamped to the guard length.
    pub guard_limited: bool,
}

impl CoarsePriors {
    /// Override the IBI-free region size (sweep experiments), rederiving
    /// l_hat = m - g + 1 and re-capping the sparsity budget.
    pub fn force_guard_size(&mut self, g: usize, m: usize) -> Result<(), EstimatorError> {
        if g == 0 || g > m {
            return Err(EstimatorError::BadInput(format!(
                "forced region size {g} outside 1..={m}"
            )));
        }
        self.l_hat = m - g + 1;
        self.g_hat = g;
        self.guard_limited = false;
        self.s = (self.s0 + self.b).min(self.l_hat);
        Ok(())
    }
}

/// Averaged IBI-free observation plus the banded convolution operator it
/// is explained by.
#[derive(Debug)]
pub struct Measurement {
    pub y_bar: CVec,
    pub phi: ToeplitzOperator,
    /// Number of symbol windows averaged into y_bar (2 * R_g2).
    pub averaged_over: usize,
    /// Fewer observations than the sparsity budget.
    pub under_observed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateStatus {
    Converged,
    Stalled,
    MaxIters,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// Nonzero tap positions, ascending.
    pub support: Vec<usize>,
    /// Gains aligned with `support`.
    pub gains: CVec,
    /// Length-M dense view.
    pub dense: CVec,
    pub iterations_used: usize,
    pub ops: OpCounter,
    pub status: EstimateStatus,
    /// ||y_bar - phi * estimate|| at return.
    pub residual: f64,
}

impl ChannelEstimate {
    pub fn from_sparse(
        support: Vec<usize>,
        gains: CVec,
        m: usize,
        iterations_used: usize,
        ops: OpCounter,
        status: EstimateStatus,
        residual: f64,
    ) -> Self {
        assert_eq!(support.len(), gains.len());
        let mut dense = vec![C64::new(0.0, 0.0); m];
        for (&t, &g) in support.iter().zip(gains.iter()) {
            dense[t] = g;
        }
        Self {
            support,
            gains,
            dense,
            iterations_used,
            ops,
            status,
            residual,
        }
    }
}

/// Embed a dictionary-domain vector (length l_hat) into a length-m dense
/// view.
pub(crate) fn embed(x: &[C64], m: usize) -> CVec {
    let mut dense = vec![C64::new(0.0, 0.0); m];
    dense[..x.len()].copy_from_slice(x);
    dense
}

pub(crate) fn support_of(x: &[C64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| v.norm_sqr() > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// ||y - phi x|| with op charging; x lives in the dictionary domain.
pub(crate) fn residual_norm(
    y: &[C64],
    phi: &ToeplitzOperator,
    x: &[C64],
    ops: &mut OpCounter,
) -> Result<(CVec, f64), NumericsError> {
    let support = support_of(x);
    let ax = phi.apply_sparse(x, &support, ops)?;
    let mut r = y.to_vec();
    for (ri, ai) in r.iter_mut().zip(ax.iter()) {
        *ri -= ai;
    }
    ops.complex_adds += y.len() as u64;
    let n = crate::numerics::norm(&r);
    ops.complex_mults += y.len() as u64;
    ops.complex_adds += y.len() as u64;
    Ok((r, n))
}
