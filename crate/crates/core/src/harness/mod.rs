//! Reproducible Monte-Carlo experiments over the estimator stack: config
//! parsing, deterministic per-trial seeding, metric computation (MSE /
//! recovery probability / BER / op counts), and CSV + metadata emission.

pub mod demod;
pub mod experiments;
pub mod pipeline;
pub mod rng;

pub use demod::{demodulate, DemodOutcome};
pub use experiments::{config_hash, run, RunArtifacts};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelError, CoherenceParams};
use crate::estimator::{EstimatorError, EthParams};
use crate::numerics::{norm_sqr, C64, NumericsError, OpCounter};
use crate::signal::{FrameConfig, SignalError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("bad experiment config: {0}")]
    BadConfig(String),
    #[error("true channel is all zero; normalized MSE undefined")]
    ZeroTruth,
    #[error("dense views differ in length: {est} vs {truth}")]
    DenseLength { est: usize, truth: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RecoveryVsG,
    MseVsSnr,
    BerVsSnr,
    CirSnapshot,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::RecoveryVsG => "recovery_vs_g",
            ExperimentKind::MseVsSnr => "mse_vs_snr",
            ExperimentKind::BerVsSnr => "ber_vs_snr",
            ExperimentKind::CirSnapshot => "cir_snapshot",
        }
    }

    pub fn parse(name: &str) -> Result<Self, HarnessError> {
        match name {
            "recovery_vs_g" => Ok(ExperimentKind::RecoveryVsG),
            "mse_vs_snr" => Ok(ExperimentKind::MseVsSnr),
            "ber_vs_snr" => Ok(ExperimentKind::BerVsSnr),
            "cir_snapshot" => Ok(ExperimentKind::CirSnapshot),
            other => Err(HarnessError::BadConfig(format!(
                "unknown experiment {other:?}"
            ))),
        }
    }

    fn tag(self) -> u64 {
        match self {
            ExperimentKind::RecoveryVsG => 1,
            ExperimentKind::MseVsSnr => 2,
            ExperimentKind::BerVsSnr => 3,
            ExperimentKind::CirSnapshot => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    PaIht,
    Iht,
    Cosamp,
    Mcosamp,
    Dpn,
    Crlb,
    /// Genie reference for BER runs; appended automatically when missing.
    PerfectCsi,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::PaIht => "pa_iht",
            EstimatorKind::Iht => "iht",
            EstimatorKind::Cosamp => "cosamp",
            EstimatorKind::Mcosamp => "mcosamp",
            EstimatorKind::Dpn => "dpn",
            EstimatorKind::Crlb => "crlb",
            EstimatorKind::PerfectCsi => "perfect_csi",
        }
    }
}

/// Frame geometry as written in config files; validated into a
/// [`FrameConfig`] before use.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub m: usize,
    pub n: usize,
    #[serde(default)]
    pub dual_pn: bool,
}

impl FrameSpec {
    pub fn to_frame(self) -> Result<FrameConfig, HarnessError> {
        Ok(FrameConfig::new(self.m, self.n, self.dual_pn)?)
    }
}

/// Extra paths budget b = S - S0: either one value for every SNR point or
/// a piecewise table (larger b at lower SNR). A band covers all SNRs up to
/// its bound; SNRs beyond the last bound reuse the last band's value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BRule {
    Fixed(usize),
    Bands(Vec<BBand>),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BBand {
    pub up_to_snr_db: f64,
    pub b: usize,
}

impl Default for BRule {
    fn default() -> Self {
        BRule::Fixed(2)
    }
}

impl BRule {
    pub fn at(&self, snr_db: f64) -> usize {
        match self {
            BRule::Fixed(b) => *b,
            BRule::Bands(bands) => bands
                .iter()
                .find(|band| snr_db <= band.up_to_snr_db)
                .or_else(|| bands.last())
                .map(|band| band.b)
                .unwrap_or(2),
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let check = |b: usize| {
            if b > 5 {
                Err(HarnessError::BadConfig(format!(
                    "extra paths budget b = {b} outside 0..=5"
                )))
            } else {
                Ok(())
            }
        };
        match self {
            BRule::Fixed(b) => check(*b),
            BRule::Bands(bands) => {
                if bands.is_empty() {
                    return Err(HarnessError::BadConfig("empty b band table".into()));
                }
                if bands
                    .windows(2)
                    .any(|w| w[0].up_to_snr_db >= w[1].up_to_snr_db)
                {
                    return Err(HarnessError::BadConfig(
                        "b bands must have strictly increasing snr bounds".into(),
                    ));
                }
                bands.iter().try_for_each(|band| check(band.b))
            }
        }
    }
}

fn default_static_r_g1() -> usize {
    9
}

fn default_cap_r_d() -> usize {
    40
}

fn default_max_iters() -> usize {
    50
}

/// One experiment run, as parsed from a config file. Unknown keys are
/// rejected so a typo cannot silently fall back to a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub profile_name: String,
    #[serde(default)]
    pub snr_grid_db: Vec<f64>,
    #[serde(default)]
    pub g_grid: Vec<usize>,
    pub trials: usize,
    pub estimators: Vec<EstimatorKind>,
    pub frame: FrameSpec,
    pub seed: u64,
    /// Delay-spread slack added to max(D0); adaptive when absent.
    #[serde(default)]
    pub a: Option<usize>,
    #[serde(default)]
    pub b: BRule,
    #[serde(default)]
    pub e_th: EthParams,
    /// Delay-coherence horizon (odd symbol count) used for static profiles.
    #[serde(default = "default_static_r_g1")]
    pub static_r_g1: usize,
    /// Upper cap on the delay-persistence horizon for mobile profiles.
    #[serde(default = "default_cap_r_d")]
    pub cap_r_d: usize,
    /// Override of the quasi-static horizon used by the gain-averaging and
    /// measurement stages (the detection stage keeps the profile-derived
    /// horizons). Lets a run trade averaging gain against the bound it is
    /// compared to.
    #[serde(default)]
    pub r_g2_chain: Option<usize>,
    /// Symbols averaged by the doubled-guard reference estimator
    /// (default: the chain's 2 * R_g2).
    #[serde(default)]
    pub dpn_r: Option<usize>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::BadConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::BadConfig(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimators requested".into());
        }
        let frame = self.frame.to_frame()?;
        self.b.validate()?;
        if let Some(r) = self.r_g2_chain {
            if r == 0 {
                return bad("r_g2_chain override must be positive".into());
            }
        }
        if let Some(r) = self.dpn_r {
            if r == 0 {
                return bad("dpn_r must be positive".into());
            }
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        match self.experiment {
            ExperimentKind::RecoveryVsG => {
                if self.g_grid.is_empty() {
                    return bad("recovery_vs_g needs a g_grid".into());
                }
                if let Some(&g) = self.g_grid.iter().find(|&&g| g == 0 || g > frame.m) {
                    return bad(format!(
                        "region size {g} outside 1..={} in g_grid",
                        frame.m
                    ));
                }
                if self.snr_grid_db.len() > 1 {
                    return bad("recovery_vs_g runs at one SNR (default 20 dB)".into());
                }
            }
            ExperimentKind::MseVsSnr | ExperimentKind::BerVsSnr => {
                if self.snr_grid_db.is_empty() {
                    return bad("snr_grid_db must be nonempty".into());
                }
                if !self.g_grid.is_empty() {
                    return bad("g_grid only applies to recovery_vs_g".into());
                }
                if self.experiment == ExperimentKind::MseVsSnr
                    && !self.estimators.contains(&EstimatorKind::Crlb)
                {
                    return bad("mse_vs_snr needs the crlb reference estimator".into());
                }
                if self.experiment == ExperimentKind::BerVsSnr {
                    if self.estimators.contains(&EstimatorKind::Crlb) {
                        return bad("crlb has no bit error rate; drop it from ber_vs_snr".into());
                    }
                    let bits = self.trials as u64 * frame.bits_per_symbol() as u64;
                    if bits < 100_000 {
                        return bad(format!(
                            "ber_vs_snr needs >= 1e5 payload bits per point, got {bits} \
                             (trials x 2N)"
                        ));
                    }
                }
            }
            ExperimentKind::CirSnapshot => {
                if self.trials != 1 {
                    return bad("cir_snapshot is a single fixed-seed trial".into());
                }
                if self.snr_grid_db.len() != 1 {
                    return bad("cir_snapshot needs exactly one SNR point".into());
                }
                if !self.g_grid.is_empty() {
                    return bad("g_grid only applies to recovery_vs_g".into());
                }
                if self.estimators.contains(&EstimatorKind::Crlb) {
                    return bad("crlb has no dense CIR view; drop it from cir_snapshot".into());
                }
            }
        }
        Ok(())
    }

    /// SNR points this experiment iterates over.
    pub fn snr_points(&self) -> Vec<f64> {
        match self.experiment {
            ExperimentKind::RecoveryVsG => {
                vec![self.snr_grid_db.first().copied().unwrap_or(20.0)]
            }
            _ => self.snr_grid_db.clone(),
        }
    }

    /// Detection/averaging horizons for the estimation chain: the
    /// profile-derived values, with the quasi-static horizon optionally
    /// overridden for the gain and measurement stages.
    pub fn chain_horizons(
        &self,
        profile: &crate::channel::ChannelProfile,
    ) -> Result<CoherenceParams, HarnessError> {
        let mut coh = crate::channel::coherence_params(
            profile,
            self.frame.m,
            self.frame.n,
            self.cap_r_d,
            self.static_r_g1,
        )?;
        if let Some(r) = self.r_g2_chain {
            coh.r_g2 = r.min(coh.r_d);
        }
        Ok(coh)
    }

    pub fn experiment_tag(&self) -> u64 {
        self.experiment.tag()
    }
}

/// Outcome of one estimator on one Monte-Carlo trial.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub estimator: EstimatorKind,
    /// Normalized squared error of the dense CIR view.
    pub mse: f64,
    /// Estimated support equals the true delay set exactly.
    pub support_exact: bool,
    pub bits_errored: u64,
    pub bits_total: u64,
    pub op_count: OpCounter,
    /// mse < 1e-2, the recovery criterion used throughout.
    pub recovered: bool,
}

/// Recovery threshold on normalized MSE.
pub const RECOVERY_MSE: f64 = 1e-2;

impl TrialResult {
    pub fn new(
        estimator: EstimatorKind,
        mse: f64,
        support_exact: bool,
        op_count: OpCounter,
    ) -> Self {
        Self {
            estimator,
            mse,
            support_exact,
            bits_errored: 0,
            bits_total: 0,
            op_count,
            recovered: mse < RECOVERY_MSE,
        }
    }
}

/// Normalized squared error between two dense CIR views of equal length:
/// ||est - truth||^2 / ||truth||^2.
pub fn mse(est_dense: &[C64], truth_dense: &[C64]) -> Result<f64, HarnessError> {
    if est_dense.len() != truth_dense.len() {
        return Err(HarnessError::DenseLength {
            est: est_dense.len(),
            truth: truth_dense.len(),
        });
    }
    let denom = norm_sqr(truth_dense);
    if denom == 0.0 {
        return Err(HarnessError::ZeroTruth);
    }
    let num: f64 = est_dense
        .iter()
        .zip(truth_dense)
        .map(|(e, t)| (e - t).norm_sqr())
        .sum();
    Ok(num / denom)
}

/// Quick end-to-end invariant sweep for the `selftest` CLI verb. Each
/// entry is (check name, error description if it failed).
pub fn selftest() -> Vec<(&'static str, Result<(), String>)> {
    use crate::numerics::{
        circular_correlate, least_squares, norm, top_k_support, ToeplitzOperator,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut out: Vec<(&'static str, Result<(), String>)> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f_7e57);

    // Circular correlation against direct summation.
    let check_corr = (|| {
        let n = 64;
        let a: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let b: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut ops = OpCounter::new();
        let fast = circular_correlate(&a, &b, &mut ops).map_err(|e| e.to_string())?;
        for tau in 0..n {
            let mut direct = C64::new(0.0, 0.0);
            for t in 0..n {
                direct += a[t].conj() * b[(t + tau) % n];
            }
            if (fast[tau] - direct).norm() > 1e-9 * direct.norm().max(1.0) {
                return Err(format!("lag {tau} off by {:e}", (fast[tau] - direct).norm()));
            }
        }
        Ok(())
    })();
    out.push(("circular correlation vs direct sum", check_corr));

    // Banded convolution operator against a dense materialization.
    let check_toeplitz = (|| {
        let pn: Vec<f64> = (0..32).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let (g, l) = (12, 21);
        let phi = ToeplitzOperator::from_training_sequence(&pn, g, l).map_err(|e| e.to_string())?;
        let x: Vec<C64> = (0..l)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut ops = OpCounter::new();
        let fast = phi.apply(&x, &mut ops).map_err(|e| e.to_string())?;
        for r in 0..g {
            let mut direct = C64::new(0.0, 0.0);
            for c in 0..l {
                direct += phi.entry(r, c) * x[c];
            }
            if (fast[r] - direct).norm() > 1e-9 {
                return Err(format!("row {r} off by {:e}", (fast[r] - direct).norm()));
            }
        }
        Ok(())
    })();
    out.push(("banded operator vs dense mat-vec", check_toeplitz));

    // Least squares against the normal equations on a small random system.
    let check_ls = (|| {
        let (rows, cols) = (10usize, 4usize);
        let a: Vec<crate::numerics::CVec> = (0..cols)
            .map(|_| {
                (0..rows)
                    .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        let y: Vec<C64> = (0..rows)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut ops = OpCounter::new();
        let x = least_squares(&a, &y, &mut ops).map_err(|e| e.to_string())?;
        // Residual must be orthogonal to every column.
        for c in 0..cols {
            let mut dot = C64::new(0.0, 0.0);
            for r in 0..rows {
                let ax: C64 = (0..cols).map(|k| a[k][r] * x[k]).sum();
                dot += a[c][r].conj() * (y[r] - ax);
            }
            if dot.norm() > 1e-9 {
                return Err(format!("normal equations violated at column {c}: {:e}", dot.norm()));
            }
        }
        Ok(())
    })();
    out.push(("least squares satisfies normal equations", check_ls));

    // MSE anchors.
    let check_mse = (|| {
        let truth = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let same = mse(&truth, &truth).map_err(|e| e.to_string())?;
        let zero = mse(&[C64::new(0.0, 0.0), C64::new(0.0, 0.0)], &truth)
            .map_err(|e| e.to_string())?;
        let hand = mse(&[C64::new(1.0, 0.0), C64::new(0.1, 0.0)], &truth)
            .map_err(|e| e.to_string())?;
        if same != 0.0 {
            return Err(format!("identical vectors gave {same}"));
        }
        if (zero - 1.0).abs() > 1e-15 {
            return Err(format!("zero estimate gave {zero}"));
        }
        if (hand - 0.01).abs() > 1e-15 {
            return Err(format!("hand case gave {hand}"));
        }
        Ok(())
    })();
    out.push(("normalized mse anchors", check_mse));

    // Variance bound closed form.
    let check_crlb = (|| {
        let v = crate::estimator::crlb(6, 104, 1, 10.0).map_err(|e| e.to_string())?;
        let expect = 6.0 / 2080.0;
        if (v - expect).abs() > 1e-15 {
            return Err(format!("crlb(6,104,1,10) = {v}, expected {expect}"));
        }
        Ok(())
    })();
    out.push(("variance bound closed form", check_crlb));

    // Perfect estimate, noiseless frame: the demodulation chain must be
    // bit-exact.
    let check_demod = (|| {
        let frame = FrameConfig::new(32, 64, false).map_err(|e| e.to_string())?;
        let pn = crate::signal::pn_sequence(frame.m).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n_sym = 3;
        let mut bits = vec![0u8; n_sym * frame.bits_per_symbol()];
        for b in bits.iter_mut() {
            *b = rng.gen_range(0..2);
        }
        let blocks: Vec<crate::numerics::CVec> = (0..n_sym)
            .map(|k| {
                crate::signal::modulate_block(
                    &bits[k * frame.bits_per_symbol()..(k + 1) * frame.bits_per_symbol()],
                    frame.n,
                )
                .map_err(|e| e.to_string())
            })
            .collect::<Result<_, _>>()?;
        let tx = crate::signal::assemble_stream(&frame, &pn, &blocks).map_err(|e| e.to_string())?;
        let delays = vec![0usize, 3, 9];
        let gains = vec![
            C64::new(0.8, 0.1),
            C64::new(-0.3, 0.4),
            C64::new(0.1, -0.2),
        ];
        let ch = crate::channel::ChannelRealization::from_gains(
            delays.clone(),
            vec![gains.clone(); n_sym],
        );
        let rx = crate::channel::transmit(&tx, &ch, &frame, None, &mut rng)
            .map_err(|e| e.to_string())?;
        let mut dense = vec![C64::new(0.0, 0.0); frame.m];
        for (&d, &g) in delays.iter().zip(&gains) {
            dense[d] = g;
        }
        let got = demodulate(&rx, 1, &pn, &dense).map_err(|e| e.to_string())?;
        let want = &bits[frame.bits_per_symbol()..2 * frame.bits_per_symbol()];
        if got.bits != want {
            let errs = got
                .bits
                .iter()
                .zip(want)
                .filter(|(a, b)| a != b)
                .count();
            return Err(format!("{errs} bit errors with perfect CSI, noiseless"));
        }
        Ok(())
    })();
    out.push(("demodulation chain bit-exact with perfect CSI", check_demod));

    // Top-k selection determinism sanity.
    let check_topk = (|| {
        let x = vec![C64::new(1.0, 0.0); 4];
        let s = top_k_support(&x, 2).map_err(|e| e.to_string())?;
        if s != vec![0, 1] {
            return Err(format!("tie-break changed: {s:?}"));
        }
        let n = norm(&x);
        if (n - 2.0).abs() > 1e-15 {
            return Err(format!("norm of four unit entries = {n}"));
        }
        Ok(())
    })();
    out.push(("selection tie-break and norm sanity", check_topk));

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
experiment = "mse_vs_snr"
profile_name = "itu-vb-static"
snr_grid_db = [20.0, 25.0]
trials = 4
estimators = ["pa_iht", "crlb"]
seed = 7

[frame]
m = 256
n = 2048
"#;

    #[test]
    fn config_roundtrip_and_defaults() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::MseVsSnr);
        assert_eq!(cfg.static_r_g1, 9);
        assert_eq!(cfg.cap_r_d, 40);
        assert_eq!(cfg.b.at(20.0), 2);
        assert!(cfg.a.is_none());
        assert!(!cfg.frame.dual_pn);
        assert_eq!(cfg.max_iters, 50);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{BASE}\nbogus = 1\n");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(matches!(err, HarnessError::BadConfig(_)), "{err}");
        // Nested tables are strict too.
        let nested = BASE.replace("n = 2048", "n = 2048\nword = 1");
        assert!(ExperimentConfig::from_toml(&nested).is_err());
    }

    #[test]
    fn b_band_table_resolves_inversely_with_snr() {
        let text = BASE.replace(
            "seed = 7",
            "seed = 7\nb = [ { up_to_snr_db = 10.0, b = 4 }, { up_to_snr_db = 20.0, b = 2 } ]",
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.b.at(5.0), 4);
        assert_eq!(cfg.b.at(10.0), 4);
        assert_eq!(cfg.b.at(15.0), 2);
        // Beyond the table, the last (highest-SNR) band applies.
        assert_eq!(cfg.b.at(30.0), 2);
    }

    #[test]
    fn b_outside_range_rejected() {
        let text = BASE.replace("seed = 7", "seed = 7\nb = 6");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn mse_experiment_requires_crlb_reference() {
        let text = BASE.replace("\"pa_iht\", \"crlb\"", "\"pa_iht\"");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn recovery_grid_bounds_checked() {
        let text = BASE
            .replace("mse_vs_snr", "recovery_vs_g")
            .replace("snr_grid_db = [20.0, 25.0]", "snr_grid_db = [20.0]")
            .replace("seed = 7", "seed = 7\ng_grid = [7, 300]");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("300"), "{err}");
    }

    #[test]
    fn ber_bit_budget_enforced() {
        let text = BASE
            .replace("mse_vs_snr", "ber_vs_snr")
            .replace("\"pa_iht\", \"crlb\"", "\"pa_iht\"");
        // 4 trials x 4096 bits/trial = 16384 < 1e5.
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("1e5"), "{err}");
        let ok = text.replace("trials = 4", "trials = 25");
        assert!(ExperimentConfig::from_toml(&ok).is_ok());
    }

    #[test]
    fn mse_anchors() {
        let truth = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        assert_eq!(mse(&truth, &truth).unwrap(), 0.0);
        let zero = vec![C64::new(0.0, 0.0); 2];
        assert!((mse(&zero, &truth).unwrap() - 1.0).abs() < 1e-15);
        let est = vec![C64::new(1.0, 0.0), C64::new(0.1, 0.0)];
        assert!((mse(&est, &truth).unwrap() - 0.01).abs() < 1e-15);
        assert!(mse(&truth, &zero).is_err());
        assert!(mse(&truth, &zero[..1]).is_err());
    }

    #[test]
    fn selftest_all_green() {
        for (name, res) in selftest() {
            assert!(res.is_ok(), "{name}: {:?}", res);
        }
    }
}
