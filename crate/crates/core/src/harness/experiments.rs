//! Experiment drivers: walk the configured grid, fan the Monte-Carlo
//! trials out across worker threads, merge them back in trial order, and
//! render CSV plus a metadata sidecar. Identical config + seed gives
//! byte-identical output.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::channel::{find_profile, quantize_profile, ChannelProfile};
use crate::signal::pn_sequence;

use super::pipeline::{run_trial, PointSpec, TrialContext, TrialOutput};
use super::{EstimatorKind, ExperimentConfig, ExperimentKind, HarnessError, TrialResult};

/// Rendered outputs of one experiment: the CSV table and the metadata
/// sidecar describing exactly what produced it.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub csv: String,
    pub meta: String,
}

/// Short fingerprint of the effective config, stamped on every row so a
/// results file can never be mistaken for a different setup.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("{cfg:?}").as_bytes());
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

struct Prepared {
    profile: ChannelProfile,
    taps: crate::channel::TapSet,
    coh: crate::channel::CoherenceParams,
    pn: Vec<f64>,
    frame: crate::signal::FrameConfig,
    hash: String,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, HarnessError> {
    cfg.validate()?;
    let profile = find_profile(&cfg.profile_name)?;
    let taps = quantize_profile(&profile)?;
    let coh = cfg.chain_horizons(&profile)?;
    let pn = pn_sequence(cfg.frame.m)?;
    let frame = cfg.frame.to_frame()?;
    let hash = config_hash(cfg);
    Ok(Prepared {
        profile,
        taps,
        coh,
        pn,
        frame,
        hash,
    })
}

fn run_point(
    ctx: &TrialContext,
    point: &PointSpec,
    kinds: &[EstimatorKind],
    trials: usize,
) -> Result<Vec<TrialOutput>, HarnessError> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(ctx, point, t, kinds))
        .collect()
}

#[derive(Default)]
struct Agg {
    mse_sum: f64,
    recovered: u64,
    support_exact: u64,
    bits_errored: u64,
    bits_total: u64,
    mults: u64,
    adds: u64,
    n: u64,
}

impl Agg {
    fn push(&mut self, row: &TrialResult) {
        self.mse_sum += row.mse;
        self.recovered += u64::from(row.recovered);
        self.support_exact += u64::from(row.support_exact);
        self.bits_errored += row.bits_errored;
        self.bits_total += row.bits_total;
        self.mults += row.op_count.complex_mults;
        self.adds += row.op_count.complex_adds;
        self.n += 1;
    }

    fn mean_mse(&self) -> f64 {
        self.mse_sum / self.n as f64
    }

    fn frac(&self, count: u64) -> f64 {
        count as f64 / self.n as f64
    }

    fn mean_ops(&self) -> (f64, f64) {
        (
            self.mults as f64 / self.n as f64,
            self.adds as f64 / self.n as f64,
        )
    }
}

/// Collapse one grid point's trials, in trial order, one accumulator per
/// estimator (request order).
fn aggregate(outputs: &[TrialOutput], kinds: &[EstimatorKind]) -> Vec<Agg> {
    let mut aggs: Vec<Agg> = kinds.iter().map(|_| Agg::default()).collect();
    for out in outputs {
        for (agg, row) in aggs.iter_mut().zip(&out.results) {
            agg.push(row);
        }
    }
    aggs
}

fn meta_text(cfg: &ExperimentConfig, prep: &Prepared) -> String {
    let pn_head: String = prep.pn[..16.min(prep.pn.len())]
        .iter()
        .map(|&v| if v > 0.0 { '+' } else { '-' })
        .collect();
    let estimators: Vec<&str> = cfg.estimators.iter().map(|k| k.as_str()).collect();
    let mut lines = vec![
        format!("tool = {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        format!("experiment = {}", cfg.experiment.as_str()),
        format!("config_hash = {}", prep.hash),
        format!("seed = {}", cfg.seed),
        format!("profile = {}", prep.profile.name),
        format!("profile_source = {}", prep.profile.source),
        format!(
            "frame = m={} n={} dual_pn={}",
            cfg.frame.m, cfg.frame.n, cfg.frame.dual_pn
        ),
        format!(
            "guard_sequence = length-{} binary +/-1 m-sequence, degree-8 feedback taps [8,6,5,4], all-ones register seed, period cycled to fit",
            cfg.frame.m
        ),
        format!("guard_head = {pn_head}"),
        format!(
            "horizons = r_d={} r_g1={} r_g2={} f_d_hz={}",
            prep.coh.r_d, prep.coh.r_g1, prep.coh.r_g2, prep.coh.f_d_hz
        ),
        format!("trials_per_point = {}", cfg.trials),
        format!("estimators = {}", estimators.join(",")),
        format!("extra_paths_budget = {:?}", cfg.b),
        format!(
            "detection_threshold = sigma_mult={} peak_frac={} guard_frac={}",
            cfg.e_th.sigma_mult, cfg.e_th.peak_frac, cfg.e_th.guard_frac
        ),
    ];
    match cfg.experiment {
        ExperimentKind::RecoveryVsG => {
            lines.push(format!("g_grid = {:?}", cfg.g_grid));
            lines.push(format!("snr_db = {}", cfg.snr_points()[0]));
        }
        _ => lines.push(format!("snr_grid_db = {:?}", cfg.snr_grid_db)),
    }
    lines.push(
        "mse = squared error of the dense CIR estimate, normalized by the true CIR's squared norm"
            .to_string(),
    );
    lines.push("recovered = mse < 1e-2".to_string());
    lines.push(String::new());
    lines.join("\n")
}

/// Recovery probability versus the forced observation-region size, at one
/// SNR (20 dB unless the config overrides it).
pub fn run_recovery_vs_g(cfg: &ExperimentConfig) -> Result<RunArtifacts, HarnessError> {
    let prep = prepare(cfg)?;
    if cfg.experiment != ExperimentKind::RecoveryVsG {
        return Err(HarnessError::BadConfig(format!(
            "config declares {}, driver runs recovery_vs_g",
            cfg.experiment.as_str()
        )));
    }
    let ctx = TrialContext {
        cfg,
        profile: &prep.profile,
        taps: &prep.taps,
        coh: &prep.coh,
        pn: &prep.pn,
        frame: prep.frame,
    };
    let snr_db = cfg.snr_points()[0];
    let mut csv = String::from(
        "config_hash,seed,experiment,profile,snr_db,g,estimator,trials,recovered_frac,mean_mse,support_exact_frac,mean_mults,mean_adds\n",
    );
    for (pi, &g) in cfg.g_grid.iter().enumerate() {
        let point = PointSpec {
            snr_db,
            forced_g: Some(g),
            point_idx: pi as u64,
            want_ber: false,
            want_dense: false,
        };
        let outputs = run_point(&ctx, &point, &cfg.estimators, cfg.trials)?;
        for (agg, &kind) in aggregate(&outputs, &cfg.estimators).iter().zip(&cfg.estimators) {
            let (mults, adds) = agg.mean_ops();
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{:.6},{:e},{:.6},{:.1},{:.1}\n",
                prep.hash,
                cfg.seed,
                cfg.experiment.as_str(),
                prep.profile.name,
                snr_db,
                g,
                kind.as_str(),
                agg.n,
                agg.frac(agg.recovered),
                agg.mean_mse(),
                agg.frac(agg.support_exact),
                mults,
                adds,
            ));
        }
    }
    Ok(RunArtifacts {
        csv,
        meta: meta_text(cfg, &prep),
    })
}

/// Mean normalized MSE per estimator across the SNR grid, with the
/// closed-form variance bound as a reference curve.
pub fn run_mse_vs_snr(cfg: &ExperimentConfig) -> Result<RunArtifacts, HarnessError> {
    let prep = prepare(cfg)?;
    if cfg.experiment != ExperimentKind::MseVsSnr {
        return Err(HarnessError::BadConfig(format!(
            "config declares {}, driver runs mse_vs_snr",
            cfg.experiment.as_str()
        )));
    }
    let ctx = TrialContext {
        cfg,
        profile: &prep.profile,
        taps: &prep.taps,
        coh: &prep.coh,
        pn: &prep.pn,
        frame: prep.frame,
    };
    let mut csv = String::from(
        "config_hash,seed,experiment,profile,snr_db,estimator,trials,mean_mse,mean_mse_db,recovered_frac,support_exact_frac,mean_mults,mean_adds\n",
    );
    for (pi, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
        let point = PointSpec {
            snr_db,
            forced_g: None,
            point_idx: pi as u64,
            want_ber: false,
            want_dense: false,
        };
        let outputs = run_point(&ctx, &point, &cfg.estimators, cfg.trials)?;
        for (agg, &kind) in aggregate(&outputs, &cfg.estimators).iter().zip(&cfg.estimators) {
            let (mults, adds) = agg.mean_ops();
            let mean = agg.mean_mse();
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{:e},{:.4},{:.6},{:.6},{:.1},{:.1}\n",
                prep.hash,
                cfg.seed,
                cfg.experiment.as_str(),
                prep.profile.name,
                snr_db,
                kind.as_str(),
                agg.n,
                mean,
                10.0 * mean.log10(),
                agg.frac(agg.recovered),
                agg.frac(agg.support_exact),
                mults,
                adds,
            ));
        }
    }
    Ok(RunArtifacts {
        csv,
        meta: meta_text(cfg, &prep),
    })
}

/// Bit error rate per estimator across the SNR grid, one payload block
/// demodulated per trial, with a perfect-CSI genie row appended.
pub fn run_ber_vs_snr(cfg: &ExperimentConfig) -> Result<RunArtifacts, HarnessError> {
    let prep = prepare(cfg)?;
    if cfg.experiment != ExperimentKind::BerVsSnr {
        return Err(HarnessError::BadConfig(format!(
            "config declares {}, driver runs ber_vs_snr",
            cfg.experiment.as_str()
        )));
    }
    let ctx = TrialContext {
        cfg,
        profile: &prep.profile,
        taps: &prep.taps,
        coh: &prep.coh,
        pn: &prep.pn,
        frame: prep.frame,
    };
    let mut kinds = cfg.estimators.clone();
    if !kinds.contains(&EstimatorKind::PerfectCsi) {
        kinds.push(EstimatorKind::PerfectCsi);
    }
    let mut csv = String::from(
        "config_hash,seed,experiment,profile,snr_db,estimator,trials,bits_total,bits_errored,ber,mean_mse,mean_mults,mean_adds\n",
    );
    for (pi, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
        let point = PointSpec {
            snr_db,
            forced_g: None,
            point_idx: pi as u64,
            want_ber: true,
            want_dense: false,
        };
        let outputs = run_point(&ctx, &point, &kinds, cfg.trials)?;
        for (agg, &kind) in aggregate(&outputs, &kinds).iter().zip(&kinds) {
            let (mults, adds) = agg.mean_ops();
            let ber = if agg.bits_total == 0 {
                0.0
            } else {
                agg.bits_errored as f64 / agg.bits_total as f64
            };
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{:e},{:e},{:.1},{:.1}\n",
                prep.hash,
                cfg.seed,
                cfg.experiment.as_str(),
                prep.profile.name,
                snr_db,
                kind.as_str(),
                agg.n,
                agg.bits_total,
                agg.bits_errored,
                ber,
                agg.mean_mse(),
                mults,
                adds,
            ));
        }
    }
    Ok(RunArtifacts {
        csv,
        meta: meta_text(cfg, &prep),
    })
}

/// One fixed-seed trial; emits the true dense CIR ("true" rows) and every
/// requested estimator's dense view, tap by tap, for plotting.
pub fn run_cir_snapshot(cfg: &ExperimentConfig) -> Result<RunArtifacts, HarnessError> {
    let prep = prepare(cfg)?;
    if cfg.experiment != ExperimentKind::CirSnapshot {
        return Err(HarnessError::BadConfig(format!(
            "config declares {}, driver runs cir_snapshot",
            cfg.experiment.as_str()
        )));
    }
    let ctx = TrialContext {
        cfg,
        profile: &prep.profile,
        taps: &prep.taps,
        coh: &prep.coh,
        pn: &prep.pn,
        frame: prep.frame,
    };
    let snr_db = cfg.snr_grid_db[0];
    let point = PointSpec {
        snr_db,
        forced_g: None,
        point_idx: 0,
        want_ber: false,
        want_dense: true,
    };
    let out = run_trial(&ctx, &point, 0, &cfg.estimators)?;
    let truth = out
        .truth_dense
        .as_ref()
        .expect("snapshot trial keeps dense views");

    let mut csv = String::from(
        "config_hash,seed,experiment,profile,snr_db,estimator,tap,gain_re,gain_im,gain_abs,mults,adds\n",
    );
    let emit = |name: &str, dense: &[crate::numerics::C64], mults: u64, adds: u64, csv: &mut String| {
        for (tap, v) in dense.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{:e},{:e},{:e},{},{}\n",
                prep.hash,
                cfg.seed,
                cfg.experiment.as_str(),
                prep.profile.name,
                snr_db,
                name,
                tap,
                v.re,
                v.im,
                v.norm(),
                mults,
                adds,
            ));
        }
    };
    emit("true", truth, 0, 0, &mut csv);
    let zero = vec![crate::numerics::C64::new(0.0, 0.0); prep.frame.m];
    for (row, &kind) in out.results.iter().zip(&cfg.estimators) {
        let dense = out
            .dense_views
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, d)| d.as_slice())
            .unwrap_or(&zero);
        emit(
            kind.as_str(),
            dense,
            row.op_count.complex_mults,
            row.op_count.complex_adds,
            &mut csv,
        );
    }
    Ok(RunArtifacts {
        csv,
        meta: meta_text(cfg, &prep),
    })
}

/// Dispatch on the experiment named in the config.
pub fn run(cfg: &ExperimentConfig) -> Result<RunArtifacts, HarnessError> {
    match cfg.experiment {
        ExperimentKind::RecoveryVsG => run_recovery_vs_g(cfg),
        ExperimentKind::MseVsSnr => run_mse_vs_snr(cfg),
        ExperimentKind::BerVsSnr => run_ber_vs_snr(cfg),
        ExperimentKind::CirSnapshot => run_cir_snapshot(cfg),
    }
}
