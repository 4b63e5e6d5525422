//! Per-trial composition: build one synthetic link realization, run every
//! requested estimator's full receive chain on it, and score the results
//! against the true CIR.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{
    realize_jakes, realize_static, transmit, ChannelProfile, ChannelRealization,
    CoherenceParams, Doppler, RxStream, TapSet,
};
use crate::estimator::{
    build_measurement, coarse_delays, coarse_gains, cosamp, crlb, dai_coarse, default_tol,
    dpn_estimate, iht_classic, ml_refine, pa_iht, ChannelEstimate, CoarsePriors, EstimatorError,
    Measurement,
};
use crate::numerics::{C64, CVec, OpCounter};
use crate::signal::{assemble_stream, modulate_block, FrameConfig};

use super::rng::{trial_rng, Lane};
use super::{demodulate, mse, EstimatorKind, ExperimentConfig, HarnessError, TrialResult};

/// Immutable per-experiment inputs shared by every trial.
pub struct TrialContext<'a> {
    pub cfg: &'a ExperimentConfig,
    pub profile: &'a ChannelProfile,
    pub taps: &'a TapSet,
    /// Chain horizons (detection/averaging), after any config override.
    pub coh: &'a CoherenceParams,
    pub pn: &'a [f64],
    pub frame: FrameConfig,
}

/// One grid point of an experiment.
pub struct PointSpec {
    pub snr_db: f64,
    /// Fixes the observation-region size (sweep experiments only); the
    /// dictionary shrinks to match, L = M - G + 1.
    pub forced_g: Option<usize>,
    pub point_idx: u64,
    /// Demodulate one payload block per estimator and count bit errors.
    pub want_ber: bool,
    /// Keep dense CIR views for snapshot output.
    pub want_dense: bool,
}

pub struct TrialOutput {
    /// One row per requested estimator, in request order.
    pub results: Vec<TrialResult>,
    /// (estimator, dense estimate) pairs when `want_dense` is set.
    pub dense_views: Vec<(EstimatorKind, CVec)>,
    /// True dense CIR at the estimation symbol when `want_dense` is set.
    pub truth_dense: Option<CVec>,
}

/// Symbol index the chain estimates at, and how many symbols the stream
/// needs so that every window (delay groups, gain averaging, the next
/// guard for demodulation) exists.
pub fn stream_extent(coh: &CoherenceParams) -> (usize, usize) {
    let i = coh.r_d - 1;
    let k_max = (i + coh.r_d - 1).max(i + coh.r_g2).max(i + 1);
    (i, k_max + 1)
}

/// Recovery stage of the aided chain: hard-thresholding from the coarse
/// priors, then a gain-refit ladder. The ladder's candidate pool is the
/// union of the iterate's support and the coarse-detected delays, ranked
/// by the averaged detection profile — a weak tap's frozen gain is noisy
/// enough that one bad gradient step can evict it from the iterate, while
/// its detection magnitude stays solid. The pool is capped below the
/// observation count so a square fit cannot hide a bad support behind a
/// zero residual, and shrunk while the support is singular. The refit is
/// kept only if its degrees-of-freedom-corrected residual power beats the
/// prior-gain iterate's.
pub fn pa_estimate(
    meas: &Measurement,
    priors: &CoarsePriors,
    max_iters: usize,
) -> Result<(ChannelEstimate, OpCounter), EstimatorError> {
    let mut total = OpCounter::new();
    let tol = default_tol(&meas.y_bar);
    let pa = pa_iht(meas, priors, max_iters, tol)?;
    total.merge(&pa.ops);
    let g = meas.phi.rows();

    let mut order: Vec<usize> = pa.support.clone();
    for &t in &priors.d0 {
        if t < priors.l_hat && !order.contains(&t) {
            order.push(t);
        }
    }
    order.sort_by(|&x, &y| {
        priors.h_bar[y]
            .partial_cmp(&priors.h_bar[x])
            .expect("finite profile")
            .then(x.cmp(&y))
    });
    order.truncate(pa.support.len().min(g.saturating_sub(1)));

    let mut refit: Option<ChannelEstimate> = None;
    while !order.is_empty() {
        let mut sub = order.clone();
        sub.sort_unstable();
        match ml_refine(meas, &sub) {
            Ok(est) => {
                total.merge(&est.ops);
                refit = Some(est);
                break;
            }
            Err(EstimatorError::SingularSupport) => {
                order.pop();
            }
            Err(e) => return Err(e),
        }
    }

    let keep_refit = refit.as_ref().is_some_and(|est| {
        let k = est.support.len();
        k < g
            && est.residual.powi(2) / (g - k) as f64 <= pa.residual.powi(2) / g as f64
    });
    let chosen = if keep_refit {
        refit.expect("checked above")
    } else {
        pa
    };
    Ok((chosen, total))
}

/// Errors that mean "this estimator produced nothing usable on this
/// trial" rather than "the harness is broken"; they score as a zero
/// estimate instead of aborting the run.
fn recoverable(err: &EstimatorError) -> bool {
    matches!(
        err,
        EstimatorError::NoPaths
            | EstimatorError::SingularSupport
            | EstimatorError::SupportBudget { .. }
    )
}

struct SharedChain {
    priors: CoarsePriors,
    meas: Measurement,
    ops: OpCounter,
}

fn shared_chain(
    ctx: &TrialContext,
    rx: &RxStream,
    i: usize,
    b: usize,
    forced_g: Option<usize>,
) -> Result<Option<SharedChain>, HarnessError> {
    let mut ops = OpCounter::new();
    let mut priors = match coarse_delays(
        rx,
        ctx.pn,
        ctx.coh,
        i,
        ctx.cfg.a,
        b,
        &ctx.cfg.e_th,
        &mut ops,
    ) {
        Ok(p) => p,
        Err(e) if recoverable(&e) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    if let Some(g) = forced_g {
        priors.force_guard_size(g, ctx.frame.m)?;
    }
    priors.h_bar_prime = coarse_gains(rx, ctx.pn, ctx.coh, i, priors.l_hat, &mut ops)?;
    let meas = build_measurement(rx, ctx.pn, &priors, ctx.coh, i, &mut ops)?;
    Ok(Some(SharedChain { priors, meas, ops }))
}

/// Bound dimensions when the coarse stage produced nothing: fall back to
/// the profile's own tap count and delay spread.
fn profile_bound_dims(taps: &TapSet, b: usize, m: usize) -> (usize, usize) {
    let spread = taps.cir_len().max(1);
    let max_delay = spread - 1;
    let a = ((0.1 * max_delay as f64).round() as usize).max(1);
    let l_hat = (max_delay + a).min(m).max(1);
    let g = m - l_hat + 1;
    let s = (taps.path_count() + b).min(l_hat).max(1);
    (s, g)
}

fn payload_stream(
    frame: &FrameConfig,
    pn: &[f64],
    n_sym: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<u8>, CVec), HarnessError> {
    let bps = frame.bits_per_symbol();
    let mut bits = vec![0u8; n_sym * bps];
    for b in bits.iter_mut() {
        *b = rng.gen_range(0..2);
    }
    let blocks: Vec<CVec> = (0..n_sym)
        .map(|k| modulate_block(&bits[k * bps..(k + 1) * bps], frame.n))
        .collect::<Result<_, _>>()?;
    let tx = assemble_stream(frame, pn, &blocks)?;
    Ok((bits, tx))
}

fn count_bit_errors(got: &[u8], want: &[u8]) -> u64 {
    got.iter().zip(want).filter(|(a, b)| a != b).count() as u64
}

/// Score one dense estimate: normalized error, exact-support flag, and an
/// optional demodulation pass on the payload block at the estimation
/// symbol.
#[allow(clippy::too_many_arguments)]
fn score(
    kind: EstimatorKind,
    dense: &[C64],
    support: &[usize],
    truth_dense: &[C64],
    truth_delays: &[usize],
    ops: OpCounter,
    ber_input: Option<(&RxStream, usize, &[f64], &[u8])>,
) -> Result<TrialResult, HarnessError> {
    let err = mse(dense, truth_dense)?;
    let mut row = TrialResult::new(kind, err, support == truth_delays, ops);
    if let Some((rx, block, pn, want_bits)) = ber_input {
        let out = demodulate(rx, block, pn, dense)?;
        row.bits_errored = count_bit_errors(&out.bits, want_bits);
        row.bits_total = want_bits.len() as u64;
    }
    Ok(row)
}

/// Run every requested estimator on one synthetic trial.
pub fn run_trial(
    ctx: &TrialContext,
    point: &PointSpec,
    trial: u64,
    kinds: &[EstimatorKind],
) -> Result<TrialOutput, HarnessError> {
    let cfg = ctx.cfg;
    let frame = ctx.frame;
    let m = frame.m;
    let tag = cfg.experiment_tag();
    let seed = cfg.seed;
    let b = cfg.b.at(point.snr_db);
    let (i, n_sym) = stream_extent(ctx.coh);

    let want_dpn = kinds.contains(&EstimatorKind::Dpn);
    let dual_frame = if want_dpn {
        Some(FrameConfig::new(m, frame.n, true)?)
    } else {
        None
    };
    let dpn_r = cfg.dpn_r.unwrap_or(2 * ctx.coh.r_g2).max(1);
    let n_sym_dual = dpn_r.max(2);

    // One realization serves both framings; gains are quasi-static per
    // symbol index.
    let n_real = n_sym.max(if want_dpn { n_sym_dual } else { 0 });
    let mut ch_rng = trial_rng(seed, tag, point.point_idx, trial, Lane::Channel);
    let ch: ChannelRealization = match ctx.profile.doppler {
        Doppler::Static => realize_static(ctx.taps, n_real, &mut ch_rng),
        Doppler::Jakes { .. } => realize_jakes(
            ctx.taps,
            ctx.coh.f_d_hz,
            frame.symbol_len() as f64 / ctx.profile.fs_hz,
            n_real,
            &mut ch_rng,
        ),
    };

    let mut bits_rng = trial_rng(seed, tag, point.point_idx, trial, Lane::PayloadBits);
    let (bits, tx) = payload_stream(&frame, ctx.pn, n_sym, &mut bits_rng)?;
    let mut noise_rng = trial_rng(seed, tag, point.point_idx, trial, Lane::Noise);
    let rx = transmit(&tx, &ch, &frame, Some(point.snr_db), &mut noise_rng)?;

    let truth_dense = ch.dense_cir_padded(i, m);
    let truth_delays = ch.delays.clone();
    let bps = frame.bits_per_symbol();
    let block_bits = &bits[i * bps..(i + 1) * bps];
    let zero_dense = vec![C64::new(0.0, 0.0); m];

    // Shared coarse acquisition for the single-guard estimators.
    let needs_shared = kinds.iter().any(|k| {
        matches!(
            k,
            EstimatorKind::PaIht | EstimatorKind::Iht | EstimatorKind::Cosamp | EstimatorKind::Crlb
        )
    });
    let shared = if needs_shared {
        shared_chain(ctx, &rx, i, b, point.forced_g)?
    } else {
        None
    };

    // Lazily built doubled-guard stream for the reference estimator.
    let mut dual: Option<(RxStream, Vec<u8>, CVec, Vec<usize>)> = None;
    if let Some(df) = dual_frame {
        let mut dbits_rng = trial_rng(seed, tag, point.point_idx, trial, Lane::DpnPayloadBits);
        let (dbits, dtx) = payload_stream(&df, ctx.pn, n_sym_dual, &mut dbits_rng)?;
        let mut dnoise_rng = trial_rng(seed, tag, point.point_idx, trial, Lane::DpnNoise);
        let drx = transmit(&dtx, &ch, &df, Some(point.snr_db), &mut dnoise_rng)?;
        let dtruth = ch.dense_cir_padded(0, m);
        dual = Some((drx, dbits, dtruth, ch.delays.clone()));
    }

    let mut results = Vec::with_capacity(kinds.len());
    let mut dense_views = Vec::new();
    for &kind in kinds {
        let ber = |dense_ok: bool| -> Option<(&RxStream, usize, &[f64], &[u8])> {
            if point.want_ber && dense_ok {
                Some((&rx, i, ctx.pn, block_bits))
            } else {
                None
            }
        };
        let row = match kind {
            EstimatorKind::PaIht => match &shared {
                Some(sc) => match pa_estimate(&sc.meas, &sc.priors, cfg.max_iters) {
                    Ok((est, est_ops)) => {
                        let mut ops = sc.ops;
                        ops.merge(&est_ops);
                        let r = score(
                            kind,
                            &est.dense,
                            &est.support,
                            &truth_dense,
                            &truth_delays,
                            ops,
                            ber(true),
                        )?;
                        if point.want_dense {
                            dense_views.push((kind, est.dense.clone()));
                        }
                        r
                    }
                    Err(e) if recoverable(&e) => score(
                        kind,
                        &zero_dense,
                        &[],
                        &truth_dense,
                        &truth_delays,
                        sc.ops,
                        ber(true),
                    )?,
                    Err(e) => return Err(e.into()),
                },
                None => score(
                    kind,
                    &zero_dense,
                    &[],
                    &truth_dense,
                    &truth_delays,
                    OpCounter::new(),
                    ber(true),
                )?,
            },
            EstimatorKind::Iht => match &shared {
                Some(sc) => {
                    let tol = default_tol(&sc.meas.y_bar);
                    match iht_classic(&sc.meas, sc.priors.s, cfg.max_iters, tol) {
                        Ok(est) => {
                            let mut ops = sc.ops;
                            ops.merge(&est.ops);
                            let r = score(
                                kind,
                                &est.dense,
                                &est.support,
                                &truth_dense,
                                &truth_delays,
                                ops,
                                ber(true),
                            )?;
                            if point.want_dense {
                                dense_views.push((kind, est.dense.clone()));
                            }
                            r
                        }
                        Err(e) if recoverable(&e) => score(
                            kind,
                            &zero_dense,
                            &[],
                            &truth_dense,
                            &truth_delays,
                            sc.ops,
                            ber(true),
                        )?,
                        Err(e) => return Err(e.into()),
                    }
                }
                None => score(
                    kind,
                    &zero_dense,
                    &[],
                    &truth_dense,
                    &truth_delays,
                    OpCounter::new(),
                    ber(true),
                )?,
            },
            EstimatorKind::Cosamp => match &shared {
                Some(sc) => {
                    let tol = default_tol(&sc.meas.y_bar);
                    match cosamp(&sc.meas, sc.priors.s, (2 * sc.priors.s).max(1), None, tol) {
                        Ok(est) => {
                            let mut ops = sc.ops;
                            ops.merge(&est.ops);
                            let r = score(
                                kind,
                                &est.dense,
                                &est.support,
                                &truth_dense,
                                &truth_delays,
                                ops,
                                ber(true),
                            )?;
                            if point.want_dense {
                                dense_views.push((kind, est.dense.clone()));
                            }
                            r
                        }
                        Err(e) if recoverable(&e) => score(
                            kind,
                            &zero_dense,
                            &[],
                            &truth_dense,
                            &truth_delays,
                            sc.ops,
                            ber(true),
                        )?,
                        Err(e) => return Err(e.into()),
                    }
                }
                None => score(
                    kind,
                    &zero_dense,
                    &[],
                    &truth_dense,
                    &truth_delays,
                    OpCounter::new(),
                    ber(true),
                )?,
            },
            EstimatorKind::Mcosamp => {
                let mut ops = OpCounter::new();
                let est = (|| -> Result<Option<ChannelEstimate>, HarnessError> {
                    let mut priors = match dai_coarse(
                        &rx,
                        ctx.pn,
                        i,
                        cfg.a,
                        b,
                        &cfg.e_th,
                        &mut ops,
                    ) {
                        Ok(p) => p,
                        Err(e) if recoverable(&e) => return Ok(None),
                        Err(e) => return Err(e.into()),
                    };
                    if let Some(g) = point.forced_g {
                        priors.force_guard_size(g, m)?;
                    }
                    let meas = build_measurement(&rx, ctx.pn, &priors, ctx.coh, i, &mut ops)?;
                    let tol = default_tol(&meas.y_bar);
                    // b new taps to find, plus slack to re-sort the merged
                    // support around the warm start
                    let budget = (priors.s.saturating_sub(priors.s0) + 2).max(1);
                    let warm: Vec<usize> = priors
                        .d0
                        .iter()
                        .copied()
                        .filter(|&t| t < priors.l_hat)
                        .collect();
                    match cosamp(&meas, priors.s, budget, Some(&priors.d0), tol) {
                        Ok(est) => {
                            ops.merge(&est.ops);
                            Ok(Some(est))
                        }
                        Err(EstimatorError::SupportBudget { .. }) if !warm.is_empty() => {
                            // Dictionary too small for the candidate pool:
                            // settle for a gain fit on the coarse support.
                            match ml_refine(&meas, &warm) {
                                Ok(est) => {
                                    ops.merge(&est.ops);
                                    Ok(Some(est))
                                }
                                Err(e) if recoverable(&e) => Ok(None),
                                Err(e) => Err(e.into()),
                            }
                        }
                        Err(e) if recoverable(&e) => Ok(None),
                        Err(e) => Err(e.into()),
                    }
                })()?;
                match est {
                    Some(est) => {
                        let r = score(
                            kind,
                            &est.dense,
                            &est.support,
                            &truth_dense,
                            &truth_delays,
                            ops,
                            ber(true),
                        )?;
                        if point.want_dense {
                            dense_views.push((kind, est.dense.clone()));
                        }
                        r
                    }
                    None => score(
                        kind,
                        &zero_dense,
                        &[],
                        &truth_dense,
                        &truth_delays,
                        ops,
                        ber(true),
                    )?,
                }
            }
            EstimatorKind::Dpn => {
                let (drx, dbits, dtruth, ddelays) =
                    dual.as_ref().expect("dual stream built when dpn requested");
                match dpn_estimate(drx, ctx.pn, dpn_r.min(drx.n_symbols), &cfg.e_th) {
                    Ok(est) => {
                        let dual_ber = if point.want_ber {
                            Some((drx, 0usize, ctx.pn, &dbits[..bps]))
                        } else {
                            None
                        };
                        let r = score(
                            kind,
                            &est.dense,
                            &est.support,
                            dtruth,
                            ddelays,
                            est.ops,
                            dual_ber,
                        )?;
                        if point.want_dense {
                            dense_views.push((kind, est.dense.clone()));
                        }
                        r
                    }
                    Err(e) if recoverable(&e) => score(
                        kind,
                        &zero_dense,
                        &[],
                        dtruth,
                        ddelays,
                        OpCounter::new(),
                        None,
                    )?,
                    Err(e) => return Err(e.into()),
                }
            }
            EstimatorKind::Crlb => {
                let rho = 10f64.powf(point.snr_db / 10.0);
                let (s, g, ops) = match &shared {
                    Some(sc) => (sc.priors.s, sc.priors.g_hat, sc.ops),
                    None => {
                        let (s, g) = profile_bound_dims(ctx.taps, b, m);
                        (s, g, OpCounter::new())
                    }
                };
                let bound = crlb(s, g, ctx.coh.r_g2, rho)?;
                TrialResult::new(kind, bound, false, ops)
            }
            EstimatorKind::PerfectCsi => {
                let r = score(
                    kind,
                    &truth_dense,
                    &truth_delays,
                    &truth_dense,
                    &truth_delays,
                    OpCounter::new(),
                    ber(true),
                )?;
                if point.want_dense {
                    dense_views.push((kind, truth_dense.clone()));
                }
                r
            }
        };
        results.push(row);
    }

    Ok(TrialOutput {
        results,
        dense_views,
        truth_dense: if point.want_dense {
            Some(truth_dense)
        } else {
            None
        },
    })
}
