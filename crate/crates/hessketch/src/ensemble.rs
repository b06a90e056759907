//! Seedable Monte Carlo harness over sketched Hessians: condition-number
//! concentration, rank histograms, failure probabilities against the
//! theorem threshold, and empirical checks of the moment and tail bounds.
//!
//! Trial `t` draws its selector from `SplitMix64(seed ^ golden_mix(t))`, so
//! reports are bit-identical across runs and across degrees of parallelism.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{HskError, Result};
use crate::numkit::{condition_number, numerical_rank, GramFactor, Spectrum, DEFAULT_RANK_TOL};
use crate::rng::SplitMix64;
use crate::serde_util::float_or_inf;
use crate::sketch::{draw_uniform_selector, gather_rows, SamplingMode, SketchSelector};
use crate::spectral::SpectralSummary;

/// Rank thresholds used in the reference experiments.
pub const DEFAULT_RANK_THRESHOLDS: [f64; 2] = [1e-6, 1e-2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub mode: SamplingMode,
    /// Relative tolerance below which a sketched spectrum counts as singular.
    pub cond_rank_tol: f64,
    /// Thresholds at which per-trial numerical ranks are recorded.
    pub rank_thresholds: Vec<f64>,
    /// Even moment orders estimated from the per-trial hollow norms.
    pub moment_orders: Vec<u32>,
    /// Failure probability for the quantile-refined diagonal parameters.
    pub eta: f64,
}

impl EnsembleConfig {
    pub fn new(m: usize, trials: usize, seed: u64, mode: SamplingMode) -> Self {
        EnsembleConfig {
            m,
            trials,
            seed,
            mode,
            cond_rank_tol: DEFAULT_RANK_TOL,
            rank_thresholds: DEFAULT_RANK_THRESHOLDS.to_vec(),
            moment_orders: vec![2, 4, 8],
            eta: 0.2,
        }
    }
}

/// Everything measured on one sketched Hessian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub selector: Vec<usize>,
    #[serde(with = "float_or_inf")]
    pub cond: f64,
    /// `(threshold, numerical rank)` pairs, aligned with the config.
    pub rank_at: Vec<(f64, usize)>,
    pub min_diag: f64,
    pub max_diag: f64,
    /// Spectral norm of the hollow part `M_s`.
    pub hollow_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondQuantiles {
    #[serde(with = "float_or_inf")]
    pub q20: f64,
    #[serde(with = "float_or_inf")]
    pub q50: f64,
    #[serde(with = "float_or_inf")]
    pub q80: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankHistogram {
    pub threshold: f64,
    /// `(rank, trial count)` in ascending rank order; counts sum to `trials`.
    pub counts: Vec<(usize, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub p: u32,
    /// Empirical `(mean ||M_s||_2^p)^{1/p}`.
    pub estimate: f64,
    /// Closed-form moment bound at the same order.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedParams {
    pub eta: f64,
    pub ell0: f64,
    pub big_l0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub n: usize,
    pub r: usize,
    pub config: EnsembleConfig,
    pub summary: SpectralSummary,
    pub cond_quantiles: CondQuantiles,
    /// `L/ell`: the diagonal-variation threshold used in the failure count.
    pub failure_threshold: f64,
    /// Fraction of trials with `cond > L/ell` (infinite cond counts).
    pub failure_prob: f64,
    pub rank_histograms: Vec<RankHistogram>,
    pub moments: Vec<MomentReport>,
    pub refined: RefinedParams,
    pub records: Vec<TrialRecord>,
}

fn sym_spectrum(m: &DMatrix<f64>) -> Spectrum {
    Spectrum::from_unsorted(
        SymmetricEigen::new(m.clone())
            .eigenvalues
            .as_slice()
            .to_vec(),
    )
}

fn run_trial(
    f: &GramFactor,
    cfg: &EnsembleConfig,
    t: u64,
) -> Result<(SketchSelector, DMatrix<f64>)> {
    let mut rng = SplitMix64::for_trial(cfg.seed, t);
    let sel = draw_uniform_selector(f.n(), cfg.m, &mut rng, cfg.mode)?;
    let sphi = gather_rows(f, &sel);
    let hs = &sphi * sphi.transpose();
    Ok((sel, hs))
}

fn record_trial(f: &GramFactor, cfg: &EnsembleConfig, t: u64) -> Result<TrialRecord> {
    let (sel, hs) = run_trial(f, cfg, t)?;
    let spectrum = sym_spectrum(&hs);
    let cond = condition_number(&spectrum, cfg.cond_rank_tol);
    let rank_at = cfg
        .rank_thresholds
        .iter()
        .map(|&thr| (thr, numerical_rank(&spectrum, thr)))
        .collect();
    let mut min_diag = f64::INFINITY;
    let mut max_diag = f64::NEG_INFINITY;
    for i in 0..cfg.m {
        let d = hs[(i, i)];
        min_diag = min_diag.min(d);
        max_diag = max_diag.max(d);
    }
    let mut hollow = hs;
    for i in 0..cfg.m {
        hollow[(i, i)] = 0.0;
    }
    let hollow_spec = sym_spectrum(&hollow);
    let hollow_norm = hollow_spec.max().abs().max(hollow_spec.min().abs());
    Ok(TrialRecord {
        trial_id: t,
        selector: sel.indices,
        cond,
        rank_at,
        min_diag,
        max_diag,
        hollow_norm,
    })
}

/// Sorted-quantile extraction at the nearest rank; infinities sort last.
fn cond_quantiles(records: &[TrialRecord]) -> CondQuantiles {
    let mut conds: Vec<f64> = records.iter().map(|r| r.cond).collect();
    conds.sort_unstable_by(f64::total_cmp);
    CondQuantiles {
        q20: bounds::nearest_rank_quantile(&conds, 0.2),
        q50: bounds::nearest_rank_quantile(&conds, 0.5),
        q80: bounds::nearest_rank_quantile(&conds, 0.8),
    }
}

/// Fraction of trials whose condition number exceeds `threshold`
/// (infinite condition numbers count as failures).
pub fn failure_probability(records: &[TrialRecord], threshold: f64) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let fails = records.iter().filter(|r| r.cond > threshold).count();
    fails as f64 / records.len() as f64
}

/// Histogram of per-trial numerical ranks at a threshold that was recorded.
pub fn rank_histogram(records: &[TrialRecord], threshold: f64) -> Result<BTreeMap<usize, u64>> {
    let mut hist = BTreeMap::new();
    for rec in records {
        let rank = rec
            .rank_at
            .iter()
            .find(|(thr, _)| *thr == threshold)
            .map(|(_, rank)| *rank)
            .ok_or_else(|| {
                HskError::Contract(format!(
                    "threshold {threshold} was not recorded for trial {}",
                    rec.trial_id
                ))
            })?;
        *hist.entry(rank).or_insert(0u64) += 1;
    }
    Ok(hist)
}

/// Runs the full condition ensemble against a precomputed spectral summary.
pub fn run_condition_ensemble_with_summary(
    f: &GramFactor,
    summary: &SpectralSummary,
    cfg: &EnsembleConfig,
) -> Result<EnsembleReport> {
    if cfg.trials < 1 {
        return Err(HskError::Contract("trials must be >= 1".into()));
    }
    let records: Vec<TrialRecord> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| record_trial(f, cfg, t))
        .collect::<Result<_>>()?;

    let failure_threshold = summary.big_l / summary.ell;
    let failure_prob = failure_probability(&records, failure_threshold);

    let rank_histograms = cfg
        .rank_thresholds
        .iter()
        .map(|&thr| {
            rank_histogram(&records, thr).map(|hist| RankHistogram {
                threshold: thr,
                counts: hist.into_iter().collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let hollow_norms: Vec<f64> = records.iter().map(|r| r.hollow_norm).collect();
    let moments = cfg
        .moment_orders
        .iter()
        .map(|&p| moment_from_norms(&hollow_norms, summary, cfg.m, p))
        .collect::<Result<Vec<_>>>()?;

    let mins: Vec<f64> = records.iter().map(|r| r.min_diag).collect();
    let maxes: Vec<f64> = records.iter().map(|r| r.max_diag).collect();
    let trace_over_n = summary.trace / summary.n as f64;
    let (ell0, big_l0) =
        bounds::refined_quantile_params(&mins, &maxes, cfg.eta, trace_over_n)?;

    Ok(EnsembleReport {
        n: f.n(),
        r: f.r(),
        config: cfg.clone(),
        summary: summary.clone(),
        cond_quantiles: cond_quantiles(&records),
        failure_threshold,
        failure_prob,
        rank_histograms,
        moments,
        refined: RefinedParams {
            eta: cfg.eta,
            ell0,
            big_l0,
        },
        records,
    })
}

/// Convenience wrapper that computes the spectral summary itself.
pub fn run_condition_ensemble(f: &GramFactor, cfg: &EnsembleConfig) -> Result<EnsembleReport> {
    let summary = crate::spectral::summarize(f)?;
    run_condition_ensemble_with_summary(f, &summary, cfg)
}

/// Per-trial hollow norms `||M_s||_2` under the standard trial streams.
pub fn hollow_norm_trials(
    f: &GramFactor,
    m: usize,
    trials: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<Vec<f64>> {
    let cfg = EnsembleConfig::new(m, trials, seed, mode);
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let (_, hs) = run_trial(f, &cfg, t)?;
            let mut hollow = hs;
            for i in 0..m {
                hollow[(i, i)] = 0.0;
            }
            let spec = sym_spectrum(&hollow);
            Ok(spec.max().abs().max(spec.min().abs()))
        })
        .collect()
}

fn moment_from_norms(
    norms: &[f64],
    summary: &SpectralSummary,
    m: usize,
    p: u32,
) -> Result<MomentReport> {
    if p < 2 || p % 2 != 0 {
        return Err(HskError::Contract(format!(
            "moment order must be an even integer >= 2, got {p}"
        )));
    }
    let mean_pow: f64 =
        norms.iter().map(|x| x.powi(p as i32)).sum::<f64>() / norms.len() as f64;
    let estimate = mean_pow.powf(1.0 / p as f64);
    let nf = summary.n as f64;
    let mf = m as f64;
    let log_term = (mf.ln()).max(p as f64 / 2.0).sqrt();
    let bound = 2.0 * mf / nf * summary.snorm + 12.0 * log_term * summary.mu * mf.sqrt() / nf * summary.frob;
    Ok(MomentReport { p, estimate, bound })
}

/// Monte Carlo estimate of `(E ||M_s||_2^p)^{1/p}` with the closed-form
/// moment bound alongside.
pub fn moment_estimate(
    f: &GramFactor,
    summary: &SpectralSummary,
    m: usize,
    p: u32,
    trials: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<MomentReport> {
    if trials < 1 {
        return Err(HskError::Contract("trials must be >= 1".into()));
    }
    let norms = hollow_norm_trials(f, m, trials, seed, mode)?;
    moment_from_norms(&norms, summary, m, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub m: usize,
    /// Cutoff `tr(H)/N * tau(m)` on the hollow norm.
    pub cutoff: f64,
    /// Empirical fraction of trials with `||M_s||_2 <= cutoff`.
    pub empirical: f64,
    /// The theorem's lower bound `1 - 1/r`.
    pub theorem_bound: f64,
}

/// Empirical probability of the theorem's tail event
/// `||M_s||_2 <= tr(H)/N * tau(m)`.
pub fn tail_check(
    f: &GramFactor,
    summary: &SpectralSummary,
    m: usize,
    r: usize,
    trials: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<TailReport> {
    let tau = bounds::distortion(summary, m, r)?;
    let cutoff = summary.trace / summary.n as f64 * tau;
    let norms = hollow_norm_trials(f, m, trials, seed, mode)?;
    let hits = norms.iter().filter(|&&x| x <= cutoff).count();
    Ok(TailReport {
        m,
        cutoff,
        empirical: hits as f64 / trials as f64,
        theorem_bound: 1.0 - 1.0 / r as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::DenseMatrix;

    fn identity_factor(n: usize) -> GramFactor {
        GramFactor::new(DenseMatrix::identity(n)).unwrap()
    }

    #[test]
    fn identity_without_replacement_all_cond_one() {
        let f = identity_factor(12);
        let mut cfg = EnsembleConfig::new(4, 200, 3, SamplingMode::WithoutReplacement);
        cfg.moment_orders = vec![2];
        let report = run_condition_ensemble(&f, &cfg).unwrap();
        assert!(report.records.iter().all(|r| r.cond == 1.0));
        assert_eq!(report.failure_prob, 0.0);
        // hollow part of any distinct-index sketch of I is zero
        assert!(report.records.iter().all(|r| r.hollow_norm == 0.0));
        // rank histogram: all mass at m
        let hist = rank_histogram(&report.records, 1e-6).unwrap();
        assert_eq!(hist.get(&4), Some(&200));
        assert_eq!(hist.len(), 1);
    }

    #[test]
    fn determinism_across_thread_counts() {
        let f = identity_factor(30);
        let cfg = EnsembleConfig::new(5, 100, 11, SamplingMode::WithReplacement);
        let summary = crate::spectral::summarize(&f).unwrap();
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| run_condition_ensemble_with_summary(&f, &summary, &cfg).unwrap());
        let b = pool4.install(|| run_condition_ensemble_with_summary(&f, &summary, &cfg).unwrap());
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn failure_probability_counts_infinities() {
        let f = identity_factor(3);
        let cfg = EnsembleConfig::new(2, 50, 5, SamplingMode::WithReplacement);
        let report = run_condition_ensemble(&f, &cfg).unwrap();
        // with replacement on I_3, duplicate draws give infinite cond
        let inf_frac = report
            .records
            .iter()
            .filter(|r| r.cond.is_infinite())
            .count() as f64
            / 50.0;
        assert_eq!(failure_probability(&report.records, 1.0), inf_frac);
        assert_eq!(failure_probability(&report.records, f64::INFINITY), 0.0);
    }

    #[test]
    fn rank_histogram_threshold_monotone() {
        let f = identity_factor(4);
        let cfg = EnsembleConfig::new(3, 100, 9, SamplingMode::WithReplacement);
        let report = run_condition_ensemble(&f, &cfg).unwrap();
        let lenient = rank_histogram(&report.records, 1e-6).unwrap();
        let strict = rank_histogram(&report.records, 1e-2).unwrap();
        let full = |h: &BTreeMap<usize, u64>| h.get(&3).copied().unwrap_or(0);
        assert!(full(&strict) <= full(&lenient));
    }

    #[test]
    fn moment_estimate_zero_on_identity_without_replacement() {
        let f = identity_factor(10);
        let summary = crate::spectral::summarize(&f).unwrap();
        for p in [2, 4, 8] {
            let rep = moment_estimate(&f, &summary, 3, p, 100, 1, SamplingMode::WithoutReplacement)
                .unwrap();
            assert_eq!(rep.estimate, 0.0);
            assert!(rep.bound >= 0.0);
        }
    }

    #[test]
    fn moment_estimate_nondecreasing_in_p() {
        let spec = crate::datagen::SyntheticSpec::new(
            200,
            20,
            crate::datagen::Distribution::Gaussian,
            31,
        );
        let f = crate::datagen::gen_factor(&spec).unwrap().factor;
        let summary = crate::spectral::summarize(&f).unwrap();
        let mut prev = 0.0;
        for p in [2, 4, 8] {
            let rep =
                moment_estimate(&f, &summary, 5, p, 400, 17, SamplingMode::WithReplacement)
                    .unwrap();
            assert!(rep.estimate >= prev - 1e-12, "p={p}: {} < {prev}", rep.estimate);
            prev = rep.estimate;
        }
    }

    #[test]
    fn tail_check_identity_is_certain() {
        let f = identity_factor(50);
        let summary = crate::spectral::summarize(&f).unwrap();
        let rep = tail_check(&f, &summary, 5, 50, 100, 3, SamplingMode::WithoutReplacement)
            .unwrap();
        assert_eq!(rep.empirical, 1.0);
    }

    #[test]
    fn moment_rejects_odd_order() {
        let f = identity_factor(5);
        let summary = crate::spectral::summarize(&f).unwrap();
        assert!(moment_estimate(&f, &summary, 2, 3, 10, 1, SamplingMode::WithReplacement).is_err());
    }
}
