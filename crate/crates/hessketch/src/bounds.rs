//! Closed-form quantities of the main concentration theorem: the distortion
//! tau(m), the admissible sample size, the condition-number threshold
//! (L + tau)/(ell - tau) with its crude bound 73 r (L + ell)/ell, the success
//! probability 1 - 1/r, and the quantile-refined diagonal parameters.
//!
//! The printed constants (146, 149, 73, 12, 2, e^{1/4}, e^{1/2}) are kept
//! exactly as stated; natural logarithms throughout.

use serde::{Deserialize, Serialize};

use crate::error::{HskError, Result};
use crate::serde_util::float_or_inf;
use crate::spectral::SpectralSummary;

/// Evaluation of the theorem at one sample size `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub m: usize,
    pub tau: f64,
    /// (L + tau)/(ell - tau), or +inf when ell - tau <= 0.
    #[serde(with = "float_or_inf")]
    pub threshold: f64,
    /// 73 r (L + ell) / ell.
    pub crude_bound: f64,
    /// 1 - 1/r.
    pub success_prob: f64,
    /// Largest admissible sample size per the theorem hypothesis.
    pub m_max: f64,
    /// Whether `m <= m_max`.
    pub admissible: bool,
}

fn require_rank(r: usize) -> Result<f64> {
    if r < 2 {
        return Err(HskError::Contract(format!(
            "theorem quantities need r >= 2 (log r > 0), got r={r}"
        )));
    }
    Ok(r as f64)
}

/// Distortion `tau(m) = e^{1/4} (2m ||H||_2/tr(H) + 12 mu sqrt(m log r) ||H||_F/tr(H))`.
pub fn distortion(summary: &SpectralSummary, m: usize, r: usize) -> Result<f64> {
    let rf = require_rank(r)?;
    if m < 1 {
        return Err(HskError::Contract("distortion needs m >= 1".into()));
    }
    let mf = m as f64;
    let term1 = 2.0 * mf * summary.snorm / summary.trace;
    let term2 = 12.0 * summary.mu * (mf * rf.ln()).sqrt() * summary.frob / summary.trace;
    Ok((0.25f64).exp() * (term1 + term2))
}

/// Largest sample size satisfying the theorem hypothesis:
/// `min{ ell/(146 e^{1/4}) (tr/||H||_2 - 1),
///       ell^2/(149 e^{1/2} mu^2 log r) (tr/||H||_F)^2 }`.
/// The second term is +inf when mu = 0.
pub fn max_sample_size(summary: &SpectralSummary, r: usize) -> Result<f64> {
    let rf = require_rank(r)?;
    let term1 =
        summary.ell / (146.0 * (0.25f64).exp()) * (summary.trace / summary.snorm - 1.0);
    let term2 = if summary.mu == 0.0 {
        f64::INFINITY
    } else {
        summary.ell * summary.ell / (149.0 * (0.5f64).exp() * summary.mu * summary.mu * rf.ln())
            * (summary.trace / summary.frob).powi(2)
    };
    Ok(term1.min(term2))
}

/// Full [`TheoremReport`] for one `(summary, m, r)` triple.
pub fn condition_threshold(summary: &SpectralSummary, m: usize, r: usize) -> Result<TheoremReport> {
    let rf = require_rank(r)?;
    let tau = distortion(summary, m, r)?;
    let denom = summary.ell - tau;
    let threshold = if denom > 0.0 {
        (summary.big_l + tau) / denom
    } else {
        f64::INFINITY
    };
    let crude_bound = 73.0 * rf * (summary.big_l + summary.ell) / summary.ell;
    let m_max = max_sample_size(summary, r)?;
    Ok(TheoremReport {
        m,
        tau,
        threshold,
        crude_bound,
        success_prob: 1.0 - 1.0 / rf,
        m_max,
        admissible: (m as f64) <= m_max,
    })
}

/// Nearest-rank quantile of an ascending-sorted slice: the element at
/// one-based rank `ceil(q * n)` (clamped to `[1, n]`).
pub fn nearest_rank_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Quantile-refined diagonal parameters `(ell_0, L_0)` from per-trial extreme
/// diagonals: `ell_0` is the `eta/2` quantile of the per-trial minima and
/// `L_0` the `1 - eta/2` quantile of the per-trial maxima, both normalized by
/// the average diagonal `trace(H)/N`.
pub fn refined_quantile_params(
    min_diags: &[f64],
    max_diags: &[f64],
    eta: f64,
    trace_over_n: f64,
) -> Result<(f64, f64)> {
    if min_diags.is_empty() || max_diags.is_empty() {
        return Err(HskError::Contract(
            "refined_quantile_params needs nonempty samples".into(),
        ));
    }
    if !(0.0 < eta && eta < 0.5) {
        return Err(HskError::Contract(format!(
            "failure probability eta must lie in (0, 1/2), got {eta}"
        )));
    }
    if trace_over_n <= 0.0 {
        return Err(HskError::Degenerate("nonpositive average diagonal".into()));
    }
    let mut mins = min_diags.to_vec();
    let mut maxes = max_diags.to_vec();
    mins.sort_unstable_by(f64::total_cmp);
    maxes.sort_unstable_by(f64::total_cmp);
    let ell0 = nearest_rank_quantile(&mins, eta / 2.0) / trace_over_n;
    let l0 = nearest_rank_quantile(&maxes, 1.0 - eta / 2.0) / trace_over_n;
    Ok((ell0, l0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(n: usize, r: usize, trace: f64, frob: f64, snorm: f64, ell: f64, big_l: f64, mu: f64) -> SpectralSummary {
        SpectralSummary { n, r, trace, frob, snorm, ell, big_l, mu }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn distortion_identity_hessian() {
        // H = I_N: mu = 0, ||H||_2/tr = 1/N => tau(m) = 2 e^{1/4} m / N
        let n = 100;
        let s = summary(n, n, n as f64, (n as f64).sqrt(), 1.0, 1.0, 1.0, 0.0);
        for m in [1usize, 3, 10] {
            let tau = distortion(&s, m, n).unwrap();
            assert!(close(tau, 2.0 * (0.25f64).exp() * m as f64 / n as f64, 1e-14));
        }
    }

    #[test]
    fn distortion_plugin_arithmetic() {
        // snorm/trace = 0.1, mu = 1, frob/trace = 0.2, r = e (log r = 1), m = 1:
        // tau = e^{1/4} (0.2 + 12 * 0.2) = e^{1/4} * 2.6
        // r must be an integer; use r = 3 and scale log r out manually instead.
        let s = summary(10, 3, 1.0, 0.2, 0.1, 1.0, 1.0, 1.0);
        let tau = distortion(&s, 1, 3).unwrap();
        let expect = (0.25f64).exp() * (0.2 + 12.0 * (3.0f64.ln()).sqrt() * 0.2);
        assert!(close(tau, expect, 1e-14));
    }

    #[test]
    fn distortion_linear_in_m_when_mu_zero() {
        let s = summary(50, 10, 5.0, 2.0, 1.0, 0.5, 2.0, 0.0);
        let t1 = distortion(&s, 4, 10).unwrap();
        let t2 = distortion(&s, 8, 10).unwrap();
        assert!(close(t2, 2.0 * t1, 1e-14));
    }

    #[test]
    fn distortion_rejects_tiny_rank() {
        let s = summary(10, 1, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0);
        assert!(distortion(&s, 1, 1).is_err());
    }

    #[test]
    fn max_sample_size_identity() {
        // H = I_N, r = N: mu = 0 branch binds => (N - 1)/(146 e^{1/4})
        let n = 1000;
        let s = summary(n, n, n as f64, (n as f64).sqrt(), 1.0, 1.0, 1.0, 0.0);
        let m_max = max_sample_size(&s, n).unwrap();
        assert!(close(m_max, (n as f64 - 1.0) / (146.0 * (0.25f64).exp()), 1e-14));
    }

    #[test]
    fn max_sample_size_direct_substitution() {
        // ell=1, mu=1, tr/||H||_2 = 2, (tr/||H||_F)^2 = 2, log r = 2 (r = e^2 ~ 7.389;
        // use r such that log r is substituted explicitly).
        let r = 8usize; // log 8 = 2.079...
        let s = summary(100, r, 2.0, 2.0f64.sqrt(), 1.0, 1.0, 1.0, 1.0);
        let m_max = max_sample_size(&s, r).unwrap();
        let t1 = 1.0 / (146.0 * (0.25f64).exp());
        let t2 = 2.0 / (149.0 * (0.5f64).exp() * (r as f64).ln());
        assert!(close(m_max, t1.min(t2), 1e-14));
    }

    #[test]
    fn threshold_identity_large_n() {
        let n = 100_000;
        let s = summary(n, n, n as f64, (n as f64).sqrt(), 1.0, 1.0, 1.0, 0.0);
        let rep = condition_threshold(&s, 1, n).unwrap();
        let eps = 2.0 * (0.25f64).exp() / n as f64;
        assert!(close(rep.threshold, (1.0 + eps) / (1.0 - eps), 1e-12));
        assert!(close(rep.success_prob, 1.0 - 1.0 / n as f64, 1e-15));
        assert!(rep.admissible);
    }

    #[test]
    fn threshold_infinite_when_tau_exceeds_ell() {
        let s = summary(100, 10, 1.0, 0.5, 0.3, 0.5, 2.0, 1.0);
        let rep = condition_threshold(&s, 1_000_000, 10).unwrap();
        assert!(rep.threshold.is_infinite());
        assert!(!rep.admissible);
    }

    #[test]
    fn refined_params_constant_diagonal() {
        // all trials identical diag (c,...,c) => ell0 = L0 = c / (tr/N)
        let c = 2.5;
        let mins = vec![c; 9];
        let maxes = vec![c; 9];
        let (ell0, l0) = refined_quantile_params(&mins, &maxes, 0.2, 5.0).unwrap();
        assert!(close(ell0, c / 5.0, 1e-15));
        assert!(close(l0, c / 5.0, 1e-15));
    }

    #[test]
    fn refined_params_nearest_rank_convention() {
        // mins = [1,3], maxes = [5,7], eta = 0.5 => ell0 = 1, L0 = 7 (tr/N = 1)
        let (ell0, l0) = refined_quantile_params(&[1.0, 3.0], &[5.0, 7.0], 0.49999, 1.0).unwrap();
        assert_eq!((ell0, l0), (1.0, 7.0));
    }

    #[test]
    fn refined_params_rejects_empty_and_bad_eta() {
        assert!(refined_quantile_params(&[], &[1.0], 0.2, 1.0).is_err());
        assert!(refined_quantile_params(&[1.0], &[1.0], 0.6, 1.0).is_err());
    }
}
