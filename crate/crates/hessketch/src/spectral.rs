//! Relative spectral parameters of a Gram-structured Hessian: the diagonal
//! variation pair `(ell, L)` and the coherence `mu`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HskError, Result};
use crate::numkit::{self, GramFactor};

/// Row-panel width for the blocked coherence scan.
const COHERENCE_BLOCK: usize = 512;

/// All scale-invariant parameters of one Hessian `H = phi * phi^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Ambient dimension N.
    pub n: usize,
    /// Data rank r (number of factor columns).
    pub r: usize,
    /// trace(H).
    pub trace: f64,
    /// ||H||_F.
    pub frob: f64,
    /// ||H||_2.
    pub snorm: f64,
    /// Smallest diagonal of H relative to the average diagonal.
    pub ell: f64,
    /// Largest diagonal of H relative to the average diagonal.
    pub big_l: f64,
    /// Largest off-diagonal magnitude of H relative to ||H||_F / N.
    pub mu: f64,
}

/// `(ell, L)`: min and max Hessian diagonal normalized by the average
/// diagonal `trace(H)/N`. Requires every diagonal to be strictly positive.
pub fn diag_variation(f: &GramFactor) -> Result<(f64, f64)> {
    let n = f.n();
    let mut min_d = f64::INFINITY;
    let mut max_d = f64::NEG_INFINITY;
    let mut trace = 0.0;
    for i in 0..n {
        let d = f.diag_entry(i);
        if d <= 0.0 {
            return Err(HskError::Degenerate(format!(
                "row {i} of the factor has zero norm; diagonal variation is undefined"
            )));
        }
        min_d = min_d.min(d);
        max_d = max_d.max(d);
        trace += d;
    }
    let avg = trace / n as f64;
    Ok((min_d / avg, max_d / avg))
}

/// Exact coherence `mu = N * max_{i != j} |H_ij| / ||H||_F`, scanned over all
/// off-diagonal entries in row panels so the `N x N` matrix is never formed.
pub fn coherence(f: &GramFactor) -> Result<f64> {
    let (_, frob) = numkit::trace_and_frobenius(f);
    coherence_with_frob(f, frob)
}

fn coherence_with_frob(f: &GramFactor, frob: f64) -> Result<f64> {
    if frob <= 0.0 {
        return Err(HskError::Degenerate(
            "zero Frobenius norm; coherence is undefined".into(),
        ));
    }
    let n = f.n();
    if n == 1 {
        return Ok(0.0); // vacuous maximum
    }
    let phi = f.phi().to_nalgebra();
    let blocks: Vec<(usize, usize)> = (0..n)
        .step_by(COHERENCE_BLOCK)
        .map(|start| (start, (start + COHERENCE_BLOCK).min(n)))
        .collect();
    let mut pairs = Vec::new();
    for (bi, &a) in blocks.iter().enumerate() {
        for &b in blocks.iter().skip(bi) {
            pairs.push((a, b));
        }
    }
    let max_off = pairs
        .par_iter()
        .map(|&((i0, i1), (j0, j1))| {
            let pa = phi.rows(i0, i1 - i0);
            let pb = phi.rows(j0, j1 - j0);
            let block: DMatrix<f64> = pa * pb.transpose();
            let mut local = 0.0f64;
            for bi in 0..block.nrows() {
                for bj in 0..block.ncols() {
                    if i0 + bi != j0 + bj {
                        local = local.max(block[(bi, bj)].abs());
                    }
                }
            }
            local
        })
        .reduce(|| 0.0, f64::max);
    Ok(n as f64 * max_off / frob)
}

/// Fills a [`SpectralSummary`] from the factor. Deterministic; the coherence
/// scan is exact.
pub fn summarize(f: &GramFactor) -> Result<SpectralSummary> {
    let (trace, frob) = numkit::trace_and_frobenius(f);
    let snorm = numkit::spectral_norm(f);
    let (ell, big_l) = diag_variation(f)?;
    let mu = coherence_with_frob(f, frob)?;
    Ok(SpectralSummary {
        n: f.n(),
        r: f.r(),
        trace,
        frob,
        snorm,
        ell,
        big_l,
        mu,
    })
}

/// Monte Carlo under-estimate of the coherence, for profiling only. Scans
/// `samples` random off-diagonal entries instead of all of them, so the
/// result is a lower bound on the exact `mu`.
pub fn coherence_sampled(f: &GramFactor, samples: usize, seed: u64) -> Result<f64> {
    let (_, frob) = numkit::trace_and_frobenius(f);
    if frob <= 0.0 {
        return Err(HskError::Degenerate(
            "zero Frobenius norm; coherence is undefined".into(),
        ));
    }
    let n = f.n();
    if n == 1 {
        return Ok(0.0);
    }
    let mut rng = crate::rng::SplitMix64::new(seed);
    let mut max_off = 0.0f64;
    for _ in 0..samples {
        let i = rng.next_below(n as u64) as usize;
        let mut j = rng.next_below((n - 1) as u64) as usize;
        if j >= i {
            j += 1;
        }
        let dot: f64 = f
            .row(i)
            .iter()
            .zip(f.row(j).iter())
            .map(|(a, b)| a * b)
            .sum();
        max_off = max_off.max(dot.abs());
    }
    Ok(n as f64 * max_off / frob)
}
