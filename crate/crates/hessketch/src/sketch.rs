//! Uniform row subsampling: the selector `S`, the sketched Hessian
//! `H_s = (S phi)(S phi)^T`, and its hollow (zero-diagonal) part `M_s`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HskError, Result};
use crate::numkit::{DenseMatrix, GramFactor};
use crate::rng::SplitMix64;

/// Sampling model for the selector indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// i.i.d. uniform draws; duplicates occur and are kept.
    WithReplacement,
    /// Uniformly random m-subset, order randomized.
    WithoutReplacement,
}

impl std::str::FromStr for SamplingMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "with" | "with-replacement" => Ok(SamplingMode::WithReplacement),
            "without" | "without-replacement" => Ok(SamplingMode::WithoutReplacement),
            other => Err(format!("unknown sampling mode '{other}'")),
        }
    }
}

/// Ordered list of sampled row indices (the matrix `S` row by row).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchSelector {
    pub indices: Vec<usize>,
}

impl SketchSelector {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(HskError::Contract("selector must be nonempty".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(HskError::Contract(format!(
                "selector index {bad} out of range for N={n}"
            )));
        }
        Ok(SketchSelector { indices })
    }

    pub fn m(&self) -> usize {
        self.indices.len()
    }
}

/// Draws `m` row indices from `[0, N)` uniformly, per the sampling mode.
/// Deterministic given the stream state.
pub fn draw_uniform_selector(
    n: usize,
    m: usize,
    rng: &mut SplitMix64,
    mode: SamplingMode,
) -> Result<SketchSelector> {
    if m == 0 {
        return Err(HskError::Contract("sample size m must be >= 1".into()));
    }
    let indices = match mode {
        SamplingMode::WithReplacement => {
            (0..m).map(|_| rng.next_below(n as u64) as usize).collect()
        }
        SamplingMode::WithoutReplacement => {
            if m > n {
                return Err(HskError::Contract(format!(
                    "m={m} exceeds N={n} for sampling without replacement"
                )));
            }
            rng.sample_without_replacement(n, m)
        }
    };
    SketchSelector::new(indices, n)
}

/// Gathers the selected factor rows as an `m x r` nalgebra matrix.
pub fn gather_rows(f: &GramFactor, s: &SketchSelector) -> DMatrix<f64> {
    let m = s.m();
    let r = f.r();
    let mut out = DMatrix::zeros(m, r);
    for (a, &idx) in s.indices.iter().enumerate() {
        let row = f.row(idx);
        for j in 0..r {
            out[(a, j)] = row[j];
        }
    }
    out
}

/// The `m x m` sketched Hessian `H_s = (S phi)(S phi)^T`, formed from the
/// gathered rows (cost m^2 r), never from the ambient `N x N` matrix.
pub fn sketch_hessian(f: &GramFactor, s: &SketchSelector) -> Result<DenseMatrix> {
    if let Some(&bad) = s.indices.iter().find(|&&i| i >= f.n()) {
        return Err(HskError::Contract(format!(
            "selector index {bad} out of range for N={}",
            f.n()
        )));
    }
    let sphi = gather_rows(f, s);
    let hs = &sphi * sphi.transpose();
    Ok(DenseMatrix::from_nalgebra(&hs))
}

/// Zeroes the diagonal: `M_s = H_s - diag(H_s)`.
pub fn hollow_part(h_s: &DenseMatrix) -> Result<DenseMatrix> {
    if !h_s.is_square() {
        return Err(HskError::Contract(format!(
            "hollow_part requires a square matrix, got {}x{}",
            h_s.rows, h_s.cols
        )));
    }
    let mut m = h_s.clone();
    for i in 0..m.rows {
        m.set(i, i, 0.0);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{condition_number, sym_eigenvalues};

    fn factor(rows: &[Vec<f64>]) -> GramFactor {
        GramFactor::new(DenseMatrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn selector_n1_is_all_zero() {
        let mut rng = SplitMix64::new(0);
        let s = draw_uniform_selector(1, 3, &mut rng, SamplingMode::WithReplacement).unwrap();
        assert_eq!(s.indices, vec![0, 0, 0]);
    }

    #[test]
    fn selector_full_permutation() {
        let mut rng = SplitMix64::new(5);
        let s = draw_uniform_selector(5, 5, &mut rng, SamplingMode::WithoutReplacement).unwrap();
        let mut sorted = s.indices.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn selector_rejects_oversample_without_replacement() {
        let mut rng = SplitMix64::new(5);
        assert!(draw_uniform_selector(3, 4, &mut rng, SamplingMode::WithoutReplacement).is_err());
    }

    #[test]
    fn selector_pairs_are_uniform() {
        // n=6, m=2 with replacement: each ordered pair has probability 1/36.
        let mut rng = SplitMix64::new(77);
        let trials = 1_000_000usize;
        let mut counts = [[0u32; 6]; 6];
        for _ in 0..trials {
            let s = draw_uniform_selector(6, 2, &mut rng, SamplingMode::WithReplacement).unwrap();
            counts[s.indices[0]][s.indices[1]] += 1;
        }
        // chi-square goodness of fit, 35 degrees of freedom; 66.62 is the
        // 0.999 quantile, so a correct sampler fails one run in a thousand
        let expect = trials as f64 / 36.0;
        let chi2: f64 = counts
            .iter()
            .flatten()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        assert!(chi2 < 66.62, "chi-square statistic {chi2} too large");
    }

    #[test]
    fn sketch_identity_rows() {
        let f = factor(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let s = SketchSelector::new(vec![0, 2], 3).unwrap();
        let hs = sketch_hessian(&f, &s).unwrap();
        assert_eq!(hs, DenseMatrix::identity(2));
    }

    #[test]
    fn sketch_inner_products() {
        let f = factor(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]);
        let s = SketchSelector::new(vec![0, 2], 3).unwrap();
        let hs = sketch_hessian(&f, &s).unwrap();
        let expect = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(hs, expect);
    }

    #[test]
    fn duplicate_index_gives_infinite_condition() {
        let f = factor(&[vec![1.0, 0.5], vec![0.3, 2.0], vec![1.0, 1.0]]);
        let s = SketchSelector::new(vec![1, 1], 3).unwrap();
        let hs = sketch_hessian(&f, &s).unwrap();
        let spec = sym_eigenvalues(&hs).unwrap();
        assert!(condition_number(&spec, 1e-12).is_infinite());
    }

    #[test]
    fn hollow_examples() {
        let hs = DenseMatrix::identity(3);
        assert_eq!(hollow_part(&hs).unwrap(), DenseMatrix::zeros(3, 3));

        let hs = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let expect = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(hollow_part(&hs).unwrap(), expect);

        // eigenvalues of [[0,3],[3,0]] are +-3
        let m = DenseMatrix::from_rows(&[vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap();
        let spec = sym_eigenvalues(&hollow_part(&m).unwrap()).unwrap();
        assert!((spec.max() - 3.0).abs() < 1e-12);
        assert!((spec.min() + 3.0).abs() < 1e-12);
    }

    #[test]
    fn hollow_rejects_non_square() {
        assert!(hollow_part(&DenseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn sketch_is_principal_submatrix() {
        let f = factor(&[
            vec![1.0, 2.0],
            vec![-0.5, 0.25],
            vec![3.0, -1.0],
            vec![0.1, 0.7],
        ]);
        let h = f.materialize_hessian().unwrap();
        let s = SketchSelector::new(vec![3, 1, 2], 4).unwrap();
        let hs = sketch_hessian(&f, &s).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(hs.get(a, b), h.get(s.indices[a], s.indices[b]));
            }
        }
    }
}
