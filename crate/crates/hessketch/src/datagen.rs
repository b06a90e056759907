//! Synthetic factor-matrix generators: standard Gaussian, uniform [0,1] and
//! Bernoulli entries, all seed-deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{HskError, Result};
use crate::numkit::{DenseMatrix, GramFactor};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    Gaussian,
    Uniform01,
    Bernoulli01,
}

impl std::str::FromStr for Distribution {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian" | "normal" => Ok(Distribution::Gaussian),
            "uniform" | "uniform01" => Ok(Distribution::Uniform01),
            "bernoulli" | "bernoulli01" => Ok(Distribution::Bernoulli01),
            other => Err(format!("unknown distribution '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub r: usize,
    pub distribution: Distribution,
    pub seed: u64,
    /// Bernoulli success probability; the default fair coin can be overridden.
    pub bernoulli_p: f64,
}

impl SyntheticSpec {
    pub fn new(n: usize, r: usize, distribution: Distribution, seed: u64) -> Self {
        SyntheticSpec {
            n,
            r,
            distribution,
            seed,
            bernoulli_p: 0.5,
        }
    }
}

/// Generated factor plus bookkeeping on Bernoulli zero-row redraws.
#[derive(Debug, Clone)]
pub struct SyntheticFactor {
    pub factor: GramFactor,
    /// Number of all-zero Bernoulli rows that were redrawn to keep every
    /// Hessian diagonal strictly positive.
    pub zero_row_redraws: u64,
}

/// Draws the factor row by row from a single SplitMix64 stream seeded with
/// `spec.seed`. Bernoulli rows that come out entirely zero are redrawn.
pub fn gen_factor(spec: &SyntheticSpec) -> Result<SyntheticFactor> {
    if spec.n < spec.r || spec.r < 1 {
        return Err(HskError::Contract(format!(
            "synthetic spec requires n >= r >= 1, got n={}, r={}",
            spec.n, spec.r
        )));
    }
    if !(0.0 < spec.bernoulli_p && spec.bernoulli_p <= 1.0) {
        return Err(HskError::Contract(format!(
            "bernoulli probability must lie in (0, 1], got {}",
            spec.bernoulli_p
        )));
    }
    let mut rng = SplitMix64::new(spec.seed);
    let mut data = Vec::with_capacity(spec.n * spec.r);
    let mut redraws = 0u64;
    for _ in 0..spec.n {
        loop {
            let start = data.len();
            match spec.distribution {
                Distribution::Gaussian => {
                    for _ in 0..spec.r {
                        data.push(rng.next_gaussian());
                    }
                }
                Distribution::Uniform01 => {
                    for _ in 0..spec.r {
                        data.push(rng.next_f64());
                    }
                }
                Distribution::Bernoulli01 => {
                    for _ in 0..spec.r {
                        data.push(rng.next_bernoulli(spec.bernoulli_p));
                    }
                }
            }
            let all_zero = data[start..].iter().all(|&x| x == 0.0);
            if all_zero && spec.distribution == Distribution::Bernoulli01 {
                data.truncate(start);
                redraws += 1;
                continue;
            }
            break;
        }
    }
    let factor = GramFactor::new(DenseMatrix::new(spec.n, spec.r, data)?)?;
    Ok(SyntheticFactor {
        factor,
        zero_row_redraws: redraws,
    })
}
