//! Row-subsampling experiments for rank-deficient Gauss-Newton Hessians
//! `H = Phi Phi^T`: spectral parameters, condition-number tail bounds, Monte
//! Carlo ensembles, synthetic factor generators, and an elliptic inverse
//! problem that produces realistic sensitivity factors.

pub mod bounds;
pub mod datagen;
pub mod elliptic;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod numkit;
pub mod rng;
pub mod serde_util;
pub mod sketch;
pub mod spectral;

pub use error::{HskError, Result};
pub use numkit::{DenseMatrix, GramFactor, Spectrum};
pub use spectral::SpectralSummary;
