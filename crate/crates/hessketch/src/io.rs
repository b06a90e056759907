//! Persistence: the HSK1 binary factor format, CSV report tables, and JSON
//! report files.
//!
//! HSK1 layout: 4 magic bytes `HSK1`, then `N` and `r` as unsigned 64-bit
//! little-endian integers, then `N * r` IEEE-754 doubles, little-endian,
//! row-major. Round trips are bit-exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::bounds::TheoremReport;
use crate::ensemble::TrialRecord;
use crate::error::{HskError, Result};
use crate::numkit::{DenseMatrix, GramFactor};
use crate::serde_util::float_to_text;
use crate::spectral::SpectralSummary;

pub const MAGIC: &[u8; 4] = b"HSK1";

pub fn save_factor(path: &Path, factor: &GramFactor) -> Result<()> {
    let n = factor.n();
    let r = factor.r();
    let mut buf = Vec::with_capacity(4 + 16 + 8 * n * r);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&(r as u64).to_le_bytes());
    for i in 0..n {
        for &v in factor.row(i) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_factor(path: &Path) -> Result<GramFactor> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 20 || &bytes[0..4] != MAGIC {
        return Err(HskError::Format(format!(
            "{} is not an HSK1 factor file",
            path.display()
        )));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let r = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let expected = 20 + 8 * n * r;
    if bytes.len() != expected {
        return Err(HskError::Format(format!(
            "HSK1 size mismatch: expected {expected} bytes for {n}x{r}, found {}",
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes[20..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GramFactor::new(DenseMatrix::new(n, r, data)?)
}

/// Per-trial ensemble table. Rank columns follow the configured thresholds
/// (header `rank@{threshold}`).
pub fn ensemble_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("trial_id,cond");
    if let Some(first) = records.first() {
        for (t, _) in &first.rank_at {
            out.push_str(&format!(",rank@{}", float_to_text(*t)));
        }
    } else {
        out.push_str(",rank@1e-6,rank@1e-2");
    }
    out.push_str(",min_diag,max_diag,hollow_norm\n");
    for rec in records {
        out.push_str(&format!("{},{}", rec.trial_id, float_to_text(rec.cond)));
        for (_, rank) in &rec.rank_at {
            out.push_str(&format!(",{rank}"));
        }
        out.push_str(&format!(
            ",{},{},{}\n",
            float_to_text(rec.min_diag),
            float_to_text(rec.max_diag),
            float_to_text(rec.hollow_norm)
        ));
    }
    out
}

pub fn summary_csv(summary: &SpectralSummary) -> String {
    format!(
        "N,r,trace,frob,snorm,ell,L,mu\n{},{},{},{},{},{},{},{}\n",
        summary.n,
        summary.r,
        float_to_text(summary.trace),
        float_to_text(summary.frob),
        float_to_text(summary.snorm),
        float_to_text(summary.ell),
        float_to_text(summary.big_l),
        float_to_text(summary.mu)
    )
}

pub fn bounds_csv(reports: &[TheoremReport]) -> String {
    let mut out = String::from("m,tau,threshold,crude_bound,success_prob,admissible\n");
    for rep in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rep.m,
            float_to_text(rep.tau),
            float_to_text(rep.threshold),
            float_to_text(rep.crude_bound),
            float_to_text(rep.success_prob),
            rep.admissible
        ));
    }
    out
}

/// Writes pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| HskError::Format(format!("serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}
