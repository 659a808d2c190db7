//! Per-class, per-dimension Gaussian models of the embedding space.
//!
//! Each class keeps the mean and (unbiased) standard deviation of every
//! embedding dimension, estimated from its correctly classified training
//! samples only. Bank files store both matrices as f64:
//!
//! ```text
//! "GHBK"  u32 version=1  u32 K  u32 D
//! K x D f64 means   K x D f64 stds   K u32 counts
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::featurepack::{FeaturePack, PackError};
use crate::io::{write_atomic, Reader};

/// Lower bound applied to every fitted standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-6;

pub const BANK_MAGIC: [u8; 4] = *b"GHBK";
pub const BANK_VERSION: u32 = 1;
pub const BANK_HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum BankError {
    #[error("class {class} has {correct} correctly classified training samples; at least 2 are required")]
    InsufficientSamples { class: usize, correct: usize },
    #[error(transparent)]
    Pack(#[from] PackError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class index {class} out of range for a bank with {n_classes} classes")]
    ClassOutOfRange { class: usize, n_classes: usize },
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt bank file: {0}")]
    Corrupt(String),
    #[error("bank file version {0} is not supported (expected 1)")]
    VersionMismatch(u32),
}

/// Fitted per-class diagonal Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBank {
    n_classes: usize,
    dim: usize,
    means: Vec<f64>,
    stds: Vec<f64>,
    counts: Vec<u32>,
}

impl GaussianBank {
    /// Assembles a bank from explicit parameters; stds are floored at [`SIGMA_FLOOR`].
    pub fn from_parts(
        n_classes: usize,
        dim: usize,
        means: Vec<f64>,
        stds: Vec<f64>,
        counts: Vec<u32>,
    ) -> Result<Self, BankError> {
        if n_classes == 0 || dim == 0 {
            return Err(BankError::Corrupt(format!("K={n_classes}, D={dim} must be positive")));
        }
        if means.len() != n_classes * dim || stds.len() != n_classes * dim || counts.len() != n_classes {
            return Err(BankError::Corrupt("parameter lengths do not match K x D".into()));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(BankError::Corrupt("non-finite mean".into()));
        }
        if stds.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(BankError::Corrupt("negative or non-finite standard deviation".into()));
        }
        let stds = stds.into_iter().map(|s| s.max(SIGMA_FLOOR)).collect();
        Ok(Self {
            n_classes,
            dim,
            means,
            stds,
            counts,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self, class: usize) -> &[f64] {
        &self.means[class * self.dim..(class + 1) * self.dim]
    }

    pub fn std(&self, class: usize) -> &[f64] {
        &self.stds[class * self.dim..(class + 1) * self.dim]
    }

    /// Number of correctly classified samples each class was fitted on.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Summed absolute z-score deviation of `embedding` from `class`'s Gaussian.
    pub fn zscore<T: Copy + Into<f64>>(&self, embedding: &[T], class: usize) -> Result<f64, BankError> {
        if embedding.len() != self.dim {
            return Err(BankError::DimensionMismatch {
                expected: self.dim,
                got: embedding.len(),
            });
        }
        if class >= self.n_classes {
            return Err(BankError::ClassOutOfRange {
                class,
                n_classes: self.n_classes,
            });
        }
        Ok(embedding
            .iter()
            .zip(self.mean(class))
            .zip(self.std(class))
            .map(|((&x, &mu), &sigma)| (x.into() - mu).abs() / sigma)
            .sum())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let kd = self.n_classes * self.dim;
        let mut out = Vec::with_capacity(BANK_HEADER_LEN + 16 * kd + 4 * self.n_classes);
        out.extend_from_slice(&BANK_MAGIC);
        for v in [BANK_VERSION, self.n_classes as u32, self.dim as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.means.iter().chain(&self.stds) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for c in &self.counts {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BankError> {
        let mut r = Reader::new(bytes);
        let truncated = |at: usize| BankError::Corrupt(format!("truncated at byte offset {at}"));
        if r.take(4).map_err(truncated)? != BANK_MAGIC {
            return Err(BankError::Corrupt("bad magic bytes (expected \"GHBK\")".into()));
        }
        let version = r.u32().map_err(truncated)?;
        if version != BANK_VERSION {
            return Err(BankError::VersionMismatch(version));
        }
        let k = r.u32().map_err(truncated)? as usize;
        let d = r.u32().map_err(truncated)? as usize;
        let expected = BANK_HEADER_LEN as u64 + 16 * (k as u64 * d as u64) + 4 * k as u64;
        if (bytes.len() as u64) < expected {
            return Err(truncated(bytes.len()));
        }
        if bytes.len() as u64 > expected {
            return Err(BankError::Corrupt(format!(
                "{} trailing bytes at offset {expected}",
                bytes.len() as u64 - expected
            )));
        }
        let mut f64s = |n: usize| -> Vec<f64> {
            r.take(8 * n)
                .expect("length checked")
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        };
        let means = f64s(k * d);
        let stds = f64s(k * d);
        let counts = r
            .take(4 * k)
            .expect("length checked")
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_parts(k, d, means, stds, counts)
    }
}

/// Fits one Gaussian per class from the correctly classified rows of `train`.
///
/// Every dimension's values are sorted before the two-pass mean/variance
/// accumulation, so the result is bit-identical under any row permutation.
pub fn fit(train: &FeaturePack) -> Result<GaussianBank, BankError> {
    train.require_known()?;
    let k = train.n_classes();
    let d = train.dim();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for row in 0..train.n_samples() {
        if train.is_correct(row) {
            members[train.label(row) as usize].push(row);
        }
    }
    if let Some((class, rows)) = members.iter().enumerate().find(|(_, rows)| rows.len() < 2) {
        return Err(BankError::InsufficientSamples {
            class,
            correct: rows.len(),
        });
    }

    let per_class: Vec<(Vec<f64>, Vec<f64>)> = members
        .par_iter()
        .map(|rows| {
            let mut column = vec![0f64; rows.len()];
            let mut means = Vec::with_capacity(d);
            let mut stds = Vec::with_capacity(d);
            for dim in 0..d {
                for (slot, &row) in column.iter_mut().zip(rows) {
                    *slot = train.embedding(row)[dim] as f64;
                }
                column.sort_unstable_by(f64::total_cmp);
                let (mu, var) = two_pass(&column);
                means.push(mu);
                stds.push(var.sqrt().max(SIGMA_FLOOR));
            }
            (means, stds)
        })
        .collect();

    let mut means = Vec::with_capacity(k * d);
    let mut stds = Vec::with_capacity(k * d);
    for (m, s) in per_class {
        means.extend(m);
        stds.extend(s);
    }
    let counts = members.iter().map(|r| r.len() as u32).collect();
    Ok(GaussianBank {
        n_classes: k,
        dim: d,
        means,
        stds,
        counts,
    })
}

/// Mean and unbiased variance; `values.len() >= 2`.
fn two_pass(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

pub fn save_bank(bank: &GaussianBank, path: impl AsRef<Path>) -> Result<(), BankError> {
    let path = path.as_ref();
    write_atomic(path, &bank.to_bytes()).map_err(|source| BankError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_bank(path: impl AsRef<Path>) -> Result<GaussianBank, BankError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| BankError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    GaussianBank::from_bytes(&bytes)
}
