//! Per-sample open-set scores. Higher always means "more likely known".
//!
//! Every scorer predicts the same class, the argmax of the logits (ties to
//! the lowest index); they differ only in the confidence attached to it.

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::featurepack::{argmax, FeaturePack};
use crate::gaussbank::{BankError, GaussianBank};
use crate::io::write_atomic;

/// Guard for an embedding that sits exactly on its class mean.
pub const S_FLOOR: f64 = 1e-12;

pub const DEFAULT_NN_FRACTION: f64 = 0.01;
pub const DEFAULT_K_NN: usize = 10;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("reference bank holds {rows} rows but k_nn = {k_nn}")]
    ReferenceTooSmall { rows: usize, k_nn: usize },
    #[error("reference row {row} has zero norm")]
    ZeroNormReference { row: usize },
    #[error("invalid reference configuration: {0}")]
    Config(String),
    #[error("non-finite {method} score at row {row}")]
    NonFiniteScore { method: Method, row: usize },
    #[error("unknown method `{0}` (expected one of: ghost, msp, maxlogit, energy, nnguide)")]
    UnknownMethod(String),
    #[error("scored-set CSV: {0}")]
    Csv(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ghost,
    Msp,
    MaxLogit,
    Energy,
    NnGuide,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ghost,
        Method::Msp,
        Method::MaxLogit,
        Method::Energy,
        Method::NnGuide,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ghost => "ghost",
            Method::Msp => "msp",
            Method::MaxLogit => "maxlogit",
            Method::Energy => "energy",
            Method::NnGuide => "nnguide",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ScoringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == lower)
            .ok_or_else(|| ScoringError::UnknownMethod(s.to_string()))
    }
}

fn max_of<T: Copy + Into<f64> + PartialOrd>(logits: &[T]) -> (usize, f64) {
    let k = argmax(logits);
    (k, logits[k].into())
}

/// Predicted-class logit divided by the z-score deviation from that class.
pub fn ghost_score<T: Copy + Into<f64> + PartialOrd>(
    bank: &GaussianBank,
    embedding: &[T],
    logits: &[T],
) -> Result<(usize, f64), ScoringError> {
    if logits.len() != bank.n_classes() {
        return Err(ScoringError::Shape(format!(
            "{} logits for a bank with {} classes",
            logits.len(),
            bank.n_classes()
        )));
    }
    let (k, z) = max_of(logits);
    let s = bank.zscore(embedding, k)?;
    Ok((k, z / s.max(S_FLOOR)))
}

/// Maximum softmax probability.
pub fn msp_score<T: Copy + Into<f64> + PartialOrd>(logits: &[T]) -> (usize, f64) {
    let (k, top) = max_of(logits);
    let denom: f64 = logits.iter().map(|&z| (z.into() - top).exp()).sum();
    (k, 1.0 / denom)
}

pub fn maxlogit_score<T: Copy + Into<f64> + PartialOrd>(logits: &[T]) -> (usize, f64) {
    max_of(logits)
}

/// Negative free energy at temperature 1: `log sum_k exp(z_k)`.
pub fn energy_score<T: Copy + Into<f64> + PartialOrd>(logits: &[T]) -> f64 {
    let (_, top) = max_of(logits);
    let sum: f64 = logits.iter().map(|&z| (z.into() - top).exp()).sum();
    top + sum.ln()
}

/// Row-normalised training embeddings and their base confidences.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBank {
    dim: usize,
    rows: Vec<f64>,
    base: Vec<f64>,
    k_nn: usize,
    fraction: f64,
}

impl ReferenceBank {
    /// Normalises each row of `embeddings` (row-major, `base.len()` rows).
    pub fn from_parts(
        dim: usize,
        embeddings: Vec<f64>,
        base: Vec<f64>,
        k_nn: usize,
        fraction: f64,
    ) -> Result<Self, ScoringError> {
        if dim == 0 || embeddings.len() != dim * base.len() {
            return Err(ScoringError::Shape(format!(
                "{} embedding values for {} rows of dim {dim}",
                embeddings.len(),
                base.len()
            )));
        }
        if k_nn == 0 {
            return Err(ScoringError::Config("k_nn must be at least 1".into()));
        }
        if base.len() < k_nn {
            return Err(ScoringError::ReferenceTooSmall { rows: base.len(), k_nn });
        }
        let mut rows = embeddings;
        for (i, row) in rows.chunks_exact_mut(dim).enumerate() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(ScoringError::ZeroNormReference { row: i });
            }
            row.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(Self {
            dim,
            rows,
            base,
            k_nn,
            fraction,
        })
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_nn(&self) -> usize {
        self.k_nn
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn base_scores(&self) -> &[f64] {
        &self.base
    }
}

/// Seeded subsample of `train` (`round(fraction * n)` rows) for NNGuide.
pub fn build_reference(
    train: &FeaturePack,
    fraction: f64,
    k_nn: usize,
    seed: u64,
) -> Result<ReferenceBank, ScoringError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(ScoringError::Config(format!("fraction {fraction} not in (0, 1]")));
    }
    let n = train.n_samples();
    let keep = ((fraction * n as f64).round() as usize).clamp(1.min(n), n);
    let mut rows: Vec<usize> = if keep == n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample(&mut rng, n, keep).into_vec()
    };
    rows.sort_unstable();
    let mut embeddings = Vec::with_capacity(keep * train.dim());
    let mut base = Vec::with_capacity(keep);
    for &r in &rows {
        embeddings.extend(train.embedding(r).iter().map(|&v| v as f64));
        base.push(energy_score(train.logits(r)));
    }
    ReferenceBank::from_parts(train.dim(), embeddings, base, k_nn, fraction)
}

/// Energy score scaled by the mean of the `k_nn` largest cosine-times-base products.
pub fn nnguide_score<T: Copy + Into<f64> + PartialOrd>(
    reference: &ReferenceBank,
    embedding: &[T],
    logits: &[T],
) -> Result<f64, ScoringError> {
    if embedding.len() != reference.dim {
        return Err(ScoringError::Shape(format!(
            "embedding of dim {} for a reference bank of dim {}",
            embedding.len(),
            reference.dim
        )));
    }
    if reference.len() < reference.k_nn {
        return Err(ScoringError::ReferenceTooSmall {
            rows: reference.len(),
            k_nn: reference.k_nn,
        });
    }
    let query: Vec<f64> = embedding.iter().map(|&v| v.into()).collect();
    let norm = query.iter().map(|v| v * v).sum::<f64>().sqrt();
    let guide = if norm == 0.0 {
        0.0
    } else {
        let mut products: Vec<f64> = (0..reference.len())
            .map(|i| {
                let cos: f64 = reference.row(i).iter().zip(&query).map(|(r, q)| r * q).sum::<f64>() / norm;
                cos * reference.base[i]
            })
            .collect();
        let k = reference.k_nn;
        if k < products.len() {
            products.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
        }
        // summed in sorted order so the result does not depend on selection internals
        let top = &mut products[..k];
        top.sort_unstable_by(f64::total_cmp);
        top.iter().sum::<f64>() / k as f64
    };
    Ok(energy_score(logits) * guide)
}

/// A method together with the fitted artifacts it needs.
#[derive(Debug, Clone, Copy)]
pub enum Scorer<'a> {
    Ghost(&'a GaussianBank),
    Msp,
    MaxLogit,
    Energy,
    NnGuide(&'a ReferenceBank),
}

impl Scorer<'_> {
    pub fn method(&self) -> Method {
        match self {
            Scorer::Ghost(_) => Method::Ghost,
            Scorer::Msp => Method::Msp,
            Scorer::MaxLogit => Method::MaxLogit,
            Scorer::Energy => Method::Energy,
            Scorer::NnGuide(_) => Method::NnGuide,
        }
    }

    pub fn score_row<T: Copy + Into<f64> + PartialOrd>(
        &self,
        embedding: &[T],
        logits: &[T],
    ) -> Result<(usize, f64), ScoringError> {
        match self {
            Scorer::Ghost(bank) => ghost_score(bank, embedding, logits),
            Scorer::Msp => Ok(msp_score(logits)),
            Scorer::MaxLogit => Ok(maxlogit_score(logits)),
            Scorer::Energy => Ok((argmax(logits), energy_score(logits))),
            Scorer::NnGuide(reference) => Ok((argmax(logits), nnguide_score(reference, embedding, logits)?)),
        }
    }

    /// Scores every row of `pack`; output order matches the pack.
    pub fn score_pack(&self, pack: &FeaturePack) -> Result<ScoredSet, ScoringError> {
        match self {
            Scorer::Ghost(bank) if bank.dim() != pack.dim() || bank.n_classes() != pack.n_classes() => {
                return Err(ScoringError::Shape(format!(
                    "pack has K={}, D={} but the bank has K={}, D={}",
                    pack.n_classes(),
                    pack.dim(),
                    bank.n_classes(),
                    bank.dim()
                )))
            }
            Scorer::NnGuide(r) if r.dim() != pack.dim() => {
                return Err(ScoringError::Shape(format!(
                    "pack has D={} but the reference bank has D={}",
                    pack.dim(),
                    r.dim()
                )))
            }
            _ => {}
        }
        let method = self.method();
        let rows: Vec<(usize, f64)> = (0..pack.n_samples())
            .into_par_iter()
            .map(|row| {
                let (k, s) = self.score_row(pack.embedding(row), pack.logits(row))?;
                if !s.is_finite() {
                    return Err(ScoringError::NonFiniteScore { method, row });
                }
                Ok((k, s))
            })
            .collect::<Result<_, _>>()?;
        let (predicted, scores) = rows.into_iter().unzip();
        Ok(ScoredSet {
            method,
            source: pack.fingerprint(),
            predicted,
            scores,
        })
    }
}

/// One method's `(predicted class, score)` per row of one pack.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    pub method: Method,
    /// [`FeaturePack::fingerprint`] of the scored pack.
    pub source: u64,
    pub predicted: Vec<usize>,
    pub scores: Vec<f64>,
}

impl ScoredSet {
    pub fn from_parts(
        method: Method,
        source: u64,
        predicted: Vec<usize>,
        scores: Vec<f64>,
    ) -> Result<Self, ScoringError> {
        if predicted.len() != scores.len() {
            return Err(ScoringError::Shape(format!(
                "{} predictions but {} scores",
                predicted.len(),
                scores.len()
            )));
        }
        if let Some(row) = scores.iter().position(|s| !s.is_finite()) {
            return Err(ScoringError::NonFiniteScore { method, row });
        }
        Ok(Self {
            method,
            source,
            predicted,
            scores,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Same rows, in the order given.
    pub fn select(&self, rows: &[usize]) -> ScoredSet {
        ScoredSet {
            method: self.method,
            source: self.source,
            predicted: rows.iter().map(|&r| self.predicted[r]).collect(),
            scores: rows.iter().map(|&r| self.scores[r]).collect(),
        }
    }

    /// CSV with header `row,predicted,score`; scores carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = Vec::with_capacity(32 * (self.len() + 1));
        writeln!(out, "row,predicted,score").unwrap();
        for (i, (k, s)) in self.predicted.iter().zip(&self.scores).enumerate() {
            writeln!(out, "{i},{k},{s:.16e}").unwrap();
        }
        String::from_utf8(out).unwrap()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), ScoringError> {
        write_atomic(path.as_ref(), self.to_csv().as_bytes())?;
        Ok(())
    }

    /// Parses [`ScoredSet::to_csv`] output. The CSV carries neither method nor
    /// source, so both are supplied by the caller.
    pub fn parse_csv(text: &str, method: Method, source: u64) -> Result<Self, ScoringError> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("row,predicted,score") {
            return Err(ScoringError::Csv("expected header `row,predicted,score`".into()));
        }
        let mut predicted = Vec::new();
        let mut scores = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || ScoringError::Csv(format!("malformed line {}: `{line}`", i + 2));
            let mut fields = line.split(',').map(str::trim);
            let row: usize = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
            if row != predicted.len() {
                return Err(ScoringError::Csv(format!(
                    "row {row} out of sequence on line {}",
                    i + 2
                )));
            }
            predicted.push(fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?);
            scores.push(fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?);
            if fields.next().is_some() {
                return Err(bad());
            }
        }
        Self::from_parts(method, source, predicted, scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank_1d() -> GaussianBank {
        GaussianBank::from_parts(2, 1, vec![0.0, 10.0], vec![1.0, 1.0], vec![2, 2]).unwrap()
    }

    #[test]
    fn ghost_examples() {
        let bank = bank_1d();
        assert_eq!(ghost_score(&bank, &[2.0f64], &[4.0, 1.0]).unwrap(), (0, 2.0));
        let (k, s) = ghost_score(&bank, &[0.0f64], &[5.0, 1.0]).unwrap();
        assert_eq!(k, 0);
        assert_eq!(s, 5.0 / S_FLOOR);
        assert!(ghost_score(&bank, &[0.0f64, 1.0], &[5.0, 1.0]).is_err());
        assert!(ghost_score(&bank, &[0.0f64], &[5.0, 1.0, 0.0]).is_err());
        // negative max logit is used literally: further away scores higher
        let near = ghost_score(&bank, &[1.0f64], &[-2.0, -3.0]).unwrap().1;
        let far = ghost_score(&bank, &[4.0f64], &[-2.0, -3.0]).unwrap().1;
        assert!(far > near);
    }

    #[test]
    fn msp_examples() {
        assert_eq!(msp_score(&[0.0f64, 0.0]), (0, 0.5));
        let (k, s) = msp_score(&[1000.0f64, 0.0]);
        assert_eq!(k, 0);
        assert!((s - 1.0).abs() < 1e-15);
        let e = std::f64::consts::E;
        let expected = e.powi(3) / (e + e * e + e.powi(3));
        let (k, s) = msp_score(&[1.0f64, 2.0, 3.0]);
        assert_eq!(k, 2);
        assert!((s - expected).abs() < 1e-15);
        assert!((s - 0.6652).abs() < 1e-4);
    }

    #[test]
    fn maxlogit_and_energy_examples() {
        assert_eq!(maxlogit_score(&[0.0f64, 0.0]), (0, 0.0));
        assert_eq!(maxlogit_score(&[-3.0f64, 7.0]), (1, 7.0));
        assert_eq!(energy_score(&[0.0f64]), 0.0);
        assert!((energy_score(&[0.0f64, 0.0]) - 2f64.ln()).abs() < 1e-15);
        let e = std::f64::consts::E;
        let expected = (e + e * e + e.powi(3)).ln();
        assert!((energy_score(&[1.0f64, 2.0, 3.0]) - expected).abs() < 1e-14);
        assert!((energy_score(&[1.0f64, 2.0, 3.0]) - 3.4076).abs() < 1e-4);
        assert!(energy_score(&[1000.0f64, 999.0]).is_finite());
    }

    #[test]
    fn nnguide_single_row() {
        let bank = ReferenceBank::from_parts(2, vec![3.0, 4.0], vec![1.0], 1, 1.0).unwrap();
        let logits = [1.0f64, 0.5];
        let q = nnguide_score(&bank, &[0.6f64, 0.8], &logits).unwrap();
        assert!((q - energy_score(&logits)).abs() < 1e-15);
        let ortho = nnguide_score(&bank, &[-4.0f64, 3.0], &logits).unwrap();
        assert!(ortho.abs() < 1e-15);
        assert!(nnguide_score(&bank, &[1.0f64], &logits).is_err());
    }

    #[test]
    fn reference_validation() {
        assert!(matches!(
            ReferenceBank::from_parts(1, vec![1.0], vec![1.0], 2, 1.0),
            Err(ScoringError::ReferenceTooSmall { rows: 1, k_nn: 2 })
        ));
        assert!(matches!(
            ReferenceBank::from_parts(1, vec![0.0], vec![1.0], 1, 1.0),
            Err(ScoringError::ZeroNormReference { row: 0 })
        ));
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("MaxLogit".parse::<Method>().unwrap(), Method::MaxLogit);
        let err = "openmax".parse::<Method>().unwrap_err();
        assert!(err.to_string().contains("ghost, msp, maxlogit, energy, nnguide"));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let set = ScoredSet::from_parts(
            Method::Ghost,
            7,
            vec![0, 2, 1],
            vec![0.1 + 0.2, -1e-300, std::f64::consts::PI * 1e8],
        )
        .unwrap();
        let text = set.to_csv();
        assert!(text.starts_with("row,predicted,score\n0,0,3.0000000000000004e-1\n"));
        let back = ScoredSet::parse_csv(&text, Method::Ghost, 7).unwrap();
        assert_eq!(back, set);
        assert!(ScoredSet::parse_csv("row,predicted,score\n1,0,1.0\n", Method::Msp, 0).is_err());
        assert!(ScoredSet::parse_csv("row,score\n", Method::Msp, 0).is_err());
    }
}
