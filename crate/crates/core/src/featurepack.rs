//! Feature packs: embeddings, logits and labels extracted from a frozen classifier.
//!
//! On disk a pack is a fixed 20-byte header followed by three row-major,
//! little-endian payload blocks:
//!
//! ```text
//! "GHPK"  u32 version=1  u32 n_samples  u32 n_classes  u32 dim
//! n_samples x dim        f32 embeddings
//! n_samples x n_classes  f32 logits
//! n_samples              i32 labels   (-1 marks an unknown sample)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::io::{write_atomic, Reader};

pub const PACK_MAGIC: [u8; 4] = *b"GHPK";
pub const PACK_VERSION: u32 = 1;
pub const PACK_HEADER_LEN: usize = 20;

/// Label value marking a sample from an unseen class.
pub const UNKNOWN_LABEL: i32 = -1;

#[derive(Debug, Error)]
pub enum PackError {
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt header: bad magic bytes at offset 0 (expected \"GHPK\")")]
    BadMagic,
    #[error("corrupt header: unsupported pack version {0} at offset 4")]
    UnsupportedVersion(u32),
    #[error("truncated {section} at byte offset {offset}: {needed} bytes needed, {available} available")]
    Truncated {
        section: &'static str,
        offset: usize,
        needed: u64,
        available: usize,
    },
    #[error("corrupt payload: {extra} trailing bytes at byte offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("non-finite value in {section} at row {row}, column {col}")]
    NonFinite {
        section: &'static str,
        row: usize,
        col: usize,
    },
    #[error("label out of range at row {row}: {label} is neither in [0, {n_classes}) nor -1")]
    LabelOutOfRange { row: usize, label: i32, n_classes: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("pack contains unknown labels (first at row {row})")]
    UnknownLabels { row: usize },
    #[error("CSV import failed at line {line}: {message}")]
    Csv { line: u64, message: String },
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: Copy + PartialOrd>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// A validated, immutable set of extracted samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePack {
    n_classes: usize,
    dim: usize,
    embeddings: Vec<f32>,
    logits: Vec<f32>,
    labels: Vec<i32>,
}

impl FeaturePack {
    /// Builds a pack from row-major buffers, checking every invariant.
    pub fn new(
        n_classes: usize,
        dim: usize,
        embeddings: Vec<f32>,
        logits: Vec<f32>,
        labels: Vec<i32>,
    ) -> Result<Self, PackError> {
        if n_classes == 0 || dim == 0 {
            return Err(PackError::Shape(format!(
                "n_classes and dim must be positive (got K={n_classes}, D={dim})"
            )));
        }
        if n_classes > u32::MAX as usize || dim > u32::MAX as usize || labels.len() > u32::MAX as usize {
            return Err(PackError::Shape("dimensions exceed the u32 header fields".into()));
        }
        let n = labels.len();
        if embeddings.len() != n * dim {
            return Err(PackError::Shape(format!(
                "embeddings hold {} values, expected {n} x {dim}",
                embeddings.len()
            )));
        }
        if logits.len() != n * n_classes {
            return Err(PackError::Shape(format!(
                "logits hold {} values, expected {n} x {n_classes}",
                logits.len()
            )));
        }
        check_finite("embeddings", &embeddings, dim)?;
        check_finite("logits", &logits, n_classes)?;
        for (row, &label) in labels.iter().enumerate() {
            if label != UNKNOWN_LABEL && (label < 0 || label as usize >= n_classes) {
                return Err(PackError::LabelOutOfRange { row, label, n_classes });
            }
        }
        Ok(Self {
            n_classes,
            dim,
            embeddings,
            logits,
            labels,
        })
    }

    pub fn empty(n_classes: usize, dim: usize) -> Result<Self, PackError> {
        Self::new(n_classes, dim, Vec::new(), Vec::new(), Vec::new())
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn embedding(&self, row: usize) -> &[f32] {
        &self.embeddings[row * self.dim..(row + 1) * self.dim]
    }

    pub fn logits(&self, row: usize) -> &[f32] {
        &self.logits[row * self.n_classes..(row + 1) * self.n_classes]
    }

    pub fn label(&self, row: usize) -> i32 {
        self.labels[row]
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    /// Row-major `n_samples x dim` embedding buffer.
    pub fn embeddings_flat(&self) -> &[f32] {
        &self.embeddings
    }

    /// Row-major `n_samples x n_classes` logit buffer.
    pub fn logits_flat(&self) -> &[f32] {
        &self.logits
    }

    /// Class label of a known sample, `None` for unknowns.
    pub fn known_label(&self, row: usize) -> Option<usize> {
        let l = self.labels[row];
        (l != UNKNOWN_LABEL).then_some(l as usize)
    }

    /// Predicted class, the argmax of the row's logits.
    pub fn predicted(&self, row: usize) -> usize {
        argmax(self.logits(row))
    }

    /// True when the sample is known and its predicted class equals its label.
    pub fn is_correct(&self, row: usize) -> bool {
        self.known_label(row) == Some(self.predicted(row))
    }

    /// Errors with the first offending row if any label is the unknown sentinel.
    pub fn require_known(&self) -> Result<(), PackError> {
        match self.labels.iter().position(|&l| l == UNKNOWN_LABEL) {
            Some(row) => Err(PackError::UnknownLabels { row }),
            None => Ok(()),
        }
    }

    pub fn is_all_unknown(&self) -> bool {
        self.labels.iter().all(|&l| l == UNKNOWN_LABEL)
    }

    /// New pack holding the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> FeaturePack {
        let mut embeddings = Vec::with_capacity(rows.len() * self.dim);
        let mut logits = Vec::with_capacity(rows.len() * self.n_classes);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            embeddings.extend_from_slice(self.embedding(r));
            logits.extend_from_slice(self.logits(r));
            labels.push(self.labels[r]);
        }
        FeaturePack {
            n_classes: self.n_classes,
            dim: self.dim,
            embeddings,
            logits,
            labels,
        }
    }

    /// Appends the rows of `other`, which must share K and D.
    pub fn concat(&self, other: &FeaturePack) -> Result<FeaturePack, PackError> {
        if other.n_classes != self.n_classes || other.dim != self.dim {
            return Err(PackError::Shape(format!(
                "cannot concatenate K={},D={} with K={},D={}",
                self.n_classes, self.dim, other.n_classes, other.dim
            )));
        }
        let mut out = self.clone();
        out.embeddings.extend_from_slice(&other.embeddings);
        out.logits.extend_from_slice(&other.logits);
        out.labels.extend_from_slice(&other.labels);
        Ok(out)
    }

    /// Content hash (FNV-1a over the encoded bytes) identifying the pack.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.n_samples();
        let mut out = Vec::with_capacity(PACK_HEADER_LEN + 4 * (self.embeddings.len() + self.logits.len() + n));
        out.extend_from_slice(&PACK_MAGIC);
        for v in [PACK_VERSION, n as u32, self.n_classes as u32, self.dim as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.embeddings.iter().chain(&self.logits) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PackError> {
        let mut r = Reader::new(bytes);
        let short = |section, r: &Reader, needed: u64| PackError::Truncated {
            section,
            offset: r.offset(),
            needed,
            available: r.remaining(),
        };
        let magic = r.take(4).map_err(|_| short("header", &r, 4))?;
        if magic != PACK_MAGIC {
            return Err(PackError::BadMagic);
        }
        let mut header = [0u32; 4];
        for h in header.iter_mut() {
            *h = r.u32().map_err(|_| short("header", &r, 4))?;
        }
        let [version, n, k, d] = header;
        if version != PACK_VERSION {
            return Err(PackError::UnsupportedVersion(version));
        }
        let (n, k, d) = (n as usize, k as usize, d as usize);
        if k == 0 || d == 0 {
            return Err(PackError::Shape(format!(
                "header declares K={k}, D={d}; both must be positive"
            )));
        }
        let emb = read_f32_block(&mut r, "embeddings", n as u64 * d as u64)?;
        let logits = read_f32_block(&mut r, "logits", n as u64 * k as u64)?;
        let need = n as u64 * 4;
        let raw = r.take(need as usize).map_err(|_| short("labels", &r, need))?;
        let labels = raw
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if r.remaining() > 0 {
            return Err(PackError::TrailingBytes {
                offset: r.offset(),
                extra: r.remaining(),
            });
        }
        FeaturePack::new(k, d, emb, logits, labels)
    }
}

fn read_f32_block(r: &mut Reader, section: &'static str, count: u64) -> Result<Vec<f32>, PackError> {
    let need = count * 4;
    if (r.remaining() as u64) < need {
        return Err(PackError::Truncated {
            section,
            offset: r.offset(),
            needed: need,
            available: r.remaining(),
        });
    }
    let raw = r.take(need as usize).expect("length checked");
    Ok(raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn check_finite(section: &'static str, values: &[f32], width: usize) -> Result<(), PackError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(PackError::NonFinite {
            section,
            row: i / width,
            col: i % width,
        }),
        None => Ok(()),
    }
}

/// Reads and validates a pack file.
pub fn read_pack(path: impl AsRef<Path>) -> Result<FeaturePack, PackError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| PackError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    FeaturePack::from_bytes(&bytes)
}

/// Writes a pack atomically (temporary file plus rename).
pub fn write_pack(pack: &FeaturePack, path: impl AsRef<Path>) -> Result<(), PackError> {
    let path = path.as_ref();
    write_atomic(path, &pack.to_bytes()).map_err(|source| PackError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a hand-made fixture with header `label,e0..e{D-1},z0..z{K-1}`.
pub fn read_csv(path: impl AsRef<Path>) -> Result<FeaturePack, PackError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| PackError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(file)
}

pub fn parse_csv<R: std::io::Read>(input: R) -> Result<FeaturePack, PackError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let csv_err = |line: u64, message: String| PackError::Csv { line, message };
    let header = rdr.headers().map_err(|e| csv_err(1, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.first() != Some(&"label") {
        return Err(csv_err(1, "first column must be `label`".into()));
    }
    let dim = names[1..].iter().take_while(|n| n.starts_with('e')).count();
    let n_classes = names.len() - 1 - dim;
    for (i, name) in names[1..=dim].iter().enumerate() {
        if *name != format!("e{i}") {
            return Err(csv_err(1, format!("expected column e{i}, found `{name}`")));
        }
    }
    for (i, name) in names[1 + dim..].iter().enumerate() {
        if *name != format!("z{i}") {
            return Err(csv_err(1, format!("expected column z{i}, found `{name}`")));
        }
    }
    if dim == 0 || n_classes == 0 {
        return Err(csv_err(1, "need at least one e* and one z* column".into()));
    }

    let mut embeddings = Vec::new();
    let mut logits = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let label: i32 = record[0]
            .parse()
            .map_err(|_| csv_err(line, format!("bad label `{}`", &record[0])))?;
        labels.push(label);
        for (i, field) in record.iter().enumerate().skip(1) {
            let v: f32 = field
                .parse()
                .map_err(|_| csv_err(line, format!("bad number `{field}` in column {i}")))?;
            if i <= dim {
                embeddings.push(v);
            } else {
                logits.push(v);
            }
        }
    }
    FeaturePack::new(n_classes, dim, embeddings, logits, labels)
}

/// Per-class sample and correct-classification counts of a known-labels pack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackDiagnostics {
    pub counts: Vec<usize>,
    pub correct: Vec<usize>,
    /// Classes with fewer than two correctly classified samples.
    pub flagged: Vec<usize>,
}

impl PackDiagnostics {
    pub fn n_known(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let n = self.n_known();
        if n == 0 {
            return 0.0;
        }
        self.correct.iter().sum::<usize>() as f64 / n as f64
    }
}

pub fn diagnose(pack: &FeaturePack) -> Result<PackDiagnostics, PackError> {
    pack.require_known()?;
    let k = pack.n_classes();
    let mut counts = vec![0usize; k];
    let mut correct = vec![0usize; k];
    for row in 0..pack.n_samples() {
        let label = pack.label(row) as usize;
        counts[label] += 1;
        if pack.predicted(row) == label {
            correct[label] += 1;
        }
    }
    let flagged = (0..k).filter(|&c| correct[c] < 2).collect();
    Ok(PackDiagnostics {
        counts,
        correct,
        flagged,
    })
}
