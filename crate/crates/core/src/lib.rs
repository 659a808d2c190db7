//! Open-set recognition with per-class Gaussian feature models.
//!
//! The crate fits, for every known class, a diagonal Gaussian over the
//! penultimate-layer embeddings of correctly classified training samples
//! ([`gaussbank`]), and scores a test sample by dividing its predicted-class
//! logit by the summed per-dimension z-score deviation from that class
//! ([`scoring`]). Baselines (MSP, MaxLogit, Energy, NNGuide) share the same
//! interface.
//!
//! Evaluation is threshold-sweep based ([`metrics`]): OSCR and ROC curves,
//! their areas, FPR95, F@C95, and per-class fairness statistics. The
//! [`stats`] module audits the Gaussian assumption with Shapiro-Wilk plus
//! Holm's step-down procedure and compares methods with paired t-tests over
//! resamples.
//!
//! Everything operates on [`featurepack::FeaturePack`]s, a flat little-endian
//! container of embeddings, logits and labels. [`synth`] generates seeded toy
//! packs so every capability can be exercised without a trained network.
//! The `ghost` binary ([`cli`]) wires these into reproducible runs.

pub mod cli;
pub mod featurepack;
pub mod gaussbank;
mod io;
pub mod metrics;
pub mod scoring;
pub mod stats;
pub mod synth;

pub use featurepack::{FeaturePack, PackDiagnostics, PackError, UNKNOWN_LABEL};
pub use gaussbank::{BankError, GaussianBank, SIGMA_FLOOR};
pub use metrics::{CurveKind, CurvePoint, EvalCurve, EvalSummary, FairnessProfile, KnownScores};
pub use scoring::{Method, ReferenceBank, ScoredSet, Scorer, ScoringError};
pub use stats::{NormalityAudit, SignificanceReport, StatsError};
pub use synth::{SynthSpec, SyntheticPacks, UnknownMode};
