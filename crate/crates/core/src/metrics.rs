//! Threshold-sweep evaluation: OSCR and ROC curves, areas, operating points
//! and per-class fairness.
//!
//! A sample is accepted at threshold `θ` when its score is `>= θ`. Curves are
//! exact staircases over the distinct observed scores, bracketed by `-inf`
//! (everything accepted) and `+inf` (nothing accepted) sentinels.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::featurepack::FeaturePack;
use crate::scoring::ScoredSet;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("known set is empty")]
    EmptyKnown,
    #[error("unknown set is empty")]
    EmptyUnknown,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("scored set was not produced from this pack (fingerprint {scored:#x} vs {pack:#x})")]
    SourceMismatch { scored: u64, pack: u64 },
    #[error("known pack contains an unknown label at row {0}")]
    UnknownLabel(usize),
}

/// Scores of known samples together with their predictions and true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownScores {
    n_classes: usize,
    scores: Vec<f64>,
    predicted: Vec<usize>,
    labels: Vec<usize>,
}

impl KnownScores {
    /// Pairs a scored set with the labels of the pack it was computed on.
    pub fn new(scored: &ScoredSet, pack: &FeaturePack) -> Result<Self, MetricsError> {
        if scored.len() != pack.n_samples() {
            return Err(MetricsError::Shape(format!(
                "{} scores for a pack of {} samples",
                scored.len(),
                pack.n_samples()
            )));
        }
        let fp = pack.fingerprint();
        if scored.source != fp {
            return Err(MetricsError::SourceMismatch {
                scored: scored.source,
                pack: fp,
            });
        }
        let labels = (0..pack.n_samples())
            .map(|r| pack.known_label(r).ok_or(MetricsError::UnknownLabel(r)))
            .collect::<Result<_, _>>()?;
        Self::from_parts(
            pack.n_classes(),
            scored.scores.clone(),
            scored.predicted.clone(),
            labels,
        )
    }

    pub fn from_parts(
        n_classes: usize,
        scores: Vec<f64>,
        predicted: Vec<usize>,
        labels: Vec<usize>,
    ) -> Result<Self, MetricsError> {
        if scores.len() != predicted.len() || scores.len() != labels.len() {
            return Err(MetricsError::Shape(
                "scores, predictions and labels differ in length".into(),
            ));
        }
        if labels.iter().any(|&l| l >= n_classes) {
            return Err(MetricsError::Shape(format!("label outside [0, {n_classes})")));
        }
        Ok(Self {
            n_classes,
            scores,
            predicted,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn predicted(&self) -> &[usize] {
        &self.predicted
    }

    pub fn is_correct(&self, i: usize) -> bool {
        self.predicted[i] == self.labels[i]
    }

    /// Closed-set accuracy.
    pub fn accuracy(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (0..self.len()).filter(|&i| self.is_correct(i)).count() as f64 / self.len() as f64
    }

    pub fn select(&self, rows: &[usize]) -> KnownScores {
        KnownScores {
            n_classes: self.n_classes,
            scores: rows.iter().map(|&r| self.scores[r]).collect(),
            predicted: rows.iter().map(|&r| self.predicted[r]).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    /// Only the samples whose true class is in `classes`.
    pub fn restrict_to_classes(&self, classes: &[usize]) -> KnownScores {
        let mut keep = vec![false; self.n_classes];
        for &c in classes {
            keep[c] = true;
        }
        let rows: Vec<usize> = (0..self.len()).filter(|&i| keep[self.labels[i]]).collect();
        self.select(&rows)
    }

    /// Replaces every score by `f(score)`.
    pub fn map_scores(&self, f: impl Fn(f64) -> f64) -> KnownScores {
        KnownScores {
            scores: self.scores.iter().map(|&s| f(s)).collect(),
            ..self.clone()
        }
    }

    fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    /// Correct classification rate against false positive rate.
    Oscr,
    /// True positive rate against false positive rate.
    Roc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub fpr: f64,
    /// CCR for OSCR curves, TPR for ROC curves.
    pub rate: f64,
}

/// Points ordered by increasing threshold (so FPR is non-increasing).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalCurve {
    pub kind: CurveKind,
    pub points: Vec<CurvePoint>,
}

impl EvalCurve {
    pub fn new(kind: CurveKind, points: Vec<CurvePoint>) -> Self {
        Self { kind, points }
    }

    /// CSV with header `threshold,fpr,ccr` or `threshold,fpr,tpr`.
    pub fn to_csv(&self) -> String {
        let col = match self.kind {
            CurveKind::Oscr => "ccr",
            CurveKind::Roc => "tpr",
        };
        let mut out = format!("threshold,fpr,{col}\n");
        for p in &self.points {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", p.threshold, p.fpr, p.rate).unwrap();
        }
        out
    }

    /// Rates at `θ`: (fpr, rate) of the last point whose threshold is `<= θ`.
    pub fn at_threshold(&self, theta: f64) -> Option<CurvePoint> {
        self.points.iter().rev().find(|p| p.threshold <= theta).copied()
    }
}

/// Sweeps all distinct thresholds. `known` holds `(score, counts_as_hit)`.
fn sweep(kind: CurveKind, known: &[(f64, bool)], unknown: &[f64]) -> Result<EvalCurve, MetricsError> {
    if known.is_empty() {
        return Err(MetricsError::EmptyKnown);
    }
    if unknown.is_empty() {
        return Err(MetricsError::EmptyUnknown);
    }
    let mut known: Vec<(f64, bool)> = known.to_vec();
    known.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut unknown = unknown.to_vec();
    unknown.sort_unstable_by(f64::total_cmp);

    let n_k = known.len() as f64;
    let n_u = unknown.len() as f64;
    let hits_total = known.iter().filter(|k| k.1).count();

    let mut points = Vec::with_capacity(known.len() + unknown.len() + 2);
    points.push(CurvePoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        rate: hits_total as f64 / n_k,
    });
    // counts of samples strictly below the current threshold
    let (mut ki, mut ui, mut hits_below) = (0usize, 0usize, 0usize);
    loop {
        let next = match (known.get(ki), unknown.get(ui)) {
            (Some(k), Some(&u)) => k.0.min(u),
            (Some(k), None) => k.0,
            (None, Some(&u)) => u,
            (None, None) => break,
        };
        points.push(CurvePoint {
            threshold: next,
            fpr: (unknown.len() - ui) as f64 / n_u,
            rate: (hits_total - hits_below) as f64 / n_k,
        });
        while ki < known.len() && known[ki].0 == next {
            hits_below += known[ki].1 as usize;
            ki += 1;
        }
        while ui < unknown.len() && unknown[ui] == next {
            ui += 1;
        }
    }
    points.push(CurvePoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        rate: 0.0,
    });
    Ok(EvalCurve { kind, points })
}

/// CCR and FPR at every distinct threshold.
pub fn oscr_curve(known: &KnownScores, unknown: &[f64]) -> Result<EvalCurve, MetricsError> {
    let pairs: Vec<(f64, bool)> = (0..known.len())
        .map(|i| (known.scores[i], known.is_correct(i)))
        .collect();
    sweep(CurveKind::Oscr, &pairs, unknown)
}

/// Binary known-vs-unknown ROC; correctness of the prediction is ignored.
pub fn roc_curve(known: &[f64], unknown: &[f64]) -> Result<EvalCurve, MetricsError> {
    let pairs: Vec<(f64, bool)> = known.iter().map(|&s| (s, true)).collect();
    sweep(CurveKind::Roc, &pairs, unknown)
}

/// Trapezoidal area over FPR in [0, 1].
pub fn area_under(curve: &EvalCurve) -> f64 {
    let mut pts: Vec<(f64, f64)> = curve.points.iter().rev().map(|p| (p.fpr, p.rate)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Smallest FPR among points whose rate reaches `level` (staircase semantics).
pub fn fpr_at_tpr(roc: &EvalCurve, level: f64) -> f64 {
    roc.points
        .iter()
        .filter(|p| p.rate >= level)
        .map(|p| p.fpr)
        .fold(1.0, f64::min)
}

/// Smallest FPR at which CCR reaches 95% of closed-set accuracy.
pub fn f_at_c95(oscr: &EvalCurve) -> f64 {
    let accuracy = oscr.points.iter().map(|p| p.rate).fold(0.0, f64::max);
    fpr_at_tpr(oscr, 0.95 * accuracy)
}

/// Smallest threshold `θ` with `FPR(θ) <= tau`.
///
/// For `tau >= 1` this is `-inf`; otherwise it sits one ulp above the
/// unknown score that would push the FPR past `tau`.
pub fn threshold_at_fpr(unknown: &[f64], tau: f64) -> Result<f64, MetricsError> {
    if unknown.is_empty() {
        return Err(MetricsError::EmptyUnknown);
    }
    let n = unknown.len();
    let allowed = (tau * n as f64 + 1e-9).floor().max(0.0) as usize;
    if allowed >= n {
        return Ok(f64::NEG_INFINITY);
    }
    let mut sorted = unknown.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(sorted[allowed].next_up())
}

/// OSCR operating points at the thresholds that realise each FPR in `grid`.
pub fn oscr_at_fprs(known: &KnownScores, unknown: &[f64], grid: &[f64]) -> Result<EvalCurve, MetricsError> {
    if known.is_empty() {
        return Err(MetricsError::EmptyKnown);
    }
    let n_k = known.len() as f64;
    let n_u = unknown.len() as f64;
    let mut points = Vec::with_capacity(grid.len());
    for &tau in grid {
        let theta = threshold_at_fpr(unknown, tau)?;
        let accepted_unknown = unknown.iter().filter(|&&u| u >= theta).count();
        let hits = (0..known.len())
            .filter(|&i| known.is_correct(i) && known.scores[i] >= theta)
            .count();
        points.push(CurvePoint {
            threshold: theta,
            fpr: accepted_unknown as f64 / n_u,
            rate: hits as f64 / n_k,
        });
    }
    points.sort_by(|a, b| a.threshold.total_cmp(&b.threshold));
    Ok(EvalCurve::new(CurveKind::Oscr, points))
}

/// Per-class CCR at a shared set of thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerClassTable {
    pub thresholds: Vec<f64>,
    pub counts: Vec<usize>,
    /// `rates[k][t]`: CCR of class `k` at `thresholds[t]`; `None` for classes
    /// without test samples.
    pub rates: Vec<Option<Vec<f64>>>,
}

impl PerClassTable {
    /// Classes that had no test samples and are left out of aggregation.
    pub fn empty_classes(&self) -> Vec<usize> {
        (0..self.rates.len()).filter(|&k| self.rates[k].is_none()).collect()
    }

    /// True when every populated class has the same number of samples.
    pub fn is_balanced(&self) -> bool {
        let mut populated = self.counts.iter().filter(|&&c| c > 0);
        match populated.next() {
            Some(first) => populated.all(|c| c == first),
            None => true,
        }
    }
}

pub fn per_class_ccr(known: &KnownScores, thresholds: &[f64]) -> PerClassTable {
    let counts = known.class_counts();
    let mut hits: Vec<Vec<f64>> = vec![Vec::new(); known.n_classes];
    for i in 0..known.len() {
        if known.is_correct(i) {
            hits[known.labels[i]].push(known.scores[i]);
        }
    }
    let rates = hits
        .into_iter()
        .enumerate()
        .map(|(k, mut scores)| {
            if counts[k] == 0 {
                return None;
            }
            scores.sort_unstable_by(f64::total_cmp);
            let n = counts[k] as f64;
            Some(
                thresholds
                    .iter()
                    .map(|&theta| (scores.len() - scores.partition_point(|&s| s < theta)) as f64 / n)
                    .collect(),
            )
        })
        .collect();
    PerClassTable {
        thresholds: thresholds.to_vec(),
        counts,
        rates,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessPoint {
    pub fpr: f64,
    pub threshold: f64,
    pub mean: f64,
    /// Unbiased variance across populated classes; needs at least two.
    pub variance: Option<f64>,
    /// Coefficient of variation; undefined when the mean CCR is zero.
    pub cov: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessProfile {
    pub points: Vec<FairnessPoint>,
    pub table: PerClassTable,
    pub balanced: bool,
    pub warnings: Vec<String>,
}

impl FairnessProfile {
    /// CSV with header `fpr,mu,var,cov`; undefined entries are written as `nan`.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x:.16e}"));
        let mut out = String::from("fpr,mu,var,cov\n");
        for p in &self.points {
            writeln!(out, "{:.16e},{:.16e},{},{}", p.fpr, p.mean, opt(p.variance), opt(p.cov)).unwrap();
        }
        out
    }

    pub fn at_fpr(&self, fpr: f64) -> Option<&FairnessPoint> {
        self.points.iter().find(|p| p.fpr == fpr)
    }
}

/// Mean, variance and coefficient of variation of per-class CCR at each
/// threshold of `table`; `grid[t]` labels `table.thresholds[t]`.
pub fn fairness_profile(table: &PerClassTable, grid: &[f64]) -> Result<FairnessProfile, MetricsError> {
    if grid.len() != table.thresholds.len() {
        return Err(MetricsError::Shape(format!(
            "{} grid points for {} thresholds",
            grid.len(),
            table.thresholds.len()
        )));
    }
    let populated: Vec<&Vec<f64>> = table.rates.iter().flatten().collect();
    if populated.is_empty() {
        return Err(MetricsError::EmptyKnown);
    }
    let k = populated.len() as f64;
    let points = grid
        .iter()
        .enumerate()
        .map(|(t, &fpr)| {
            let mean = populated.iter().map(|r| r[t]).sum::<f64>() / k;
            let variance = (populated.len() >= 2)
                .then(|| populated.iter().map(|r| (r[t] - mean).powi(2)).sum::<f64>() / (k - 1.0));
            let cov = variance.filter(|_| mean > 0.0).map(|v| v.sqrt() / mean);
            FairnessPoint {
                fpr,
                threshold: table.thresholds[t],
                mean,
                variance,
                cov,
            }
        })
        .collect();
    let balanced = table.is_balanced();
    let mut warnings = Vec::new();
    if !balanced {
        warnings.push("per-class sample counts differ; mean CCR at FPR=1 is not closed-set accuracy".into());
    }
    let empty = table.empty_classes();
    if !empty.is_empty() {
        warnings.push(format!("classes without test samples excluded: {empty:?}"));
    }
    Ok(FairnessProfile {
        points,
        table: table.clone(),
        balanced,
        warnings,
    })
}

/// Inverts the unknown FPR at each grid point, then profiles per-class CCR there.
pub fn fairness_at_fprs(known: &KnownScores, unknown: &[f64], grid: &[f64]) -> Result<FairnessProfile, MetricsError> {
    if known.is_empty() {
        return Err(MetricsError::EmptyKnown);
    }
    let thresholds = grid
        .iter()
        .map(|&tau| threshold_at_fpr(unknown, tau))
        .collect::<Result<Vec<_>, _>>()?;
    fairness_profile(&per_class_ccr(known, &thresholds), grid)
}

/// Best and worst classes by closed-set per-class accuracy, `ceil(fraction * K)` each.
///
/// Ranking is by accuracy descending, ties by class index ascending; the
/// bottom list is ordered worst first. Classes without samples are skipped.
pub fn top_bottom_split(known: &KnownScores, fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let table = per_class_ccr(known, &[f64::NEG_INFINITY]);
    let mut ranked: Vec<(usize, f64)> = table
        .rates
        .iter()
        .enumerate()
        .filter_map(|(k, r)| r.as_ref().map(|r| (k, r[0])))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let n = ((fraction * ranked.len() as f64).ceil() as usize).min(ranked.len());
    let top = ranked[..n].iter().map(|r| r.0).collect();
    let bottom = ranked[ranked.len() - n..].iter().rev().map(|r| r.0).collect();
    (top, bottom)
}

/// OSCR restricted to the known samples of `classes`, against all unknowns.
pub fn subset_oscr(known: &KnownScores, unknown: &[f64], classes: &[usize]) -> Result<EvalCurve, MetricsError> {
    oscr_curve(&known.restrict_to_classes(classes), unknown)
}

/// FPR grid for fairness and log-axis plots: the fixed anchors plus ten
/// log-spaced points per decade down to 1e-3, in descending order.
pub fn default_fpr_grid() -> Vec<f64> {
    let anchors = [1.0, 0.5, 0.2, 0.1, 0.01, 0.001];
    let mut grid = anchors.to_vec();
    grid.extend(
        log_fpr_grid(-3, 10)
            .into_iter()
            .filter(|x| anchors.iter().all(|a| (x - a).abs() > 1e-9 * a)),
    );
    grid.sort_by(|a, b| b.total_cmp(a));
    grid
}

/// `per_decade` log-spaced points per decade from `10^min_exponent` to 1.
pub fn log_fpr_grid(min_exponent: i32, per_decade: usize) -> Vec<f64> {
    let steps = (-min_exponent) as usize * per_decade;
    (0..=steps)
        .map(|i| 10f64.powf(min_exponent as f64 + i as f64 / per_decade as f64))
        .collect()
}

/// A scalar metric selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Auoscr,
    Auroc,
    Fpr95,
    FAtC95,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Auoscr => "auoscr",
            Metric::Auroc => "auroc",
            Metric::Fpr95 => "fpr95",
            Metric::FAtC95 => "f_at_c95",
        }
    }

    pub fn compute(self, known: &KnownScores, unknown: &[f64]) -> Result<f64, MetricsError> {
        Ok(match self {
            Metric::Auoscr => area_under(&oscr_curve(known, unknown)?),
            Metric::Auroc => area_under(&roc_curve(known.scores(), unknown)?),
            Metric::Fpr95 => fpr_at_tpr(&roc_curve(known.scores(), unknown)?, 0.95),
            Metric::FAtC95 => f_at_c95(&oscr_curve(known, unknown)?),
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "auoscr" => Ok(Metric::Auoscr),
            "auroc" => Ok(Metric::Auroc),
            "fpr95" => Ok(Metric::Fpr95),
            "f_at_c95" | "f@c95" | "fatc95" => Ok(Metric::FAtC95),
            _ => Err(format!(
                "unknown metric `{s}` (expected auoscr, auroc, fpr95, f_at_c95)"
            )),
        }
    }
}

/// Headline numbers for one method on one known/unknown split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalSummary {
    pub auoscr: f64,
    pub auroc: f64,
    pub fpr95: f64,
    pub f_at_c95: f64,
    pub accuracy: f64,
}

impl EvalSummary {
    pub fn compute(known: &KnownScores, unknown: &[f64]) -> Result<Self, MetricsError> {
        let oscr = oscr_curve(known, unknown)?;
        let roc = roc_curve(known.scores(), unknown)?;
        Ok(Self::from_curves(&oscr, &roc, known.accuracy()))
    }

    pub fn from_curves(oscr: &EvalCurve, roc: &EvalCurve, accuracy: f64) -> Self {
        Self {
            auoscr: area_under(oscr),
            auroc: area_under(roc),
            fpr95: fpr_at_tpr(roc, 0.95),
            f_at_c95: f_at_c95(oscr),
            accuracy,
        }
    }
}
