//! Normality auditing and method-comparison significance tests.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::featurepack::{FeaturePack, PackError};
use crate::metrics::{KnownScores, Metric, MetricsError};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("sample size {0} outside the supported range [3, 5000]")]
    SampleSize(usize),
    #[error("zero sample variance (all values identical)")]
    ZeroVariance,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("paired t-test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("zero-variance differences: the two samples are indistinguishable")]
    ZeroVarianceDifferences,
    #[error("every difference equals {0}: the t statistic is unbounded")]
    ConstantDifferences(f64),
    #[error("requested {requested} {what} per resample but only {available} are available")]
    ResampleTooLarge {
        what: &'static str,
        requested: usize,
        available: usize,
    },
    #[error("methods were scored on different samples: {0}")]
    Unpaired(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Pack(#[from] PackError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapiroWilk {
    pub w: f64,
    pub p: f64,
}

// Royston's polynomial approximations
const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Shapiro-Wilk W and its p-value, via Royston's approximation (valid for 3 <= n <= 5000).
pub fn shapiro_wilk(sample: &[f64]) -> Result<ShapiroWilk, StatsError> {
    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(StatsError::SampleSize(n));
    }
    if let Some(i) = sample.iter().position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    let mut x = sample.to_vec();
    x.sort_unstable_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }

    let a = coefficients(n);
    // full antisymmetric coefficient vector, position i of the sorted sample
    let coef = |i: usize| -> f64 {
        let j = n - 1 - i;
        match i.cmp(&j) {
            std::cmp::Ordering::Less => -a[i],
            std::cmp::Ordering::Greater => a[j],
            std::cmp::Ordering::Equal => 0.0,
        }
    };
    let nf = n as f64;
    let sa = (0..n).map(coef).sum::<f64>() / nf;
    let sx = x.iter().map(|v| v / range).sum::<f64>() / nf;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (i, xi) in x.iter().enumerate() {
        let asa = coef(i) - sa;
        let xsx = xi / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    let ssassx = (ssa * ssx).sqrt();
    // 1 - W, computed directly to keep precision near W = 1
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = 1.0 - w1;

    let p = if n == 3 {
        let six_over_pi = 6.0 / std::f64::consts::PI;
        let pi_over_3 = std::f64::consts::FRAC_PI_3;
        (six_over_pi * (w.sqrt().asin() - pi_over_3)).clamp(0.0, 1.0)
    } else {
        let mut y = w1.ln();
        let (mean, sd) = if n <= 11 {
            let gamma = poly(&G, nf);
            if y >= gamma {
                return Ok(ShapiroWilk { w, p: 1e-99 });
            }
            y = -(gamma - y).ln();
            (poly(&C3, nf), poly(&C4, nf).exp())
        } else {
            let ln_n = nf.ln();
            (poly(&C5, ln_n), poly(&C6, ln_n).exp())
        };
        std_normal().sf((y - mean) / sd)
    };
    Ok(ShapiroWilk { w, p })
}

/// The `n / 2` positive Shapiro-Wilk coefficients, largest first.
fn coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let normal = std_normal();
    let an25 = n as f64 + 0.25;
    let m: Vec<f64> = (1..=half)
        .map(|i| normal.inverse_cdf((i as f64 - 0.375) / an25))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;

    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    for i in first..half {
        a[i] = -m[i] / fac;
    }
    a
}

/// Holm's step-down procedure; flags are returned in input order.
pub fn holm_stepdown(pvals: &[f64], alpha: f64) -> Vec<bool> {
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]).then(a.cmp(&b)));
    let mut rejected = vec![false; m];
    for (rank, &i) in order.iter().enumerate() {
        if pvals[i] <= alpha / (m - rank) as f64 {
            rejected[i] = true;
        } else {
            break;
        }
    }
    rejected
}

/// One (class, dimension) normality test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub class: usize,
    pub dim: usize,
    /// `None` when the test was not performed.
    pub w: Option<f64>,
    pub p: Option<f64>,
    pub rejected: bool,
    /// Constant feature or fewer than three correctly classified samples.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityAudit {
    pub n_classes: usize,
    pub dim: usize,
    pub alpha: f64,
    /// Row-major over (class, dim).
    pub entries: Vec<AuditEntry>,
    pub tests_performed: usize,
    pub rejections: usize,
}

impl NormalityAudit {
    /// Rejections over performed tests (0 when nothing was tested).
    pub fn rejection_fraction(&self) -> f64 {
        if self.tests_performed == 0 {
            0.0
        } else {
            self.rejections as f64 / self.tests_performed as f64
        }
    }

    pub fn degenerate_count(&self) -> usize {
        self.entries.iter().filter(|e| e.degenerate).count()
    }

    pub fn entry(&self, class: usize, dim: usize) -> &AuditEntry {
        &self.entries[class * self.dim + dim]
    }

    /// CSV with header `class,dim,W,p,rejected,degenerate`.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x:.16e}"));
        let mut out = String::from("class,dim,W,p,rejected,degenerate\n");
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                e.class,
                e.dim,
                opt(e.w),
                opt(e.p),
                e.rejected as u8,
                e.degenerate as u8
            )
            .unwrap();
        }
        out
    }
}

/// Shapiro-Wilk on every (class, dim) of the correctly classified training
/// samples, with Holm family-wise control over all performed tests.
pub fn normality_audit(train: &FeaturePack, alpha: f64) -> Result<NormalityAudit, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::Parameter(format!("alpha {alpha} not in (0, 1)")));
    }
    train.require_known()?;
    let (k, d) = (train.n_classes(), train.dim());
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for row in 0..train.n_samples() {
        if train.is_correct(row) {
            members[train.label(row) as usize].push(row);
        }
    }
    if let Some(rows) = members.iter().find(|r| r.len() > 5000) {
        return Err(StatsError::SampleSize(rows.len()));
    }

    let results: Vec<Option<ShapiroWilk>> = (0..k * d)
        .into_par_iter()
        .map(|idx| {
            let (class, dim) = (idx / d, idx % d);
            let rows = &members[class];
            if rows.len() < 3 {
                return None;
            }
            let values: Vec<f64> = rows.iter().map(|&r| train.embedding(r)[dim] as f64).collect();
            shapiro_wilk(&values).ok()
        })
        .collect();

    let performed: Vec<usize> = (0..k * d).filter(|&i| results[i].is_some()).collect();
    let pvals: Vec<f64> = performed.iter().map(|&i| results[i].unwrap().p).collect();
    let flags = holm_stepdown(&pvals, alpha);
    let mut rejected = vec![false; k * d];
    for (&i, &f) in performed.iter().zip(&flags) {
        rejected[i] = f;
    }
    let entries = results
        .iter()
        .enumerate()
        .map(|(idx, r)| AuditEntry {
            class: idx / d,
            dim: idx % d,
            w: r.map(|r| r.w),
            p: r.map(|r| r.p),
            rejected: rejected[idx],
            degenerate: r.is_none(),
        })
        .collect();
    Ok(NormalityAudit {
        n_classes: k,
        dim: d,
        alpha,
        entries,
        tests_performed: performed.len(),
        rejections: flags.iter().filter(|&&f| f).count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs(n));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if let Some(i) = d.iter().position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    if d.iter().all(|&v| v == d[0]) {
        return Err(if d[0] == 0.0 {
            StatsError::ZeroVarianceDifferences
        } else {
            StatsError::ConstantDifferences(d[0])
        });
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let t = mean / (var.sqrt() / nf.sqrt());
    let df = n - 1;
    Ok(TTest {
        t,
        p: student_t_two_sided(t, df as f64),
        df,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// One method's scores on a known and an unknown set.
#[derive(Debug, Clone)]
pub struct MethodEval {
    pub name: String,
    pub known: KnownScores,
    pub unknown: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResampleConfig {
    pub resamples: usize,
    pub n_known: usize,
    pub n_unknown: usize,
    pub seed: u64,
    /// Number of simultaneous comparisons for the Bonferroni factor.
    pub bonferroni_m: usize,
}

impl ResampleConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            resamples: 10,
            n_known: 1000,
            n_unknown: 1000,
            seed,
            bonferroni_m: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceReport {
    pub metric: Metric,
    pub config: ResampleConfig,
    pub method_a: MethodSummary,
    pub method_b: MethodSummary,
    pub t: f64,
    pub p_value: f64,
    pub corrected_p: f64,
}

/// Known and unknown row indices of resample `r`, drawn without replacement.
///
/// Each resample gets its own ChaCha stream of the one seed, so resamples
/// can be drawn in any order or in parallel and still agree.
pub fn resample_indices(cfg: &ResampleConfig, r: usize, n_known: usize, n_unknown: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(r as u64);
    let known = sample(&mut rng, n_known, cfg.n_known).into_vec();
    let unknown = sample(&mut rng, n_unknown, cfg.n_unknown).into_vec();
    (known, unknown)
}

/// Paired comparison of two methods over seeded resamples; both methods see
/// the same rows within each resample.
pub fn bootstrap_compare(
    a: &MethodEval,
    b: &MethodEval,
    metric: Metric,
    cfg: ResampleConfig,
) -> Result<SignificanceReport, StatsError> {
    if a.known.len() != b.known.len() || a.known.labels() != b.known.labels() {
        return Err(StatsError::Unpaired("known sets differ".into()));
    }
    if a.unknown.len() != b.unknown.len() {
        return Err(StatsError::Unpaired("unknown sets differ in size".into()));
    }
    if cfg.resamples < 2 {
        return Err(StatsError::Parameter("at least 2 resamples are required".into()));
    }
    if cfg.bonferroni_m == 0 {
        return Err(StatsError::Parameter("bonferroni_m must be at least 1".into()));
    }
    for (what, requested, available) in [
        ("knowns", cfg.n_known, a.known.len()),
        ("unknowns", cfg.n_unknown, a.unknown.len()),
    ] {
        if requested > available || requested == 0 {
            return Err(StatsError::ResampleTooLarge {
                what,
                requested,
                available,
            });
        }
    }

    let pairs: Vec<(f64, f64)> = (0..cfg.resamples)
        .into_par_iter()
        .map(|r| {
            let (ki, ui) = resample_indices(&cfg, r, a.known.len(), a.unknown.len());
            let eval = |m: &MethodEval| {
                let unknown: Vec<f64> = ui.iter().map(|&i| m.unknown[i]).collect();
                metric.compute(&m.known.select(&ki), &unknown)
            };
            Ok((eval(a)?, eval(b)?))
        })
        .collect::<Result<_, StatsError>>()?;
    let (va, vb): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let test = paired_t_test(&va, &vb)?;
    Ok(SignificanceReport {
        metric,
        config: cfg,
        method_a: summarize(&a.name, va),
        method_b: summarize(&b.name, vb),
        t: test.t,
        p_value: test.p,
        corrected_p: (test.p * cfg.bonferroni_m as f64).min(1.0),
    })
}

fn summarize(name: &str, values: Vec<f64>) -> MethodSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    MethodSummary {
        name: name.to_string(),
        mean,
        std,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holm_examples() {
        assert_eq!(holm_stepdown(&[0.04], 0.05), vec![true]);
        assert_eq!(holm_stepdown(&[0.01, 0.04], 0.05), vec![true, true]);
        assert_eq!(holm_stepdown(&[0.03, 0.04], 0.05), vec![false, false]);
        assert_eq!(holm_stepdown(&[0.04, 0.01], 0.05), vec![true, true]);
        assert!(holm_stepdown(&[], 0.05).is_empty());
    }

    #[test]
    fn ideal_normal_order_statistics_give_w_near_one() {
        let n = 10;
        let normal = std_normal();
        let x: Vec<f64> = (1..=n)
            .map(|i| 3.0 * normal.inverse_cdf((i as f64 - 0.375) / (n as f64 + 0.25)) + 7.0)
            .collect();
        let r = shapiro_wilk(&x).unwrap();
        // scipy.stats.shapiro on the same sample: W = 0.99650487, p = 0.99996
        assert!((r.w - 0.996504868).abs() < 1e-6, "{}", r.w);
        assert!(r.p > 0.999);
    }

    #[test]
    fn shapiro_input_errors() {
        assert!(matches!(shapiro_wilk(&[1.0, 2.0]), Err(StatsError::SampleSize(2))));
        assert!(matches!(
            shapiro_wilk(&vec![0.5; 5001]),
            Err(StatsError::SampleSize(5001))
        ));
        assert!(matches!(shapiro_wilk(&[2.0, 2.0, 2.0]), Err(StatsError::ZeroVariance)));
        assert!(matches!(
            shapiro_wilk(&[1.0, f64::NAN, 2.0]),
            Err(StatsError::NonFinite(1))
        ));
    }

    #[test]
    fn paired_t_examples() {
        assert!(matches!(
            paired_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::ZeroVarianceDifferences)
        ));
        let r = paired_t_test(&[1.0, -1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
        assert!(matches!(paired_t_test(&[1.0], &[0.0]), Err(StatsError::TooFewPairs(1))));
        assert!(matches!(
            paired_t_test(&[1.5, 2.5], &[1.0, 2.0]),
            Err(StatsError::ConstantDifferences(d)) if d == 0.5
        ));
        assert!(paired_t_test(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn t_tail_matches_known_quantiles() {
        // two-sided 5% critical values
        for (df, crit) in [(1.0, 12.706204736), (5.0, 2.570581836), (30.0, 2.042272456)] {
            assert!((student_t_two_sided(crit, df) - 0.05).abs() < 1e-8);
        }
    }

    #[test]
    fn degenerate_audit() {
        let pack = FeaturePack::new(1, 1, vec![2.0; 4], vec![1.0; 4], vec![0; 4]).unwrap();
        let audit = normality_audit(&pack, 0.05).unwrap();
        assert_eq!(audit.tests_performed, 0);
        assert_eq!(audit.degenerate_count(), 1);
        assert_eq!(audit.rejection_fraction(), 0.0);
        assert!(audit.to_csv().ends_with("0,0,nan,nan,0,1\n"));
    }
}
