//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use ghost_osr::metrics::{CurveKind, CurvePoint, EvalCurve};
use ghost_osr::{FeaturePack, KnownScores};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Scores on a coarse grid (so ties are common) or continuous.
pub fn random_scores(rng: &mut ChaCha8Rng, n: usize, shift: f64, coarse: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-3.0..3.0) + shift;
            if coarse {
                (x * 8.0).round() / 8.0
            } else {
                x
            }
        })
        .collect()
}

/// Random known set: labels balanced or not, ~80% correct predictions.
pub fn random_known(rng: &mut ChaCha8Rng, n: usize, k: usize, coarse: bool, balanced: bool) -> KnownScores {
    let scores = random_scores(rng, n, 0.5, coarse);
    let labels: Vec<usize> = (0..n)
        .map(|i| if balanced { i % k } else { rng.random_range(0..k) })
        .collect();
    let predicted = labels
        .iter()
        .map(|&l| {
            if rng.random_bool(0.8) {
                l
            } else {
                rng.random_range(0..k)
            }
        })
        .collect();
    KnownScores::from_parts(k, scores, predicted, labels).unwrap()
}

/// `(#{u < k} + 0.5 #{u = k}) / (n_u n_k)` by enumerating every pair.
pub fn pairwise_auroc(known: &[f64], unknown: &[f64]) -> f64 {
    let (mut less, mut ties) = (0u64, 0u64);
    for &k in known {
        for &u in unknown {
            if u < k {
                less += 1;
            } else if u == k {
                ties += 1;
            }
        }
    }
    (less as f64 + 0.5 * ties as f64) / (known.len() as f64 * unknown.len() as f64)
}

/// OSCR recomputed from its definition at -inf, every distinct score and +inf.
pub fn brute_force_oscr(known: &KnownScores, unknown: &[f64]) -> EvalCurve {
    let mut thresholds: Vec<f64> = known.scores().iter().chain(unknown).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.insert(0, f64::NEG_INFINITY);
    thresholds.push(f64::INFINITY);
    let n_k = known.len() as f64;
    let n_u = unknown.len() as f64;
    let points = thresholds
        .into_iter()
        .map(|theta| {
            let hits = (0..known.len())
                .filter(|&i| known.predicted()[i] == known.labels()[i] && known.scores()[i] >= theta)
                .count();
            let fp = unknown.iter().filter(|&&u| u >= theta).count();
            CurvePoint {
                threshold: theta,
                fpr: fp as f64 / n_u,
                rate: hits as f64 / n_k,
            }
        })
        .collect();
    EvalCurve::new(CurveKind::Oscr, points)
}

/// Random pack with Gaussian embeddings; labels in `[0, k)`, logits favour
/// the label with probability `p_correct`.
pub fn random_pack(rng: &mut ChaCha8Rng, n: usize, k: usize, d: usize, p_correct: f64) -> FeaturePack {
    let mut emb = Vec::with_capacity(n * d);
    let mut logits = Vec::with_capacity(n * k);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % k;
        emb.extend((0..d).map(|j| (label * 3 + j) as f32 + rng.random_range(-1.0f32..1.0)));
        let target = if rng.random_bool(p_correct) {
            label
        } else {
            rng.random_range(0..k)
        };
        logits.extend((0..k).map(|c| {
            if c == target {
                2.0
            } else {
                rng.random_range(-1.0f32..1.0)
            }
        }));
        labels.push(label as i32);
    }
    FeaturePack::new(k, d, emb, logits, labels).unwrap()
}

/// Mean and unbiased variance with the textbook two-pass formula.
pub fn two_pass(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
