//! Seeded toy feature packs drawn from per-class Gaussians.
//!
//! Known samples are `mu_k + sigma_k * eps`. Logits are negative scaled
//! z-scores of the embedding against every true class mean, normalised by a
//! single global scale (not per class), plus Gaussian noise:
//!
//! ```text
//! z_j = logit_scale * (logit_offset - mean_d |phi_d - mu_jd| / sigma_ref) + logit_noise * xi_j
//! ```
//!
//! so the argmax is usually the true class. Randomness is split into one
//! ChaCha stream per component (class parameters, train, test, unknowns).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurepack::{FeaturePack, PackError, UNKNOWN_LABEL};
use crate::gaussbank::SIGMA_FLOOR;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Pack(#[from] PackError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownMode {
    /// Around a random known class mean, displaced by `unknown_shift` sigmas
    /// along a random sign pattern.
    ShiftedMean,
    /// Around a random known class mean with Student-t (2 dof) noise.
    HeavyTail,
    /// Uniform over the bounding box of the known class means, padded by 3 sigma.
    Uniform,
}

impl fmt::Display for UnknownMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnknownMode::ShiftedMean => "shifted-mean",
            UnknownMode::HeavyTail => "heavy-tail",
            UnknownMode::Uniform => "uniform",
        })
    }
}

impl FromStr for UnknownMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shifted-mean" => Ok(UnknownMode::ShiftedMean),
            "heavy-tail" => Ok(UnknownMode::HeavyTail),
            "uniform" => Ok(UnknownMode::Uniform),
            _ => Err(format!(
                "unknown mode `{s}` (expected shifted-mean, heavy-tail, uniform)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub n_unknown: usize,
    /// Standard deviation of the class means around the origin.
    pub mean_spread: f64,
    /// Minimum L2 distance between class means, in units of the upper sigma.
    pub min_separation: f64,
    /// Per-class, per-dimension sigmas are uniform in this range.
    pub sigma_range: (f64, f64),
    pub unknown_mode: UnknownMode,
    pub unknown_shift: f64,
    pub logit_scale: f64,
    pub logit_offset: f64,
    pub logit_noise: f64,
    /// The last `noisy_classes` classes have their sigmas multiplied by `noisy_factor`.
    pub noisy_classes: usize,
    pub noisy_factor: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(n_classes: usize, dim: usize, seed: u64) -> Self {
        Self {
            n_classes,
            dim,
            train_per_class: 200,
            test_per_class: 50,
            n_unknown: 50 * n_classes,
            mean_spread: 2.0,
            min_separation: 3.0,
            sigma_range: (0.5, 1.5),
            unknown_mode: UnknownMode::ShiftedMean,
            unknown_shift: 1.5,
            logit_scale: 4.0,
            logit_offset: 3.0,
            logit_noise: 1.0,
            noisy_classes: 0,
            noisy_factor: 2.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.n_classes == 0 || self.dim == 0 {
            return bad("n_classes and dim must be positive".into());
        }
        let (lo, hi) = self.sigma_range;
        if !(lo > SIGMA_FLOOR && hi >= lo && hi.is_finite()) {
            return bad(format!(
                "sigma range ({lo}, {hi}) must lie above {SIGMA_FLOOR} with lo <= hi"
            ));
        }
        if self.noisy_classes > self.n_classes {
            return bad(format!(
                "{} noisy classes out of {}",
                self.noisy_classes, self.n_classes
            ));
        }
        // written so that NaN fails too
        let positive = |x: f64| x > 0.0;
        let non_negative = |x: f64| x >= 0.0;
        if !positive(self.noisy_factor)
            || !non_negative(self.mean_spread)
            || !non_negative(self.min_separation)
            || !non_negative(self.logit_noise)
        {
            return bad("noisy_factor must be positive; spread, separation and noise non-negative".into());
        }
        Ok(())
    }
}

/// Class parameters plus the three generated packs.
#[derive(Debug, Clone)]
pub struct SyntheticPacks {
    pub means: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub train: FeaturePack,
    pub known_test: FeaturePack,
    pub unknown_test: FeaturePack,
}

struct Generator<'a> {
    spec: &'a SynthSpec,
    means: Vec<f64>,
    sigmas: Vec<f64>,
    sigma_ref: f64,
}

impl Generator<'_> {
    fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.spec.dim..(k + 1) * self.spec.dim]
    }

    fn sigma(&self, k: usize) -> &[f64] {
        &self.sigmas[k * self.spec.dim..(k + 1) * self.spec.dim]
    }

    fn logits(&self, phi: &[f64], rng: &mut ChaCha8Rng, out: &mut Vec<f32>) {
        let s = self.spec;
        for j in 0..s.n_classes {
            let dev =
                phi.iter().zip(self.mean(j)).map(|(x, m)| (x - m).abs()).sum::<f64>() / (s.dim as f64 * self.sigma_ref);
            let noise: f64 = rng.sample(StandardNormal);
            out.push((s.logit_scale * (s.logit_offset - dev) + s.logit_noise * noise) as f32);
        }
    }

    fn knowns(&self, per_class: usize, rng: &mut ChaCha8Rng) -> Result<FeaturePack, PackError> {
        let s = self.spec;
        let n = per_class * s.n_classes;
        let mut emb = Vec::with_capacity(n * s.dim);
        let mut logits = Vec::with_capacity(n * s.n_classes);
        let mut labels = Vec::with_capacity(n);
        let mut phi = vec![0.0; s.dim];
        for k in 0..s.n_classes {
            for _ in 0..per_class {
                for ((p, m), sd) in phi.iter_mut().zip(self.mean(k)).zip(self.sigma(k)) {
                    let e: f64 = rng.sample(StandardNormal);
                    *p = m + sd * e;
                }
                // logits see the stored (f32) embedding
                emb.extend(phi.iter().map(|&v| v as f32));
                phi.iter_mut().for_each(|v| *v = *v as f32 as f64);
                self.logits(&phi, rng, &mut logits);
                labels.push(k as i32);
            }
        }
        FeaturePack::new(s.n_classes, s.dim, emb, logits, labels)
    }

    fn unknowns(&self, rng: &mut ChaCha8Rng) -> Result<FeaturePack, PackError> {
        let s = self.spec;
        let n = s.n_unknown;
        let mut emb = Vec::with_capacity(n * s.dim);
        let mut logits = Vec::with_capacity(n * s.n_classes);
        let mut phi = vec![0.0; s.dim];
        let t2 = StudentT::new(2.0).expect("valid dof");
        let (lo_box, hi_box): (Vec<f64>, Vec<f64>) = (0..s.dim)
            .map(|d| {
                let col = (0..s.n_classes).map(|k| self.mean(k)[d]);
                let pad = 3.0 * s.sigma_range.1;
                (
                    col.clone().fold(f64::INFINITY, f64::min) - pad,
                    col.fold(f64::NEG_INFINITY, f64::max) + pad,
                )
            })
            .unzip();
        for _ in 0..n {
            match s.unknown_mode {
                UnknownMode::ShiftedMean => {
                    let k = rng.random_range(0..s.n_classes);
                    for ((p, m), sd) in phi.iter_mut().zip(self.mean(k)).zip(self.sigma(k)) {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        let e: f64 = rng.sample(StandardNormal);
                        *p = m + sd * (s.unknown_shift * sign + e);
                    }
                }
                UnknownMode::HeavyTail => {
                    let k = rng.random_range(0..s.n_classes);
                    for ((p, m), sd) in phi.iter_mut().zip(self.mean(k)).zip(self.sigma(k)) {
                        *p = m + sd * t2.sample(rng);
                    }
                }
                UnknownMode::Uniform => {
                    for (d, p) in phi.iter_mut().enumerate() {
                        *p = rng.random_range(lo_box[d]..=hi_box[d]);
                    }
                }
            }
            emb.extend(phi.iter().map(|&v| v as f32));
            phi.iter_mut().for_each(|v| *v = *v as f32 as f64);
            self.logits(&phi, rng, &mut logits);
        }
        FeaturePack::new(s.n_classes, s.dim, emb, logits, vec![UNKNOWN_LABEL; n])
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Rejection-samples class means at least `min_separation * sigma_max` apart,
/// widening the draw by 10% after every 100 failed candidates.
fn place_means(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = spec.dim;
    let min_dist = spec.min_separation * spec.sigma_range.1;
    let mut means: Vec<f64> = Vec::with_capacity(spec.n_classes * d);
    let mut spread = spec.mean_spread;
    let mut failures = 0usize;
    let mut candidate = vec![0.0; d];
    while means.len() < spec.n_classes * d {
        candidate
            .iter_mut()
            .for_each(|c| *c = spread * rng.sample::<f64, _>(StandardNormal));
        let clear = means
            .chunks_exact(d)
            .all(|m| m.iter().zip(&candidate).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= min_dist * min_dist);
        if clear {
            means.extend_from_slice(&candidate);
            continue;
        }
        failures += 1;
        if failures.is_multiple_of(100) {
            // a zero spread can only ever place one class
            spread = if spread > 0.0 { spread * 1.1 } else { min_dist.max(1.0) };
        }
    }
    means
}

pub fn generate(spec: &SynthSpec) -> Result<SyntheticPacks, SynthError> {
    spec.validate()?;
    let (k, d) = (spec.n_classes, spec.dim);
    let mut rng = stream(spec.seed, 0);
    let (lo, hi) = spec.sigma_range;
    let means = place_means(spec, &mut rng);
    let mut sigmas: Vec<f64> = (0..k * d)
        .map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo })
        .collect();
    for class in k - spec.noisy_classes..k {
        sigmas[class * d..(class + 1) * d]
            .iter_mut()
            .for_each(|s| *s *= spec.noisy_factor);
    }
    let gen = Generator {
        spec,
        means,
        sigmas,
        sigma_ref: 0.5 * (lo + hi),
    };
    let train = gen.knowns(spec.train_per_class, &mut stream(spec.seed, 1))?;
    let known_test = gen.knowns(spec.test_per_class, &mut stream(spec.seed, 2))?;
    let unknown_test = gen.unknowns(&mut stream(spec.seed, 3))?;
    Ok(SyntheticPacks {
        means: gen.means,
        sigmas: gen.sigmas,
        train,
        known_test,
        unknown_test,
    })
}

/// Known-only pack with exactly Gaussian embeddings and one-hot logits (all
/// samples correctly classified). `exponential_dims` lists `(class, dim)`
/// pairs whose values are replaced by Exp(1) draws.
pub fn gaussian_audit_pack(
    n_classes: usize,
    dim: usize,
    per_class: usize,
    exponential_dims: &[(usize, usize)],
    seed: u64,
) -> Result<FeaturePack, SynthError> {
    if n_classes == 0 || dim == 0 {
        return Err(SynthError::Invalid("n_classes and dim must be positive".into()));
    }
    let mut rng = stream(seed, 0);
    let mut emb = Vec::with_capacity(n_classes * per_class * dim);
    let mut logits = Vec::with_capacity(n_classes * per_class * n_classes);
    let mut labels = Vec::with_capacity(n_classes * per_class);
    let exp = rand_distr::Exp1;
    for k in 0..n_classes {
        let offsets: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        for _ in 0..per_class {
            for (d, off) in offsets.iter().enumerate() {
                let v: f64 = if exponential_dims.contains(&(k, d)) {
                    exp.sample(&mut rng)
                } else {
                    rng.sample(StandardNormal)
                };
                emb.push((off + v) as f32);
            }
            logits.extend((0..n_classes).map(|j| if j == k { 1.0f32 } else { 0.0 }));
            labels.push(k as i32);
        }
    }
    Ok(FeaturePack::new(n_classes, dim, emb, logits, labels)?)
}
