//! Seeded generator for banks with controllable cross-modal misalignment
//! and domain shift.
//!
//! Geometry, all on the unit sphere in `R^d`:
//!
//! * a shared anchor `a`; class means `mu_c = cos(s) a + sin(s) r_c` where
//!   the `r_c` are greedy farthest-point picks among random directions
//!   orthogonal to `a` and `s` is `class_separation`;
//! * text embedding `t_c`: `mu_c` rotated by `text_offset` toward a random
//!   direction orthogonal to it (one random plane per class);
//! * image mean `mu'_c`: `mu_c` rotated by `drift_angle` toward one drift
//!   direction `u` shared by the whole run;
//! * sample: `normalize(mu'_c + view_noise * g / sqrt(d))`; view 0 is the
//!   sample itself and the other views add a second jitter of the same
//!   scale, so `view_noise = 0` yields noiseless streams.
//!
//! Stream order is a seeded shuffle of `n_per_class` labels per class.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{default_class_names, EmbeddingBank};
use crate::engine::TestSample;
use crate::error::{Error, Result};
use crate::numkit::{dot, FeatureVector};

/// Random candidates drawn per class for the farthest-point search.
const CANDIDATES_PER_CLASS: usize = 16;

/// Class directions closer than this (radians) make a spec infeasible.
const MIN_DIRECTION_ANGLE: f64 = std::f64::consts::FRAC_PI_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub classes: usize,
    pub dim: usize,
    pub n_per_class: usize,
    pub views: usize,
    /// Angle between each class mean and the shared anchor, in (0, pi/2].
    pub class_separation: f64,
    pub view_noise: f64,
    pub text_offset: f64,
    pub drift_angle: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::standard(0)
    }
}

impl SynthSpec {
    /// The reference acceptance bank: 10 classes, d = 64, 2,000 samples,
    /// 0.4 rad drift and 0.15 rad text offset.
    pub fn standard(seed: u64) -> Self {
        Self {
            classes: 10,
            dim: 64,
            n_per_class: 200,
            views: 16,
            class_separation: 0.25,
            view_noise: 0.5,
            text_offset: 0.15,
            drift_angle: 0.4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::config("at least 2 classes required"));
        }
        if self.dim < 2 {
            return Err(Error::config("dimension must be >= 2"));
        }
        if self.n_per_class == 0 || self.views == 0 {
            return Err(Error::config("n_per_class and views must be >= 1"));
        }
        let angle_ok = |a: f64| a.is_finite() && (0.0..std::f64::consts::PI).contains(&a);
        for (name, a) in [
            ("text_offset", self.text_offset),
            ("drift_angle", self.drift_angle),
        ] {
            if !angle_ok(a) {
                return Err(Error::config(format!("{name} must lie in [0, pi)")));
            }
        }
        if !(self.class_separation > 0.0 && self.class_separation <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::config("class_separation must lie in (0, pi/2]"));
        }
        if !self.view_noise.is_finite() || self.view_noise < 0.0 {
            return Err(Error::config("view_noise must be finite and >= 0"));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = dot(&v, &v).sqrt();
    for x in &mut v {
        *x /= n;
    }
    v
}

/// Unit vector along the part of `v` orthogonal to the unit vector `basis`.
fn orthogonal_unit(v: &[f64], basis: &[f64]) -> Option<Vec<f64>> {
    let p = dot(v, basis);
    let r: Vec<f64> = v.iter().zip(basis).map(|(x, b)| x - p * b).collect();
    let n = dot(&r, &r).sqrt();
    (n > 1e-9).then(|| r.into_iter().map(|x| x / n).collect())
}

/// Rotates unit `x` by `angle` toward the unit direction `toward` (which
/// must be orthogonal to `x`).
fn rotate(x: &[f64], toward: &[f64], angle: f64) -> Vec<f64> {
    let (s, c) = angle.sin_cos();
    normalize(x.iter().zip(toward).map(|(a, b)| c * a + s * b).collect())
}

fn random_orthogonal(rng: &mut ChaCha8Rng, basis: &[f64]) -> Vec<f64> {
    loop {
        if let Some(u) = orthogonal_unit(&gaussian(rng, basis.len()), basis) {
            return u;
        }
    }
}

fn jitter(rng: &mut ChaCha8Rng, base: &[f64], scale: f64) -> Vec<f64> {
    let d = base.len();
    let k = scale / (d as f64).sqrt();
    let g = gaussian(rng, d);
    let v: Vec<f64> = base.iter().zip(&g).map(|(b, n)| b + k * n).collect();
    if dot(&v, &v).sqrt() < 1e-9 {
        return base.to_vec();
    }
    normalize(v)
}

/// Greedy farthest-point selection of `k` directions among `candidates`.
fn farthest_points(candidates: &[Vec<f64>], k: usize) -> Vec<usize> {
    let mut chosen = vec![0usize];
    // max cosine to the chosen set, per candidate
    let mut nearest: Vec<f64> = candidates.iter().map(|c| dot(c, &candidates[0])).collect();
    while chosen.len() < k {
        let mut best = None;
        for (i, m) in nearest.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            if best.is_none_or(|b: usize| *m < nearest[b]) {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        chosen.push(b);
        for (i, c) in candidates.iter().enumerate() {
            nearest[i] = nearest[i].max(dot(c, &candidates[b]));
        }
    }
    chosen
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<EmbeddingBank> {
    spec.validate()?;
    let d = spec.dim;
    let c = spec.classes;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let anchor = normalize(gaussian(&mut rng, d));
    let candidates: Vec<Vec<f64>> = (0..CANDIDATES_PER_CLASS * c)
        .map(|_| random_orthogonal(&mut rng, &anchor))
        .collect();
    let picks = farthest_points(&candidates, c);
    if picks.len() < c {
        return Err(Error::InfeasibleSpec(format!(
            "could not place {c} classes"
        )));
    }
    let max_cos = MIN_DIRECTION_ANGLE.cos();
    for (i, &a) in picks.iter().enumerate() {
        for &b in &picks[i + 1..] {
            if dot(&candidates[a], &candidates[b]) > max_cos {
                return Err(Error::InfeasibleSpec(format!(
                    "{c} classes cannot be separated by {:.3} rad in dimension {d}",
                    MIN_DIRECTION_ANGLE
                )));
            }
        }
    }

    let means: Vec<Vec<f64>> = picks
        .iter()
        .map(|&i| rotate(&anchor, &candidates[i], spec.class_separation))
        .collect();
    let text: Vec<Vec<f64>> = means
        .iter()
        .map(|m| {
            let q = random_orthogonal(&mut rng, m);
            rotate(m, &q, spec.text_offset)
        })
        .collect();
    let drift_dir = normalize(gaussian(&mut rng, d));
    let image_means: Vec<Vec<f64>> = means
        .iter()
        .map(|m| match orthogonal_unit(&drift_dir, m) {
            Some(u) => rotate(m, &u, spec.drift_angle),
            None => m.clone(),
        })
        .collect();

    let mut labels: Vec<usize> = (0..c)
        .flat_map(|k| std::iter::repeat_n(k, spec.n_per_class))
        .collect();
    labels.shuffle(&mut rng);

    let mut samples = Vec::with_capacity(labels.len());
    for (id, &label) in labels.iter().enumerate() {
        let base = jitter(&mut rng, &image_means[label], spec.view_noise);
        let mut views = Vec::with_capacity(spec.views);
        views.push(FeatureVector::new(base.clone())?);
        for _ in 1..spec.views {
            views.push(FeatureVector::new(jitter(
                &mut rng,
                &base,
                spec.view_noise,
            ))?);
        }
        samples.push(TestSample {
            sample_id: id as u64,
            views,
            label: Some(label),
        });
    }

    Ok(EmbeddingBank {
        class_names: default_class_names(c),
        text_embeddings: text
            .into_iter()
            .map(FeatureVector::new)
            .collect::<Result<_>>()?,
        samples,
        source: format!("synthetic:seed={}", spec.seed),
        spec: Some(spec.clone()),
    })
}
