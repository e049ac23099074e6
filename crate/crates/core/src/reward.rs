//! Multi-dimensional sample quality reward.
//!
//! Three components score an aggregated sample feature `f` and its class
//! distribution `p`:
//!
//! * similarity: mean cosine between `f` and the class prototypes,
//! * confidence: `1 - H(p) / ln C`,
//! * diversity: `1 - max_j cos(f, h_j)` over a FIFO of recent batch means.
//!
//! They are mixed linearly and then pulled toward a floor `r_min` while the
//! warmup ramp is below one.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{cosine, normalized_entropy, FeatureVector, ProbabilityVector};

/// Slack applied when range-checking component inputs to [`combine`].
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarmupSchedule {
    /// `min(1, step / warmup_steps)`
    #[default]
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub lambda_sim: f64,
    pub lambda_conf: f64,
    pub lambda_div: f64,
    pub r_min: f64,
    pub warmup_steps: u64,
    pub schedule: WarmupSchedule,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            lambda_sim: 0.6,
            lambda_conf: 0.2,
            lambda_div: 0.2,
            r_min: 0.1,
            warmup_steps: 1000,
            schedule: WarmupSchedule::Linear,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda_sim, self.lambda_conf, self.lambda_div];
        if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::config("reward weights must be finite and >= 0"));
        }
        if lambdas.iter().all(|l| *l == 0.0) {
            return Err(Error::config("at least one reward weight must be > 0"));
        }
        if !self.r_min.is_finite() {
            return Err(Error::config("r_min must be finite"));
        }
        if self.warmup_steps == 0 {
            return Err(Error::config("warmup_steps must be >= 1"));
        }
        Ok(())
    }

    /// The warmup factor at `step`, in `[0, 1]`.
    pub fn warmup_factor(&self, step: u64) -> f64 {
        match self.schedule {
            WarmupSchedule::Linear => (step as f64 / self.warmup_steps as f64).min(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_sim: f64,
    pub r_conf: f64,
    pub r_div: f64,
    pub r_combined: f64,
    pub r_final: f64,
    pub step: u64,
}

/// Bounded FIFO of unit-norm historical batch-mean features.
#[derive(Debug, Clone, PartialEq)]
pub struct DiversityMemory {
    entries: VecDeque<FeatureVector>,
    capacity: usize,
}

impl DiversityMemory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("memory capacity must be >= 1"));
        }
        Ok(Self {
            entries: VecDeque::with_capacity(capacity),
            capacity,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &FeatureVector> {
        self.entries.iter()
    }

    /// Normalizes and appends `batch_mean`, returning the evicted oldest
    /// entry when the queue was full.
    pub fn push(&mut self, batch_mean: &FeatureVector) -> Result<Option<FeatureVector>> {
        let unit = batch_mean.normalized()?;
        if let Some(front) = self.entries.front() {
            unit.check_dim(front.dim())?;
        }
        let evicted = if self.entries.len() == self.capacity {
            self.entries.pop_front()
        } else {
            None
        };
        self.entries.push_back(unit);
        Ok(evicted)
    }
}

/// Mean cosine between `f` and every prototype.
pub fn similarity_reward(f: &FeatureVector, prototypes: &[FeatureVector]) -> Result<f64> {
    if prototypes.is_empty() {
        return Err(Error::EmptyPrototypeSet);
    }
    let mut total = 0.0;
    for p in prototypes {
        total += cosine(f, p)?;
    }
    Ok(total / prototypes.len() as f64)
}

pub fn confidence_reward(p: &ProbabilityVector) -> Result<f64> {
    Ok(1.0 - normalized_entropy(p)?)
}

/// `1 - max cos(f, h)`; an empty memory scores 1.0.
pub fn diversity_reward(f: &FeatureVector, memory: &DiversityMemory) -> Result<f64> {
    let mut s_max: Option<f64> = None;
    for h in memory.iter() {
        let c = cosine(f, h)?;
        s_max = Some(s_max.map_or(c, |m: f64| m.max(c)));
    }
    Ok(match s_max {
        Some(s) => 1.0 - s,
        None => {
            if f.norm() < crate::numkit::NORM_EPS {
                return Err(Error::ZeroVector);
            }
            1.0
        }
    })
}

pub fn combine(r_sim: f64, r_conf: f64, r_div: f64, w: &RewardWeights) -> Result<f64> {
    let check = |name: &str, v: f64, lo: f64, hi: f64| {
        if !(v >= lo - RANGE_SLACK && v <= hi + RANGE_SLACK) {
            return Err(Error::OutOfRange(format!("{name}={v} not in [{lo}, {hi}]")));
        }
        Ok(())
    };
    check("r_sim", r_sim, -1.0, 1.0)?;
    check("r_conf", r_conf, 0.0, 1.0)?;
    check("r_div", r_div, 0.0, 2.0)?;
    Ok(w.lambda_sim * r_sim + w.lambda_conf * r_conf + w.lambda_div * r_div)
}

/// `r_min + (r - r_min) * eta(step)`. Not clamped.
pub fn warmup_floor(r: f64, step: u64, w: &RewardWeights) -> f64 {
    let eta = w.warmup_factor(step);
    w.r_min + (r - w.r_min) * eta
}

pub fn evaluate(
    f: &FeatureVector,
    p: &ProbabilityVector,
    prototypes: &[FeatureVector],
    memory: &DiversityMemory,
    w: &RewardWeights,
    step: u64,
) -> Result<RewardBreakdown> {
    let r_sim = similarity_reward(f, prototypes)?;
    let r_conf = confidence_reward(p)?;
    let r_div = diversity_reward(f, memory)?;
    let r_combined = combine(r_sim, r_conf, r_div, w)?;
    Ok(RewardBreakdown {
        r_sim,
        r_conf,
        r_div,
        r_combined,
        r_final: warmup_floor(r_combined, step, w),
        step,
    })
}
