//! The streaming adaptation pipeline.
//!
//! Per sample, in order:
//!
//! 1. score every view against the class text embeddings and keep the
//!    `ceil(rho * N)` lowest-entropy views;
//! 2. fuse text and prototype affinities of the aggregated feature and take
//!    the argmax as the prediction;
//! 3. evaluate the quality reward against the current prototypes and memory;
//! 4. offer the sample to the predicted class cache;
//! 5. push the aggregated feature into the diversity memory;
//! 6. advance the predicted class update counter, evolving if due.

use std::borrow::Borrow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{
    argmax, mean_of, normalized_entropy, softmax, FeatureVector, ProbabilityVector,
};
use crate::prototype::{AdmitOutcome, CounterMode, PrototypeBank, PrototypeParams};
use crate::report::{RunAccumulator, RunReport};
use crate::reward::{self, DiversityMemory, RewardBreakdown, RewardWeights, WarmupSchedule};

/// Views per sample at or above which per-view scoring may run in parallel.
const PARALLEL_VIEW_MIN: usize = 16;

/// Which prototypes the similarity reward averages over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityScope {
    /// Every class prototype.
    #[default]
    All,
    /// Only the predicted class prototype. Not part of the reference method.
    Predicted,
}

impl std::str::FromStr for SimilarityScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Self::All),
            "predicted" => Ok(Self::Predicted),
            other => Err(format!("unknown similarity scope '{other}'")),
        }
    }
}

/// Logit fusion used by the residual refinement step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionStrategy {
    /// `beta * cos(f, t_c) + alpha * cos(f, v_c)`
    #[default]
    TwoTermCosine,
}

impl std::str::FromStr for FusionStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two-term-cosine" => Ok(Self::TwoTermCosine),
            other => Err(format!("unknown fusion strategy '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Zero-shot softmax temperature.
    pub tau_clip: f64,
    /// Fraction of views kept by entropy rank.
    pub rho: f64,
    /// Optional absolute normalized-entropy gate applied to views before
    /// the percentile rule.
    pub view_entropy_threshold: Option<f64>,
    /// Normalized-entropy admission gate for class caches.
    pub entropy_threshold: f64,
    pub cache_capacity: usize,
    pub momentum: f64,
    /// Reward softmax temperature for sample weights.
    pub tau: f64,
    /// Samples between prototype updates; 0 never updates.
    pub update_period: usize,
    /// Prototype affinity weight.
    pub alpha: f64,
    /// Text affinity weight.
    pub beta: f64,
    pub lambda_sim: f64,
    pub lambda_conf: f64,
    pub lambda_div: f64,
    pub r_min: f64,
    pub warmup_steps: u64,
    pub warmup_schedule: WarmupSchedule,
    pub memory_capacity: usize,
    pub counter_mode: CounterMode,
    pub similarity_scope: SimilarityScope,
    pub fusion: FusionStrategy,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let w = RewardWeights::default();
        let p = PrototypeParams::default();
        Self {
            tau_clip: 0.01,
            rho: 0.1,
            view_entropy_threshold: None,
            entropy_threshold: p.entropy_threshold,
            cache_capacity: p.cache_capacity,
            momentum: p.momentum,
            tau: p.tau,
            update_period: p.update_period,
            alpha: 4.0,
            beta: 4.0,
            lambda_sim: w.lambda_sim,
            lambda_conf: w.lambda_conf,
            lambda_div: w.lambda_div,
            r_min: w.r_min,
            warmup_steps: w.warmup_steps,
            warmup_schedule: w.schedule,
            memory_capacity: 3,
            counter_mode: p.counter_mode,
            similarity_scope: SimilarityScope::All,
            fusion: FusionStrategy::TwoTermCosine,
        }
    }
}

impl EngineConfig {
    /// Adaptation disabled: prototype term off and no updates.
    pub fn zero_shot(mut self) -> Self {
        self.alpha = 0.0;
        self.update_period = 0;
        self
    }

    pub fn reward_weights(&self) -> RewardWeights {
        RewardWeights {
            lambda_sim: self.lambda_sim,
            lambda_conf: self.lambda_conf,
            lambda_div: self.lambda_div,
            r_min: self.r_min,
            warmup_steps: self.warmup_steps,
            schedule: self.warmup_schedule,
        }
    }

    pub fn prototype_params(&self) -> PrototypeParams {
        PrototypeParams {
            momentum: self.momentum,
            tau: self.tau,
            update_period: self.update_period,
            cache_capacity: self.cache_capacity,
            entropy_threshold: self.entropy_threshold,
            counter_mode: self.counter_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_clip > 0.0) || !self.tau_clip.is_finite() {
            return Err(Error::config("tau_clip must be positive"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::config("rho must lie in (0, 1]"));
        }
        if let Some(t) = self.view_entropy_threshold {
            if !t.is_finite() {
                return Err(Error::config("view entropy threshold must be finite"));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(format!("{name} must be finite and >= 0")));
            }
        }
        if self.alpha == 0.0 && self.beta == 0.0 {
            return Err(Error::config("alpha and beta cannot both be zero"));
        }
        if self.memory_capacity == 0 {
            return Err(Error::config("memory capacity must be >= 1"));
        }
        self.reward_weights().validate()?;
        self.prototype_params().validate()
    }
}

/// One unlabeled test sample: view 0 is the original image feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSample {
    pub sample_id: u64,
    pub views: Vec<FeatureVector>,
    /// Evaluation only; never read by adaptation.
    pub label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewAggregate {
    pub feature: FeatureVector,
    pub probs: ProbabilityVector,
    /// Selected view indices in ascending entropy order.
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: u64,
    pub step: u64,
    pub clip_probs: ProbabilityVector,
    pub fused_scores: Vec<f64>,
    pub predicted: usize,
    pub reward: RewardBreakdown,
    pub entropy: f64,
    pub admitted: bool,
    pub evicted: bool,
    pub prototype_updated: bool,
    pub label: Option<usize>,
    pub correct: Option<bool>,
}

/// Zero-shot distribution: softmax of text cosines over `tau_clip`.
pub fn zero_shot_probs(
    f: &FeatureVector,
    text_embeddings: &[FeatureVector],
    tau_clip: f64,
) -> Result<ProbabilityVector> {
    let mut scores = Vec::with_capacity(text_embeddings.len());
    for t in text_embeddings {
        scores.push(crate::numkit::cosine(f, t)?);
    }
    softmax(&scores, tau_clip)
}

struct ViewScore {
    probs: ProbabilityVector,
    entropy: f64,
}

fn score_view(view: &FeatureVector, text: &[FeatureVector], tau_clip: f64) -> Result<ViewScore> {
    let probs = zero_shot_probs(view, text, tau_clip)?;
    let entropy = normalized_entropy(&probs)?;
    Ok(ViewScore { probs, entropy })
}

fn aggregate_impl(
    sample: &TestSample,
    text: &[FeatureVector],
    config: &EngineConfig,
    parallel: bool,
) -> Result<ViewAggregate> {
    let n = sample.views.len();
    if n == 0 {
        return Err(Error::InvalidBank(format!(
            "sample {} has no views",
            sample.sample_id
        )));
    }
    let scores: Vec<ViewScore> = if parallel && n >= PARALLEL_VIEW_MIN {
        sample
            .views
            .par_iter()
            .map(|v| score_view(v, text, config.tau_clip))
            .collect::<Result<_>>()?
    } else {
        sample
            .views
            .iter()
            .map(|v| score_view(v, text, config.tau_clip))
            .collect::<Result<_>>()?
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .entropy
            .total_cmp(&scores[b].entropy)
            .then(a.cmp(&b))
    });
    if let Some(t) = config.view_entropy_threshold {
        let passing = order
            .iter()
            .take_while(|&&i| scores[i].entropy <= t)
            .count();
        order.truncate(passing.max(1));
    }
    let keep = ((config.rho * n as f64).ceil() as usize)
        .clamp(1, n)
        .min(order.len());
    order.truncate(keep);

    let c = text.len();
    let probs = mean_of(order.iter().map(|&i| scores[i].probs.as_slice()), c);
    let dim = text[0].dim();
    let feature = mean_of(order.iter().map(|&i| sample.views[i].as_slice()), dim);
    Ok(ViewAggregate {
        feature: FeatureVector::new(feature)?.normalized()?,
        probs: ProbabilityVector::new(probs)?,
        selected: order,
    })
}

/// Entropy-ranked view selection and averaging.
pub fn aggregate_views(
    sample: &TestSample,
    text_embeddings: &[FeatureVector],
    config: &EngineConfig,
) -> Result<ViewAggregate> {
    aggregate_impl(sample, text_embeddings, config, false)
}

/// Fused class scores of a unit feature against text and prototypes.
pub fn residual_refine(
    f_agg: &FeatureVector,
    text_embeddings: &[FeatureVector],
    prototypes: &[FeatureVector],
    config: &EngineConfig,
) -> Result<Vec<f64>> {
    if prototypes.is_empty() {
        return Err(Error::UninitializedBank);
    }
    if prototypes.len() != text_embeddings.len() {
        return Err(Error::DimensionMismatch {
            expected: text_embeddings.len(),
            got: prototypes.len(),
        });
    }
    let mut fused = Vec::with_capacity(prototypes.len());
    match config.fusion {
        FusionStrategy::TwoTermCosine => {
            for (t, v) in text_embeddings.iter().zip(prototypes) {
                let text_term = crate::numkit::cosine(f_agg, t)?;
                let proto_term = if config.alpha == 0.0 {
                    0.0
                } else {
                    crate::numkit::cosine(f_agg, v)?
                };
                fused.push(config.beta * text_term + config.alpha * proto_term);
            }
        }
    }
    Ok(fused)
}

/// Floats held by the adaptation state at one point in time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateFootprint {
    pub text_floats: usize,
    pub prototype_floats: usize,
    pub cache_floats: usize,
    pub memory_floats: usize,
    pub scratch_floats: usize,
}

impl StateFootprint {
    pub fn total(&self) -> usize {
        self.text_floats
            + self.prototype_floats
            + self.cache_floats
            + self.memory_floats
            + self.scratch_floats
    }
}

/// Mutable adaptation state for one stream.
#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    weights: RewardWeights,
    text: Vec<FeatureVector>,
    bank: PrototypeBank,
    memory: DiversityMemory,
    step: u64,
    parallel_views: bool,
    peak: StateFootprint,
}

impl Engine {
    pub fn new(text_embeddings: &[FeatureVector], config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let text: Vec<FeatureVector> = text_embeddings
            .iter()
            .map(FeatureVector::normalized)
            .collect::<Result<_>>()?;
        let bank = PrototypeBank::init_from_text(&text, config.prototype_params())?;
        Ok(Self {
            weights: config.reward_weights(),
            memory: DiversityMemory::new(config.memory_capacity)?,
            config,
            text,
            bank,
            step: 0,
            parallel_views: false,
            peak: StateFootprint::default(),
        })
    }

    /// Allows per-view scoring on the rayon pool. Output is unchanged.
    pub fn with_parallel_views(mut self, enabled: bool) -> Self {
        self.parallel_views = enabled;
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn bank(&self) -> &PrototypeBank {
        &self.bank
    }

    pub fn memory(&self) -> &DiversityMemory {
        &self.memory
    }

    pub fn text_embeddings(&self) -> &[FeatureVector] {
        &self.text
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn num_classes(&self) -> usize {
        self.text.len()
    }

    pub fn dim(&self) -> usize {
        self.text[0].dim()
    }

    pub fn footprint(&self, views: usize) -> StateFootprint {
        let d = self.dim();
        let c = self.num_classes();
        StateFootprint {
            text_floats: c * d,
            prototype_floats: c * d,
            cache_floats: self.bank.cached_entries() * d,
            memory_floats: self.memory.len() * d,
            // per-view probabilities plus the aggregated feature and scores
            scratch_floats: views * c + d + 2 * c,
        }
    }

    /// Largest footprint observed across all steps so far.
    pub fn peak_footprint(&self) -> StateFootprint {
        self.peak
    }

    pub fn step(&mut self, sample: &TestSample) -> Result<PredictionRecord> {
        let c = self.num_classes();
        for v in &sample.views {
            v.check_dim(self.dim())?;
        }
        if let Some(label) = sample.label {
            if label >= c {
                return Err(Error::InvalidClassId {
                    class_id: label,
                    num_classes: c,
                });
            }
        }

        let agg = aggregate_impl(sample, &self.text, &self.config, self.parallel_views)?;
        let fused = residual_refine(
            &agg.feature,
            &self.text,
            self.bank.prototypes(),
            &self.config,
        )?;
        let predicted = argmax(&fused);

        let protos = self.bank.prototypes();
        let scope = match self.config.similarity_scope {
            SimilarityScope::All => protos,
            SimilarityScope::Predicted => &protos[predicted..=predicted],
        };
        let reward = reward::evaluate(
            &agg.feature,
            &agg.probs,
            scope,
            &self.memory,
            &self.weights,
            self.step,
        )?;
        let entropy = normalized_entropy(&agg.probs)?;

        let outcome =
            self.bank
                .try_admit(predicted, &agg.feature, reward.r_final, entropy, self.step)?;
        self.memory.push(&agg.feature)?;
        let updated = self.bank.maybe_evolve(predicted)?;

        let fp = self.footprint(sample.views.len());
        if fp.total() > self.peak.total() {
            self.peak = fp;
        }

        let record = PredictionRecord {
            sample_id: sample.sample_id,
            step: self.step,
            clip_probs: agg.probs,
            fused_scores: fused,
            predicted,
            reward,
            entropy,
            admitted: outcome.is_admitted(),
            evicted: matches!(outcome, AdmitOutcome::Replaced(_)),
            prototype_updated: updated,
            label: sample.label,
            correct: sample.label.map(|l| l == predicted),
        };
        self.step += 1;
        Ok(record)
    }
}

/// Folds [`Engine::step`] over `samples` in order.
pub fn run_stream<I>(
    samples: I,
    text_embeddings: &[FeatureVector],
    config: &EngineConfig,
) -> Result<RunReport>
where
    I: IntoIterator,
    I::Item: Borrow<TestSample>,
{
    let mut engine = Engine::new(text_embeddings, config.clone())?;
    let mut acc = RunAccumulator::new(&engine);
    for sample in samples {
        let record = engine.step(sample.borrow())?;
        acc.observe(&engine, &record);
    }
    acc.finish(&engine)
}

/// Subset of reward components kept by an ablation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardMask {
    pub sim: bool,
    pub conf: bool,
    pub div: bool,
}

impl RewardMask {
    pub const FULL: Self = Self {
        sim: true,
        conf: true,
        div: true,
    };

    /// The seven nonempty masks: singles, pairs, then the full set.
    pub fn all_nonempty() -> [Self; 7] {
        let m = |sim, conf, div| Self { sim, conf, div };
        [
            m(true, false, false),
            m(false, true, false),
            m(false, false, true),
            m(true, true, false),
            m(true, false, true),
            m(false, true, true),
            Self::FULL,
        ]
    }

    pub fn is_empty(&self) -> bool {
        !(self.sim || self.conf || self.div)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.sim {
            parts.push("sim");
        }
        if self.conf {
            parts.push("conf");
        }
        if self.div {
            parts.push("div");
        }
        if parts.is_empty() {
            "none".to_string()
        } else {
            parts.join("+")
        }
    }

    /// Zeroes excluded weights; kept weights are not renormalized.
    pub fn apply(&self, config: &EngineConfig) -> Result<EngineConfig> {
        if self.is_empty() {
            return Err(Error::EmptyMask);
        }
        let mut out = config.clone();
        if !self.sim {
            out.lambda_sim = 0.0;
        }
        if !self.conf {
            out.lambda_conf = 0.0;
        }
        if !self.div {
            out.lambda_div = 0.0;
        }
        Ok(out)
    }
}

pub fn run_ablation<I>(
    samples: I,
    text_embeddings: &[FeatureVector],
    config: &EngineConfig,
    mask: RewardMask,
) -> Result<RunReport>
where
    I: IntoIterator,
    I::Item: Borrow<TestSample>,
{
    let masked = mask.apply(config)?;
    run_stream(samples, text_embeddings, &masked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> FeatureVector {
        FeatureVector::unit(v.to_vec()).unwrap()
    }

    fn basis(c: usize, d: usize) -> Vec<FeatureVector> {
        (0..c)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                FeatureVector::new(v).unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_shot_examples() {
        let text = basis(3, 3);
        let p = zero_shot_probs(&text[0], &text, 0.01).unwrap();
        assert!(p.as_slice()[0] > 0.999);

        let f = unit(&[1.0, 1.0, 1.0]);
        let p = zero_shot_probs(&f, &text, 0.01).unwrap();
        for x in p.as_slice() {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }

        let text = vec![unit(&[1.0, 0.0]), unit(&[0.0, 1.0])];
        let p = zero_shot_probs(&unit(&[1.0, 1.0]), &text, 0.01).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn aggregate_single_view() {
        let text = basis(3, 3);
        let v = unit(&[0.9, 0.3, 0.1]);
        let sample = TestSample {
            sample_id: 0,
            views: vec![v.clone()],
            label: None,
        };
        let agg = aggregate_views(&sample, &text, &EngineConfig::default()).unwrap();
        assert_eq!(agg.selected, vec![0]);
        assert_eq!(agg.feature, v);
        assert_eq!(agg.probs, zero_shot_probs(&v, &text, 0.01).unwrap());
    }

    #[test]
    fn aggregate_keeps_min_entropy_view() {
        let text = basis(2, 2);
        let mut views: Vec<FeatureVector> = (0..10)
            .map(|i| unit(&[1.0, 0.9 - i as f64 * 0.01]))
            .collect();
        views[6] = unit(&[1.0, 0.0]);
        let sample = TestSample {
            sample_id: 3,
            views,
            label: None,
        };
        let agg = aggregate_views(&sample, &text, &EngineConfig::default()).unwrap();
        assert_eq!(agg.selected, vec![6]);
    }

    #[test]
    fn view_entropy_gate_never_empties_selection() {
        let text = basis(2, 2);
        let sample = TestSample {
            sample_id: 0,
            views: vec![unit(&[1.0, 1.0]), unit(&[1.0, 0.999])],
            label: None,
        };
        let cfg = EngineConfig {
            view_entropy_threshold: Some(0.0),
            rho: 1.0,
            ..Default::default()
        };
        let agg = aggregate_views(&sample, &text, &cfg).unwrap();
        assert_eq!(agg.selected, vec![1]);
    }

    #[test]
    fn refine_reductions() {
        let text = basis(3, 4);
        let protos = vec![
            unit(&[0.0, 0.0, 1.0, 1.0]),
            unit(&[0.0, 1.0, 0.0, 1.0]),
            unit(&[1.0, 0.0, 0.0, 1.0]),
        ];
        let f = unit(&[0.5, 0.3, 0.1, 0.8]);
        let cfg = EngineConfig {
            alpha: 0.0,
            ..Default::default()
        };
        let fused = residual_refine(&f, &text, &protos, &cfg).unwrap();
        assert_eq!(
            argmax(&fused),
            zero_shot_probs(&f, &text, 0.01).unwrap().argmax()
        );

        let cfg = EngineConfig::default();
        let fused = residual_refine(&f, &text, &text, &cfg).unwrap();
        for (s, t) in fused.iter().zip(&text) {
            let c = crate::numkit::cosine(&f, t).unwrap();
            assert!((s - 8.0 * c).abs() < 1e-12);
        }
        assert!(matches!(
            residual_refine(&f, &text, &[], &cfg),
            Err(Error::UninitializedBank)
        ));
    }

    #[test]
    fn first_step_hits_reward_floor() {
        let text = basis(3, 3);
        let mut engine = Engine::new(&text, EngineConfig::default()).unwrap();
        let rec = engine
            .step(&TestSample {
                sample_id: 0,
                views: vec![unit(&[1.0, 0.1, 0.0])],
                label: Some(0),
            })
            .unwrap();
        assert_eq!(rec.reward.r_final, 0.1);
        assert_eq!(rec.correct, Some(true));
    }

    #[test]
    fn uniform_sample_rejected_by_entropy() {
        let text = basis(3, 3);
        let mut engine = Engine::new(&text, EngineConfig::default()).unwrap();
        let rec = engine
            .step(&TestSample {
                sample_id: 0,
                views: vec![unit(&[1.0, 1.0, 1.0])],
                label: None,
            })
            .unwrap();
        assert!((rec.entropy - 1.0).abs() < 1e-12);
        assert!(!rec.admitted);
        assert!(engine.bank().caches().iter().all(|c| c.is_empty()));
    }

    #[test]
    fn tenth_confident_sample_updates() {
        let text = basis(3, 3);
        let mut engine = Engine::new(&text, EngineConfig::default()).unwrap();
        for i in 0..10 {
            let rec = engine
                .step(&TestSample {
                    sample_id: i,
                    views: vec![unit(&[1.0, 0.05 * i as f64, 0.02])],
                    label: None,
                })
                .unwrap();
            assert_eq!(rec.predicted, 0);
            assert_eq!(rec.prototype_updated, i == 9, "step {i}");
        }
    }

    #[test]
    fn dimension_mismatch_aborts() {
        let text = basis(2, 2);
        let mut engine = Engine::new(&text, EngineConfig::default()).unwrap();
        let err = engine
            .step(&TestSample {
                sample_id: 0,
                views: vec![unit(&[1.0, 0.0, 0.0])],
                label: None,
            })
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn masks() {
        let cfg = EngineConfig::default();
        assert_eq!(RewardMask::FULL.apply(&cfg).unwrap(), cfg);
        let sim_only = RewardMask {
            sim: true,
            conf: false,
            div: false,
        };
        let m = sim_only.apply(&cfg).unwrap();
        assert_eq!((m.lambda_sim, m.lambda_conf, m.lambda_div), (0.6, 0.0, 0.0));
        let none = RewardMask {
            sim: false,
            conf: false,
            div: false,
        };
        assert!(matches!(none.apply(&cfg), Err(Error::EmptyMask)));
        let labels: Vec<String> = RewardMask::all_nonempty()
            .iter()
            .map(RewardMask::label)
            .collect();
        assert_eq!(
            labels,
            [
                "sim",
                "conf",
                "div",
                "sim+conf",
                "sim+div",
                "conf+div",
                "sim+conf+div"
            ]
        );
    }

    #[test]
    fn config_validation() {
        assert!(EngineConfig::default().validate().is_ok());
        let bad = EngineConfig {
            rho: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EngineConfig {
            alpha: 0.0,
            beta: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EngineConfig {
            memory_capacity: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
