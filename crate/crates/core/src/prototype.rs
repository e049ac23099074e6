//! Per-class visual prototypes and the bounded caches that feed them.
//!
//! Each class keeps at most `K` admitted samples, ranked by the normalized
//! entropy of their prediction. A prototype moves toward the reward-weighted
//! mean of its cache with momentum `m`, and is re-normalized afterwards:
//!
//! ```text
//! w_i = softmax_i(r_final_i / tau)
//! v_c <- normalize(m * v_c + (1 - m) * sum_i w_i * f_i)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{dot, mean_of, softmax, FeatureVector, NORM_EPS};

/// How "every U iterations" is counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CounterMode {
    /// One counter per class, advanced by samples assigned to that class.
    #[default]
    PerClass,
    /// A single counter advanced by every sample; the class of the sample
    /// that trips it is the one updated.
    Global,
}

impl std::str::FromStr for CounterMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-class" => Ok(Self::PerClass),
            "global" => Ok(Self::Global),
            other => Err(format!("unknown counter mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeParams {
    pub momentum: f64,
    pub tau: f64,
    /// 0 disables evolution.
    pub update_period: usize,
    pub cache_capacity: usize,
    pub entropy_threshold: f64,
    pub counter_mode: CounterMode,
}

impl Default for PrototypeParams {
    fn default() -> Self {
        Self {
            momentum: 0.9,
            tau: 0.01,
            update_period: 10,
            cache_capacity: 3,
            entropy_threshold: 0.1,
            counter_mode: CounterMode::PerClass,
        }
    }
}

impl PrototypeParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must lie in [0, 1]"));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::config("tau must be positive"));
        }
        if self.cache_capacity == 0 {
            return Err(Error::config("cache capacity must be >= 1"));
        }
        if !self.entropy_threshold.is_finite() {
            return Err(Error::config("entropy threshold must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub feature: FeatureVector,
    pub r_final: f64,
    /// Normalized entropy at admission time.
    pub entropy: f64,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassCache {
    class_id: usize,
    capacity: usize,
    entries: Vec<CacheEntry>,
}

impl ClassCache {
    pub fn new(class_id: usize, capacity: usize) -> Self {
        Self {
            class_id,
            capacity,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> &[CacheEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    /// Index of the eviction candidate: highest entropy, older step on ties.
    fn worst(&self) -> Option<usize> {
        let mut worst: Option<usize> = None;
        for (i, e) in self.entries.iter().enumerate() {
            worst = match worst {
                None => Some(i),
                Some(w) => {
                    let cur = &self.entries[w];
                    if e.entropy > cur.entropy || (e.entropy == cur.entropy && e.step < cur.step) {
                        Some(i)
                    } else {
                        Some(w)
                    }
                }
            };
        }
        worst
    }

    /// Mean pairwise cosine distance; 0 with fewer than two entries.
    pub fn dispersion(&self) -> f64 {
        let n = self.entries.len();
        if n < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        let mut pairs = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                let c = dot(
                    self.entries[i].feature.as_slice(),
                    self.entries[j].feature.as_slice(),
                )
                .clamp(-1.0, 1.0);
                total += 1.0 - c;
                pairs += 1;
            }
        }
        total / pairs as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdmitOutcome {
    Admitted,
    RejectedEntropy,
    Replaced(CacheEntry),
    RejectedFull,
}

impl AdmitOutcome {
    pub fn is_admitted(&self) -> bool {
        matches!(self, Self::Admitted | Self::Replaced(_))
    }
}

/// Non-fatal observations made while building a bank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BankWarning {
    DuplicatePrototype { first: usize, second: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank {
    prototypes: Vec<FeatureVector>,
    caches: Vec<ClassCache>,
    params: PrototypeParams,
    counters: Vec<usize>,
    global_counter: usize,
    warnings: Vec<BankWarning>,
}

impl PrototypeBank {
    /// Seeds each prototype with its normalized class text embedding.
    pub fn init_from_text(
        text_embeddings: &[FeatureVector],
        params: PrototypeParams,
    ) -> Result<Self> {
        params.validate()?;
        if text_embeddings.len() < 2 {
            return Err(Error::InvalidBank("at least two classes required".into()));
        }
        let dim = text_embeddings[0].dim();
        let mut prototypes = Vec::with_capacity(text_embeddings.len());
        for t in text_embeddings {
            t.check_dim(dim)?;
            prototypes.push(t.normalized()?);
        }
        let mut warnings = Vec::new();
        for i in 0..prototypes.len() {
            for j in (i + 1)..prototypes.len() {
                if prototypes[i] == prototypes[j] {
                    warnings.push(BankWarning::DuplicatePrototype {
                        first: i,
                        second: j,
                    });
                }
            }
        }
        Ok(Self::assemble(prototypes, params, warnings))
    }

    /// Seeds each prototype with the normalized mean of its labeled support
    /// features.
    pub fn init_from_support(
        labeled: &[(FeatureVector, usize)],
        num_classes: usize,
        params: PrototypeParams,
    ) -> Result<Self> {
        params.validate()?;
        if num_classes < 2 {
            return Err(Error::InvalidBank("at least two classes required".into()));
        }
        let dim = labeled
            .first()
            .map(|(f, _)| f.dim())
            .ok_or(Error::MissingClass(0))?;
        let mut groups: Vec<Vec<&[f64]>> = vec![Vec::new(); num_classes];
        for (f, c) in labeled {
            f.check_dim(dim)?;
            let slot = groups.get_mut(*c).ok_or(Error::InvalidClassId {
                class_id: *c,
                num_classes,
            })?;
            slot.push(f.as_slice());
        }
        let mut prototypes = Vec::with_capacity(num_classes);
        for (c, rows) in groups.into_iter().enumerate() {
            if rows.is_empty() {
                return Err(Error::MissingClass(c));
            }
            let mean = FeatureVector::new(mean_of(rows, dim))?;
            prototypes.push(mean.normalized()?);
        }
        Ok(Self::assemble(prototypes, params, Vec::new()))
    }

    fn assemble(
        prototypes: Vec<FeatureVector>,
        params: PrototypeParams,
        warnings: Vec<BankWarning>,
    ) -> Self {
        let c = prototypes.len();
        Self {
            caches: (0..c)
                .map(|i| ClassCache::new(i, params.cache_capacity))
                .collect(),
            counters: vec![0; c],
            global_counter: 0,
            prototypes,
            params,
            warnings,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.prototypes.len()
    }

    pub fn dim(&self) -> usize {
        self.prototypes[0].dim()
    }

    pub fn prototypes(&self) -> &[FeatureVector] {
        &self.prototypes
    }

    pub fn caches(&self) -> &[ClassCache] {
        &self.caches
    }

    pub fn cache(&self, class_id: usize) -> Result<&ClassCache> {
        self.check_class(class_id)?;
        Ok(&self.caches[class_id])
    }

    pub fn params(&self) -> &PrototypeParams {
        &self.params
    }

    pub fn warnings(&self) -> &[BankWarning] {
        &self.warnings
    }

    /// Current value of the update counter that governs `class_id`.
    pub fn counter(&self, class_id: usize) -> usize {
        match self.params.counter_mode {
            CounterMode::PerClass => self.counters[class_id],
            CounterMode::Global => self.global_counter,
        }
    }

    /// Number of cached entries across all classes.
    pub fn cached_entries(&self) -> usize {
        self.caches.iter().map(ClassCache::len).sum()
    }

    fn check_class(&self, class_id: usize) -> Result<()> {
        if class_id >= self.prototypes.len() {
            return Err(Error::InvalidClassId {
                class_id,
                num_classes: self.prototypes.len(),
            });
        }
        Ok(())
    }

    pub fn try_admit(
        &mut self,
        class_id: usize,
        feature: &FeatureVector,
        r_final: f64,
        entropy: f64,
        step: u64,
    ) -> Result<AdmitOutcome> {
        self.check_class(class_id)?;
        feature.check_dim(self.dim())?;
        if !(entropy < self.params.entropy_threshold) {
            return Ok(AdmitOutcome::RejectedEntropy);
        }
        let entry = CacheEntry {
            feature: feature.clone(),
            r_final,
            entropy,
            step,
        };
        let cache = &mut self.caches[class_id];
        if !cache.is_full() {
            cache.entries.push(entry);
            return Ok(AdmitOutcome::Admitted);
        }
        let worst = cache.worst().expect("full cache is nonempty");
        if entropy < cache.entries[worst].entropy {
            let evicted = std::mem::replace(&mut cache.entries[worst], entry);
            Ok(AdmitOutcome::Replaced(evicted))
        } else {
            Ok(AdmitOutcome::RejectedFull)
        }
    }

    /// One momentum step of `class_id`'s prototype toward its cache.
    pub fn evolve(&mut self, class_id: usize) -> Result<()> {
        self.check_class(class_id)?;
        let cache = &self.caches[class_id];
        let weights = sample_weights(cache, self.params.tau)?;
        let m = self.params.momentum;
        let dim = self.dim();
        let mut target = vec![0.0; dim];
        for (w, e) in weights.iter().zip(cache.entries()) {
            for (t, x) in target.iter_mut().zip(e.feature.as_slice()) {
                *t += w * x;
            }
        }
        let blended: Vec<f64> = self.prototypes[class_id]
            .as_slice()
            .iter()
            .zip(&target)
            .map(|(v, t)| m * v + (1.0 - m) * t)
            .collect();
        let blended = FeatureVector::new(blended)?;
        if blended.norm() < NORM_EPS {
            return Err(Error::ZeroVector);
        }
        self.prototypes[class_id] = blended.normalized()?;
        match self.params.counter_mode {
            CounterMode::PerClass => self.counters[class_id] = 0,
            CounterMode::Global => self.global_counter = 0,
        }
        Ok(())
    }

    /// Advances the update counter for `class_id` and evolves it once the
    /// period is reached. With an empty cache the counter is held.
    pub fn maybe_evolve(&mut self, class_id: usize) -> Result<bool> {
        self.check_class(class_id)?;
        let period = self.params.update_period;
        let counter = match self.params.counter_mode {
            CounterMode::PerClass => &mut self.counters[class_id],
            CounterMode::Global => &mut self.global_counter,
        };
        if period == 0 {
            return Ok(false);
        }
        if *counter < period {
            *counter += 1;
        }
        if *counter >= period && !self.caches[class_id].is_empty() {
            self.evolve(class_id)?;
            return Ok(true);
        }
        Ok(false)
    }

    /// Mean pairwise cosine distance of each class cache.
    pub fn intra_class_dispersion(&self) -> Vec<f64> {
        self.caches.iter().map(ClassCache::dispersion).collect()
    }
}

/// Softmax of the cached rewards at temperature `tau`.
pub fn sample_weights(cache: &ClassCache, tau: f64) -> Result<Vec<f64>> {
    if cache.is_empty() {
        return Err(Error::EmptyCache(cache.class_id));
    }
    let rewards: Vec<f64> = cache.entries.iter().map(|e| e.r_final).collect();
    Ok(softmax(&rewards, tau)?.into_inner())
}
