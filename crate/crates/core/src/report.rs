//! Run summaries and per-sample record export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, EngineConfig, PredictionRecord, StateFootprint};
use crate::error::{Error, Result};

/// Sampling interval for dispersion snapshots when updates are disabled.
const FALLBACK_DISPERSION_INTERVAL: u64 = 10;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    /// Admissions into a cache, including those that replaced an entry.
    pub admissions: u64,
    pub evictions: u64,
    pub rejected_entropy: u64,
    pub rejected_full: u64,
    pub prototype_updates: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionSnapshot {
    /// Number of samples processed when the snapshot was taken.
    pub samples: u64,
    pub per_class: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: EngineConfig,
    pub samples: u64,
    pub labeled_samples: u64,
    pub accuracy: Option<f64>,
    /// `None` entries mark classes without labeled samples.
    pub per_class_accuracy: Option<Vec<Option<f64>>>,
    pub reward_trajectory: Vec<f64>,
    pub dispersion_trajectory: Vec<DispersionSnapshot>,
    /// Dispersion of each class cache the first time it filled up.
    pub first_full_dispersion: Vec<Option<f64>>,
    pub final_dispersion: Vec<f64>,
    pub counts: RunCounts,
    pub peak_state: StateFootprint,
    /// Filled by the CLI; omitted from reproducible reports.
    pub wall_time_secs: Option<f64>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Mean of the per-class first-full dispersions, over classes that
    /// filled, paired with the mean final dispersion over those classes.
    pub fn dispersion_change(&self) -> Option<(f64, f64)> {
        let pairs: Vec<(f64, f64)> = self
            .first_full_dispersion
            .iter()
            .zip(&self.final_dispersion)
            .filter_map(|(a, b)| a.map(|a| (a, *b)))
            .collect();
        if pairs.is_empty() {
            return None;
        }
        let n = pairs.len() as f64;
        Some((
            pairs.iter().map(|p| p.0).sum::<f64>() / n,
            pairs.iter().map(|p| p.1).sum::<f64>() / n,
        ))
    }
}

/// Streaming builder for a [`RunReport`]; holds O(C) state besides the
/// reward trajectory it emits.
#[derive(Debug, Clone)]
pub struct RunAccumulator {
    samples: u64,
    labeled: u64,
    correct: u64,
    class_total: Vec<u64>,
    class_correct: Vec<u64>,
    rewards: Vec<f64>,
    dispersion: Vec<DispersionSnapshot>,
    first_full: Vec<Option<f64>>,
    counts: RunCounts,
    interval: u64,
}

impl RunAccumulator {
    pub fn new(engine: &Engine) -> Self {
        let c = engine.num_classes();
        let period = engine.config().update_period as u64;
        Self {
            samples: 0,
            labeled: 0,
            correct: 0,
            class_total: vec![0; c],
            class_correct: vec![0; c],
            rewards: Vec::new(),
            dispersion: Vec::new(),
            first_full: vec![None; c],
            counts: RunCounts::default(),
            interval: if period == 0 {
                FALLBACK_DISPERSION_INTERVAL
            } else {
                period
            },
        }
    }

    /// Records `record`, which must be the one `engine` just produced.
    pub fn observe(&mut self, engine: &Engine, record: &PredictionRecord) {
        self.samples += 1;
        if let Some(label) = record.label {
            self.labeled += 1;
            self.class_total[label] += 1;
            if record.predicted == label {
                self.correct += 1;
                self.class_correct[label] += 1;
            }
        }
        self.rewards.push(record.reward.r_final);
        if record.admitted {
            self.counts.admissions += 1;
        } else if record.entropy < engine.config().entropy_threshold {
            self.counts.rejected_full += 1;
        } else {
            self.counts.rejected_entropy += 1;
        }
        if record.evicted {
            self.counts.evictions += 1;
        }
        if record.prototype_updated {
            self.counts.prototype_updates += 1;
        }

        let cache = &engine.bank().caches()[record.predicted];
        if record.admitted && self.first_full[record.predicted].is_none() && cache.is_full() {
            self.first_full[record.predicted] = Some(cache.dispersion());
        }
        if self.samples.is_multiple_of(self.interval) {
            self.dispersion.push(DispersionSnapshot {
                samples: self.samples,
                per_class: engine.bank().intra_class_dispersion(),
            });
        }
    }

    pub fn finish(self, engine: &Engine) -> Result<RunReport> {
        if self.samples == 0 {
            return Err(Error::EmptyStream);
        }
        let has_labels = self.labeled > 0;
        Ok(RunReport {
            config: engine.config().clone(),
            samples: self.samples,
            labeled_samples: self.labeled,
            accuracy: has_labels.then(|| self.correct as f64 / self.labeled as f64),
            per_class_accuracy: has_labels.then(|| {
                self.class_total
                    .iter()
                    .zip(&self.class_correct)
                    .map(|(t, c)| (*t > 0).then(|| *c as f64 / *t as f64))
                    .collect()
            }),
            reward_trajectory: self.rewards,
            dispersion_trajectory: self.dispersion,
            first_full_dispersion: self.first_full,
            final_dispersion: engine.bank().intra_class_dispersion(),
            counts: self.counts,
            peak_state: engine.peak_footprint(),
            wall_time_secs: None,
        })
    }
}

/// Streams prediction records as CSV.
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    pub const HEADER: [&'static str; 9] = [
        "sample_id",
        "predicted",
        "correct",
        "r_sim",
        "r_conf",
        "r_div",
        "r_final",
        "admitted",
        "prototype_updated",
    ];

    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(Self::HEADER).map_err(csv_err)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &PredictionRecord) -> Result<()> {
        let correct = match r.correct {
            Some(true) => "true",
            Some(false) => "false",
            None => "",
        };
        self.inner
            .write_record([
                r.sample_id.to_string(),
                r.predicted.to_string(),
                correct.to_string(),
                r.reward.r_sim.to_string(),
                r.reward.r_conf.to_string(),
                r.reward.r_div.to_string(),
                r.reward.r_final.to_string(),
                r.admitted.to_string(),
                r.prototype_updated.to_string(),
            ])
            .map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(|e| Error::io("records", e))?;
        self.inner
            .into_inner()
            .map_err(|e| Error::io("records", e.into_error()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("records", io),
        other => Error::InvalidBank(format!("{other:?}")),
    }
}

/// Writes the reward trajectory and dispersion snapshots as long-format CSV.
pub fn write_trajectories<W: Write>(report: &RunReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["series", "samples", "class", "value"])
        .map_err(csv_err)?;
    for (i, r) in report.reward_trajectory.iter().enumerate() {
        w.write_record(["r_final", &(i + 1).to_string(), "", &r.to_string()])
            .map_err(csv_err)?;
    }
    for snap in &report.dispersion_trajectory {
        for (c, v) in snap.per_class.iter().enumerate() {
            w.write_record([
                "dispersion",
                &snap.samples.to_string(),
                &c.to_string(),
                &v.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("trajectories", e))
}
