//! Embedding bank containers, their on-disk encodings, and the synthetic
//! domain-shift generator.

mod binary;
mod csv_bank;
mod synth;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use binary::{
    decode_bank, encode_bank, encoded_len, read_bank, write_bank, BankHeader, BankReader,
    BLOCK_OVERHEAD, FORMAT_VERSION, HEADER_LEN, MAGIC,
};
pub use csv_bank::{parse_csv_bank, read_csv_bank, write_csv_bank};
pub use synth::{generate_synthetic, SynthSpec};

use crate::engine::TestSample;
use crate::error::{Error, Result};
use crate::numkit::FeatureVector;

/// Stored vectors must be unit norm within this after loading.
pub const UNIT_TOLERANCE: f64 = 1e-4;

/// Loaded vectors whose norm is off by more than this are rejected.
pub const REPAIR_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBank {
    pub class_names: Vec<String>,
    pub text_embeddings: Vec<FeatureVector>,
    pub samples: Vec<TestSample>,
    pub source: String,
    pub spec: Option<SynthSpec>,
}

impl EmbeddingBank {
    pub fn dim(&self) -> usize {
        self.text_embeddings.first().map_or(0, FeatureVector::dim)
    }

    pub fn num_classes(&self) -> usize {
        self.text_embeddings.len()
    }

    pub fn has_labels(&self) -> bool {
        self.samples.iter().any(|s| s.label.is_some())
    }

    /// Copy with every label removed.
    pub fn without_labels(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.label = None;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.num_classes();
        if c < 2 {
            return Err(Error::InvalidBank(format!(
                "{c} classes; at least 2 required"
            )));
        }
        if self.class_names.len() != c {
            return Err(Error::InvalidBank(format!(
                "{} class names for {c} classes",
                self.class_names.len()
            )));
        }
        let d = self.dim();
        let check = |v: &FeatureVector, what: &dyn Fn() -> String| -> Result<()> {
            if v.dim() != d {
                return Err(Error::InvalidBank(format!(
                    "{}: dimension {} != {d}",
                    what(),
                    v.dim()
                )));
            }
            if !v.is_unit(UNIT_TOLERANCE) {
                return Err(Error::NormViolation {
                    norm: v.norm(),
                    context: what(),
                });
            }
            Ok(())
        };
        for (i, t) in self.text_embeddings.iter().enumerate() {
            check(t, &|| format!("text embedding {i}"))?;
        }
        for s in &self.samples {
            if s.views.is_empty() {
                return Err(Error::InvalidBank(format!(
                    "sample {} has no views",
                    s.sample_id
                )));
            }
            if let Some(l) = s.label {
                if l >= c {
                    return Err(Error::InvalidBank(format!(
                        "sample {} label {l} out of range",
                        s.sample_id
                    )));
                }
            }
            for (j, v) in s.views.iter().enumerate() {
                check(v, &|| format!("sample {} view {j}", s.sample_id))?;
            }
        }
        Ok(())
    }
}

/// Sidecar JSON written next to a binary bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub class_names: Vec<String>,
    pub source: String,
    /// ISO-8601 creation time.
    pub created: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SynthSpec>,
}

impl Manifest {
    pub fn for_bank(bank: &EmbeddingBank) -> Self {
        Self {
            class_names: bank.class_names.clone(),
            source: bank.source.clone(),
            created: creation_timestamp(),
            spec: bank.spec.clone(),
        }
    }
}

/// `<bank path>.json`
pub fn manifest_path(bank_path: &Path) -> PathBuf {
    let mut s = bank_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Current UTC time, or `SOURCE_DATE_EPOCH` when set, as RFC 3339.
fn creation_timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    fixed
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn default_class_names(c: usize) -> Vec<String> {
    (0..c).map(|i| format!("class_{i}")).collect()
}

/// Applies the load-time norm policy to raw coordinates.
pub(crate) fn repair_unit(values: Vec<f64>, context: impl Fn() -> String) -> Result<FeatureVector> {
    let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > REPAIR_TOLERANCE {
        return Err(Error::NormViolation {
            norm,
            context: context(),
        });
    }
    FeatureVector::new(values.into_iter().map(|x| x / norm).collect())
}

/// Reads a bank, choosing the CSV reader for `.csv` paths.
pub fn load_bank(path: &Path) -> Result<EmbeddingBank> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => read_csv_bank(path),
        _ => read_bank(path),
    }
}
