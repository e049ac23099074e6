//! Little-endian binary bank format.
//!
//! ```text
//! header (24 bytes)
//!   magic            4 bytes  "BPRE"
//!   version          u32      1
//!   dim              u32
//!   classes          u32
//!   samples          u32
//!   views_per_sample u32      N if every sample has N views, else 0
//! text embeddings    classes * dim * f32, row-major
//! per sample block
//!   views            u32
//!   has_label        u8       0 or 1
//!   label            u32      0 when has_label is 0
//!   view features    views * dim * f32, row-major
//! ```
//!
//! Class names and provenance live in a JSON manifest next to the file.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::{default_class_names, manifest_path, repair_unit, EmbeddingBank, Manifest};
use crate::engine::TestSample;
use crate::error::{Error, Result};
use crate::numkit::FeatureVector;

pub const MAGIC: [u8; 4] = *b"BPRE";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 24;
/// View count, label flag and label of each sample block.
pub const BLOCK_OVERHEAD: u64 = 9;

/// Upper bound on any count field, to refuse absurd allocations.
const MAX_COUNT: u32 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BankHeader {
    pub version: u32,
    pub dim: usize,
    pub num_classes: usize,
    pub num_samples: usize,
    /// 0 when samples have differing view counts.
    pub views_per_sample: usize,
}

/// Exact encoded size of `bank` in bytes.
pub fn encoded_len(bank: &EmbeddingBank) -> u64 {
    let d = bank.dim() as u64;
    let views: u64 = bank.samples.iter().map(|s| s.views.len() as u64).sum();
    HEADER_LEN
        + 4 * d * (bank.num_classes() as u64 + views)
        + BLOCK_OVERHEAD * bank.samples.len() as u64
}

fn put_u32<W: Write>(w: &mut W, v: usize, what: &str) -> std::io::Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| std::io::Error::new(ErrorKind::InvalidInput, format!("{what} exceeds u32")))?;
    w.write_all(&v.to_le_bytes())
}

fn put_vector<W: Write>(w: &mut W, v: &FeatureVector) -> std::io::Result<()> {
    for x in v.as_slice() {
        w.write_all(&(*x as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Encodes `bank` to `w`, returning the number of bytes written.
pub fn encode_bank<W: Write>(bank: &EmbeddingBank, w: &mut W) -> Result<u64> {
    bank.validate()?;
    let io = |e| Error::io("<bank stream>", e);
    let uniform = bank
        .samples
        .first()
        .map(|s| s.views.len())
        .filter(|n| bank.samples.iter().all(|s| s.views.len() == *n))
        .unwrap_or(0);

    w.write_all(&MAGIC).map_err(io)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
    put_u32(w, bank.dim(), "dim").map_err(io)?;
    put_u32(w, bank.num_classes(), "classes").map_err(io)?;
    put_u32(w, bank.samples.len(), "samples").map_err(io)?;
    put_u32(w, uniform, "views").map_err(io)?;
    for t in &bank.text_embeddings {
        put_vector(w, t).map_err(io)?;
    }
    for s in &bank.samples {
        put_u32(w, s.views.len(), "views").map_err(io)?;
        w.write_all(&[u8::from(s.label.is_some())]).map_err(io)?;
        put_u32(w, s.label.unwrap_or(0), "label").map_err(io)?;
        for v in &s.views {
            put_vector(w, v).map_err(io)?;
        }
    }
    Ok(encoded_len(bank))
}

/// Writes the binary bank to `path` and its manifest to `<path>.json`.
pub fn write_bank(bank: &EmbeddingBank, path: &Path) -> Result<u64> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let n = encode_bank(bank, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))?;

    let mpath = manifest_path(path);
    let manifest = serde_json::to_string_pretty(&Manifest::for_bank(bank))?;
    std::fs::write(&mpath, manifest).map_err(|e| Error::io(&mpath, e))?;
    Ok(n)
}

/// Streaming decoder: parses the header and text embeddings eagerly, then
/// yields one sample per iteration.
pub struct BankReader<R: Read> {
    reader: R,
    header: BankHeader,
    text: Vec<FeatureVector>,
    next: usize,
    failed: bool,
}

impl<R: Read> BankReader<R> {
    pub fn new(mut reader: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut reader, &mut magic, "magic")?;
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = read_u32(&mut reader, "version")?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dim = read_count(&mut reader, "dim")?;
        let num_classes = read_count(&mut reader, "classes")?;
        let num_samples = read_count(&mut reader, "samples")?;
        let views_per_sample = read_count(&mut reader, "views per sample")?;
        if dim == 0 {
            return Err(Error::CorruptPayload("dimension is zero".into()));
        }
        if num_classes < 2 {
            return Err(Error::InvalidBank(format!(
                "{num_classes} classes; at least 2 required"
            )));
        }
        let header = BankHeader {
            version,
            dim,
            num_classes,
            num_samples,
            views_per_sample,
        };
        let mut text = Vec::with_capacity(num_classes);
        for c in 0..num_classes {
            text.push(read_vector(&mut reader, dim, &|| {
                format!("text embedding {c}")
            })?);
        }
        Ok(Self {
            reader,
            header,
            text,
            next: 0,
            failed: false,
        })
    }

    pub fn header(&self) -> &BankHeader {
        &self.header
    }

    pub fn text_embeddings(&self) -> &[FeatureVector] {
        &self.text
    }

    fn read_sample(&mut self) -> Result<TestSample> {
        let id = self.next;
        let views = read_count(&mut self.reader, "view count")?;
        if views == 0 {
            return Err(Error::InvalidBank(format!("sample {id} has no views")));
        }
        if self.header.views_per_sample != 0 && views != self.header.views_per_sample {
            return Err(Error::CorruptPayload(format!(
                "sample {id} has {views} views, header says {}",
                self.header.views_per_sample
            )));
        }
        let mut flag = [0u8; 1];
        read_exact(&mut self.reader, &mut flag, "label flag")?;
        let raw_label = read_u32(&mut self.reader, "label")? as usize;
        let label = match flag[0] {
            0 => None,
            1 if raw_label < self.header.num_classes => Some(raw_label),
            1 => {
                return Err(Error::InvalidBank(format!(
                    "sample {id} label {raw_label} out of range for {} classes",
                    self.header.num_classes
                )))
            }
            other => {
                return Err(Error::CorruptPayload(format!(
                    "sample {id} label flag {other}"
                )))
            }
        };
        let mut out = Vec::with_capacity(views);
        for j in 0..views {
            out.push(read_vector(&mut self.reader, self.header.dim, &|| {
                format!("sample {id} view {j}")
            })?);
        }
        Ok(TestSample {
            sample_id: id as u64,
            views: out,
            label,
        })
    }

    fn check_eof(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        loop {
            match self.reader.read(&mut probe) {
                Ok(0) => return Ok(()),
                Ok(_) => {
                    return Err(Error::CorruptPayload(
                        "trailing bytes after last sample".into(),
                    ))
                }
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(e) => return Err(Error::io("<bank stream>", e)),
            }
        }
    }
}

impl<R: Read> Iterator for BankReader<R> {
    type Item = Result<TestSample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        if self.next == self.header.num_samples {
            self.next += 1;
            return match self.check_eof() {
                Ok(()) => None,
                Err(e) => {
                    self.failed = true;
                    Some(Err(e))
                }
            };
        }
        if self.next > self.header.num_samples {
            return None;
        }
        let out = self.read_sample();
        self.next += 1;
        if out.is_err() {
            self.failed = true;
        }
        Some(out)
    }
}

/// Decodes a complete bank from `r`. Class names default to `class_<i>`.
pub fn decode_bank<R: Read>(r: R) -> Result<EmbeddingBank> {
    let mut reader = BankReader::new(r)?;
    let mut samples = Vec::with_capacity(reader.header.num_samples.min(1 << 16));
    for s in reader.by_ref() {
        samples.push(s?);
    }
    let c = reader.header.num_classes;
    Ok(EmbeddingBank {
        class_names: default_class_names(c),
        text_embeddings: reader.text,
        samples,
        source: String::new(),
        spec: None,
    })
}

/// Reads a binary bank and, when present, its manifest.
pub fn read_bank(path: &Path) -> Result<EmbeddingBank> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bank = decode_bank(BufReader::new(file))?;
    bank.source = path.display().to_string();
    let mpath = manifest_path(path);
    match std::fs::read_to_string(&mpath) {
        Ok(text) => {
            let manifest: Manifest = serde_json::from_str(&text)?;
            if manifest.class_names.len() != bank.num_classes() {
                return Err(Error::InvalidBank(format!(
                    "manifest lists {} classes, bank has {}",
                    manifest.class_names.len(),
                    bank.num_classes()
                )));
            }
            bank.class_names = manifest.class_names;
            bank.source = manifest.source;
            bank.spec = manifest.spec;
        }
        Err(e) if e.kind() == ErrorKind::NotFound => {}
        Err(e) => return Err(Error::io(&mpath, e)),
    }
    Ok(bank)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            Error::CorruptPayload(format!("truncated while reading {what}"))
        } else {
            Error::io("<bank stream>", e)
        }
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_count<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = read_u32(r, what)?;
    if v > MAX_COUNT {
        return Err(Error::CorruptPayload(format!("{what} {v} exceeds limit")));
    }
    Ok(v as usize)
}

fn read_vector<R: Read>(
    r: &mut R,
    dim: usize,
    context: &dyn Fn() -> String,
) -> Result<FeatureVector> {
    let mut buf = vec![0u8; 4 * dim];
    read_exact(r, &mut buf, &context())?;
    let values: Vec<f64> = buf
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    repair_unit(values, context)
}
