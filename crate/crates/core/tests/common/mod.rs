//! Independent brute-force reference implementations and fixture helpers
//! shared by the integration tests. Nothing here calls into the library's
//! numeric code.

#![allow(dead_code)]

use bpre::data_io::EmbeddingBank;
use bpre::{FeatureVector, TestSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v = random_vec(rng, d);
        let n = norm(&v);
        if n > 1e-3 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

pub fn random_distribution(rng: &mut ChaCha8Rng, c: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..c)
        .map(|_| rng.random_range(0.0..1.0f64).powi(3) + 1e-9)
        .collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

pub fn fv(v: &[f64]) -> FeatureVector {
    FeatureVector::new(v.to_vec()).unwrap()
}

pub fn norm(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x * x;
    }
    s.sqrt()
}

pub fn naive_cos(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
    }
    (ab / (norm(a) * norm(b))).clamp(-1.0, 1.0)
}

pub fn naive_softmax(s: &[f64], t: f64) -> Vec<f64> {
    // shift by the max only to survive large logits; summation is plain
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|x| ((x - m) / t).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

pub fn naive_entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h / (p.len() as f64).ln()
}

pub fn first_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

pub fn zero_shot(f: &[f64], text: &[Vec<f64>], tau_clip: f64) -> Vec<f64> {
    let s: Vec<f64> = text.iter().map(|t| naive_cos(f, t)).collect();
    naive_softmax(&s, tau_clip)
}

pub fn r_sim(f: &[f64], protos: &[Vec<f64>]) -> f64 {
    protos.iter().map(|v| naive_cos(f, v)).sum::<f64>() / protos.len() as f64
}

pub fn r_conf(p: &[f64]) -> f64 {
    1.0 - naive_entropy(p)
}

pub fn r_div(f: &[f64], memory: &[Vec<f64>]) -> f64 {
    if memory.is_empty() {
        return 1.0;
    }
    1.0 - memory
        .iter()
        .map(|m| naive_cos(f, m))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn r_combined(sim: f64, conf: f64, div: f64, l: (f64, f64, f64)) -> f64 {
    l.0 * sim + l.1 * conf + l.2 * div
}

pub fn r_final(r: f64, step: u64, r_min: f64, warmup: u64) -> f64 {
    let k = if warmup == 0 {
        1.0
    } else {
        (step as f64 / warmup as f64).min(1.0)
    };
    r_min + (r - r_min) * k
}

pub fn weights(rewards: &[f64], tau: f64) -> Vec<f64> {
    naive_softmax(rewards, tau)
}

pub fn momentum_update(
    v: &[f64],
    feats: &[Vec<f64>],
    rewards: &[f64],
    m: f64,
    tau: f64,
) -> Vec<f64> {
    let w = weights(rewards, tau);
    let mut out = vec![0.0; v.len()];
    for i in 0..v.len() {
        let mut t = 0.0;
        for (k, f) in feats.iter().enumerate() {
            t += w[k] * f[i];
        }
        out[i] = m * v[i] + (1.0 - m) * t;
    }
    let n = norm(&out);
    out.iter().map(|x| x / n).collect()
}

pub fn dispersion(feats: &[Vec<f64>]) -> f64 {
    let k = feats.len();
    if k < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    let mut n = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            s += 1.0 - naive_cos(&feats[i], &feats[j]);
            n += 1.0;
        }
    }
    s / n
}

/// Small random bank with unit vectors; `labels` controls label presence.
pub fn random_bank(
    seed: u64,
    c: usize,
    d: usize,
    n: usize,
    views: usize,
    labels: bool,
) -> EmbeddingBank {
    let mut r = rng(seed);
    let text: Vec<FeatureVector> = (0..c).map(|_| fv(&random_unit(&mut r, d))).collect();
    let samples = (0..n)
        .map(|i| {
            let nv = if views == 0 {
                r.random_range(1..5)
            } else {
                views
            };
            TestSample {
                sample_id: i as u64,
                views: (0..nv).map(|_| fv(&random_unit(&mut r, d))).collect(),
                label: labels.then(|| r.random_range(0..c)),
            }
        })
        .collect();
    EmbeddingBank {
        class_names: (0..c).map(|i| format!("class_{i}")).collect(),
        text_embeddings: text,
        samples,
        source: format!("test:{seed}"),
        spec: None,
    }
}

pub fn as_rows(v: &[FeatureVector]) -> Vec<Vec<f64>> {
    v.iter().map(|x| x.as_slice().to_vec()).collect()
}

/// (feature, r_final, entropy, step)
pub type OracleEntry = (Vec<f64>, f64, f64, u64);

/// Straight-line re-implementation of one adaptation step with default
/// gating: no view gate, per-class counters, similarity over all
/// prototypes.
pub struct OracleEngine {
    pub text: Vec<Vec<f64>>,
    pub protos: Vec<Vec<f64>>,
    pub caches: Vec<Vec<OracleEntry>>,
    pub counters: Vec<usize>,
    pub memory: Vec<Vec<f64>>,
    pub step: u64,
    pub cfg: bpre::EngineConfig,
}

pub struct OracleStep {
    pub predicted: usize,
    pub r_final: f64,
    pub admitted: bool,
    pub updated: bool,
}

impl OracleEngine {
    pub fn new(text: &[Vec<f64>], cfg: bpre::EngineConfig) -> Self {
        let text: Vec<Vec<f64>> = text
            .iter()
            .map(|t| t.iter().map(|x| x / norm(t)).collect())
            .collect();
        let c = text.len();
        Self {
            protos: text.clone(),
            text,
            caches: vec![Vec::new(); c],
            counters: vec![0; c],
            memory: Vec::new(),
            step: 0,
            cfg,
        }
    }

    pub fn aggregate(&self, views: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let c = self.text.len();
        let scored: Vec<(f64, usize, Vec<f64>)> = views
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let p = zero_shot(v, &self.text, self.cfg.tau_clip);
                (naive_entropy(&p), i, p)
            })
            .collect();
        let mut order = scored.clone();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let keep = ((self.cfg.rho * views.len() as f64).ceil() as usize).clamp(1, views.len());
        let kept = &order[..keep];
        let mut p = vec![0.0; c];
        let mut f = vec![0.0; views[0].len()];
        for (_, i, pi) in kept {
            for k in 0..c {
                p[k] += pi[k] / keep as f64;
            }
            for k in 0..f.len() {
                f[k] += views[*i][k] / keep as f64;
            }
        }
        let n = norm(&f);
        (f.iter().map(|x| x / n).collect(), p)
    }

    pub fn step(&mut self, views: &[Vec<f64>]) -> OracleStep {
        let cfg = self.cfg.clone();
        let (f, p) = self.aggregate(views);
        let fused: Vec<f64> = (0..self.text.len())
            .map(|k| {
                cfg.beta * naive_cos(&f, &self.text[k]) + cfg.alpha * naive_cos(&f, &self.protos[k])
            })
            .collect();
        let pred = first_argmax(&fused);
        let r = r_combined(
            r_sim(&f, &self.protos),
            r_conf(&p),
            r_div(&f, &self.memory),
            (cfg.lambda_sim, cfg.lambda_conf, cfg.lambda_div),
        );
        let rf = r_final(r, self.step, cfg.r_min, cfg.warmup_steps);
        let h = naive_entropy(&p);

        let mut admitted = false;
        if h < cfg.entropy_threshold {
            let cache = &mut self.caches[pred];
            if cache.len() < cfg.cache_capacity {
                cache.push((f.clone(), rf, h, self.step));
                admitted = true;
            } else {
                // highest entropy, older step on ties
                let mut worst = 0;
                for i in 1..cache.len() {
                    let (a, b) = (&cache[i], &cache[worst]);
                    if a.2 > b.2 || (a.2 == b.2 && a.3 < b.3) {
                        worst = i;
                    }
                }
                if h < cache[worst].2 {
                    cache[worst] = (f.clone(), rf, h, self.step);
                    admitted = true;
                }
            }
        }

        self.memory.push(f.clone());
        if self.memory.len() > cfg.memory_capacity {
            self.memory.remove(0);
        }

        let mut updated = false;
        if cfg.update_period > 0 {
            if self.counters[pred] < cfg.update_period {
                self.counters[pred] += 1;
            }
            if self.counters[pred] >= cfg.update_period && !self.caches[pred].is_empty() {
                let feats: Vec<Vec<f64>> = self.caches[pred].iter().map(|e| e.0.clone()).collect();
                let rewards: Vec<f64> = self.caches[pred].iter().map(|e| e.1).collect();
                self.protos[pred] =
                    momentum_update(&self.protos[pred], &feats, &rewards, cfg.momentum, cfg.tau);
                self.counters[pred] = 0;
                updated = true;
            }
        }
        self.step += 1;
        OracleStep {
            predicted: pred,
            r_final: rf,
            admitted,
            updated,
        }
    }
}

pub fn error_kind(e: &bpre::Error) -> &'static str {
    use bpre::Error::*;
    match e {
        BadMagic(_) => "BadMagic",
        UnsupportedVersion(_) => "UnsupportedVersion",
        CorruptPayload(_) => "CorruptPayload",
        NormViolation { .. } => "NormViolation",
        InvalidBank(_) => "InvalidBank",
        Parse { .. } => "Parse",
        Io { .. } => "Io",
        _ => "other",
    }
}

/// Reference bank for the corrupted-file corpus: C = 3, d = 4, four
/// labeled samples with two views each.
pub fn corpus_base() -> EmbeddingBank {
    let mut b = random_bank(99, 3, 4, 4, 2, true);
    // exactly representable coordinates keep CSV edits simple
    b.text_embeddings = vec![
        fv(&[1.0, 0.0, 0.0, 0.0]),
        fv(&[0.0, 1.0, 0.0, 0.0]),
        fv(&[0.0, 0.0, 1.0, 0.0]),
    ];
    for (i, s) in b.samples.iter_mut().enumerate() {
        s.label = Some(i % 3);
        s.views = vec![fv(&[0.6, 0.8, 0.0, 0.0]), fv(&[0.0, 0.0, 0.8, 0.6])];
    }
    b
}

pub const TEXT_START: usize = 24;
pub const BLOCKS_START: usize = 24 + 3 * 4 * 4;
pub const BLOCK_LEN: usize = 4 + 1 + 4 + 2 * 4 * 4;

pub struct CorruptCase {
    pub name: &'static str,
    pub bytes: Vec<u8>,
    pub csv: bool,
    pub expected: &'static str,
}

fn put(bytes: &mut [u8], at: usize, v: u32) {
    bytes[at..at + 4].copy_from_slice(&v.to_le_bytes());
}

fn put_f32(bytes: &mut [u8], at: usize, v: f32) {
    bytes[at..at + 4].copy_from_slice(&v.to_le_bytes());
}

pub fn corrupt_corpus() -> Vec<CorruptCase> {
    let bank = corpus_base();
    let mut good = Vec::new();
    bpre::data_io::encode_bank(&bank, &mut good).unwrap();
    let mut csv_good = Vec::new();
    bpre::data_io::write_csv_bank(&bank, &mut csv_good).unwrap();
    let csv_good = String::from_utf8(csv_good).unwrap();

    let edit = |f: &dyn Fn(&mut Vec<u8>)| {
        let mut b = good.clone();
        f(&mut b);
        b
    };
    let first_view = BLOCKS_START + 9;
    let mut cases = vec![
        ("empty file", Vec::new(), "CorruptPayload"),
        (
            "bad magic",
            edit(&|b| b[..4].copy_from_slice(b"XPRE")),
            "BadMagic",
        ),
        (
            "future version",
            edit(&|b| put(b, 4, 2)),
            "UnsupportedVersion",
        ),
        ("zero dimension", edit(&|b| put(b, 8, 0)), "CorruptPayload"),
        ("single class", edit(&|b| put(b, 12, 1)), "InvalidBank"),
        (
            "absurd sample count",
            edit(&|b| put(b, 16, 1 << 30)),
            "CorruptPayload",
        ),
        ("truncated header", good[..10].to_vec(), "CorruptPayload"),
        (
            "truncated text block",
            good[..TEXT_START + 20].to_vec(),
            "CorruptPayload",
        ),
        (
            "zero text embedding",
            edit(&|b| put_f32(b, TEXT_START, 0.0)),
            "NormViolation",
        ),
        (
            "count exceeds payload",
            edit(&|b| put(b, 16, 5)),
            "CorruptPayload",
        ),
        ("trailing bytes", edit(&|b| put(b, 16, 3)), "CorruptPayload"),
        (
            "view count disagrees with header",
            edit(&|b| put(b, BLOCKS_START, 3)),
            "CorruptPayload",
        ),
        (
            "bad label flag",
            edit(&|b| b[BLOCKS_START + 4] = 2),
            "CorruptPayload",
        ),
        (
            "label out of range",
            edit(&|b| put(b, BLOCKS_START + 5, 7)),
            "InvalidBank",
        ),
        (
            "nan coordinate",
            edit(&|b| put_f32(b, first_view, f32::NAN)),
            "NormViolation",
        ),
        (
            "unnormalized view",
            edit(&|b| put_f32(b, first_view, 1.5)),
            "NormViolation",
        ),
        (
            "sample without views",
            edit(&|b| put(b, BLOCKS_START + BLOCK_LEN, 0)),
            "InvalidBank",
        ),
        (
            "truncated last block",
            good[..good.len() - 3].to_vec(),
            "CorruptPayload",
        ),
    ]
    .into_iter()
    .map(|(name, bytes, expected)| CorruptCase {
        name,
        bytes,
        csv: false,
        expected,
    })
    .collect::<Vec<_>>();

    let csv_edit = |from: &str, to: &str| {
        assert!(csv_good.contains(from), "{from}");
        csv_good.replacen(from, to, 1).into_bytes()
    };
    cases.extend(
        [
            (
                "csv short row",
                csv_edit("view,1,0,1,0.6,0.8,0,0", "view,1,0,1,0.6,0.8,0"),
                "Parse",
            ),
            (
                "csv bad float",
                csv_edit("text,1,,,0,1,0,0", "text,1,,,0,one,0,0"),
                "Parse",
            ),
            (
                "csv label out of range",
                csv_good
                    .replace("view,2,0,2,", "view,2,0,9,")
                    .replace("view,2,1,2,", "view,2,1,9,")
                    .into_bytes(),
                "InvalidBank",
            ),
            (
                "csv unnormalized",
                csv_edit("text,0,,,1,0,0,0", "text,0,,,2,0,0,0"),
                "NormViolation",
            ),
        ]
        .into_iter()
        .map(|(name, bytes, expected)| CorruptCase {
            name,
            bytes,
            csv: true,
            expected,
        }),
    );
    cases
}
