//! Human-editable CSV fixtures.
//!
//! One vector per row: `kind,id,view,label,x_0,...,x_{d-1}`.
//!
//! * `kind` is `text` or `view`.
//! * For `text` rows `id` is the class id (rows must cover `0..C` in
//!   order); `view` and `label` are ignored and may be empty.
//! * For `view` rows `id` is the sample id; a sample's rows are contiguous
//!   with `view` counting up from 0, and `label` is empty or the same class
//!   id on every row.
//!
//! A leading header row whose first field is `kind` is skipped, as are
//! lines starting with `#`.

use std::io::Read;
use std::path::Path;

use super::{default_class_names, repair_unit, EmbeddingBank};
use crate::engine::TestSample;
use crate::error::{Error, Result};
use crate::numkit::FeatureVector;

pub fn read_csv_bank(path: &Path) -> Result<EmbeddingBank> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bank = parse_csv_bank(file)?;
    bank.source = path.display().to_string();
    Ok(bank)
}

pub fn parse_csv_bank<R: Read>(reader: R) -> Result<EmbeddingBank> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut dim: Option<usize> = None;
    let mut text: Vec<FeatureVector> = Vec::new();
    let mut samples: Vec<TestSample> = Vec::new();
    let mut seen_view = false;

    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(i as u64 + 1, |p| p.line());
        let perr = |message: String| Error::Parse { line, message };

        if i == 0 && row.get(0) == Some("kind") {
            continue;
        }
        if row.len() < 5 {
            return Err(perr(format!(
                "expected at least 5 fields, found {}",
                row.len()
            )));
        }
        let values = row
            .iter()
            .skip(4)
            .map(|f| {
                f.parse::<f32>()
                    .map(f64::from)
                    .map_err(|_| perr(format!("bad float '{f}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(perr(format!(
                    "expected {d} coordinates, found {}",
                    values.len()
                )))
            }
            Some(_) => {}
        }
        let id: u64 = row[1]
            .parse()
            .map_err(|_| perr(format!("bad id '{}'", &row[1])))?;

        match &row[0] {
            "text" => {
                if seen_view {
                    return Err(perr("text rows must precede view rows".into()));
                }
                if id as usize != text.len() {
                    return Err(perr(format!(
                        "expected class id {}, found {id}",
                        text.len()
                    )));
                }
                let c = text.len();
                text.push(repair_unit(values, || {
                    format!("line {line}: text embedding {c}")
                })?);
            }
            "view" => {
                seen_view = true;
                let view: usize = row[2]
                    .parse()
                    .map_err(|_| perr(format!("bad view index '{}'", &row[2])))?;
                let label = if row[3].is_empty() {
                    None
                } else {
                    Some(
                        row[3]
                            .parse::<usize>()
                            .map_err(|_| perr(format!("bad label '{}'", &row[3])))?,
                    )
                };
                let feature =
                    repair_unit(values, || format!("line {line}: sample {id} view {view}"))?;
                let continues = samples.last().is_some_and(|s| s.sample_id == id);
                if continues {
                    let s = samples.last_mut().expect("checked above");
                    if view != s.views.len() {
                        return Err(perr(format!(
                            "expected view {}, found {view}",
                            s.views.len()
                        )));
                    }
                    if label != s.label {
                        return Err(perr(format!(
                            "label differs from earlier views of sample {id}"
                        )));
                    }
                    s.views.push(feature);
                } else {
                    if samples.iter().any(|s| s.sample_id == id) {
                        return Err(perr(format!("rows of sample {id} are not contiguous")));
                    }
                    if view != 0 {
                        return Err(perr(format!("sample {id} starts at view {view}")));
                    }
                    samples.push(TestSample {
                        sample_id: id,
                        views: vec![feature],
                        label,
                    });
                }
            }
            other => return Err(perr(format!("unknown row kind '{other}'"))),
        }
    }

    let bank = EmbeddingBank {
        class_names: default_class_names(text.len()),
        text_embeddings: text,
        samples,
        source: String::new(),
        spec: None,
    };
    bank.validate()?;
    Ok(bank)
}

/// Writes `bank` in the fixture schema with single-precision coordinates,
/// matching what the binary encoding stores.
pub fn write_csv_bank<W: std::io::Write>(bank: &EmbeddingBank, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = bank.dim();
    let mut header: Vec<String> = ["kind", "id", "view", "label"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..d).map(|i| format!("x{i}")));
    let io = |e: csv::Error| Error::InvalidBank(e.to_string());
    w.write_record(&header).map_err(io)?;
    let coords = |v: &FeatureVector| {
        v.as_slice()
            .iter()
            .map(|x| (*x as f32).to_string())
            .collect::<Vec<_>>()
    };
    for (c, t) in bank.text_embeddings.iter().enumerate() {
        let mut row = vec![
            "text".to_string(),
            c.to_string(),
            String::new(),
            String::new(),
        ];
        row.extend(coords(t));
        w.write_record(&row).map_err(io)?;
    }
    for s in &bank.samples {
        let label = s.label.map(|l| l.to_string()).unwrap_or_default();
        for (j, v) in s.views.iter().enumerate() {
            let mut row = vec![
                "view".to_string(),
                s.sample_id.to_string(),
                j.to_string(),
                label.clone(),
            ];
            row.extend(coords(v));
            w.write_record(&row).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
