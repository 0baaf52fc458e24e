//! Score-record data model: loading, validation, saving, and split selection.
//!
//! A dataset is an ordered list of per-utterance records. Each record carries
//! the FAD scores of `n` detection systems (probabilities of being bona fide,
//! in `[0, 1]`), the MOS predictions of `m` quality predictors (in `[0, 5]`)
//! and optionally the fused MOS.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FAD_RANGE: (f64, f64) = (0.0, 1.0);
pub const MOS_RANGE: (f64, f64) = (0.0, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Bonafide,
    Spoof,
    Unknown,
}

impl Label {
    /// Training target: bona fide is the positive class.
    pub fn target(self) -> Option<f64> {
        match self {
            Label::Bonafide => Some(1.0),
            Label::Spoof => Some(0.0),
            Label::Unknown => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Bonafide => "bonafide",
            Label::Spoof => "spoof",
            Label::Unknown => "unknown",
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bonafide" => Ok(Label::Bonafide),
            "spoof" => Ok(Label::Spoof),
            "unknown" => Ok(Label::Unknown),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Eval,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Eval];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Eval => "eval",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "eval" => Ok(Split::Eval),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// One utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRecord {
    pub utt_id: String,
    pub label: Label,
    pub split: Split,
    pub fad: Vec<f64>,
    #[serde(default)]
    pub mos: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mos_fused: Option<f64>,
}

impl ScoreRecord {
    /// Checks the per-record invariants (ranges, finiteness, labelled training data).
    pub fn validate(&self) -> Result<()> {
        check_range(&self.utt_id, "fad", &self.fad, FAD_RANGE)?;
        check_range(&self.utt_id, "mos", &self.mos, MOS_RANGE)?;
        if let Some(z) = self.mos_fused {
            check_range(&self.utt_id, "mos_fused", &[z], MOS_RANGE)?;
        }
        if self.fad.is_empty() {
            return Err(Error::record(&self.utt_id, "fad vector is empty"));
        }
        if self.label == Label::Unknown && self.split != Split::Eval {
            return Err(Error::record(
                &self.utt_id,
                format!("label 'unknown' is only allowed in the eval split, found in {}", self.split),
            ));
        }
        Ok(())
    }
}

fn check_range(utt_id: &str, field: &str, values: &[f64], (lo, hi): (f64, f64)) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::record(utt_id, format!("{field}[{i}] is not finite ({v})")));
        }
        if v < lo || v > hi {
            return Err(Error::record(
                utt_id,
                format!("{field}[{i}] = {v} is outside [{lo}, {hi}]"),
            ));
        }
    }
    Ok(())
}

/// An ordered, validated collection of records with uniform dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<ScoreRecord>,
    fad_dim: usize,
    mos_dim: usize,
}

impl Dataset {
    pub fn empty(fad_dim: usize, mos_dim: usize) -> Self {
        Dataset {
            records: Vec::new(),
            fad_dim,
            mos_dim,
        }
    }

    /// Builds a dataset, taking the dimensions from the first record.
    /// An empty record list yields a dataset with both dimensions zero.
    pub fn new(records: Vec<ScoreRecord>) -> Result<Self> {
        let (fad_dim, mos_dim) = records
            .first()
            .map(|r| (r.fad.len(), r.mos.len()))
            .unwrap_or((0, 0));
        Self::with_dims(records, fad_dim, mos_dim)
    }

    pub fn with_dims(records: Vec<ScoreRecord>, fad_dim: usize, mos_dim: usize) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            validate_in_dataset(r, fad_dim, mos_dim, &mut seen)?;
        }
        Ok(Dataset {
            records,
            fad_dim,
            mos_dim,
        })
    }

    /// Subset of records in original order; dimensions are kept.
    pub(crate) fn subset<F>(&self, mut keep: F) -> Dataset
    where
        F: FnMut(&ScoreRecord) -> bool,
    {
        Dataset {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            fad_dim: self.fad_dim,
            mos_dim: self.mos_dim,
        }
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ScoreRecord> {
        self.records
    }

    pub fn fad_dim(&self) -> usize {
        self.fad_dim
    }

    pub fn mos_dim(&self) -> usize {
        self.mos_dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ScoreRecord> {
        self.records.iter()
    }

    /// Labels as training targets (bona fide = 1). Fails on unlabelled records.
    pub fn targets(&self) -> Result<Vec<f64>> {
        self.records
            .iter()
            .map(|r| {
                r.label
                    .target()
                    .ok_or_else(|| Error::record(&r.utt_id, "record is unlabelled"))
            })
            .collect()
    }

    /// Concatenates datasets with identical dimensions.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let Some(first) = parts.first() else {
            return Ok(Dataset::empty(0, 0));
        };
        let records = parts.iter().flat_map(|d| d.records.iter().cloned()).collect();
        Dataset::with_dims(records, first.fad_dim, first.mos_dim)
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a ScoreRecord;
    type IntoIter = std::slice::Iter<'a, ScoreRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

fn validate_in_dataset(
    r: &ScoreRecord,
    fad_dim: usize,
    mos_dim: usize,
    seen: &mut HashSet<String>,
) -> Result<()> {
    r.validate()?;
    if r.fad.len() != fad_dim {
        return Err(Error::record(
            &r.utt_id,
            format!("fad has {} values, dataset expects {fad_dim}", r.fad.len()),
        ));
    }
    if r.mos.len() != mos_dim {
        return Err(Error::record(
            &r.utt_id,
            format!("mos has {} values, dataset expects {mos_dim}", r.mos.len()),
        ));
    }
    if !seen.insert(r.utt_id.clone()) {
        return Err(Error::record(&r.utt_id, "duplicate utt_id"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    /// `.csv` means CSV, anything else JSONL.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

pub fn load_records(path: &Path, format: Format) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        Format::Jsonl => load_jsonl(path, BufReader::new(file)),
        Format::Csv => load_csv(path, BufReader::new(file)),
    }
}

pub fn save_records(ds: &Dataset, path: &Path, format: Format) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Jsonl => write_jsonl(ds, &mut out).map_err(|e| Error::io(path, e))?,
        Format::Csv => write_csv(ds, &mut out).map_err(|e| Error::io(path, e))?,
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn load_jsonl<R: BufRead>(path: &Path, reader: R) -> Result<Dataset> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut dims: Option<(usize, usize)> = None;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScoreRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: e.to_string(),
        })?;
        let (n, m) = *dims.get_or_insert((rec.fad.len(), rec.mos.len()));
        validate_in_dataset(&rec, n, m, &mut seen).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    let (n, m) = dims.unwrap_or((0, 0));
    Ok(Dataset {
        records,
        fad_dim: n,
        mos_dim: m,
    })
}

fn write_jsonl<W: Write>(ds: &Dataset, out: &mut W) -> std::io::Result<()> {
    for r in &ds.records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn csv_header(fad_dim: usize, mos_dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["utt_id", "label", "split", "mos_fused"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..fad_dim).map(|i| format!("fad_{i}")));
    h.extend((0..mos_dim).map(|i| format!("mos_{i}")));
    h
}

fn write_csv<W: Write>(ds: &Dataset, out: &mut W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(ds.fad_dim, ds.mos_dim))?;
    for r in &ds.records {
        let mut row = vec![
            r.utt_id.clone(),
            r.label.as_str().to_string(),
            r.split.as_str().to_string(),
            r.mos_fused.map(|z| z.to_string()).unwrap_or_default(),
        ];
        row.extend(r.fad.iter().map(f64::to_string));
        row.extend(r.mos.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()
}

fn load_csv<R: BufRead>(path: &Path, reader: R) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let fad_dim = header.iter().filter(|h| h.starts_with("fad_")).count();
    let mos_dim = header
        .iter()
        .filter(|h| h.starts_with("mos_") && *h != "mos_fused")
        .count();
    let expected = csv_header(fad_dim, mos_dim);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(parse_err(
            1,
            format!("unexpected header, expected `{}`", expected.join(",")),
        ));
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in rdr.records().enumerate() {
        let lineno = i + 2;
        let row = row.map_err(|e| parse_err(lineno, e.to_string()))?;
        let num = |s: &str, field: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("{field}: {e}")))
        };
        let utt_id = row[0].to_string();
        let label = row[1].parse().map_err(|e| parse_err(lineno, e))?;
        let split = row[2].parse().map_err(|e| parse_err(lineno, e))?;
        let mos_fused = match row[3].trim() {
            "" => None,
            s => Some(num(s, "mos_fused")?),
        };
        let fad = (0..fad_dim)
            .map(|k| num(&row[4 + k], &expected[4 + k]))
            .collect::<Result<Vec<_>>>()?;
        let mos = (0..mos_dim)
            .map(|k| num(&row[4 + fad_dim + k], &expected[4 + fad_dim + k]))
            .collect::<Result<Vec<_>>>()?;
        let rec = ScoreRecord {
            utt_id,
            label,
            split,
            fad,
            mos,
            mos_fused,
        };
        validate_in_dataset(&rec, fad_dim, mos_dim, &mut seen)
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        records.push(rec);
    }
    Ok(Dataset {
        records,
        fad_dim,
        mos_dim,
    })
}

pub fn select_split(ds: &Dataset, split: Split) -> Dataset {
    ds.subset(|r| r.split == split)
}
