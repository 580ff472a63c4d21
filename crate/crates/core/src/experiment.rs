//! Experiment records: ingestion from CSV, validation, JSON/CSV export and
//! per-record training budgets.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Columns every experiment CSV must carry.
pub const REQUIRED_COLUMNS: [&str; 5] = ["arch_id", "model_params", "train_tokens", "xi", "test_loss"];

/// Optional columns understood by the parser.
pub const OPTIONAL_COLUMNS: [&str; 3] = ["unique_tokens", "augmented", "wall_time_s"];

/// One training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub arch_id: String,
    /// Trainable parameter count N.
    pub model_params: u64,
    /// Tokens processed during training D.
    pub train_tokens: u64,
    /// FLOPs per parameter per token.
    pub xi: f64,
    pub test_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unique_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmented: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl ExperimentRecord {
    pub fn new(arch_id: impl Into<String>, model_params: u64, train_tokens: u64, xi: f64, test_loss: f64) -> Self {
        ExperimentRecord {
            arch_id: arch_id.into(),
            model_params,
            train_tokens,
            xi,
            test_loss,
            unique_tokens: None,
            augmented: None,
            wall_time_s: None,
        }
    }

    /// Nominal training compute `xi * N * D`.
    pub fn training_budget(&self) -> f64 {
        training_budget(self)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.model_params < 1 {
            return Err("model_params must be >= 1".into());
        }
        if self.train_tokens < 1 {
            return Err("train_tokens must be >= 1".into());
        }
        if !(self.xi.is_finite() && self.xi > 0.0) {
            return Err("xi must be a positive finite number".into());
        }
        if !(self.test_loss.is_finite() && self.test_loss > 0.0) {
            return Err("test_loss must be a positive finite number".into());
        }
        if self.unique_tokens == Some(0) {
            return Err("unique_tokens must be >= 1".into());
        }
        if let Some(w) = self.wall_time_s {
            if !(w.is_finite() && w > 0.0) {
                return Err("wall_time_s must be a positive finite number".into());
            }
        }
        Ok(())
    }
}

/// An ordered collection of experiment records.
///
/// Record order is the ingestion order; bootstrap indices refer to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDataset {
    pub records: Vec<ExperimentRecord>,
    pub source_digest: String,
}

impl ExperimentDataset {
    /// Builds a dataset from in-memory records. The digest is computed over
    /// the canonical CSV rendering.
    pub fn from_records(records: Vec<ExperimentRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, r) in records.iter().enumerate() {
            r.validate().map_err(|message| Error::Row { line: i + 2, message })?;
        }
        let mut ds = ExperimentDataset { records, source_digest: String::new() };
        ds.source_digest = digest_hex(ds.to_csv().as_bytes());
        Ok(ds)
    }

    /// Builds a dataset sharing this one's digest. Used for subsets and
    /// resamples.
    pub(crate) fn derived(&self, records: Vec<ExperimentRecord>) -> Self {
        ExperimentDataset { records, source_digest: self.source_digest.clone() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn min_loss(&self) -> f64 {
        self.records.iter().map(|r| r.test_loss).fold(f64::INFINITY, f64::min)
    }

    /// Canonical CSV rendering. Floats use the shortest representation that
    /// round-trips exactly.
    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
        header.extend_from_slice(&OPTIONAL_COLUMNS);
        wtr.write_record(&header).expect("write to Vec");
        for r in &self.records {
            wtr.write_record(&[
                r.arch_id.clone(),
                r.model_params.to_string(),
                r.train_tokens.to_string(),
                format_float(r.xi),
                format_float(r.test_loss),
                r.unique_tokens.map(|u| u.to_string()).unwrap_or_default(),
                r.augmented.map(|a| a.to_string()).unwrap_or_default(),
                r.wall_time_s.map(format_float).unwrap_or_default(),
            ])
            .expect("write to Vec");
        }
        String::from_utf8(wtr.into_inner().expect("flush Vec")).expect("csv output is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ds: ExperimentDataset = serde_json::from_str(text)?;
        if ds.records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, r) in ds.records.iter().enumerate() {
            r.validate().map_err(|message| Error::Row { line: i + 1, message })?;
        }
        Ok(ds)
    }
}

/// Hex-encoded SHA-256 of `bytes`.
pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn format_float(x: f64) -> String {
    // `Display` for f64 is the shortest exact round-trip representation.
    format!("{x}")
}

/// Parses an experiment CSV document.
pub fn parse_records(text: &str) -> Result<ExperimentDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let columns: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    for col in REQUIRED_COLUMNS {
        if !columns.contains_key(col) {
            return Err(Error::MissingColumn(col.to_string()));
        }
    }
    let col = |name: &str| columns.get(name).copied();

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(records.len() + 2);
        let row_err = |message: String| Error::Row { line, message };
        let field = |name: &str| col(name).and_then(|i| row.get(i)).unwrap_or("");
        let required = |name: &str| {
            let v = field(name);
            if v.is_empty() {
                Err(row_err(format!("missing value for `{name}`")))
            } else {
                Ok(v)
            }
        };

        let arch_id = required("arch_id")?.to_string();
        let model_params = parse_count(required("model_params")?).map_err(|m| row_err(format!("model_params: {m}")))?;
        let train_tokens = parse_count(required("train_tokens")?).map_err(|m| row_err(format!("train_tokens: {m}")))?;
        let xi = parse_real(required("xi")?).map_err(|m| row_err(format!("xi: {m}")))?;
        let test_loss = parse_real(required("test_loss")?).map_err(|m| row_err(format!("test_loss: {m}")))?;

        let unique_tokens = match field("unique_tokens") {
            "" => None,
            v => Some(parse_count(v).map_err(|m| row_err(format!("unique_tokens: {m}")))?),
        };
        let augmented = match field("augmented").to_ascii_lowercase().as_str() {
            "" => None,
            "true" | "1" | "yes" => Some(true),
            "false" | "0" | "no" => Some(false),
            other => return Err(row_err(format!("augmented: `{other}` is not a boolean"))),
        };
        let wall_time_s = match field("wall_time_s") {
            "" => None,
            v => Some(parse_real(v).map_err(|m| row_err(format!("wall_time_s: {m}")))?),
        };

        let record = ExperimentRecord { arch_id, model_params, train_tokens, xi, test_loss, unique_tokens, augmented, wall_time_s };
        record.validate().map_err(row_err)?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(ExperimentDataset { records, source_digest: digest_hex(text.as_bytes()) })
}

/// Accepts plain integers and integral scientific notation (`1e6`).
fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        if v == 0 {
            return Err("must be >= 1".into());
        }
        return Ok(v);
    }
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !x.is_finite() || x.fract() != 0.0 {
        return Err(format!("`{s}` is not an integer"));
    }
    if x < 1.0 {
        return Err("must be >= 1".into());
    }
    if x > u64::MAX as f64 {
        return Err(format!("`{s}` is out of range"));
    }
    Ok(x as u64)
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !x.is_finite() || x <= 0.0 {
        return Err(format!("`{s}` must be positive"));
    }
    Ok(x)
}

/// Records with the given `arch_id`, in original order.
pub fn filter_by_arch(dataset: &ExperimentDataset, arch_id: &str) -> Result<ExperimentDataset> {
    let records: Vec<_> = dataset.records.iter().filter(|r| r.arch_id == arch_id).cloned().collect();
    if records.is_empty() {
        return Err(Error::NoMatchingRecords(arch_id.to_string()));
    }
    Ok(dataset.derived(records))
}

/// Nominal training compute `C = xi * N * D`.
pub fn training_budget(record: &ExperimentRecord) -> f64 {
    record.xi * record.model_params as f64 * record.train_tokens as f64
}
