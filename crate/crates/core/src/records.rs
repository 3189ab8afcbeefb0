//! Experiment observations: one record per trained configuration, plus
//! dataset-level ingestion, validation, and filtering.
//!
//! CSV files need a header row with columns `n_params, d_tokens, r_tokens,
//! loss, benchmark` and optionally `seed, family`; extra columns are
//! ignored. JSON files hold an array of objects with the same field names.
//! Token counts are raw token integers; no unit conversion happens here.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One observed experiment point. JSON field names match the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(rename = "n_params")]
    pub model_params: u64,
    #[serde(rename = "d_tokens")]
    pub pretrain_tokens: u64,
    #[serde(rename = "r_tokens")]
    pub retrieval_tokens: u64,
    pub loss: f64,
    pub benchmark: String,
    #[serde(default)]
    pub seed: Option<String>,
    #[serde(default)]
    pub family: Option<String>,
}

impl RunRecord {
    /// Missing seed/family labels collapse to the empty label and form their
    /// own group in grouped validation.
    pub fn seed_label(&self) -> &str {
        self.seed.as_deref().unwrap_or("")
    }

    pub fn family_label(&self) -> &str {
        self.family.as_deref().unwrap_or("")
    }

    fn check(&self, row: usize) -> Result<()> {
        if self.model_params < 1 {
            return Err(Error::Domain {
                row,
                message: "n_params must be >= 1".into(),
            });
        }
        if self.pretrain_tokens < 1 {
            return Err(Error::Domain {
                row,
                message: "d_tokens must be >= 1".into(),
            });
        }
        if !(self.loss.is_finite() && self.loss > 0.0) {
            return Err(Error::Domain {
                row,
                message: format!("loss must be positive and finite, got {}", self.loss),
            });
        }
        if self.benchmark.is_empty() {
            return Err(Error::Domain {
                row,
                message: "benchmark label is empty".into(),
            });
        }
        Ok(())
    }

    fn key(&self) -> (u64, u64, u64, &str, &str) {
        (
            self.model_params,
            self.pretrain_tokens,
            self.retrieval_tokens,
            self.benchmark.as_str(),
            self.seed_label(),
        )
    }
}

/// Supported on-disk formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Json,
}

impl FileFormat {
    pub fn infer(path: &Path) -> FileFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => FileFormat::Json,
            _ => FileFormat::Csv,
        }
    }
}

/// An immutable, validated collection of run records in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<RunRecord>,
    pub source_path: String,
    /// SHA-256 of the bytes the dataset was built from.
    pub checksum: String,
}

impl Dataset {
    /// Builds a dataset from in-memory records, enforcing all record
    /// invariants and key uniqueness. The checksum is taken over the
    /// canonical CSV form.
    pub fn from_records(records: Vec<RunRecord>, source_label: &str) -> Result<Dataset> {
        if records.is_empty() {
            return Err(Error::EmptyInput);
        }
        validate_records(&records)?;
        let mut ds = Dataset {
            records,
            source_path: source_label.to_string(),
            checksum: String::new(),
        };
        ds.checksum = ds.canonical_checksum();
        Ok(ds)
    }

    /// Canonical CSV serialization: fixed column order, shortest
    /// round-trip float formatting, empty cells for missing labels.
    pub fn to_canonical_csv(&self) -> String {
        let mut out = String::from("n_params,d_tokens,r_tokens,loss,benchmark,seed,family\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.model_params,
                r.pretrain_tokens,
                r.retrieval_tokens,
                r.loss,
                csv_field(&r.benchmark),
                csv_field(r.seed_label()),
                csv_field(r.family_label()),
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records).expect("records serialize")
    }

    /// SHA-256 of the canonical CSV form; stable under load/serialize cycles.
    pub fn canonical_checksum(&self) -> String {
        sha256_hex(self.to_canonical_csv().as_bytes())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Subset matching a predicate, in original order. May be empty; fit
    /// preconditions are checked downstream, not here.
    pub fn filter(&self, predicate: &FilterPredicate) -> Dataset {
        let records: Vec<RunRecord> = self
            .records
            .iter()
            .filter(|r| predicate.matches(r))
            .cloned()
            .collect();
        let mut ds = Dataset {
            records,
            source_path: self.source_path.clone(),
            checksum: String::new(),
        };
        ds.checksum = ds.canonical_checksum();
        ds
    }

    /// Distinct benchmark labels in first-appearance order.
    pub fn benchmarks(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for r in &self.records {
            if seen.insert(r.benchmark.clone()) {
                out.push(r.benchmark.clone());
            }
        }
        out
    }
}

/// Conjunctive row predicate; `None` fields match everything.
#[derive(Debug, Clone, Default)]
pub struct FilterPredicate {
    pub benchmark: Option<String>,
    pub family: Option<String>,
    pub seed: Option<String>,
    /// `Some(true)` keeps rows with r = 0, `Some(false)` keeps rows with
    /// r > 0.
    pub r_equals_zero: Option<bool>,
}

impl FilterPredicate {
    pub fn benchmark(name: &str) -> Self {
        FilterPredicate {
            benchmark: Some(name.to_string()),
            ..Default::default()
        }
    }

    pub fn baseline_only() -> Self {
        FilterPredicate {
            r_equals_zero: Some(true),
            ..Default::default()
        }
    }

    pub fn retrieval_only() -> Self {
        FilterPredicate {
            r_equals_zero: Some(false),
            ..Default::default()
        }
    }

    fn matches(&self, r: &RunRecord) -> bool {
        if let Some(b) = &self.benchmark {
            if &r.benchmark != b {
                return false;
            }
        }
        if let Some(f) = &self.family {
            if r.family_label() != f {
                return false;
            }
        }
        if let Some(s) = &self.seed {
            if r.seed_label() != s {
                return false;
            }
        }
        if let Some(rz) = self.r_equals_zero {
            if (r.retrieval_tokens == 0) != rz {
                return false;
            }
        }
        true
    }
}

/// Loads and validates a dataset file. Row numbers in errors are 1-based
/// data rows (the CSV header is row 0).
pub fn load_dataset(path: &Path, format: FileFormat) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let records = match format {
        FileFormat::Csv => parse_csv(&bytes)?,
        FileFormat::Json => parse_json(&bytes)?,
    };
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    validate_records(&records)?;
    Ok(Dataset {
        records,
        source_path: path.display().to_string(),
        checksum: sha256_hex(&bytes),
    })
}

fn validate_records(records: &[RunRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        let row = i + 1;
        r.check(row)?;
        let key = (
            r.model_params,
            r.pretrain_tokens,
            r.retrieval_tokens,
            r.benchmark.clone(),
            r.seed_label().to_string(),
        );
        if !seen.insert(key) {
            return Err(Error::Domain {
                row,
                message: format!(
                    "duplicate (n_params, d_tokens, r_tokens, benchmark, seed) key {:?}",
                    r.key()
                ),
            });
        }
    }
    Ok(())
}

fn parse_csv(bytes: &[u8]) -> Result<Vec<RunRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(bytes);

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema {
                column: name.to_string(),
            })
    };
    let opt_col = |name: &str| headers.iter().position(|h| h == name);

    let c_n = col("n_params")?;
    let c_d = col("d_tokens")?;
    let c_r = col("r_tokens")?;
    let c_loss = col("loss")?;
    let c_bench = col("benchmark")?;
    let c_seed = opt_col("seed");
    let c_family = opt_col("family");

    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let rownum = i + 1;
        let row = row.map_err(|e| Error::Parse {
            row: rownum,
            message: e.to_string(),
        })?;
        let field = |idx: usize| row.get(idx).unwrap_or("");
        let record = RunRecord {
            model_params: parse_tokens(field(c_n), "n_params", rownum)?,
            pretrain_tokens: parse_tokens(field(c_d), "d_tokens", rownum)?,
            retrieval_tokens: parse_tokens(field(c_r), "r_tokens", rownum)?,
            loss: field(c_loss).parse::<f64>().map_err(|e| Error::Parse {
                row: rownum,
                message: format!("loss: {e}"),
            })?,
            benchmark: field(c_bench).to_string(),
            seed: c_seed
                .map(field)
                .filter(|s| !s.is_empty())
                .map(str::to_string),
            family: c_family
                .map(field)
                .filter(|s| !s.is_empty())
                .map(str::to_string),
        };
        out.push(record);
    }
    Ok(out)
}

fn parse_json(bytes: &[u8]) -> Result<Vec<RunRecord>> {
    // Parse into a loose shape first so sign errors surface as DomainError
    // with a row number rather than an opaque serde failure.
    #[derive(Deserialize)]
    struct Row {
        n_params: f64,
        d_tokens: f64,
        r_tokens: f64,
        loss: f64,
        benchmark: String,
        #[serde(default)]
        seed: Option<String>,
        #[serde(default)]
        family: Option<String>,
    }
    let rows: Vec<Row> = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        row: 0,
        message: e.to_string(),
    })?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let rownum = i + 1;
            Ok(RunRecord {
                model_params: float_tokens(r.n_params, "n_params", rownum)?,
                pretrain_tokens: float_tokens(r.d_tokens, "d_tokens", rownum)?,
                retrieval_tokens: float_tokens(r.r_tokens, "r_tokens", rownum)?,
                loss: r.loss,
                benchmark: r.benchmark,
                seed: r.seed.filter(|s| !s.is_empty()),
                family: r.family.filter(|s| !s.is_empty()),
            })
        })
        .collect()
}

/// Token counts accept plain integers or exact-integer scientific notation
/// ("3e7"). Negative values are domain errors, not parse errors.
fn parse_tokens(text: &str, column: &str, row: usize) -> Result<u64> {
    if let Ok(v) = text.parse::<u64>() {
        return Ok(v);
    }
    if let Ok(v) = text.parse::<i64>() {
        return Err(Error::Domain {
            row,
            message: format!("{column} must be non-negative, got {v}"),
        });
    }
    match text.parse::<f64>() {
        Ok(v) => float_tokens(v, column, row),
        Err(e) => Err(Error::Parse {
            row,
            message: format!("{column}: {e}"),
        }),
    }
}

fn float_tokens(v: f64, column: &str, row: usize) -> Result<u64> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Domain {
            row,
            message: format!("{column} must be non-negative and finite, got {v}"),
        });
    }
    if v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(Error::Parse {
            row,
            message: format!("{column} must be an integer token count, got {v}"),
        });
    }
    Ok(v as u64)
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    })
}
