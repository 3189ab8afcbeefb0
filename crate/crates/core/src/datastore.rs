//! Deterministic nested-prefix selection of retrieval-store chunks under
//! token budgets.
//!
//! One seeded permutation of the catalog drives every budget: each budget's
//! selection is the shortest permutation prefix whose cumulative token
//! count meets or exceeds the target. Because all selections are prefixes
//! of the same permutation, smaller budgets are strict subsets of larger
//! ones, which keeps corpus size the only varying factor across scales.
//!
//! This module plans which chunks enter a store; chunking, token counting,
//! embedding, and index construction live elsewhere.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::sha256_hex;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkEntry {
    pub chunk_id: String,
    pub token_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkCatalog {
    pub entries: Vec<ChunkEntry>,
    pub source_label: String,
}

impl ChunkCatalog {
    pub fn new(entries: Vec<ChunkEntry>, source_label: &str) -> Result<ChunkCatalog> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.token_count < 1 {
                return Err(Error::Domain {
                    row: i + 1,
                    message: format!("chunk `{}` has zero token_count", e.chunk_id),
                });
            }
            if !seen.insert(e.chunk_id.as_str()) {
                return Err(Error::Domain {
                    row: i + 1,
                    message: format!("duplicate chunk_id `{}`", e.chunk_id),
                });
            }
        }
        Ok(ChunkCatalog {
            entries,
            source_label: source_label.to_string(),
        })
    }

    /// CSV needs header columns `chunk_id, token_count`; JSON is an array
    /// of objects with the same fields.
    pub fn load(path: &Path) -> Result<ChunkCatalog> {
        let bytes = std::fs::read(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let is_json = path.extension().and_then(|e| e.to_str()) == Some("json");
        let entries: Vec<ChunkEntry> = if is_json {
            serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
                row: 0,
                message: e.to_string(),
            })?
        } else {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .trim(csv::Trim::All)
                .from_reader(bytes.as_slice());
            let headers = reader.headers().map_err(|e| Error::Parse {
                row: 0,
                message: e.to_string(),
            })?;
            for required in ["chunk_id", "token_count"] {
                if !headers.iter().any(|h| h == required) {
                    return Err(Error::Schema {
                        column: required.to_string(),
                    });
                }
            }
            reader
                .deserialize()
                .enumerate()
                .map(|(i, row)| {
                    row.map_err(|e| Error::Parse {
                        row: i + 1,
                        message: e.to_string(),
                    })
                })
                .collect::<Result<Vec<ChunkEntry>>>()?
        };
        ChunkCatalog::new(entries, &path.display().to_string())
    }

    pub fn total_tokens(&self) -> u64 {
        self.entries.iter().map(|e| e.token_count).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Uniform Fisher-Yates permutation of catalog positions under the crate's
/// portable generator.
fn permute_indices(catalog: &ChunkCatalog, seed: u64) -> Result<Vec<usize>> {
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    let mut order: Vec<usize> = (0..catalog.len()).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    Ok(order)
}

/// Seeded permutation of the catalog's chunk ids.
pub fn permute(catalog: &ChunkCatalog, seed: u64) -> Result<Vec<String>> {
    Ok(permute_indices(catalog, seed)?
        .into_iter()
        .map(|i| catalog.entries[i].chunk_id.clone())
        .collect())
}

fn permutation_digest(catalog: &ChunkCatalog, order: &[usize]) -> String {
    let mut joined = String::new();
    for &i in order {
        joined.push_str(&catalog.entries[i].chunk_id);
        joined.push('\n');
    }
    sha256_hex(joined.as_bytes())
}

/// The realization of one token budget: an ordered prefix of the seeded
/// permutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionManifest {
    pub seed: u64,
    pub budget: u64,
    pub selected: Vec<String>,
    pub cumulative_tokens: u64,
    /// Hash of the full permutation, shared by every budget drawn from it.
    pub permutation_digest: String,
    /// Opaque caller-supplied label for upstream filtering configuration;
    /// part of the determinism key only by convention.
    #[serde(default)]
    pub filter_label: String,
    #[serde(default)]
    pub source_label: String,
}

/// Shortest permutation prefix whose cumulative token count meets or
/// exceeds the budget.
pub fn select_budget(catalog: &ChunkCatalog, seed: u64, budget: u64) -> Result<SelectionManifest> {
    select_budget_labeled(catalog, seed, budget, "")
}

pub fn select_budget_labeled(
    catalog: &ChunkCatalog,
    seed: u64,
    budget: u64,
    filter_label: &str,
) -> Result<SelectionManifest> {
    if budget < 1 {
        return Err(Error::InvalidArgument("budget must be >= 1 token".into()));
    }
    let total = catalog.total_tokens();
    if total < budget {
        return Err(Error::BudgetExceedsCorpus { budget, total });
    }
    let order = permute_indices(catalog, seed)?;
    let digest = permutation_digest(catalog, &order);
    let mut selected = Vec::new();
    let mut cumulative = 0u64;
    for &i in &order {
        selected.push(catalog.entries[i].chunk_id.clone());
        cumulative += catalog.entries[i].token_count;
        if cumulative >= budget {
            break;
        }
    }
    Ok(SelectionManifest {
        seed,
        budget,
        selected,
        cumulative_tokens: cumulative,
        permutation_digest: digest,
        filter_label: filter_label.to_string(),
        source_label: catalog.source_label.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestingCheck {
    pub nested: bool,
    /// First divergence when not nested.
    pub diagnostic: Option<String>,
}

/// Checks that the smaller-budget manifest is a prefix of the larger one.
/// Both manifests must come from the same seed and permutation.
pub fn verify_nesting(a: &SelectionManifest, b: &SelectionManifest) -> Result<NestingCheck> {
    if a.seed != b.seed {
        return Err(Error::SeedMismatch {
            left: a.seed,
            right: b.seed,
        });
    }
    if a.permutation_digest != b.permutation_digest {
        return Err(Error::DigestMismatch);
    }
    let (small, large) = if a.budget <= b.budget { (a, b) } else { (b, a) };
    if small.selected.len() > large.selected.len() {
        return Ok(NestingCheck {
            nested: false,
            diagnostic: Some(format!(
                "smaller budget selects {} chunks but larger budget selects only {}",
                small.selected.len(),
                large.selected.len()
            )),
        });
    }
    for (i, (s, l)) in small.selected.iter().zip(&large.selected).enumerate() {
        if s != l {
            return Ok(NestingCheck {
                nested: false,
                diagnostic: Some(format!("first divergence at index {i}: `{s}` vs `{l}`")),
            });
        }
    }
    Ok(NestingCheck {
        nested: true,
        diagnostic: None,
    })
}
