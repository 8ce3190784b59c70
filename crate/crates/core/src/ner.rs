//! Gazetteer-based biomedical entity tagging over cleaned stems, and the
//! per-subset frequency tables behind the audit's entity report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::preprocess::{CleanStem, StoplistSet};

const DEFAULT_GAZETTEER: &str = include_str!("../data/gazetteer.tsv");

/// Dictionary of normalized surface phrases mapped to entity types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gazetteer {
    /// Space-joined normalized token sequences -> entity type.
    entries: BTreeMap<String, String>,
    /// Longest surface length in tokens, bounding the matcher's lookahead.
    max_tokens: usize,
}

impl Gazetteer {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entity_type(&self, surface: &str) -> Option<&str> {
        self.entries.get(surface).map(String::as_str)
    }

    pub fn entity_types(&self) -> Vec<String> {
        let mut types: Vec<String> = self.entries.values().cloned().collect();
        types.sort();
        types.dedup();
        types
    }
}

fn parse_gazetteer(text: &str, path: &str, lists: &StoplistSet) -> Result<Gazetteer> {
    let mut entries: BTreeMap<String, String> = BTreeMap::new();
    let mut max_tokens = 0;
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let line = line.split('#').next().unwrap_or("").trim_end();
        if line.trim().is_empty() {
            continue;
        }
        let (surface_raw, entity_type) =
            line.split_once('\t').ok_or_else(|| AuditError::GazetteerParse {
                path: path.to_string(),
                row,
                message: "expected <surface>\\t<type>".into(),
            })?;
        let entity_type = entity_type.trim().to_string();
        if entity_type.is_empty() || surface_raw.trim().is_empty() {
            return Err(AuditError::GazetteerParse {
                path: path.to_string(),
                row,
                message: "empty surface or type".into(),
            });
        }
        // Normalize the surface through the same pipeline as stem tokens so
        // inflected dictionary forms match cleaned text.
        let tokens: Vec<String> = surface_raw
            .to_lowercase()
            .split_whitespace()
            .map(|t| lists.normalize_token(t))
            .collect();
        let surface = tokens.join(" ");
        max_tokens = max_tokens.max(tokens.len());
        match entries.get(&surface) {
            Some(existing) if *existing != entity_type => {
                return Err(AuditError::GazetteerConflict {
                    path: path.to_string(),
                    surface,
                    first: existing.clone(),
                    second: entity_type,
                });
            }
            _ => {
                entries.insert(surface, entity_type);
            }
        }
    }
    Ok(Gazetteer {
        entries,
        max_tokens,
    })
}

/// Loads a gazetteer file of tab-separated (surface, type) rows; duplicate
/// identical rows collapse, conflicting types are an error.
pub fn load_gazetteer(path: &Path, lists: &StoplistSet) -> Result<Gazetteer> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| AuditError::Io {
        path: display.clone(),
        source: e,
    })?;
    parse_gazetteer(&text, &display, lists)
}

/// The gazetteer shipped with the crate.
pub fn default_gazetteer(lists: &StoplistSet) -> Gazetteer {
    parse_gazetteer(DEFAULT_GAZETTEER, "<builtin>", lists).expect("embedded gazetteer is valid")
}

/// One tagged mention: the matched surface, its type, and the token span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub surface: String,
    pub entity_type: String,
    /// Starting token index within the clean stem.
    pub start: usize,
    /// Length in tokens.
    pub len: usize,
}

/// Greedy leftmost-longest matching over the clean token sequence; mentions
/// never overlap.
pub fn tag_entities(stem: &CleanStem, gazetteer: &Gazetteer) -> Vec<Mention> {
    let tokens = &stem.tokens;
    let mut mentions = Vec::new();
    if gazetteer.is_empty() {
        return mentions;
    }
    let mut i = 0;
    while i < tokens.len() {
        let longest = gazetteer.max_tokens.min(tokens.len() - i);
        let mut matched = None;
        for len in (1..=longest).rev() {
            let candidate = tokens[i..i + len].join(" ");
            if let Some(ty) = gazetteer.entity_type(&candidate) {
                matched = Some((candidate, ty.to_string(), len));
                break;
            }
        }
        match matched {
            Some((surface, entity_type, len)) => {
                mentions.push(Mention {
                    surface,
                    entity_type,
                    start: i,
                    len,
                });
                i += len;
            }
            None => i += 1,
        }
    }
    mentions
}

/// One (surface, type, count) row of a frequency table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityFrequency {
    pub surface: String,
    pub entity_type: String,
    pub count: usize,
}

/// Mention counts aggregated over a subset of items, sorted by descending
/// count with lexicographic tie-breaking. The data behind a word cloud.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityFrequencyTable {
    pub label: String,
    pub entries: Vec<EntityFrequency>,
}

impl EntityFrequencyTable {
    pub fn total_mentions(&self) -> usize {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn count_of(&self, surface: &str) -> usize {
        self.entries
            .iter()
            .filter(|e| e.surface == surface)
            .map(|e| e.count)
            .sum()
    }
}

/// Aggregates entity mentions over the given stems.
pub fn entity_frequencies(
    label: &str,
    stems: &[&CleanStem],
    gazetteer: &Gazetteer,
) -> EntityFrequencyTable {
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for stem in stems {
        for m in tag_entities(stem, gazetteer) {
            *counts.entry((m.surface, m.entity_type)).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<EntityFrequency> = counts
        .into_iter()
        .map(|((surface, entity_type), count)| EntityFrequency {
            surface,
            entity_type,
            count,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.surface.cmp(&b.surface))
            .then_with(|| a.entity_type.cmp(&b.entity_type))
    });
    EntityFrequencyTable {
        label: label.to_string(),
        entries,
    }
}
