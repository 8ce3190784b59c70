//! TF-IDF document vectors over cleaned stems, plus ingestion of externally
//! computed embedding vectors.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::preprocess::CleanStem;

/// Term index built over a corpus of cleaned stems.
///
/// Terms are sorted lexicographically so indices are a deterministic
/// function of the corpus and `min_df`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub terms: Vec<String>,
    pub doc_frequency: Vec<usize>,
    pub n_docs: usize,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        if self.index.is_empty() && !self.terms.is_empty() {
            // Deserialized vocabularies have no map; terms are sorted.
            return self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok();
        }
        self.index.get(term).copied()
    }

    /// Smoothed inverse document frequency: `ln((1+n)/(1+df)) + 1`.
    pub fn idf(&self, term_index: usize) -> f64 {
        let n = self.n_docs as f64;
        let df = self.doc_frequency[term_index] as f64;
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    }

    pub fn rebuild_index(&mut self) {
        self.index = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }
}

/// Builds the vocabulary, keeping terms that appear in at least `min_df`
/// documents.
pub fn build_vocabulary(stems: &[CleanStem], min_df: usize) -> Result<Vocabulary> {
    if stems.is_empty() {
        return Err(AuditError::EmptyVocabulary);
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for stem in stems {
        let mut seen: Vec<&str> = stem.tokens.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for term in seen {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let mut terms = Vec::new();
    let mut doc_frequency = Vec::new();
    for (term, count) in df {
        if count >= min_df.max(1) {
            terms.push(term.to_string());
            doc_frequency.push(count);
        }
    }
    if terms.is_empty() {
        return Err(AuditError::EmptyVocabulary);
    }
    let mut vocab = Vocabulary {
        terms,
        doc_frequency,
        n_docs: stems.len(),
        index: BTreeMap::new(),
    };
    vocab.rebuild_index();
    Ok(vocab)
}

/// Where a document vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorSource {
    Tfidf,
    External,
}

impl VectorSource {
    pub fn label(&self) -> &'static str {
        match self {
            VectorSource::Tfidf => "tfidf",
            VectorSource::External => "external",
        }
    }
}

/// Dense feature vector for one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocVector {
    pub item_id: String,
    pub values: Vec<f64>,
    pub source: VectorSource,
}

impl DocVector {
    /// True when no in-vocabulary token contributed any weight.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// L2-normalized TF-IDF vector; out-of-vocabulary tokens are ignored.
/// Callers should check [`DocVector::is_zero`] and flag degenerate items.
pub fn tfidf_vector(stem: &CleanStem, vocab: &Vocabulary) -> DocVector {
    let mut values = vec![0.0; vocab.len()];
    for token in &stem.tokens {
        if let Some(idx) = vocab.index_of(token) {
            values[idx] += 1.0;
        }
    }
    for (idx, v) in values.iter_mut().enumerate() {
        if *v > 0.0 {
            *v *= vocab.idf(idx);
        }
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    DocVector {
        item_id: stem.item_id.clone(),
        values,
        source: VectorSource::Tfidf,
    }
}

/// Raw term-count vector over the vocabulary (multinomial features).
pub fn count_vector(stem: &CleanStem, vocab: &Vocabulary) -> Vec<f64> {
    let mut values = vec![0.0; vocab.len()];
    for token in &stem.tokens {
        if let Some(idx) = vocab.index_of(token) {
            values[idx] += 1.0;
        }
    }
    values
}

#[derive(Debug, Deserialize)]
struct EmbeddingRecord {
    id: String,
    vector: Vec<f64>,
}

/// Loads externally computed embeddings (one `{id, vector}` record per line)
/// and aligns them to `expected_ids`, enforcing presence, a consistent
/// dimension, and finite values.
pub fn load_embeddings(path: &Path, expected_ids: &[String]) -> Result<Vec<DocVector>> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| AuditError::Io {
        path: display.clone(),
        source: e,
    })?;
    let mut by_id: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let row = idx + 1;
        let line = line.map_err(|e| AuditError::Io {
            path: display.clone(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord =
            serde_json::from_str(&line).map_err(|e| AuditError::Embedding {
                path: display.clone(),
                message: format!("row {row}: {e}"),
            })?;
        match dim {
            None => dim = Some(rec.vector.len()),
            Some(d) if d != rec.vector.len() => {
                return Err(AuditError::Embedding {
                    path: display.clone(),
                    message: format!(
                        "row {row}: id \"{}\" has dimension {} but earlier rows have {}",
                        rec.id,
                        rec.vector.len(),
                        d
                    ),
                });
            }
            Some(_) => {}
        }
        if rec.vector.iter().any(|v| !v.is_finite()) {
            return Err(AuditError::Embedding {
                path: display.clone(),
                message: format!("row {row}: id \"{}\" contains a non-finite value", rec.id),
            });
        }
        by_id.insert(rec.id, rec.vector);
    }
    let mut out = Vec::with_capacity(expected_ids.len());
    for id in expected_ids {
        let values = by_id.get(id).cloned().ok_or_else(|| AuditError::Embedding {
            path: display.clone(),
            message: format!("missing id \"{id}\""),
        })?;
        out.push(DocVector {
            item_id: id.clone(),
            values,
            source: VectorSource::External,
        });
    }
    Ok(out)
}
