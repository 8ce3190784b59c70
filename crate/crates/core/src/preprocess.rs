//! Stem cleaning: lowercase, strip punctuation and numerics, drop stopword /
//! unit / demographic / high-frequency tokens (preserving negations), then
//! lemmatize and stem.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::stem::stem_token;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const DEFAULT_NEGATIONS: &str = include_str!("../data/negations.txt");
const DEFAULT_UNITS: &str = include_str!("../data/units.txt");
const DEFAULT_DEMOGRAPHIC: &str = include_str!("../data/demographic.txt");
const DEFAULT_DOMAIN_HIGHFREQ: &str = include_str!("../data/domain_highfreq.txt");
const DEFAULT_LEMMA_OVERRIDES: &str = include_str!("../data/lemma_overrides.txt");

/// The token lists driving [`clean_stem`], plus the irregular-lemma table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoplistSet {
    pub stopwords: BTreeSet<String>,
    /// Tokens that survive the stopword stage ("no", "not", "denies", ...).
    pub negation_exceptions: BTreeSet<String>,
    pub units: BTreeSet<String>,
    pub demographic_terms: BTreeSet<String>,
    pub domain_highfreq: BTreeSet<String>,
    pub lemma_overrides: BTreeMap<String, String>,
}

/// Optional per-list override paths; `None` falls back to the shipped list.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoplistPaths {
    pub stopwords: Option<PathBuf>,
    pub negations: Option<PathBuf>,
    pub units: Option<PathBuf>,
    pub demographic: Option<PathBuf>,
    pub domain_highfreq: Option<PathBuf>,
    pub lemma_overrides: Option<PathBuf>,
}

/// Parses a token-list file body: one token per line, "#" comments,
/// lowercased and deduplicated.
pub fn parse_token_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

fn parse_lemma_overrides(text: &str) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim().to_lowercase();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        if let (Some(from), Some(to)) = (parts.next(), parts.next()) {
            map.insert(from.to_string(), to.to_string());
        }
    }
    map
}

fn read_list(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| AuditError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Loads the stoplist bundle, using the shipped defaults for any list
/// without an override path.
pub fn load_stoplists(paths: &StoplistPaths) -> Result<StoplistSet> {
    let text_or = |p: &Option<PathBuf>, default: &str| -> Result<String> {
        match p {
            Some(path) => read_list(path),
            None => Ok(default.to_string()),
        }
    };
    Ok(StoplistSet {
        stopwords: parse_token_list(&text_or(&paths.stopwords, DEFAULT_STOPWORDS)?),
        negation_exceptions: parse_token_list(&text_or(&paths.negations, DEFAULT_NEGATIONS)?),
        units: parse_token_list(&text_or(&paths.units, DEFAULT_UNITS)?),
        demographic_terms: parse_token_list(&text_or(&paths.demographic, DEFAULT_DEMOGRAPHIC)?),
        domain_highfreq: parse_token_list(&text_or(
            &paths.domain_highfreq,
            DEFAULT_DOMAIN_HIGHFREQ,
        )?),
        lemma_overrides: parse_lemma_overrides(
            &text_or(&paths.lemma_overrides, DEFAULT_LEMMA_OVERRIDES)?,
        ),
    })
}

impl Default for StoplistSet {
    fn default() -> Self {
        load_stoplists(&StoplistPaths::default()).expect("embedded defaults parse")
    }
}

impl StoplistSet {
    /// Irregular-lemma lookup followed by the suffix stemmer.
    pub fn normalize_token(&self, token: &str) -> String {
        match self.lemma_overrides.get(token) {
            Some(lemma) => lemma.clone(),
            None => stem_token(token),
        }
    }

    /// True when the removal stages would drop `token`.
    fn removed(&self, token: &str) -> bool {
        if is_numeric_token(token) || self.units.contains(token) {
            return true;
        }
        if self.stopwords.contains(token) && !self.negation_exceptions.contains(token) {
            return true;
        }
        self.demographic_terms.contains(token) || self.domain_highfreq.contains(token)
    }
}

/// Characters kept inside tokens so the numeric rule can see vitals like
/// "110/70" and "38.0°c" whole; all other punctuation becomes a space.
const NUMERIC_JOINERS: [char; 4] = ['.', '/', '%', '°'];

/// A token is numeric if it still contains a digit once the joiner
/// characters are removed.
pub fn is_numeric_token(token: &str) -> bool {
    let stripped: String = token.chars().filter(|c| !NUMERIC_JOINERS.contains(c)).collect();
    stripped.is_empty() || stripped.chars().any(|c| c.is_ascii_digit())
}

/// Lowercases, replaces punctuation with spaces (keeping numeric joiners
/// attached), and splits on whitespace. Leading/trailing joiners are trimmed
/// so sentence punctuation does not stick to words.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let spaced: String = lowered
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || NUMERIC_JOINERS.contains(&c) {
                c
            } else {
                ' '
            }
        })
        .collect();
    spaced
        .split_whitespace()
        .map(|t| t.trim_matches(|c| NUMERIC_JOINERS.contains(&c)))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// A cleaned stem: the ordered surviving tokens for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanStem {
    pub item_id: String,
    pub tokens: Vec<String>,
}

impl CleanStem {
    /// An empty result means every token was removed; degenerate but not fatal.
    pub fn is_degenerate(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Runs the full cleaning pipeline on one raw stem.
///
/// Stages, in order: lowercase, punctuation/symbol stripping, whitespace
/// tokenization, numeric and unit removal, stopword removal with negation
/// exceptions, demographic-term removal, high-frequency-term removal,
/// lemmatization, stemming. Normalized tokens are passed through the removal
/// predicate once more so the output is stable under re-cleaning.
pub fn clean_stem(item_id: &str, text: &str, lists: &StoplistSet) -> CleanStem {
    let tokens = tokenize(text)
        .into_iter()
        .filter(|t| !lists.removed(t))
        .map(|t| lists.normalize_token(&t))
        .filter(|t| !lists.removed(t))
        .collect();
    CleanStem {
        item_id: item_id.to_string(),
        tokens,
    }
}
