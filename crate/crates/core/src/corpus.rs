//! Item corpus loading, validation, and synthetic generation.
//!
//! An [`Item`] is one exam question stem plus the demographic and category
//! metadata used by the audit. Corpora come from record-per-line or delimited
//! files, or from [`generate_synthetic_corpus`], which plants vocabulary
//! communities and (optionally) demographic marker tokens so the rest of the
//! pipeline can be exercised against a known ground truth.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// Patient gender recorded in item metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub fn parse(s: &str) -> Option<Gender> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f" | "female" => Some(Gender::Female),
            "m" | "male" => Some(Gender::Male),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The seven age bins used for the age-range prediction task.
///
/// Bins are inclusive at both named endpoints and cover every non-negative
/// age; the top bin is open-ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeGroup {
    #[serde(rename = "0-5")]
    Years0To5,
    #[serde(rename = "6-17")]
    Years6To17,
    #[serde(rename = "18-34")]
    Years18To34,
    #[serde(rename = "35-49")]
    Years35To49,
    #[serde(rename = "50-64")]
    Years50To64,
    #[serde(rename = "65-84")]
    Years65To84,
    #[serde(rename = "85+")]
    Years85Plus,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 7] = [
        AgeGroup::Years0To5,
        AgeGroup::Years6To17,
        AgeGroup::Years18To34,
        AgeGroup::Years35To49,
        AgeGroup::Years50To64,
        AgeGroup::Years65To84,
        AgeGroup::Years85Plus,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            AgeGroup::Years0To5 => "0-5",
            AgeGroup::Years6To17 => "6-17",
            AgeGroup::Years18To34 => "18-34",
            AgeGroup::Years35To49 => "35-49",
            AgeGroup::Years50To64 => "50-64",
            AgeGroup::Years65To84 => "65-84",
            AgeGroup::Years85Plus => "85+",
        }
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Returns the unique age bin containing `age_years`.
pub fn assign_age_group(age_years: u32) -> AgeGroup {
    match age_years {
        0..=5 => AgeGroup::Years0To5,
        6..=17 => AgeGroup::Years6To17,
        18..=34 => AgeGroup::Years18To34,
        35..=49 => AgeGroup::Years35To49,
        50..=64 => AgeGroup::Years50To64,
        65..=84 => AgeGroup::Years65To84,
        _ => AgeGroup::Years85Plus,
    }
}

/// One exam item: the stem text plus audit-relevant metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub stem: String,
    pub gender: Gender,
    pub age_years: u32,
    pub age_group: AgeGroup,
    /// Physician task category.
    pub competency: String,
    /// Top-level medical content area.
    pub topic_category: String,
}

/// An ordered, validated collection of items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub items: Vec<Item>,
    /// Source path, or a hash of the synthetic spec that produced the corpus.
    pub provenance: String,
}

impl Corpus {
    /// Builds a corpus from items, enforcing the non-empty and distinct-id
    /// invariants. Row numbers in errors are 1-based item positions.
    pub fn new(items: Vec<Item>, provenance: String) -> Result<Corpus> {
        if items.is_empty() {
            return Err(AuditError::EmptyCorpus);
        }
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for (idx, item) in items.iter().enumerate() {
            if item.stem.trim().is_empty() {
                return Err(AuditError::InvalidRecord {
                    row: idx + 1,
                    message: format!("empty stem for id \"{}\"", item.id),
                });
            }
            if let Some(&first) = seen.get(item.id.as_str()) {
                return Err(AuditError::DuplicateId {
                    id: item.id.clone(),
                    first_row: first,
                    row: idx + 1,
                });
            }
            seen.insert(&item.id, idx + 1);
        }
        Ok(Corpus { items, provenance })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Item> {
        self.items.iter().find(|it| it.id == id)
    }
}

/// Input file format for [`load_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    /// One structured record per line with keys
    /// `{id, stem, gender, age, competency, topic}`.
    RecordPerLine,
    /// Comma-separated file with a header row naming the same fields.
    Delimited,
}

/// Wire representation shared by both file formats.
#[derive(Debug, Serialize, Deserialize)]
struct ItemRecord {
    id: String,
    stem: String,
    gender: String,
    age: i64,
    competency: String,
    topic: String,
}

fn record_to_item(rec: ItemRecord, row: usize) -> Result<Item> {
    if rec.id.trim().is_empty() {
        return Err(AuditError::InvalidRecord {
            row,
            message: "missing id".into(),
        });
    }
    if rec.stem.trim().is_empty() {
        return Err(AuditError::InvalidRecord {
            row,
            message: format!("empty stem for id \"{}\"", rec.id),
        });
    }
    let gender = Gender::parse(&rec.gender).ok_or_else(|| AuditError::InvalidRecord {
        row,
        message: format!("unknown gender value \"{}\"", rec.gender),
    })?;
    if rec.age < 0 {
        return Err(AuditError::InvalidRecord {
            row,
            message: format!("negative age {}", rec.age),
        });
    }
    let age_years = rec.age as u32;
    Ok(Item {
        id: rec.id,
        stem: rec.stem,
        gender,
        age_years,
        age_group: assign_age_group(age_years),
        competency: rec.competency,
        topic_category: rec.topic,
    })
}

/// Loads and validates a corpus file. Every malformed row is reported with
/// its 1-based row number (the header row of a delimited file is row 1).
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let display = path.display().to_string();
    let mut items = Vec::new();
    match format {
        CorpusFormat::RecordPerLine => {
            let file = File::open(path).map_err(|e| AuditError::Io {
                path: display.clone(),
                source: e,
            })?;
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let row = idx + 1;
                let line = line.map_err(|e| AuditError::Io {
                    path: display.clone(),
                    source: e,
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: ItemRecord =
                    serde_json::from_str(&line).map_err(|e| AuditError::Parse {
                        path: display.clone(),
                        row,
                        message: e.to_string(),
                    })?;
                items.push(record_to_item(rec, row)?);
            }
        }
        CorpusFormat::Delimited => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_path(path)
                .map_err(|e| AuditError::Parse {
                    path: display.clone(),
                    row: 1,
                    message: e.to_string(),
                })?;
            for (idx, rec) in reader.deserialize::<ItemRecord>().enumerate() {
                let row = idx + 2; // header occupies row 1
                let rec = rec.map_err(|e| AuditError::Parse {
                    path: display.clone(),
                    row,
                    message: e.to_string(),
                })?;
                items.push(record_to_item(rec, row)?);
            }
        }
    }
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, item) in items.iter().enumerate() {
        let row = match format {
            CorpusFormat::RecordPerLine => idx + 1,
            CorpusFormat::Delimited => idx + 2,
        };
        if let Some(&first) = seen.get(&item.id) {
            return Err(AuditError::DuplicateId {
                id: item.id.clone(),
                first_row: first,
                row,
            });
        }
        seen.insert(item.id.clone(), row);
    }
    if items.is_empty() {
        return Err(AuditError::EmptyCorpus);
    }
    Ok(Corpus {
        items,
        provenance: display,
    })
}

/// Writes a corpus in the record-per-line format accepted by [`load_corpus`].
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let display = path.display().to_string();
    let mut out = File::create(path).map_err(|e| AuditError::Io {
        path: display.clone(),
        source: e,
    })?;
    for item in &corpus.items {
        let rec = ItemRecord {
            id: item.id.clone(),
            stem: item.stem.clone(),
            gender: item.gender.label().to_string(),
            age: item.age_years as i64,
            competency: item.competency.clone(),
            topic: item.topic_category.clone(),
        };
        let line = serde_json::to_string(&rec).expect("record serializes");
        writeln!(out, "{line}").map_err(|e| AuditError::Io {
            path: display.clone(),
            source: e,
        })?;
    }
    Ok(())
}

/// Parameters for the synthetic corpus generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_items: usize,
    /// Number of disjoint-vocabulary communities (planted clusters).
    pub n_communities: usize,
    /// Fraction in [0,1] of the target gender's items in the marker community
    /// that receive the primary marker token.
    pub marker_strength: f64,
    /// Total vocabulary size, split evenly across communities.
    pub vocab_size: usize,
    pub seed: u64,
}

/// Primary marker planted into female stems of the marker community.
pub const MARKER_FEMALE: &str = "wine";
/// Primary marker planted into male stems of the marker community.
pub const MARKER_MALE: &str = "alcohol";
/// Ratio between the target-gender marker rate and the cross-gender rate.
/// Both markers appear in both genders so the planted frequency differential
/// is a ratio rather than an absence.
pub const MARKER_CROSS_RATIO: f64 = 12.0;

const SYLLABLE_CONSONANTS: &[u8] = b"bdfgjklmnprstvz";
const SYLLABLE_VOWELS: &[u8] = b"aou";
const N_SYLLABLES: usize = SYLLABLE_CONSONANTS.len() * SYLLABLE_VOWELS.len();

fn syllable(i: usize) -> [u8; 2] {
    [
        SYLLABLE_CONSONANTS[i / SYLLABLE_VOWELS.len()],
        SYLLABLE_VOWELS[i % SYLLABLE_VOWELS.len()],
    ]
}

/// Deterministic pseudo-word for community `c`, word index `j`. The first
/// two syllables encode the community, keeping community vocabularies
/// disjoint; words end in a vowel so the stemmer leaves them unchanged.
fn community_word(c: usize, j: usize) -> String {
    let mut word = Vec::with_capacity(8);
    word.extend_from_slice(&syllable(c / N_SYLLABLES % N_SYLLABLES));
    word.extend_from_slice(&syllable(c % N_SYLLABLES));
    word.extend_from_slice(&syllable(j / N_SYLLABLES % N_SYLLABLES));
    word.extend_from_slice(&syllable(j % N_SYLLABLES));
    String::from_utf8(word).expect("ascii syllables")
}

const AGE_PATTERN: [u32; 13] = [25, 3, 28, 12, 33, 55, 19, 70, 30, 90, 22, 45, 27];
const COMPETENCY_PATTERN: [&str; 3] = [
    "applying-foundational-science",
    "diagnosis",
    "management",
];
const TOPIC_PATTERN: [&str; 5] = [
    "cardiovascular",
    "respiratory",
    "renal-urinary",
    "reproductive-endocrine",
    "nervous-system",
];

fn spec_hash(spec: &SyntheticSpec) -> u64 {
    // FNV-1a over the field values; stable across runs and platforms.
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(&spec.n_items.to_le_bytes());
    eat(&spec.n_communities.to_le_bytes());
    eat(&spec.marker_strength.to_le_bytes());
    eat(&spec.vocab_size.to_le_bytes());
    eat(&spec.seed.to_le_bytes());
    h
}

/// Generates a corpus of `n_items` stems partitioned into disjoint-vocabulary
/// communities, with marker tokens planted into the marker community at
/// gender-asymmetric rates.
///
/// Community membership cycles round-robin over item index. Every stem in a
/// community is a shuffled permutation of the community's full vocabulary,
/// so within a community the token multiset is constant: no token statistic
/// can encode demographics and the planted markers are the only
/// demographic-correlated signal. Gender, age, competency, and topic
/// metadata cycle with mutually coprime periods so no metadata field
/// correlates with any other. Marker planting is count-exact: of the `n`
/// target-gender items in the marker community, exactly
/// `floor(marker_strength * n)` receive the marker, spread evenly, and the
/// opposite gender receives the same marker at
/// `marker_strength / MARKER_CROSS_RATIO`.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<Corpus> {
    if spec.n_communities == 0 {
        return Err(AuditError::InvalidSyntheticSpec(
            "n_communities must be >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.marker_strength) {
        return Err(AuditError::InvalidSyntheticSpec(format!(
            "marker_strength {} outside [0, 1]",
            spec.marker_strength
        )));
    }
    if spec.n_items == 0 {
        return Err(AuditError::InvalidSyntheticSpec("n_items must be > 0".into()));
    }
    let words_per_community = spec.vocab_size / spec.n_communities;
    if words_per_community < 4 {
        return Err(AuditError::InvalidSyntheticSpec(format!(
            "vocab_size {} too small for {} communities (need >= 4 words each)",
            spec.vocab_size, spec.n_communities
        )));
    }
    if spec.n_communities > N_SYLLABLES * N_SYLLABLES
        || words_per_community > N_SYLLABLES * N_SYLLABLES
    {
        return Err(AuditError::InvalidSyntheticSpec(
            "community or vocabulary count exceeds the pseudo-word space".into(),
        ));
    }

    let vocab: Vec<Vec<String>> = (0..spec.n_communities)
        .map(|c| (0..words_per_community).map(|j| community_word(c, j)).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut items = Vec::with_capacity(spec.n_items);
    // Per-community running index, and per-(gender, marker-kind) Bresenham
    // counters for count-exact marker planting in the marker community.
    let mut community_pos = vec![0usize; spec.n_communities];
    let mut marked = [[0usize; 2]; 2]; // [gender][primary/cross]
    let mut group_pos = [0usize; 2];

    let planted = |count: usize, rate: f64| -> usize { (rate * count as f64).floor() as usize };

    for i in 0..spec.n_items {
        let community = i % spec.n_communities;
        let k = community_pos[community];
        community_pos[community] += 1;

        let gender = if k % 2 == 0 { Gender::Female } else { Gender::Male };
        let age_years = AGE_PATTERN[k % AGE_PATTERN.len()];
        let competency = COMPETENCY_PATTERN[k % COMPETENCY_PATTERN.len()];
        let topic = TOPIC_PATTERN[k % TOPIC_PATTERN.len()];

        let mut tokens: Vec<&str> = vocab[community].iter().map(String::as_str).collect();
        tokens.shuffle(&mut rng);

        if community == 0 && spec.marker_strength > 0.0 {
            let g = if gender == Gender::Female { 0 } else { 1 };
            let pos = group_pos[g];
            group_pos[g] += 1;
            let own = if g == 0 { MARKER_FEMALE } else { MARKER_MALE };
            let other = if g == 0 { MARKER_MALE } else { MARKER_FEMALE };
            let own_rate = spec.marker_strength;
            let cross_rate = spec.marker_strength / MARKER_CROSS_RATIO;
            if planted(pos + 1, own_rate) > marked[g][0] {
                marked[g][0] += 1;
                tokens.push(own);
            }
            if planted(pos + 1, cross_rate) > marked[g][1] {
                marked[g][1] += 1;
                tokens.push(other);
            }
        }

        items.push(Item {
            id: format!("item-{i:05}"),
            stem: tokens.join(" "),
            gender,
            age_years,
            age_group: assign_age_group(age_years),
            competency: competency.to_string(),
            topic_category: topic.to_string(),
        });
    }

    Corpus::new(items, format!("synthetic:{:016x}", spec_hash(spec)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn age_bins_match_named_boundaries() {
        assert_eq!(assign_age_group(0), AgeGroup::Years0To5);
        assert_eq!(assign_age_group(5), AgeGroup::Years0To5);
        assert_eq!(assign_age_group(6), AgeGroup::Years6To17);
        assert_eq!(assign_age_group(17), AgeGroup::Years6To17);
        assert_eq!(assign_age_group(18), AgeGroup::Years18To34);
        assert_eq!(assign_age_group(34), AgeGroup::Years18To34);
        assert_eq!(assign_age_group(35), AgeGroup::Years35To49);
        assert_eq!(assign_age_group(64), AgeGroup::Years50To64);
        assert_eq!(assign_age_group(67), AgeGroup::Years65To84);
        assert_eq!(assign_age_group(85), AgeGroup::Years85Plus);
        assert_eq!(assign_age_group(120), AgeGroup::Years85Plus);
    }

    #[test]
    fn age_bins_partition_all_ages() {
        for age in 0..=200 {
            let bin = assign_age_group(age);
            let hits = AgeGroup::ALL.iter().filter(|&&g| g == bin).count();
            assert_eq!(hits, 1);
        }
    }

    fn write_jsonl(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f
    }

    #[test]
    fn loads_record_per_line() {
        let f = write_jsonl(&[
            r#"{"id":"a1","stem":"A 67-year-old woman with chest pain","gender":"f","age":67,"competency":"diagnosis","topic":"cardiovascular"}"#,
            r#"{"id":"a2","stem":"A newborn is evaluated","gender":"M","age":0,"competency":"management","topic":"respiratory"}"#,
        ]);
        let corpus = load_corpus(f.path(), CorpusFormat::RecordPerLine).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.items[0].gender, Gender::Female);
        assert_eq!(corpus.items[0].age_group, AgeGroup::Years65To84);
        assert_eq!(corpus.items[1].age_group, AgeGroup::Years0To5);
    }

    #[test]
    fn duplicate_id_error_names_the_id() {
        let f = write_jsonl(&[
            r#"{"id":"x","stem":"one","gender":"f","age":30,"competency":"c","topic":"t"}"#,
            r#"{"id":"x","stem":"two","gender":"m","age":40,"competency":"c","topic":"t"}"#,
        ]);
        let err = load_corpus(f.path(), CorpusFormat::RecordPerLine).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("\"x\""), "got: {msg}");
        assert!(msg.contains("2"), "should name the offending row: {msg}");
    }

    #[test]
    fn rejects_bad_rows_with_row_numbers() {
        for (line, needle) in [
            (
                r#"{"id":"","stem":"s","gender":"f","age":1,"competency":"c","topic":"t"}"#,
                "missing id",
            ),
            (
                r#"{"id":"a","stem":"","gender":"f","age":1,"competency":"c","topic":"t"}"#,
                "empty stem",
            ),
            (
                r#"{"id":"a","stem":"s","gender":"x","age":1,"competency":"c","topic":"t"}"#,
                "unknown gender",
            ),
            (
                r#"{"id":"a","stem":"s","gender":"f","age":-3,"competency":"c","topic":"t"}"#,
                "negative age",
            ),
        ] {
            let f = write_jsonl(&[line]);
            let err = load_corpus(f.path(), CorpusFormat::RecordPerLine).unwrap_err();
            let msg = err.to_string();
            assert!(msg.contains(needle), "expected {needle} in: {msg}");
            assert!(msg.contains("row 1"), "expected row number in: {msg}");
        }
    }

    #[test]
    fn loads_delimited_with_quoted_fields() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "id,stem,gender,age,competency,topic").unwrap();
        writeln!(f, "a1,\"chest pain, severe\",female,45,diagnosis,cardiovascular").unwrap();
        let corpus = load_corpus(f.path(), CorpusFormat::Delimited).unwrap();
        assert_eq!(corpus.items[0].stem, "chest pain, severe");
        assert_eq!(corpus.items[0].age_group, AgeGroup::Years35To49);
    }

    #[test]
    fn save_load_round_trips() {
        let spec = SyntheticSpec {
            n_items: 60,
            n_communities: 3,
            marker_strength: 0.5,
            vocab_size: 60,
            seed: 7,
        };
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_corpus(&corpus, f.path()).unwrap();
        let reloaded = load_corpus(f.path(), CorpusFormat::RecordPerLine).unwrap();
        assert_eq!(corpus.items, reloaded.items);
    }

    #[test]
    fn synthetic_generation_is_deterministic() {
        let spec = SyntheticSpec {
            n_items: 100,
            n_communities: 5,
            marker_strength: 0.9,
            vocab_size: 100,
            seed: 42,
        };
        let a = generate_synthetic_corpus(&spec).unwrap();
        let b = generate_synthetic_corpus(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn null_planting_has_no_markers_and_constant_multisets() {
        let spec = SyntheticSpec {
            n_items: 200,
            n_communities: 5,
            marker_strength: 0.0,
            vocab_size: 100,
            seed: 1,
        };
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        for item in &corpus.items {
            assert!(!item.stem.contains(MARKER_FEMALE));
            assert!(!item.stem.contains(MARKER_MALE));
        }
        // Within a community every stem carries the same token multiset, so
        // no token statistic can correlate with any demographic field.
        for c in 0..5 {
            let mut sorted: Vec<Vec<&str>> = corpus
                .items
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 5 == c)
                .map(|(_, it)| {
                    let mut toks: Vec<&str> = it.stem.split_whitespace().collect();
                    toks.sort_unstable();
                    toks
                })
                .collect();
            sorted.dedup();
            assert_eq!(sorted.len(), 1, "community {c} stems differ in content");
        }
    }

    #[test]
    fn marker_fraction_meets_strength() {
        let spec = SyntheticSpec {
            n_items: 500,
            n_communities: 5,
            marker_strength: 0.9,
            vocab_size: 150,
            seed: 3,
        };
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        let female_in_target: Vec<_> = corpus
            .items
            .iter()
            .enumerate()
            .filter(|(i, it)| i % 5 == 0 && it.gender == Gender::Female)
            .map(|(_, it)| it)
            .collect();
        let with_marker = female_in_target
            .iter()
            .filter(|it| it.stem.split_whitespace().any(|t| t == MARKER_FEMALE))
            .count();
        let frac = with_marker as f64 / female_in_target.len() as f64;
        assert!(frac >= 0.89, "marker fraction {frac} below 0.89");
    }

    #[test]
    fn rejects_too_small_vocab() {
        let spec = SyntheticSpec {
            n_items: 10,
            n_communities: 5,
            marker_strength: 0.0,
            vocab_size: 10,
            seed: 0,
        };
        assert!(generate_synthetic_corpus(&spec).is_err());
    }

    #[test]
    fn community_words_are_disjoint_across_communities() {
        let a: Vec<String> = (0..40).map(|j| community_word(0, j)).collect();
        let b: Vec<String> = (0..40).map(|j| community_word(1, j)).collect();
        for w in &a {
            assert!(!b.contains(w));
        }
    }
}
