//! Pipeline configuration: one structure covering every stage, with a
//! single seed from which all randomness derives.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifyConfig, MODEL_LOGREG, MODEL_MNB};
use crate::corpus::CorpusFormat;
use crate::error::{AuditError, Result};
use crate::preprocess::StoplistPaths;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub path: Option<PathBuf>,
    pub format: CorpusFormat,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            path: None,
            format: CorpusFormat::RecordPerLine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VectorizeConfig {
    pub min_df: usize,
    /// Optional externally computed embedding file (one `{id, vector}`
    /// record per line).
    pub embeddings: Option<PathBuf>,
    /// Which vectors drive clustering: "tfidf" or "external".
    pub cluster_on: String,
}

impl Default for VectorizeConfig {
    fn default() -> Self {
        VectorizeConfig {
            min_df: 2,
            embeddings: None,
            cluster_on: "tfidf".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k_min: 2,
            k_max: 7,
            restarts: 5,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

/// Which task's correctly-predicted items feed the explanation stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrectSetConfig {
    pub model: String,
    pub source: String,
}

impl Default for CorrectSetConfig {
    fn default() -> Self {
        CorrectSetConfig {
            model: MODEL_LOGREG.into(),
            source: "tfidf".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicsConfig {
    pub enabled: bool,
    pub n_topics: usize,
    /// Defaults to the 50/T heuristic when unset.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
}

impl TopicsConfig {
    pub fn effective_alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.n_topics as f64)
    }
}

impl Default for TopicsConfig {
    fn default() -> Self {
        TopicsConfig {
            enabled: true,
            n_topics: 2,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NerConfig {
    pub enabled: bool,
    /// Override gazetteer path; the shipped dictionary is used when unset.
    pub gazetteer: Option<PathBuf>,
}

impl Default for NerConfig {
    fn default() -> Self {
        NerConfig {
            enabled: true,
            gazetteer: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub enabled: bool,
    pub threshold: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            enabled: true,
            threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportSettings {
    /// Accuracy must exceed the max baseline by more than this margin for a
    /// cell to be flagged "pattern detected".
    pub flag_margin: f64,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings { flag_margin: 0.10 }
    }
}

/// Full pipeline configuration. Serialized into the audit report so every
/// run records the knobs that produced it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub corpus: CorpusConfig,
    pub stoplists: StoplistPaths,
    pub vectorize: VectorizeConfig,
    pub cluster: ClusterConfig,
    pub classify: ClassifyConfig,
    pub correct_set: CorrectSetConfig,
    pub topics: TopicsConfig,
    pub ner: NerConfig,
    pub analysis: AnalysisConfig,
    pub report: ReportSettings,
}

pub const DEFAULT_SEED: u64 = 42;

impl PipelineConfig {
    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Structural validation that does not need the corpus.
    pub fn validate(&self) -> Result<()> {
        if self.cluster.k_min < 2 || self.cluster.k_min > self.cluster.k_max {
            return Err(AuditError::Config(format!(
                "k range [{}, {}] invalid: need 2 <= k_min <= k_max",
                self.cluster.k_min, self.cluster.k_max
            )));
        }
        if !(0.0..1.0).contains(&self.classify.train_ratio) || self.classify.train_ratio == 0.0 {
            return Err(AuditError::Config(format!(
                "train_ratio {} outside (0, 1)",
                self.classify.train_ratio
            )));
        }
        if self.vectorize.min_df == 0 {
            return Err(AuditError::Config("min_df must be >= 1".into()));
        }
        if !["tfidf", "external"].contains(&self.vectorize.cluster_on.as_str()) {
            return Err(AuditError::Config(format!(
                "cluster_on must be \"tfidf\" or \"external\", got \"{}\"",
                self.vectorize.cluster_on
            )));
        }
        if self.vectorize.cluster_on == "external" && self.vectorize.embeddings.is_none() {
            return Err(AuditError::Config(
                "cluster_on = \"external\" requires an embeddings path".into(),
            ));
        }
        if ![MODEL_LOGREG, MODEL_MNB].contains(&self.correct_set.model.as_str()) {
            return Err(AuditError::Config(format!(
                "correct_set.model must be \"{MODEL_LOGREG}\" or \"{MODEL_MNB}\""
            )));
        }
        if self.topics.n_topics == 0 {
            return Err(AuditError::Config("topics.n_topics must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.analysis.threshold) {
            return Err(AuditError::Config(format!(
                "analysis.threshold {} outside [0, 1]",
                self.analysis.threshold
            )));
        }
        if self.report.flag_margin < 0.0 {
            return Err(AuditError::Config("flag_margin must be >= 0".into()));
        }
        // Referenced files must exist up front.
        let mut paths: Vec<(&str, &Option<PathBuf>)> = vec![
            ("corpus.path", &self.corpus.path),
            ("vectorize.embeddings", &self.vectorize.embeddings),
            ("ner.gazetteer", &self.ner.gazetteer),
            ("stoplists.stopwords", &self.stoplists.stopwords),
            ("stoplists.negations", &self.stoplists.negations),
            ("stoplists.units", &self.stoplists.units),
            ("stoplists.demographic", &self.stoplists.demographic),
            ("stoplists.domain_highfreq", &self.stoplists.domain_highfreq),
            ("stoplists.lemma_overrides", &self.stoplists.lemma_overrides),
        ];
        for (key, path) in paths.drain(..) {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(AuditError::Config(format!(
                        "{key}: file not found: {}",
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Validation that needs the corpus size: the scanned k range must fit
    /// within [2, n-1].
    pub fn validate_against_corpus(&self, n_items: usize) -> Result<()> {
        if self.cluster.k_max > n_items.saturating_sub(1) {
            return Err(AuditError::Config(format!(
                "k_max {} exceeds n-1 = {} for this corpus",
                self.cluster.k_max,
                n_items.saturating_sub(1)
            )));
        }
        Ok(())
    }
}
