//! Stage orchestration: each audit stage as a standalone function over
//! explicit inputs, plus [`run_audit`] composing them end to end. The CLI
//! maps subcommands onto these stages and serializes the outputs between
//! them, so a staged run and an end-to-end run produce identical results.

use serde::{Deserialize, Serialize};

use crate::analysis::{metadata_distribution, CategoryDistribution, MetadataField};
use crate::classify::{run_prediction_tasks, Attribute, PredictionTasks, TaskInputs};
use crate::cluster::{select_k_detailed, ClusterAssignment, KSelection};
use crate::config::{ClusterConfig, CorrectSetConfig, PipelineConfig, TopicsConfig};
use crate::corpus::Corpus;
use crate::error::{AuditError, Result};
use crate::ner::{default_gazetteer, entity_frequencies, load_gazetteer, EntityFrequency, Gazetteer};
use crate::preprocess::{clean_stem, load_stoplists, CleanStem, StoplistSet};
use crate::report::{build_report, AuditReport, ReportInputs};
use crate::seed::derive_seed;
use crate::topics::{lda_fit, top_terms};
use crate::vectorize::{
    build_vocabulary, count_vector, load_embeddings, tfidf_vector, DocVector, Vocabulary,
};

/// Cleaned stems for a whole corpus, in corpus order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanCorpus {
    pub stems: Vec<CleanStem>,
    /// Items whose stems cleaned down to nothing; kept but flagged.
    pub degenerate_ids: Vec<String>,
}

pub fn preprocess_stage(corpus: &Corpus, lists: &StoplistSet) -> CleanCorpus {
    let stems: Vec<CleanStem> = corpus
        .items
        .iter()
        .map(|item| clean_stem(&item.id, &item.stem, lists))
        .collect();
    let degenerate_ids = stems
        .iter()
        .filter(|s| s.is_degenerate())
        .map(|s| s.item_id.clone())
        .collect();
    CleanCorpus {
        stems,
        degenerate_ids,
    }
}

/// Vocabulary plus TF-IDF and raw-count features, aligned to corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizeOutput {
    pub vocab: Vocabulary,
    pub tfidf: Vec<DocVector>,
    pub counts: Vec<Vec<f64>>,
    /// Items with no in-vocabulary tokens.
    pub zero_vector_ids: Vec<String>,
}

pub fn vectorize_stage(clean: &CleanCorpus, min_df: usize) -> Result<VectorizeOutput> {
    let vocab = build_vocabulary(&clean.stems, min_df)?;
    let tfidf: Vec<DocVector> = clean.stems.iter().map(|s| tfidf_vector(s, &vocab)).collect();
    let counts: Vec<Vec<f64>> = clean.stems.iter().map(|s| count_vector(s, &vocab)).collect();
    let zero_vector_ids = tfidf
        .iter()
        .filter(|v| v.is_zero())
        .map(|v| v.item_id.clone())
        .collect();
    Ok(VectorizeOutput {
        vocab,
        tfidf,
        counts,
        zero_vector_ids,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOutput {
    pub selection: KSelection,
    pub assignment: ClusterAssignment,
}

pub fn cluster_stage(
    vectors: &[DocVector],
    cfg: &ClusterConfig,
    seed: u64,
) -> Result<ClusterOutput> {
    let (selection, assignment) = select_k_detailed(
        vectors,
        cfg.k_min..=cfg.k_max,
        derive_seed(seed, "cluster", &[]),
        cfg.restarts,
        cfg.max_iter,
        cfg.tol,
    )?;
    Ok(ClusterOutput {
        selection,
        assignment,
    })
}

pub fn classify_stage(
    corpus: &Corpus,
    clustering: &ClusterAssignment,
    vectors: &VectorizeOutput,
    external: Option<&[DocVector]>,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<PredictionTasks> {
    let inputs = TaskInputs {
        corpus,
        clustering,
        tfidf: &vectors.tfidf,
        counts: &vectors.counts,
        external,
    };
    run_prediction_tasks(&inputs, &cfg.classify, derive_seed(seed, "classify", &[]))
}

/// A (cluster, attribute value) group of correctly-predicted items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subset {
    pub cluster: usize,
    pub attribute: Attribute,
    pub value: String,
    pub item_ids: Vec<String>,
}

impl Subset {
    pub fn label(&self) -> String {
        format!(
            "cluster {} / {} = {}",
            self.cluster,
            self.attribute.label(),
            self.value
        )
    }
}

/// Splits each correct-set task's correctly-predicted items by their true
/// attribute value, in deterministic (cluster, attribute, value) order.
pub fn correct_subsets(
    corpus: &Corpus,
    tasks: &PredictionTasks,
    correct_set: &CorrectSetConfig,
) -> Vec<Subset> {
    let by_id: std::collections::BTreeMap<&str, &crate::corpus::Item> = corpus
        .items
        .iter()
        .map(|it| (it.id.as_str(), it))
        .collect();
    let mut subsets = Vec::new();
    let mut selected: Vec<_> = tasks
        .results
        .iter()
        .filter(|t| t.model == correct_set.model && t.feature_source == correct_set.source)
        .collect();
    selected.sort_by_key(|t| (t.cluster, t.attribute));
    for task in selected {
        for category in task.baselines.per_category.iter().map(|(c, _)| c) {
            let item_ids: Vec<String> = task
                .correct_item_ids
                .iter()
                .filter(|id| {
                    let item = by_id[id.as_str()];
                    match task.attribute {
                        Attribute::Gender => item.gender.label() == category,
                        Attribute::AgeGroup => item.age_group.label() == category,
                    }
                })
                .cloned()
                .collect();
            if !item_ids.is_empty() {
                subsets.push(Subset {
                    cluster: task.cluster,
                    attribute: task.attribute,
                    value: category.clone(),
                    item_ids,
                });
            }
        }
    }
    subsets
}

/// Ranked terms for one topic of one subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicTerms {
    pub topic: usize,
    pub terms: Vec<(String, f64)>,
}

/// Topic-model output (or skip reason) for one subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetTopics {
    pub cluster: usize,
    pub attribute: Attribute,
    pub value: String,
    pub n_docs: usize,
    pub skipped: Option<String>,
    pub topics: Vec<TopicTerms>,
}

pub fn topics_stage(
    corpus: &Corpus,
    clean: &CleanCorpus,
    tasks: &PredictionTasks,
    cfg: &TopicsConfig,
    correct_set: &CorrectSetConfig,
    seed: u64,
) -> Vec<SubsetTopics> {
    let by_id: std::collections::BTreeMap<&str, &CleanStem> = clean
        .stems
        .iter()
        .map(|s| (s.item_id.as_str(), s))
        .collect();
    let mut out = Vec::new();
    for (subset_idx, subset) in correct_subsets(corpus, tasks, correct_set).iter().enumerate() {
        let docs: Vec<CleanStem> = subset
            .item_ids
            .iter()
            .map(|id| (*by_id[id.as_str()]).clone())
            .collect();
        let fit = lda_fit(
            &docs,
            cfg.n_topics,
            cfg.effective_alpha(),
            cfg.beta,
            cfg.iterations,
            derive_seed(seed, "lda", &[subset_idx as u64]),
        );
        let (skipped, topics) = match fit {
            Ok(model) => {
                let topics = (0..model.n_topics)
                    .map(|t| TopicTerms {
                        topic: t,
                        terms: top_terms(&model, t, 10).expect("topic index in range"),
                    })
                    .collect();
                (None, topics)
            }
            Err(e) => (Some(e.to_string()), Vec::new()),
        };
        out.push(SubsetTopics {
            cluster: subset.cluster,
            attribute: subset.attribute,
            value: subset.value.clone(),
            n_docs: subset.item_ids.len(),
            skipped,
            topics,
        });
    }
    out
}

/// Entity frequency table for one subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetEntities {
    pub cluster: usize,
    pub attribute: Attribute,
    pub value: String,
    pub n_docs: usize,
    pub entries: Vec<EntityFrequency>,
}

pub fn ner_stage(
    corpus: &Corpus,
    clean: &CleanCorpus,
    tasks: &PredictionTasks,
    correct_set: &CorrectSetConfig,
    gazetteer: &Gazetteer,
) -> Vec<SubsetEntities> {
    let by_id: std::collections::BTreeMap<&str, &CleanStem> = clean
        .stems
        .iter()
        .map(|s| (s.item_id.as_str(), s))
        .collect();
    correct_subsets(corpus, tasks, correct_set)
        .iter()
        .map(|subset| {
            let docs: Vec<&CleanStem> = subset
                .item_ids
                .iter()
                .map(|id| by_id[id.as_str()])
                .collect();
            let table = entity_frequencies(&subset.label(), &docs, gazetteer);
            SubsetEntities {
                cluster: subset.cluster,
                attribute: subset.attribute,
                value: subset.value.clone(),
                n_docs: subset.item_ids.len(),
                entries: table.entries,
            }
        })
        .collect()
}

/// Distribution check (or skip reason) for one task and metadata field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetDistribution {
    pub cluster: usize,
    pub attribute: Attribute,
    pub field: MetadataField,
    pub skipped: Option<String>,
    pub result: Option<CategoryDistribution>,
}

/// For each correct-set task, tests whether competency and topic-category
/// counts over the correctly-predicted items are uniform across the
/// categories present in the parent cluster.
pub fn analysis_stage(
    corpus: &Corpus,
    clustering: &ClusterAssignment,
    tasks: &PredictionTasks,
    correct_set: &CorrectSetConfig,
    threshold: f64,
) -> Vec<SubsetDistribution> {
    let index_of_id: std::collections::BTreeMap<&str, usize> = corpus
        .items
        .iter()
        .enumerate()
        .map(|(i, it)| (it.id.as_str(), i))
        .collect();
    let mut out = Vec::new();
    let mut selected: Vec<_> = tasks
        .results
        .iter()
        .filter(|t| t.model == correct_set.model && t.feature_source == correct_set.source)
        .collect();
    selected.sort_by_key(|t| (t.cluster, t.attribute));

    for task in selected {
        let members = clustering.member_indices(task.cluster);
        for field in [MetadataField::Competency, MetadataField::TopicCategory] {
            let field_of = |idx: usize| -> &str {
                match field {
                    MetadataField::Competency => &corpus.items[idx].competency,
                    MetadataField::TopicCategory => &corpus.items[idx].topic_category,
                }
            };
            let mut categories: Vec<String> =
                members.iter().map(|&i| field_of(i).to_string()).collect();
            categories.sort();
            categories.dedup();

            let mut observed = vec![0usize; categories.len()];
            for id in &task.correct_item_ids {
                let idx = index_of_id[id.as_str()];
                let cat = field_of(idx);
                let pos = categories.iter().position(|c| c == cat).expect("category present");
                observed[pos] += 1;
            }

            let label = format!("cluster {} / {}", task.cluster, task.attribute.label());
            match metadata_distribution(&label, field, &categories, &observed, threshold) {
                Ok(result) => out.push(SubsetDistribution {
                    cluster: task.cluster,
                    attribute: task.attribute,
                    field,
                    skipped: None,
                    result: Some(result),
                }),
                Err(e) => out.push(SubsetDistribution {
                    cluster: task.cluster,
                    attribute: task.attribute,
                    field,
                    skipped: Some(e.to_string()),
                    result: None,
                }),
            }
        }
    }
    out
}

/// Every stage's outputs plus the assembled report.
#[derive(Debug, Clone)]
pub struct AuditOutputs {
    pub clean: CleanCorpus,
    pub vectors: VectorizeOutput,
    pub clustering: ClusterOutput,
    pub tasks: PredictionTasks,
    pub topics: Option<Vec<SubsetTopics>>,
    pub entities: Option<Vec<SubsetEntities>>,
    pub distributions: Option<Vec<SubsetDistribution>>,
    pub report: AuditReport,
}

/// Runs the full pipeline over a loaded corpus. `generated_at` is recorded
/// verbatim as the report's timestamp field.
pub fn run_audit(
    corpus: &Corpus,
    cfg: &PipelineConfig,
    generated_at: &str,
) -> Result<AuditOutputs> {
    cfg.validate()?;
    cfg.validate_against_corpus(corpus.len())?;
    let seed = cfg.effective_seed();

    let lists = load_stoplists(&cfg.stoplists)?;
    let clean = preprocess_stage(corpus, &lists);
    let vectors = vectorize_stage(&clean, cfg.vectorize.min_df)?;

    let ids: Vec<String> = corpus.items.iter().map(|it| it.id.clone()).collect();
    let external = match &cfg.vectorize.embeddings {
        Some(path) => Some(load_embeddings(path, &ids)?),
        None => None,
    };

    let cluster_vectors: &[DocVector] = if cfg.vectorize.cluster_on == "external" {
        external
            .as_deref()
            .ok_or_else(|| AuditError::Config("cluster_on external without embeddings".into()))?
    } else {
        &vectors.tfidf
    };
    let clustering = cluster_stage(cluster_vectors, &cfg.cluster, seed)?;

    let tasks = classify_stage(
        corpus,
        &clustering.assignment,
        &vectors,
        external.as_deref(),
        cfg,
        seed,
    )?;

    let topics = if cfg.topics.enabled {
        Some(topics_stage(
            corpus,
            &clean,
            &tasks,
            &cfg.topics,
            &cfg.correct_set,
            seed,
        ))
    } else {
        None
    };

    let entities = if cfg.ner.enabled {
        let gazetteer = match &cfg.ner.gazetteer {
            Some(path) => load_gazetteer(path, &lists)?,
            None => default_gazetteer(&lists),
        };
        Some(ner_stage(corpus, &clean, &tasks, &cfg.correct_set, &gazetteer))
    } else {
        None
    };

    let distributions = if cfg.analysis.enabled {
        Some(analysis_stage(
            corpus,
            &clustering.assignment,
            &tasks,
            &cfg.correct_set,
            cfg.analysis.threshold,
        ))
    } else {
        None
    };

    let mut stage_warnings = Vec::new();
    for id in &clean.degenerate_ids {
        stage_warnings.push(format!("item \"{id}\": stem cleaned down to no tokens"));
    }
    for id in &vectors.zero_vector_ids {
        stage_warnings.push(format!("item \"{id}\": no in-vocabulary tokens, zero vector"));
    }

    let report = build_report(ReportInputs {
        corpus,
        config: cfg,
        selection: &clustering.selection,
        assignment: &clustering.assignment,
        tasks: &tasks,
        topics: topics.as_deref(),
        entities: entities.as_deref(),
        distributions: distributions.as_deref(),
        stage_warnings,
        generated_at,
    })?;

    Ok(AuditOutputs {
        clean,
        vectors,
        clustering,
        tasks,
        topics,
        entities,
        distributions,
        report,
    })
}

