//! Audit report assembly, structural validation, markdown rendering, and
//! the auxiliary flat files.
//!
//! The machine-readable report is JSON with a documented schema version.
//! Regenerating a report from the same inputs is byte-identical except for
//! the single top-level `generated_at` field.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classify::{PredictionTaskResult, PredictionTasks, SkippedTask};
use crate::cluster::{argmax_silhouette, ClusterAssignment, KSelection};
use crate::config::PipelineConfig;
use crate::corpus::Corpus;
use crate::error::{AuditError, Result};
use crate::pipeline::{SubsetDistribution, SubsetEntities, SubsetTopics};

pub const SCHEMA_VERSION: u32 = 1;

/// Interpretation note attached to every accuracy cell: prediction accuracy
/// above baseline means stem language carries the demographic attribute, so
/// lower accuracy is the desirable outcome.
pub const INTERPRETATION: &str = "Accuracy measures how well stem language alone predicts the \
demographic attribute; lower accuracy (closer to baseline) is the desirable outcome. Cells where \
accuracy exceeds the max baseline by more than the flag margin are marked \"pattern detected\".";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub provenance: String,
    pub n_items: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelectionReport {
    pub sse_curve: Vec<(usize, f64)>,
    pub silhouette_scores: Vec<(usize, f64)>,
    pub chosen_k: usize,
    /// Decisions recorded for auditability.
    pub distance: String,
    pub init: String,
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub index: usize,
    pub size: usize,
    pub gender_counts: Vec<(String, usize)>,
}

/// One prediction-task cell of the accuracy-vs-baseline table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCell {
    #[serde(flatten)]
    pub task: PredictionTaskResult,
    pub pattern_detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagSummary {
    pub cluster: usize,
    pub attribute: String,
    pub feature_source: String,
    pub model: String,
    pub accuracy: f64,
    pub max_baseline: f64,
    pub excess: f64,
}

/// A stage's subsection; disabled stages record why they are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSection<T> {
    pub enabled: bool,
    pub skipped_reason: Option<String>,
    pub subsets: Vec<T>,
}

impl<T> StageSection<T> {
    fn from_option(data: Option<Vec<T>>) -> StageSection<T> {
        match data {
            Some(subsets) => StageSection {
                enabled: true,
                skipped_reason: None,
                subsets,
            },
            None => StageSection {
                enabled: false,
                skipped_reason: Some("skipped (disabled)".into()),
                subsets: Vec::new(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSection {
    pub enabled: bool,
    pub skipped_reason: Option<String>,
    pub tests: Vec<SubsetDistribution>,
    /// Present when more than ten tests ran without correction.
    pub multiple_comparison_note: Option<String>,
}

/// The full machine-readable audit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    /// The only field excluded from determinism comparisons.
    pub generated_at: String,
    pub seed: u64,
    pub interpretation: String,
    pub flag_margin: f64,
    pub corpus: CorpusSummary,
    pub config: PipelineConfig,
    pub k_selection: KSelectionReport,
    pub clusters: Vec<ClusterSummary>,
    pub prediction_tasks: Vec<TaskCell>,
    pub skipped_tasks: Vec<SkippedTask>,
    pub flags: Vec<FlagSummary>,
    pub topics: StageSection<SubsetTopics>,
    pub entities: StageSection<SubsetEntities>,
    pub metadata_distributions: AnalysisSection,
    pub warnings: Vec<String>,
}

impl AuditReport {
    pub fn has_flags(&self) -> bool {
        !self.flags.is_empty()
    }

    /// Pretty JSON with stable field order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Everything [`build_report`] needs from the completed stages.
pub struct ReportInputs<'a> {
    pub corpus: &'a Corpus,
    pub config: &'a PipelineConfig,
    pub selection: &'a KSelection,
    pub assignment: &'a ClusterAssignment,
    pub tasks: &'a PredictionTasks,
    pub topics: Option<&'a [SubsetTopics]>,
    pub entities: Option<&'a [SubsetEntities]>,
    pub distributions: Option<&'a [SubsetDistribution]>,
    pub stage_warnings: Vec<String>,
    pub generated_at: &'a str,
}

/// Assembles and cross-validates the report. Dangling item ids or missing
/// baselines abort with a diagnostic naming the offender.
pub fn build_report(inputs: ReportInputs<'_>) -> Result<AuditReport> {
    let ReportInputs {
        corpus,
        config,
        selection,
        assignment,
        tasks,
        topics,
        entities,
        distributions,
        stage_warnings,
        generated_at,
    } = inputs;

    // Every corpus item must appear in the clustering exactly once.
    let mut cluster_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (id, &c) in assignment.item_ids.iter().zip(&assignment.assignment) {
        if cluster_of.insert(id.as_str(), c).is_some() {
            return Err(AuditError::Report(format!(
                "item id \"{id}\" appears more than once in the clustering"
            )));
        }
    }
    for item in &corpus.items {
        if !cluster_of.contains_key(item.id.as_str()) {
            return Err(AuditError::Report(format!(
                "item id \"{}\" is absent from the clustering",
                item.id
            )));
        }
    }

    let mut cells = Vec::new();
    let mut flags = Vec::new();
    for task in &tasks.results {
        if task.baselines.per_category.is_empty() {
            return Err(AuditError::Report(format!(
                "task (cluster {}, {}) has no baseline rows",
                task.cluster,
                task.attribute.label()
            )));
        }
        for id in &task.correct_item_ids {
            match cluster_of.get(id.as_str()) {
                Some(&c) if c == task.cluster => {}
                Some(&c) => {
                    return Err(AuditError::Report(format!(
                        "correctly-predicted item \"{id}\" belongs to cluster {c}, not task \
                         cluster {}",
                        task.cluster
                    )));
                }
                None => {
                    return Err(AuditError::Report(format!(
                        "correctly-predicted item \"{id}\" is absent from the clustering"
                    )));
                }
            }
        }
        let max_baseline = task.baselines.max();
        let excess = task.accuracy - max_baseline;
        let pattern_detected = excess > config.report.flag_margin;
        if pattern_detected {
            flags.push(FlagSummary {
                cluster: task.cluster,
                attribute: task.attribute.label().to_string(),
                feature_source: task.feature_source.clone(),
                model: task.model.clone(),
                accuracy: task.accuracy,
                max_baseline,
                excess,
            });
        }
        cells.push(TaskCell {
            task: task.clone(),
            pattern_detected,
        });
    }

    let clusters = (0..assignment.k)
        .map(|index| {
            let members = assignment.member_indices(index);
            let demo = crate::classify::cluster_demographics(
                corpus,
                &members,
                crate::classify::Attribute::Gender,
            );
            ClusterSummary {
                index,
                size: members.len(),
                gender_counts: demo
                    .categories
                    .into_iter()
                    .zip(demo.counts)
                    .collect(),
            }
        })
        .collect();

    let analysis_section = match distributions {
        Some(tests) => {
            let n_tests = tests.iter().filter(|t| t.skipped.is_none()).count();
            AnalysisSection {
                enabled: true,
                skipped_reason: None,
                multiple_comparison_note: (n_tests > 10).then(|| {
                    format!(
                        "{n_tests} uniformity tests were run without multiple-comparison \
                         correction; expect ~{:.1} false skew verdicts at threshold {}",
                        n_tests as f64 * config.analysis.threshold,
                        config.analysis.threshold
                    )
                }),
                tests: tests.to_vec(),
            }
        }
        None => AnalysisSection {
            enabled: false,
            skipped_reason: Some("skipped (disabled)".into()),
            multiple_comparison_note: None,
            tests: Vec::new(),
        },
    };

    Ok(AuditReport {
        schema_version: SCHEMA_VERSION,
        generated_at: generated_at.to_string(),
        seed: config.effective_seed(),
        interpretation: INTERPRETATION.to_string(),
        flag_margin: config.report.flag_margin,
        corpus: CorpusSummary {
            provenance: corpus.provenance.clone(),
            n_items: corpus.len(),
        },
        config: config.clone(),
        k_selection: KSelectionReport {
            sse_curve: selection.sse_curve.clone(),
            silhouette_scores: selection.silhouette_scores.clone(),
            chosen_k: selection.chosen_k,
            distance: "euclidean".into(),
            init: "kmeans++".into(),
            restarts: config.cluster.restarts,
        },
        clusters,
        prediction_tasks: cells,
        skipped_tasks: tasks.skipped.clone(),
        flags,
        topics: StageSection::from_option(topics.map(<[_]>::to_vec)),
        entities: StageSection::from_option(entities.map(<[_]>::to_vec)),
        metadata_distributions: analysis_section,
        warnings: stage_warnings,
    })
}

/// Structural validation of a (possibly hand-edited) report.
pub fn validate_report(report: &AuditReport) -> Result<()> {
    if report.schema_version != SCHEMA_VERSION {
        return Err(AuditError::Report(format!(
            "schema version {} not supported (expected {SCHEMA_VERSION})",
            report.schema_version
        )));
    }
    let cluster_total: usize = report.clusters.iter().map(|c| c.size).sum();
    if cluster_total != report.corpus.n_items {
        return Err(AuditError::Report(format!(
            "cluster sizes sum to {cluster_total}, corpus has {} items",
            report.corpus.n_items
        )));
    }
    if let Some(expected) = argmax_silhouette(&report.k_selection.silhouette_scores) {
        if expected != report.k_selection.chosen_k {
            return Err(AuditError::Report(format!(
                "chosen_k {} is not the silhouette argmax {expected}",
                report.k_selection.chosen_k
            )));
        }
    }
    for (_, s) in &report.k_selection.silhouette_scores {
        if !(-1.0..=1.0).contains(s) {
            return Err(AuditError::Report(format!("silhouette score {s} outside [-1, 1]")));
        }
    }
    let mut flagged = 0usize;
    for cell in &report.prediction_tasks {
        let t = &cell.task;
        if !(0.0..=1.0).contains(&t.accuracy) {
            return Err(AuditError::Report(format!(
                "accuracy {} outside [0, 1]",
                t.accuracy
            )));
        }
        if t.baselines.per_category.is_empty() {
            return Err(AuditError::Report("task missing baseline rows".into()));
        }
        let sum: f64 = t.baselines.per_category.iter().map(|(_, v)| v).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(AuditError::Report(format!("baselines sum to {sum}, not 1")));
        }
        if t.correct_item_ids.len() != (t.accuracy * t.n_test as f64).round() as usize {
            return Err(AuditError::Report(format!(
                "accuracy {} inconsistent with {} correct of {} test items",
                t.accuracy,
                t.correct_item_ids.len(),
                t.n_test
            )));
        }
        let expected_flag = t.accuracy - t.baselines.max() > report.flag_margin;
        if expected_flag != cell.pattern_detected {
            return Err(AuditError::Report(format!(
                "pattern_detected inconsistent with flag margin for cluster {} {}",
                t.cluster,
                t.attribute.label()
            )));
        }
        if cell.pattern_detected {
            flagged += 1;
        }
    }
    if flagged != report.flags.len() {
        return Err(AuditError::Report(format!(
            "{flagged} flagged cells but {} flag summaries",
            report.flags.len()
        )));
    }
    for test in &report.metadata_distributions.tests {
        if let Some(r) = &test.result {
            if !(0.0..=1.0).contains(&r.p_value) {
                return Err(AuditError::Report(format!("p-value {} outside [0, 1]", r.p_value)));
            }
            if r.df + 1 != r.categories.len() {
                return Err(AuditError::Report(format!(
                    "df {} inconsistent with {} categories",
                    r.df,
                    r.categories.len()
                )));
            }
            let uniform = matches!(r.verdict, crate::analysis::Verdict::Uniform);
            if uniform != (r.p_value > r.threshold) {
                return Err(AuditError::Report("verdict inconsistent with p-value".into()));
            }
        }
    }
    for section in &report.entities.subsets {
        let mut prev = usize::MAX;
        for e in &section.entries {
            if e.count == 0 {
                return Err(AuditError::Report(format!(
                    "entity \"{}\" has zero count",
                    e.surface
                )));
            }
            if e.count > prev {
                return Err(AuditError::Report("entity table not sorted by count".into()));
            }
            prev = e.count;
        }
    }
    Ok(())
}

fn fmt_f(v: f64) -> String {
    format!("{v:.4}")
}

/// Renders the human-readable report. Pure function of the report minus the
/// timestamp, so two runs over identical inputs render identical bytes.
pub fn render_markdown(report: &AuditReport) -> String {
    let mut out = String::new();
    let w = &mut out;

    writeln!(w, "# Item bank language audit").unwrap();
    writeln!(w).unwrap();
    writeln!(w, "- Corpus: `{}` ({} items)", report.corpus.provenance, report.corpus.n_items).unwrap();
    writeln!(w, "- Seed: {}", report.seed).unwrap();
    writeln!(w, "- Flag margin: {}", report.flag_margin).unwrap();
    writeln!(w).unwrap();
    writeln!(w, "{}", report.interpretation).unwrap();
    writeln!(w).unwrap();

    writeln!(w, "## Cluster count selection").unwrap();
    writeln!(w).unwrap();
    writeln!(
        w,
        "Chosen k = {} (silhouette argmax; {} distance, {} init, {} restarts).",
        report.k_selection.chosen_k,
        report.k_selection.distance,
        report.k_selection.init,
        report.k_selection.restarts
    )
    .unwrap();
    writeln!(w).unwrap();
    writeln!(w, "| k | SSE | silhouette |").unwrap();
    writeln!(w, "|---|-----|------------|").unwrap();
    let silhouettes: BTreeMap<usize, f64> =
        report.k_selection.silhouette_scores.iter().copied().collect();
    for (k, sse) in &report.k_selection.sse_curve {
        let s = silhouettes
            .get(k)
            .map(|v| fmt_f(*v))
            .unwrap_or_else(|| "-".into());
        writeln!(w, "| {k} | {} | {s} |", fmt_f(*sse)).unwrap();
    }
    writeln!(w).unwrap();

    writeln!(w, "## Clusters").unwrap();
    writeln!(w).unwrap();
    writeln!(w, "| cluster | size | gender counts |").unwrap();
    writeln!(w, "|---------|------|---------------|").unwrap();
    for c in &report.clusters {
        let genders: Vec<String> = c
            .gender_counts
            .iter()
            .map(|(g, n)| format!("{g} {n}"))
            .collect();
        writeln!(w, "| {} | {} | {} |", c.index, c.size, genders.join(", ")).unwrap();
    }
    writeln!(w).unwrap();

    writeln!(w, "## Prediction accuracy vs. baseline").unwrap();
    writeln!(w).unwrap();
    writeln!(
        w,
        "| cluster | attribute | source | model | baselines | baseline avg | accuracy | flag |"
    )
    .unwrap();
    writeln!(w, "|---------|-----------|--------|-------|-----------|--------------|----------|------|").unwrap();
    for cell in &report.prediction_tasks {
        let t = &cell.task;
        let baselines: Vec<String> = t
            .baselines
            .per_category
            .iter()
            .map(|(c, v)| format!("{c} {}", fmt_f(*v)))
            .collect();
        writeln!(
            w,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            t.cluster,
            t.attribute.label(),
            t.feature_source,
            t.model,
            baselines.join(", "),
            fmt_f(t.baselines.average),
            fmt_f(t.accuracy),
            if cell.pattern_detected { "pattern detected" } else { "-" }
        )
        .unwrap();
    }
    writeln!(w).unwrap();
    if !report.skipped_tasks.is_empty() {
        writeln!(w, "Skipped tasks:").unwrap();
        writeln!(w).unwrap();
        for s in &report.skipped_tasks {
            writeln!(
                w,
                "- cluster {}, {}, {}/{}: {}",
                s.cluster,
                s.attribute.label(),
                s.feature_source,
                s.model,
                s.reason
            )
            .unwrap();
        }
        writeln!(w).unwrap();
    }

    writeln!(w, "## Flags").unwrap();
    writeln!(w).unwrap();
    if report.flags.is_empty() {
        writeln!(w, "No patterns detected.").unwrap();
    } else {
        for f in &report.flags {
            writeln!(
                w,
                "- **pattern detected**: cluster {}, {}, {}/{}: accuracy {} exceeds max baseline \
                 {} by {}",
                f.cluster,
                f.attribute,
                f.feature_source,
                f.model,
                fmt_f(f.accuracy),
                fmt_f(f.max_baseline),
                fmt_f(f.excess)
            )
            .unwrap();
        }
    }
    writeln!(w).unwrap();

    writeln!(w, "## Topics in correctly-predicted items").unwrap();
    writeln!(w).unwrap();
    if !report.topics.enabled {
        writeln!(
            w,
            "{}",
            report.topics.skipped_reason.as_deref().unwrap_or("skipped")
        )
        .unwrap();
        writeln!(w).unwrap();
    } else {
        for s in &report.topics.subsets {
            writeln!(
                w,
                "### Cluster {}, {} = {} ({} items)",
                s.cluster,
                s.attribute.label(),
                s.value,
                s.n_docs
            )
            .unwrap();
            writeln!(w).unwrap();
            match &s.skipped {
                Some(reason) => writeln!(w, "skipped: {reason}").unwrap(),
                None => {
                    for t in &s.topics {
                        let terms: Vec<String> = t
                            .terms
                            .iter()
                            .map(|(term, p)| format!("{term} ({})", fmt_f(*p)))
                            .collect();
                        writeln!(w, "- topic {}: {}", t.topic, terms.join(", ")).unwrap();
                    }
                }
            }
            writeln!(w).unwrap();
        }
    }

    writeln!(w, "## Entity frequencies in correctly-predicted items").unwrap();
    writeln!(w).unwrap();
    if !report.entities.enabled {
        writeln!(
            w,
            "{}",
            report.entities.skipped_reason.as_deref().unwrap_or("skipped")
        )
        .unwrap();
        writeln!(w).unwrap();
    } else {
        for s in &report.entities.subsets {
            writeln!(
                w,
                "### Cluster {}, {} = {} ({} items)",
                s.cluster,
                s.attribute.label(),
                s.value,
                s.n_docs
            )
            .unwrap();
            writeln!(w).unwrap();
            if s.entries.is_empty() {
                writeln!(w, "no mentions").unwrap();
            } else {
                writeln!(w, "| surface | type | count |").unwrap();
                writeln!(w, "|---------|------|-------|").unwrap();
                for e in &s.entries {
                    writeln!(w, "| {} | {} | {} |", e.surface, e.entity_type, e.count).unwrap();
                }
            }
            writeln!(w).unwrap();
        }
    }

    writeln!(w, "## Category distributions in correctly-predicted items").unwrap();
    writeln!(w).unwrap();
    if !report.metadata_distributions.enabled {
        writeln!(
            w,
            "{}",
            report
                .metadata_distributions
                .skipped_reason
                .as_deref()
                .unwrap_or("skipped")
        )
        .unwrap();
        writeln!(w).unwrap();
    } else {
        writeln!(w, "| cluster | attribute | field | statistic | df | p | verdict |").unwrap();
        writeln!(w, "|---------|-----------|-------|-----------|----|---|---------|").unwrap();
        for t in &report.metadata_distributions.tests {
            match (&t.skipped, &t.result) {
                (Some(reason), _) => writeln!(
                    w,
                    "| {} | {} | {} | - | - | - | {reason} |",
                    t.cluster,
                    t.attribute.label(),
                    t.field.label()
                )
                .unwrap(),
                (None, Some(r)) => {
                    let verdict = match r.verdict {
                        crate::analysis::Verdict::Uniform => "uniform",
                        crate::analysis::Verdict::Skewed => "skewed",
                    };
                    let warn = if r.low_count_warning { " (low counts)" } else { "" };
                    writeln!(
                        w,
                        "| {} | {} | {} | {} | {} | {} | {verdict}{warn} |",
                        t.cluster,
                        t.attribute.label(),
                        t.field.label(),
                        fmt_f(r.statistic),
                        r.df,
                        fmt_f(r.p_value)
                    )
                    .unwrap();
                }
                (None, None) => {}
            }
        }
        writeln!(w).unwrap();
        if let Some(note) = &report.metadata_distributions.multiple_comparison_note {
            writeln!(w, "{note}").unwrap();
            writeln!(w).unwrap();
        }
    }

    writeln!(w, "## Warnings").unwrap();
    writeln!(w).unwrap();
    if report.warnings.is_empty() {
        writeln!(w, "none").unwrap();
    } else {
        for warning in &report.warnings {
            writeln!(w, "- {warning}").unwrap();
        }
    }

    out
}

/// Flat (k, sse, silhouette) rows for external plotting.
pub fn k_selection_tsv(selection: &KSelectionReport) -> String {
    let silhouettes: BTreeMap<usize, f64> = selection.silhouette_scores.iter().copied().collect();
    let mut out = String::from("k\tsse\tsilhouette\n");
    for (k, sse) in &selection.sse_curve {
        let s = silhouettes
            .get(k)
            .map(|v| v.to_string())
            .unwrap_or_default();
        writeln!(out, "{k}\t{sse}\t{s}").unwrap();
    }
    out
}

/// Flat entity-frequency rows usable by external word-cloud renderers.
pub fn entity_frequencies_tsv(subsets: &[SubsetEntities]) -> String {
    let mut out = String::from("cluster\tattribute\tvalue\tsurface\tentity_type\tcount\n");
    for s in subsets {
        for e in &s.entries {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                s.cluster,
                s.attribute.label(),
                s.value,
                e.surface,
                e.entity_type,
                e.count
            )
            .unwrap();
        }
    }
    out
}
