//! Command-line driver: runs the audit end to end or stage by stage, with
//! one config file, per-key flag overrides, and a single seed.
//!
//! Exit codes: 0 clean, 1 error, 2 when any "pattern detected" flag was
//! raised — so the tool can gate item-bank CI pipelines.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use itemaudit_core::classify::PredictionTasks;
use itemaudit_core::config::PipelineConfig;
use itemaudit_core::corpus::{
    generate_synthetic_corpus, load_corpus, save_corpus, Corpus, CorpusFormat, SyntheticSpec,
};
use itemaudit_core::ner::{default_gazetteer, load_gazetteer};
use itemaudit_core::pipeline::{
    analysis_stage, classify_stage, cluster_stage, ner_stage, preprocess_stage, run_audit,
    topics_stage, vectorize_stage, CleanCorpus, ClusterOutput, SubsetEntities, SubsetTopics,
};
use itemaudit_core::preprocess::load_stoplists;
use itemaudit_core::report::{
    build_report, entity_frequencies_tsv, k_selection_tsv, render_markdown, AuditReport,
    ReportInputs,
};
use itemaudit_core::vectorize::load_embeddings;

#[derive(Parser)]
#[command(name = "itemaudit", version, about = "Audit exam item banks for demographic-predictive language patterns")]
struct Cli {
    /// Pipeline config file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for reports and stage intermediates.
    #[arg(long, global = true, default_value = "audit-out")]
    out_dir: PathBuf,

    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Per-key overrides for the config file.
#[derive(Args)]
struct Overrides {
    /// Run seed; all randomness derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Corpus file path.
    #[arg(long, global = true)]
    corpus_path: Option<PathBuf>,
    /// Corpus format: "record-per-line" (jsonl) or "delimited" (csv).
    #[arg(long, global = true)]
    corpus_format: Option<String>,
    #[arg(long, global = true)]
    min_df: Option<usize>,
    /// External embedding file ({id, vector} per line).
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// Vectors to cluster on: "tfidf" or "external".
    #[arg(long, global = true)]
    cluster_on: Option<String>,
    #[arg(long, global = true)]
    k_min: Option<usize>,
    #[arg(long, global = true)]
    k_max: Option<usize>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    train_ratio: Option<f64>,
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    l2: Option<f64>,
    #[arg(long, global = true)]
    mnb_alpha: Option<f64>,
    /// Model whose correct predictions feed the explanation stages.
    #[arg(long, global = true)]
    correct_model: Option<String>,
    /// Feature source of the correct-set task.
    #[arg(long, global = true)]
    correct_source: Option<String>,
    #[arg(long, global = true)]
    n_topics: Option<usize>,
    #[arg(long, global = true)]
    lda_alpha: Option<f64>,
    #[arg(long, global = true)]
    lda_beta: Option<f64>,
    #[arg(long, global = true)]
    lda_iterations: Option<usize>,
    #[arg(long, global = true)]
    disable_topics: bool,
    #[arg(long, global = true)]
    gazetteer: Option<PathBuf>,
    #[arg(long, global = true)]
    disable_ner: bool,
    #[arg(long, global = true)]
    chi_threshold: Option<f64>,
    #[arg(long, global = true)]
    disable_analysis: bool,
    #[arg(long, global = true)]
    flag_margin: Option<f64>,
    #[arg(long, global = true)]
    stopwords: Option<PathBuf>,
    #[arg(long, global = true)]
    negations: Option<PathBuf>,
    #[arg(long, global = true)]
    units: Option<PathBuf>,
    #[arg(long, global = true)]
    demographic: Option<PathBuf>,
    #[arg(long, global = true)]
    domain_highfreq: Option<PathBuf>,
    #[arg(long, global = true)]
    lemma_overrides: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write the audit report.
    Audit,
    /// Generate a synthetic corpus with planted communities and markers.
    Synth {
        /// Synthetic spec file (TOML with n_items, n_communities,
        /// marker_strength, vocab_size, seed).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        n_items: usize,
        #[arg(long, default_value_t = 5)]
        n_communities: usize,
        #[arg(long, default_value_t = 0.0)]
        marker_strength: f64,
        #[arg(long, default_value_t = 200)]
        vocab_size: usize,
        #[arg(long, default_value_t = 42)]
        synth_seed: u64,
        /// Output corpus path (record-per-line).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Clean stems and write clean.json.
    Preprocess,
    /// Vectorize, scan k, and write clustering.json.
    Cluster,
    /// Run the prediction task grid and write predictions.json.
    Predict,
    /// Fit topic models on correct subsets and write topics.json.
    Topics,
    /// Tag entities over correct subsets and write entities.json.
    Ner,
    /// Assemble report.json / report.md from stage intermediates.
    Report,
}

fn parse_format(s: &str) -> Result<CorpusFormat> {
    match s.to_ascii_lowercase().as_str() {
        "record-per-line" | "jsonl" => Ok(CorpusFormat::RecordPerLine),
        "delimited" | "csv" => Ok(CorpusFormat::Delimited),
        other => bail!("unknown corpus format \"{other}\" (expected record-per-line or delimited)"),
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg: PipelineConfig = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = o.seed {
        cfg.seed = Some(v);
    }
    if let Some(v) = &o.corpus_path {
        cfg.corpus.path = Some(v.clone());
    }
    if let Some(v) = &o.corpus_format {
        cfg.corpus.format = parse_format(v)?;
    }
    if let Some(v) = o.min_df {
        cfg.vectorize.min_df = v;
    }
    if let Some(v) = &o.embeddings {
        cfg.vectorize.embeddings = Some(v.clone());
    }
    if let Some(v) = &o.cluster_on {
        cfg.vectorize.cluster_on = v.clone();
    }
    if let Some(v) = o.k_min {
        cfg.cluster.k_min = v;
    }
    if let Some(v) = o.k_max {
        cfg.cluster.k_max = v;
    }
    if let Some(v) = o.restarts {
        cfg.cluster.restarts = v;
    }
    if let Some(v) = o.max_iter {
        cfg.cluster.max_iter = v;
    }
    if let Some(v) = o.tol {
        cfg.cluster.tol = v;
    }
    if let Some(v) = o.train_ratio {
        cfg.classify.train_ratio = v;
    }
    if let Some(v) = o.learning_rate {
        cfg.classify.logreg.learning_rate = v;
    }
    if let Some(v) = o.epochs {
        cfg.classify.logreg.epochs = v;
    }
    if let Some(v) = o.batch_size {
        cfg.classify.logreg.batch_size = v;
    }
    if let Some(v) = o.l2 {
        cfg.classify.logreg.l2 = v;
    }
    if let Some(v) = o.mnb_alpha {
        cfg.classify.mnb_alpha = v;
    }
    if let Some(v) = &o.correct_model {
        cfg.correct_set.model = v.clone();
    }
    if let Some(v) = &o.correct_source {
        cfg.correct_set.source = v.clone();
    }
    if let Some(v) = o.n_topics {
        cfg.topics.n_topics = v;
    }
    if let Some(v) = o.lda_alpha {
        cfg.topics.alpha = Some(v);
    }
    if let Some(v) = o.lda_beta {
        cfg.topics.beta = v;
    }
    if let Some(v) = o.lda_iterations {
        cfg.topics.iterations = v;
    }
    if o.disable_topics {
        cfg.topics.enabled = false;
    }
    if let Some(v) = &o.gazetteer {
        cfg.ner.gazetteer = Some(v.clone());
    }
    if o.disable_ner {
        cfg.ner.enabled = false;
    }
    if let Some(v) = o.chi_threshold {
        cfg.analysis.threshold = v;
    }
    if o.disable_analysis {
        cfg.analysis.enabled = false;
    }
    if let Some(v) = o.flag_margin {
        cfg.report.flag_margin = v;
    }
    if let Some(v) = &o.stopwords {
        cfg.stoplists.stopwords = Some(v.clone());
    }
    if let Some(v) = &o.negations {
        cfg.stoplists.negations = Some(v.clone());
    }
    if let Some(v) = &o.units {
        cfg.stoplists.units = Some(v.clone());
    }
    if let Some(v) = &o.demographic {
        cfg.stoplists.demographic = Some(v.clone());
    }
    if let Some(v) = &o.domain_highfreq {
        cfg.stoplists.domain_highfreq = Some(v.clone());
    }
    if let Some(v) = &o.lemma_overrides {
        cfg.stoplists.lemma_overrides = Some(v.clone());
    }
    Ok(cfg)
}

struct Session {
    cfg: PipelineConfig,
    out_dir: PathBuf,
    quiet: bool,
}

impl Session {
    fn log(&self, msg: &str) {
        if !self.quiet {
            eprintln!("[itemaudit] {msg}");
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.log(&format!("wrote {}", path.display()));
        Ok(())
    }

    fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<()> {
        self.write(name, &serde_json::to_string_pretty(value)?)
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<T> {
        let path = self.path(name);
        if !path.exists() {
            bail!(
                "missing stage artifact {}; run the producing subcommand first",
                path.display()
            );
        }
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn load_corpus(&self) -> Result<Corpus> {
        let path = self
            .cfg
            .corpus
            .path
            .as_ref()
            .context("no corpus path configured (set corpus.path or --corpus-path)")?;
        Ok(load_corpus(path, self.cfg.corpus.format)?)
    }
}

/// Serialized form of the vectorizer-independent clean stage.
type TopicsFile = Vec<SubsetTopics>;
type EntitiesFile = Vec<SubsetEntities>;

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn write_report_files(session: &Session, report: &AuditReport, entities: Option<&[SubsetEntities]>) -> Result<()> {
    session.write("report.json", &report.to_json())?;
    session.write("report.md", &render_markdown(report))?;
    session.write("k_selection.tsv", &k_selection_tsv(&report.k_selection))?;
    if let Some(entities) = entities {
        session.write("entity_frequencies.tsv", &entity_frequencies_tsv(entities))?;
    }
    Ok(())
}

fn cmd_audit(session: &Session) -> Result<bool> {
    let corpus = session.load_corpus()?;
    session.log(&format!("loaded {} items from {}", corpus.len(), corpus.provenance));
    let outputs = run_audit(&corpus, &session.cfg, &now())?;
    session.log(&format!(
        "chose k = {}; {} prediction tasks, {} skipped, {} flags",
        outputs.clustering.selection.chosen_k,
        outputs.tasks.results.len(),
        outputs.tasks.skipped.len(),
        outputs.report.flags.len()
    ));

    // Stage intermediates, so downstream subcommands can resume from them.
    session.write_json("clean.json", &outputs.clean)?;
    session.write_json("clustering.json", &outputs.clustering)?;
    session.write_json("predictions.json", &outputs.tasks)?;
    if let Some(topics) = &outputs.topics {
        session.write_json("topics.json", topics)?;
    }
    if let Some(entities) = &outputs.entities {
        session.write_json("entities.json", entities)?;
    }
    write_report_files(session, &outputs.report, outputs.entities.as_deref())?;
    Ok(outputs.report.has_flags())
}

fn cmd_preprocess(session: &Session) -> Result<()> {
    let corpus = session.load_corpus()?;
    let lists = load_stoplists(&session.cfg.stoplists)?;
    let clean = preprocess_stage(&corpus, &lists);
    if !clean.degenerate_ids.is_empty() {
        session.log(&format!(
            "{} item(s) cleaned down to no tokens",
            clean.degenerate_ids.len()
        ));
    }
    session.write_json("clean.json", &clean)
}

fn cmd_cluster(session: &Session) -> Result<()> {
    let cfg = &session.cfg;
    let clean: CleanCorpus = session.read_json("clean.json")?;
    let vectors = vectorize_stage(&clean, cfg.vectorize.min_df)?;
    let cluster_vectors = if cfg.vectorize.cluster_on == "external" {
        let path = cfg
            .vectorize
            .embeddings
            .as_ref()
            .context("cluster_on = external requires an embeddings path")?;
        let ids: Vec<String> = clean.stems.iter().map(|s| s.item_id.clone()).collect();
        load_embeddings(path, &ids)?
    } else {
        vectors.tfidf.clone()
    };
    let clustering = cluster_stage(&cluster_vectors, &cfg.cluster, cfg.effective_seed())?;
    session.log(&format!("chose k = {}", clustering.selection.chosen_k));
    session.write_json("clustering.json", &clustering)
}

fn cmd_predict(session: &Session) -> Result<()> {
    let cfg = &session.cfg;
    let corpus = session.load_corpus()?;
    let clean: CleanCorpus = session.read_json("clean.json")?;
    let clustering: ClusterOutput = session.read_json("clustering.json")?;
    let vectors = vectorize_stage(&clean, cfg.vectorize.min_df)?;
    let external = match &cfg.vectorize.embeddings {
        Some(path) => {
            let ids: Vec<String> = corpus.items.iter().map(|it| it.id.clone()).collect();
            Some(load_embeddings(path, &ids)?)
        }
        None => None,
    };
    let tasks = classify_stage(
        &corpus,
        &clustering.assignment,
        &vectors,
        external.as_deref(),
        cfg,
        cfg.effective_seed(),
    )?;
    session.log(&format!(
        "{} tasks completed, {} skipped",
        tasks.results.len(),
        tasks.skipped.len()
    ));
    session.write_json("predictions.json", &tasks)
}

fn cmd_topics(session: &Session) -> Result<()> {
    let cfg = &session.cfg;
    let corpus = session.load_corpus()?;
    let clean: CleanCorpus = session.read_json("clean.json")?;
    let tasks: PredictionTasks = session.read_json("predictions.json")?;
    let topics = topics_stage(
        &corpus,
        &clean,
        &tasks,
        &cfg.topics,
        &cfg.correct_set,
        cfg.effective_seed(),
    );
    session.write_json("topics.json", &topics)
}

fn cmd_ner(session: &Session) -> Result<()> {
    let cfg = &session.cfg;
    let corpus = session.load_corpus()?;
    let clean: CleanCorpus = session.read_json("clean.json")?;
    let tasks: PredictionTasks = session.read_json("predictions.json")?;
    let lists = load_stoplists(&cfg.stoplists)?;
    let gazetteer = match &cfg.ner.gazetteer {
        Some(path) => load_gazetteer(path, &lists)?,
        None => default_gazetteer(&lists),
    };
    let entities = ner_stage(&corpus, &clean, &tasks, &cfg.correct_set, &gazetteer);
    session.write_json("entities.json", &entities)
}

fn cmd_report(session: &Session) -> Result<bool> {
    let cfg = &session.cfg;
    let corpus = session.load_corpus()?;
    let clean: CleanCorpus = session.read_json("clean.json")?;
    let clustering: ClusterOutput = session.read_json("clustering.json")?;
    let tasks: PredictionTasks = session.read_json("predictions.json")?;
    let topics: Option<TopicsFile> = if cfg.topics.enabled {
        Some(session.read_json("topics.json")?)
    } else {
        None
    };
    let entities: Option<EntitiesFile> = if cfg.ner.enabled {
        Some(session.read_json("entities.json")?)
    } else {
        None
    };
    let distributions = if cfg.analysis.enabled {
        Some(analysis_stage(
            &corpus,
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
    let vectors = vectorize_stage(&clean, cfg.vectorize.min_df)?;
    for id in &vectors.zero_vector_ids {
        stage_warnings.push(format!("item \"{id}\": no in-vocabulary tokens, zero vector"));
    }

    let report = build_report(ReportInputs {
        corpus: &corpus,
        config: cfg,
        selection: &clustering.selection,
        assignment: &clustering.assignment,
        tasks: &tasks,
        topics: topics.as_deref(),
        entities: entities.as_deref(),
        distributions: distributions.as_deref(),
        stage_warnings,
        generated_at: &now(),
    })?;
    write_report_files(session, &report, entities.as_deref())?;
    Ok(report.has_flags())
}

fn cmd_synth(
    session: &Session,
    spec_path: Option<&Path>,
    fallback: SyntheticSpec,
    out: Option<&Path>,
) -> Result<()> {
    let spec = match spec_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading synth spec {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing synth spec {}", path.display()))?
        }
        None => fallback,
    };
    let corpus = generate_synthetic_corpus(&spec)?;
    let default_out = session.path("corpus.jsonl");
    let out = out.unwrap_or(&default_out);
    save_corpus(&corpus, out)?;
    session.log(&format!(
        "wrote {} items ({} communities, marker strength {}) to {}",
        spec.n_items,
        spec.n_communities,
        spec.marker_strength,
        out.display()
    ));
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    let cfg = load_config(&cli)?;
    fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("creating output directory {}", cli.out_dir.display()))?;
    let session = Session {
        cfg,
        out_dir: cli.out_dir.clone(),
        quiet: cli.quiet,
    };

    match cli.command {
        Command::Audit => {
            session.cfg.validate()?;
            let flagged = cmd_audit(&session)?;
            Ok(if flagged { 2 } else { 0 })
        }
        Command::Synth {
            ref spec,
            n_items,
            n_communities,
            marker_strength,
            vocab_size,
            synth_seed,
            ref out,
        } => {
            let fallback = SyntheticSpec {
                n_items,
                n_communities,
                marker_strength,
                vocab_size,
                seed: synth_seed,
            };
            cmd_synth(&session, spec.as_deref(), fallback, out.as_deref())?;
            Ok(0)
        }
        Command::Preprocess => {
            session.cfg.validate()?;
            cmd_preprocess(&session)?;
            Ok(0)
        }
        Command::Cluster => {
            session.cfg.validate()?;
            cmd_cluster(&session)?;
            Ok(0)
        }
        Command::Predict => {
            session.cfg.validate()?;
            cmd_predict(&session)?;
            Ok(0)
        }
        Command::Topics => {
            session.cfg.validate()?;
            cmd_topics(&session)?;
            Ok(0)
        }
        Command::Ner => {
            session.cfg.validate()?;
            cmd_ner(&session)?;
            Ok(0)
        }
        Command::Report => {
            session.cfg.validate()?;
            let flagged = cmd_report(&session)?;
            Ok(if flagged { 2 } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
