//! Experiment configuration, on-disk stages and the end-to-end runner:
//! index → simulate → chains → prefs → train → interleave → report.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chains::{
    read_chain_records, resolve_chains, segment_log, write_chains, QueryChain, DEFAULT_WINDOW_SECONDS,
};
use crate::corpus::{load_documents, Corpus, RankedList, DEFAULT_K, INDEX_FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::features::{phi, FeatureSpace, SparseVector};
use crate::feedback::{
    prefs_for_log, read_preferences, write_preferences, FeedbackMode, FeedbackOptions, PaddingSource, Preference,
    PreferenceSet,
};
use crate::fixtures::{fixture_corpus, fixture_intents};
use crate::interleave::{attribute, combine, Side, Tally, Winner};
use crate::model::{Model, MODEL_FORMAT_VERSION};
use crate::ranker::{rerank, RerankRequest};
use crate::search_log::{parse_log, write_log, QueryEvent, SearchLog};
use crate::seed::{coin, rng_for};
use crate::simulator::{
    read_intents, simulate, simulate_session, Intent, Sidecar, UserBehavior, SESSION_SPACING_SECONDS,
};
use crate::svm::{slack_report, train_ranking, SolverKind, TrainOptions};

/// Format version of the pipeline's own artifacts (log, chains, preference
/// and evaluation files).
pub const PIPELINE_FORMAT_VERSION: u32 = 1;

pub const BASE_FUNCTION: &str = "tfidf";

/// A ranking function under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Base,
    Qc,
    Nc,
}

impl System {
    pub fn label(self) -> &'static str {
        match self {
            System::Base => "BASE",
            System::Qc => "QC",
            System::Nc => "NC",
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison(pub System, pub System);

impl Comparison {
    pub fn name(&self) -> String {
        format!("{}_vs_{}", self.0, self.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Documents (directory or JSONL); the generated fixture corpus if unset.
    pub corpus: Option<PathBuf>,
    /// Background documents generated around the fixture pages.
    pub background_docs: usize,
    /// Intent fixture (JSON); the built-in eight intents if unset.
    pub intents: Option<PathBuf>,
    pub sessions: usize,
    pub eval_sessions: usize,
    pub seed: u64,
    pub window_seconds: u64,
    #[serde(rename = "C")]
    pub c: f64,
    pub w_min: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub k: usize,
    pub top_two_after_click: bool,
    pub comparisons: Vec<Comparison>,
    pub out_dir: PathBuf,
    pub behavior: UserBehavior,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: None,
            background_docs: 1000 - crate::fixtures::fixture_doc_count(),
            intents: None,
            sessions: 2000,
            eval_sessions: 1000,
            seed: 20_050_821,
            window_seconds: DEFAULT_WINDOW_SECONDS,
            c: 0.1,
            w_min: 1.0,
            tolerance: 1e-4,
            max_iters: 2000,
            k: DEFAULT_K,
            top_two_after_click: false,
            comparisons: vec![Comparison(System::Qc, System::Base), Comparison(System::Qc, System::Nc)],
            out_dir: PathBuf::from("artifacts"),
            behavior: UserBehavior::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("C", self.c), ("w_min", self.w_min), ("tolerance", self.tolerance)];
        if let Some((name, v)) = positive.iter().find(|(_, v)| v.is_nan() || *v <= 0.0) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
        if self.window_seconds == 0 || self.k == 0 || self.max_iters == 0 {
            return Err(Error::Config("window_seconds, k and max_iters must be positive".into()));
        }
        if self.comparisons.is_empty() {
            return Err(Error::Config("at least one comparison is required".into()));
        }
        if let Some(c) = self.comparisons.iter().find(|c| c.0 == c.1) {
            return Err(Error::Config(format!(
                "comparison {} compares a system with itself",
                c.name()
            )));
        }
        self.behavior.validate()
    }

    fn train_options(&self, space: &FeatureSpace) -> TrainOptions {
        TrainOptions {
            c: self.c,
            w_min: self.w_min,
            bounded: 0..space.rank_dims(),
            tolerance: self.tolerance,
            max_iters: self.max_iters,
            solver: SolverKind::DualCoordinate,
        }
    }
}

pub fn build_corpus(cfg: &ExperimentConfig) -> Result<Corpus> {
    let docs = match &cfg.corpus {
        Some(path) => load_documents(path)?,
        None => fixture_corpus(cfg.background_docs, cfg.seed),
    };
    Corpus::build(docs)
}

pub fn load_intents(cfg: &ExperimentConfig) -> Result<Vec<Intent>> {
    match &cfg.intents {
        Some(path) => read_intents(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?),
        None => Ok(fixture_intents()),
    }
}

/// Base rankings of each query, computed once.
struct BaseCache<'a> {
    corpus: &'a Corpus,
    k: usize,
    lists: HashMap<Vec<String>, RankedList>,
}

impl<'a> BaseCache<'a> {
    fn new(corpus: &'a Corpus, k: usize) -> Self {
        BaseCache {
            corpus,
            k,
            lists: HashMap::new(),
        }
    }

    fn get(&mut self, terms: &[String]) -> &RankedList {
        let (corpus, k) = (self.corpus, self.k);
        self.lists
            .entry(terms.to_vec())
            .or_insert_with(|| corpus.base_retrieve("", terms, k))
    }
}

/// Ranking-SVM constraints `Φ(preferred, q) − Φ(other, q)` over a fresh
/// feature space, one per preference, in preference order.
pub fn preference_constraints(
    corpus: &Corpus,
    log: &SearchLog,
    preferences: &[Preference],
    k: usize,
) -> Result<(FeatureSpace, Vec<SparseVector>)> {
    let queries: HashMap<&str, &QueryEvent> = log.queries().map(|q| (q.query_id.as_str(), q)).collect();
    let mut cache = BaseCache::new(corpus, k);
    let mut space = FeatureSpace::single(BASE_FUNCTION);
    let mut constraints = Vec::with_capacity(preferences.len());
    for p in preferences {
        let query = queries.get(p.wrt_query.as_str()).ok_or_else(|| Error::Structural {
            line: 0,
            message: format!("preference refers to unknown query `{}`", p.wrt_query),
        })?;
        let base = cache.get(&query.terms);
        let preferred = phi(
            &mut space,
            &p.preferred_doc,
            &query.terms,
            &[base.rank_of(&p.preferred_doc)],
        );
        let other = phi(&mut space, &p.other_doc, &query.terms, &[base.rank_of(&p.other_doc)]);
        constraints.push(preferred.sub(&other));
    }
    Ok((space, constraints))
}

pub fn train_model(
    corpus: &Corpus,
    log: &SearchLog,
    preferences: &[Preference],
    cfg: &ExperimentConfig,
    label: &str,
) -> Result<Model> {
    let (space, constraints) = preference_constraints(corpus, log, preferences, cfg.k)?;
    let solution = train_ranking(&constraints, space.dim(), &cfg.train_options(&space))?;
    let violations = slack_report(&solution.weights, &constraints).violations;
    log::info!(
        "{label}: {} constraints, {} dims, {:?} after {} epochs, objective {:.4}",
        constraints.len(),
        space.dim(),
        solution.status,
        solution.iterations,
        solution.objective
    );
    Ok(Model::from_solution(space, cfg.c, cfg.w_min, &solution, violations).with_label(label))
}

/// The learned models a comparison may need.
#[derive(Debug, Clone)]
pub struct Models {
    pub qc: Model,
    pub nc: Model,
}

impl Models {
    fn get(&self, system: System) -> Option<&Model> {
        match system {
            System::Base => None,
            System::Qc => Some(&self.qc),
            System::Nc => Some(&self.nc),
        }
    }
}

fn ranking(system: System, models: &Models, cache: &mut BaseCache<'_>, terms: &[String], k: usize) -> Vec<String> {
    let base = cache.get(terms);
    match models.get(system) {
        None => base.doc_ids().take(k).map(str::to_owned).collect(),
        Some(model) => rerank(&RerankRequest {
            query_terms: terms,
            base_rankings: std::slice::from_ref(base),
            model,
            k,
        })
        .doc_ids(),
    }
}

/// Ranked document ids a system returns for `terms`.
pub fn system_ranking(system: System, corpus: &Corpus, models: &Models, terms: &[String], k: usize) -> Vec<String> {
    ranking(system, models, &mut BaseCache::new(corpus, k), terms, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub qid: String,
    pub clicks_a: usize,
    pub clicks_b: usize,
    pub depth: usize,
    pub winner: Winner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub session: String,
    pub modes: String,
    pub first_pick: Side,
    pub queries: Vec<QueryOutcome>,
}

/// Simulate fresh users on interleaved rankings. Each session is assigned
/// one comparison and one first pick for its whole duration.
pub fn evaluate(
    corpus: &Corpus,
    intents: &[Intent],
    models: &Models,
    cfg: &ExperimentConfig,
) -> Result<Vec<SessionOutcome>> {
    cfg.validate()?;
    let shown = cfg.behavior.results_shown;
    let mut cache = BaseCache::new(corpus, cfg.k);
    let mut outcomes = Vec::with_capacity(cfg.eval_sessions);
    for index in 0..cfg.eval_sessions {
        let id = format!("e{index:06}");
        let comparison =
            cfg.comparisons[rng_for(cfg.seed, &format!("assign/{id}")).random_range(0..cfg.comparisons.len())];
        let first_pick = if coin(cfg.seed, &format!("first_pick/{id}")) {
            Side::A
        } else {
            Side::B
        };
        let mut combined_lists = Vec::new();
        let mut rng = rng_for(cfg.seed, &format!("evaluate/{id}"));
        let mut present = |terms: &[String]| {
            let a = ranking(comparison.0, models, &mut cache, terms, shown);
            let b = ranking(comparison.1, models, &mut cache, terms, shown);
            let combined = combine(&a, &b, first_pick);
            let docs = combined.docs.clone();
            combined_lists.push(combined);
            docs
        };
        let session = simulate_session(
            &id,
            index as u64 * SESSION_SPACING_SECONDS,
            intents,
            &cfg.behavior,
            &mut rng,
            &mut present,
        );
        let queries = session
            .queries
            .iter()
            .zip(&combined_lists)
            .map(|(q, combined)| {
                let a = attribute(combined, &q.clicked_docs())?;
                Ok(QueryOutcome {
                    qid: q.query_id.clone(),
                    clicks_a: a.clicks_a,
                    clicks_b: a.clicks_b,
                    depth: a.depth,
                    winner: a.winner,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        outcomes.push(SessionOutcome {
            session: id,
            modes: comparison.name(),
            first_pick,
            queries,
        });
    }
    Ok(outcomes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub modes: String,
    pub wins_a: u64,
    pub wins_b: u64,
    pub ties: u64,
    pub p: f64,
    pub verdict: String,
}

impl PairReport {
    pub fn from_tally(comparison: Comparison, tally: &Tally) -> Self {
        PairReport {
            modes: comparison.name(),
            wins_a: tally.wins_a,
            wins_b: tally.wins_b,
            ties: tally.ties,
            p: tally.p_value(),
            verdict: verdict(comparison, tally),
        }
    }
}

/// Decision at 99% confidence.
pub fn verdict(comparison: Comparison, tally: &Tally) -> String {
    if tally.wins_a == tally.wins_b || tally.p_value() >= 0.01 {
        return "indifferent".to_owned();
    }
    let preferred = if tally.wins_a > tally.wins_b {
        comparison.0
    } else {
        comparison.1
    };
    format!("prefer {preferred}, p < 0.01")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub pairs: Vec<PairReport>,
}

impl Report {
    pub fn pair(&self, comparison: Comparison) -> Option<&PairReport> {
        let name = comparison.name();
        self.pairs.iter().find(|p| p.modes == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            let total = (p.wins_a + p.wins_b + p.ties).max(1) as f64;
            let pct = |n: u64| 100.0 * n as f64 / total;
            let (a, b) = p.modes.split_once("_vs_").unwrap_or((&p.modes, ""));
            out.push_str(&format!(
                "{}: prefer {a} {} ({:.0}%), prefer {b} {} ({:.0}%), indifferent {} ({:.0}%), p = {:.3e} -> {}\n",
                p.modes,
                p.wins_a,
                pct(p.wins_a),
                p.wins_b,
                pct(p.wins_b),
                p.ties,
                pct(p.ties),
                p.p,
                p.verdict
            ));
        }
        out
    }
}

/// Per-query outcomes tallied for each configured comparison.
pub fn summarize(outcomes: &[SessionOutcome], comparisons: &[Comparison]) -> Report {
    let pairs = comparisons
        .iter()
        .map(|&comparison| {
            let name = comparison.name();
            let mut tally = Tally::default();
            for q in outcomes.iter().filter(|o| o.modes == name).flat_map(|o| &o.queries) {
                tally.record(q.winner);
            }
            PairReport::from_tally(comparison, &tally)
        })
        .collect();
    Report { pairs }
}

/// Everything an in-memory run produces.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub log: SearchLog,
    pub sidecar: Sidecar,
    pub chains: Vec<QueryChain>,
    pub qc_prefs: PreferenceSet,
    pub nc_prefs: PreferenceSet,
    pub models: Models,
    pub outcomes: Vec<SessionOutcome>,
    pub report: Report,
}

fn base_presenter<'a>(corpus: &'a Corpus, shown: usize) -> impl Fn(&[String]) -> Vec<String> + 'a {
    move |terms: &[String]| {
        corpus
            .base_retrieve("", terms, shown)
            .doc_ids()
            .map(str::to_owned)
            .collect()
    }
}

fn padding_source(corpus: &Corpus, cfg: &ExperimentConfig) -> PaddingSource {
    PaddingSource::new(corpus.documents().iter().map(|d| d.doc_id.clone()), cfg.seed)
}

fn feedback_options(cfg: &ExperimentConfig) -> FeedbackOptions {
    FeedbackOptions {
        top_two_after_click: cfg.top_two_after_click,
    }
}

/// The whole experiment without touching the filesystem (except to read a
/// configured corpus or intent file).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let corpus = build_corpus(cfg)?;
    let intents = load_intents(cfg)?;
    let presenter = base_presenter(&corpus, cfg.behavior.results_shown);
    let (log, sidecar) = simulate(&corpus, &presenter, &intents, &cfg.behavior, cfg.sessions, cfg.seed)?;
    let chains = segment_log(&log, cfg.window_seconds);
    let padding = padding_source(&corpus, cfg);
    let qc_prefs = prefs_for_log(&chains, FeedbackMode::Qc, &padding, feedback_options(cfg));
    let nc_prefs = prefs_for_log(&chains, FeedbackMode::Nc, &padding, feedback_options(cfg));
    let models = Models {
        qc: train_model(&corpus, &log, &qc_prefs.preferences, cfg, "qc")?,
        nc: train_model(&corpus, &log, &nc_prefs.preferences, cfg, "nc")?,
    };
    let outcomes = evaluate(&corpus, &intents, &models, cfg)?;
    let report = summarize(&outcomes, &cfg.comparisons);
    Ok(ExperimentResult {
        log,
        sidecar,
        chains,
        qc_prefs,
        nc_prefs,
        models,
        outcomes,
        report,
    })
}

// ---------------------------------------------------------------------------
// On-disk stages

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Index,
    Simulate,
    Chains,
    Prefs(FeedbackMode),
    Train(FeedbackMode),
    Interleave,
    Report,
}

/// Stamp written next to every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub artifact: String,
    pub version: u32,
    pub seed: u64,
}

fn mode_name(mode: FeedbackMode) -> &'static str {
    match mode {
        FeedbackMode::Qc => "qc",
        FeedbackMode::Nc => "nc",
    }
}

/// Artifact file names inside the output directory.
pub mod artifacts {
    pub const INDEX: &str = "index.json";
    pub const INTENTS: &str = "intents.json";
    pub const LOG: &str = "log.jsonl";
    pub const SIDECAR: &str = "truth.jsonl";
    pub const CHAINS: &str = "chains.jsonl";
    pub const OUTCOMES: &str = "interleave.jsonl";
    pub const REPORT_JSON: &str = "report.json";
    pub const REPORT_TEXT: &str = "report.txt";

    pub fn prefs(mode: &str) -> String {
        format!("prefs.{mode}.jsonl")
    }

    pub fn model(mode: &str) -> String {
        format!("model.{mode}.json")
    }
}

/// Reads and writes stage artifacts under one directory.
pub struct Workspace<'a> {
    cfg: &'a ExperimentConfig,
}

impl<'a> Workspace<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Self {
        Workspace { cfg }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    fn meta_path(&self, name: &str) -> PathBuf {
        self.path(&format!("{name}.meta.json"))
    }

    fn write(&self, name: &str, version: u32, bytes: &[u8]) -> Result<()> {
        fs::create_dir_all(&self.cfg.out_dir).map_err(|e| Error::io(&self.cfg.out_dir, e))?;
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        let meta = ArtifactMeta {
            artifact: name.to_owned(),
            version,
            seed: self.cfg.seed,
        };
        let meta_path = self.meta_path(name);
        fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n").map_err(|e| Error::io(&meta_path, e))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    /// Path of an upstream artifact after checking its stamp.
    fn require(&self, name: &str, version: u32) -> Result<PathBuf> {
        let path = self.path(name);
        if !path.exists() {
            return Err(Error::MissingArtifact(path));
        }
        let meta_path = self.meta_path(name);
        let text = fs::read_to_string(&meta_path).map_err(|_| Error::MissingArtifact(meta_path.clone()))?;
        let meta: ArtifactMeta = serde_json::from_str(&text)?;
        if meta.version != version {
            return Err(Error::VersionMismatch {
                path: meta_path,
                found: meta.version,
                expected: version,
            });
        }
        if meta.seed != self.cfg.seed {
            log::warn!(
                "{} was produced with seed {}, config has {}",
                path.display(),
                meta.seed,
                self.cfg.seed
            );
        }
        Ok(path)
    }

    fn open(&self, name: &str, version: u32) -> Result<BufReader<fs::File>> {
        let path = self.require(name, version)?;
        let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(BufReader::new(file))
    }

    pub fn corpus(&self) -> Result<Corpus> {
        Corpus::load(&self.require(artifacts::INDEX, INDEX_FORMAT_VERSION)?)
    }

    pub fn intents(&self) -> Result<Vec<Intent>> {
        let path = self.require(artifacts::INTENTS, PIPELINE_FORMAT_VERSION)?;
        read_intents(&fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?)
    }

    pub fn log(&self) -> Result<SearchLog> {
        parse_log(self.open(artifacts::LOG, PIPELINE_FORMAT_VERSION)?)
    }

    pub fn sidecar(&self) -> Result<Sidecar> {
        Sidecar::read(self.open(artifacts::SIDECAR, PIPELINE_FORMAT_VERSION)?)
    }

    pub fn chains(&self, log: &SearchLog) -> Result<Vec<QueryChain>> {
        let records = read_chain_records(self.open(artifacts::CHAINS, PIPELINE_FORMAT_VERSION)?)?;
        resolve_chains(log, &records)
    }

    pub fn preferences(&self, mode: FeedbackMode) -> Result<Vec<Preference>> {
        read_preferences(self.open(&artifacts::prefs(mode_name(mode)), PIPELINE_FORMAT_VERSION)?)
    }

    pub fn model(&self, mode: FeedbackMode) -> Result<Model> {
        Model::load(&self.require(&artifacts::model(mode_name(mode)), MODEL_FORMAT_VERSION)?)
    }

    pub fn outcomes(&self) -> Result<Vec<SessionOutcome>> {
        let reader = self.open(artifacts::OUTCOMES, PIPELINE_FORMAT_VERSION)?;
        let mut out = Vec::new();
        for (i, line) in std::io::BufRead::lines(reader).enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(out)
    }
}

fn jsonl_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory");
    buf
}

/// Run one stage, reading its inputs from and writing its outputs to the
/// configured output directory.
pub fn run_stage(stage: Stage, cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    let ws = Workspace::new(cfg);
    match stage {
        Stage::Index => {
            let corpus = build_corpus(cfg)?;
            let intents = load_intents(cfg)?;
            ws.write(artifacts::INDEX, INDEX_FORMAT_VERSION, corpus.to_json()?.as_bytes())?;
            ws.write(
                artifacts::INTENTS,
                PIPELINE_FORMAT_VERSION,
                (serde_json::to_string_pretty(&intents)? + "\n").as_bytes(),
            )
        }
        Stage::Simulate => {
            let corpus = ws.corpus()?;
            let intents = ws.intents()?;
            let presenter = base_presenter(&corpus, cfg.behavior.results_shown);
            let (log, sidecar) = simulate(&corpus, &presenter, &intents, &cfg.behavior, cfg.sessions, cfg.seed)?;
            ws.write(
                artifacts::LOG,
                PIPELINE_FORMAT_VERSION,
                &jsonl_bytes(|b| write_log(&log, b)),
            )?;
            ws.write(
                artifacts::SIDECAR,
                PIPELINE_FORMAT_VERSION,
                &jsonl_bytes(|b| sidecar.write(b)),
            )
        }
        Stage::Chains => {
            let log = ws.log()?;
            let chains = segment_log(&log, cfg.window_seconds);
            ws.write(
                artifacts::CHAINS,
                PIPELINE_FORMAT_VERSION,
                &jsonl_bytes(|b| write_chains(&chains, b)),
            )
        }
        Stage::Prefs(mode) => {
            let corpus = ws.corpus()?;
            let log = ws.log()?;
            let chains = ws.chains(&log)?;
            let set = prefs_for_log(&chains, mode, &padding_source(&corpus, cfg), feedback_options(cfg));
            for (strategy, count) in &set.counts {
                log::info!("{strategy}: {count} preferences");
            }
            ws.write(
                &artifacts::prefs(mode_name(mode)),
                PIPELINE_FORMAT_VERSION,
                &jsonl_bytes(|b| write_preferences(&set.preferences, b)),
            )
        }
        Stage::Train(mode) => {
            let corpus = ws.corpus()?;
            let log = ws.log()?;
            let prefs = ws.preferences(mode)?;
            let model = train_model(&corpus, &log, &prefs, cfg, mode_name(mode))?;
            ws.write(
                &artifacts::model(mode_name(mode)),
                MODEL_FORMAT_VERSION,
                model.to_json()?.as_bytes(),
            )
        }
        Stage::Interleave => {
            let corpus = ws.corpus()?;
            let intents = ws.intents()?;
            let models = Models {
                qc: ws.model(FeedbackMode::Qc)?,
                nc: ws.model(FeedbackMode::Nc)?,
            };
            let outcomes = evaluate(&corpus, &intents, &models, cfg)?;
            let bytes = jsonl_bytes(|b| {
                for o in &outcomes {
                    serde_json::to_writer(&mut *b, o)?;
                    b.write_all(b"\n")?;
                }
                Ok(())
            });
            ws.write(artifacts::OUTCOMES, PIPELINE_FORMAT_VERSION, &bytes)
        }
        Stage::Report => {
            let report = summarize(&ws.outcomes()?, &cfg.comparisons);
            ws.write(
                artifacts::REPORT_JSON,
                PIPELINE_FORMAT_VERSION,
                (report.to_json()? + "\n").as_bytes(),
            )?;
            ws.write(
                artifacts::REPORT_TEXT,
                PIPELINE_FORMAT_VERSION,
                report.to_text().as_bytes(),
            )
        }
    }
}

/// Every stage in order.
pub const ALL_STAGES: [Stage; 9] = [
    Stage::Index,
    Stage::Simulate,
    Stage::Chains,
    Stage::Prefs(FeedbackMode::Qc),
    Stage::Prefs(FeedbackMode::Nc),
    Stage::Train(FeedbackMode::Qc),
    Stage::Train(FeedbackMode::Nc),
    Stage::Interleave,
    Stage::Report,
];

pub fn run_all(cfg: &ExperimentConfig) -> Result<Report> {
    for stage in ALL_STAGES {
        log::info!("stage {stage:?}");
        run_stage(stage, cfg)?;
    }
    let path = Workspace::new(cfg).require(artifacts::REPORT_JSON, PIPELINE_FORMAT_VERSION)?;
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Write pretty JSON to a file, creating parent directories.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))
}
