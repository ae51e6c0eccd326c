//! `clickchain`: run the query-chain learning experiment stage by stage.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use clickchain::corpus::{documents_to_jsonl, tokenize};
use clickchain::feedback::FeedbackMode;
use clickchain::fixtures::{fixture_corpus, fixture_intents};
use clickchain::pipeline::{run_all, run_stage, write_json, ExperimentConfig, Stage, Workspace};
use clickchain::ranker::{rerank, RerankRequest};
use clickchain::Error;

const LOG_ENV: &str = "CLICKCHAIN_LOG";

#[derive(Parser, Debug)]
#[command(
    name = "clickchain",
    version,
    about = "Learn rankings from query chains in click logs"
)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training sessions to simulate.
    #[arg(long, global = true)]
    sessions: Option<usize>,
    /// Evaluation sessions to simulate.
    #[arg(long, global = true)]
    eval_sessions: Option<usize>,
    /// Documents (directory or JSONL) instead of the generated corpus.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Intent fixture (JSON) instead of the built-in intents.
    #[arg(long, global = true)]
    intents: Option<PathBuf>,
    /// Click noise.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(short = 'C', global = true)]
    c: Option<f64>,
    #[arg(long, global = true)]
    w_min: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Qc,
    Nc,
}

impl From<Mode> for FeedbackMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Qc => FeedbackMode::Qc,
            Mode::Nc => FeedbackMode::Nc,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum RankerChoice {
    Base,
    Qc,
    Nc,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the generated corpus (JSONL) and intents (JSON).
    Fixture {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long = "intents-out")]
        intents_out: PathBuf,
        #[arg(long, default_value_t = 973)]
        background: usize,
    },
    /// Print the effective configuration.
    Config,
    /// Build and save the index.
    Index,
    /// Simulate training sessions against the base ranking.
    Simulate,
    /// Segment the log into query chains.
    Chains,
    /// Generate preference judgments.
    Prefs {
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Train a model from preference judgments.
    Train {
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Rank documents for one query.
    Rerank {
        #[arg(long, value_enum, default_value_t = RankerChoice::Qc)]
        mode: RankerChoice,
        #[arg(long)]
        query: String,
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
    /// Interleaved evaluation with fresh simulated users.
    Interleave,
    /// Summarize the interleaved evaluation.
    Report,
    /// Run every stage.
    Run,
}

fn config(cli: &Cli) -> clickchain::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &cli.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.sessions {
        cfg.sessions = v;
    }
    if let Some(v) = cli.eval_sessions {
        cfg.eval_sessions = v;
    }
    if let Some(v) = &cli.corpus {
        cfg.corpus = Some(v.clone());
    }
    if let Some(v) = &cli.intents {
        cfg.intents = Some(v.clone());
    }
    if let Some(v) = cli.epsilon {
        cfg.behavior.epsilon = v;
    }
    if let Some(v) = cli.c {
        cfg.c = v;
    }
    if let Some(v) = cli.w_min {
        cfg.w_min = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> clickchain::Result<()> {
    if let Command::Fixture {
        docs,
        intents_out,
        background,
    } = &cli.command
    {
        let seed = cli.seed.unwrap_or(ExperimentConfig::default().seed);
        let text = documents_to_jsonl(&fixture_corpus(*background, seed));
        std::fs::write(docs, text).map_err(|e| Error::Io {
            path: docs.clone(),
            source: e,
        })?;
        return write_json(intents_out, &fixture_intents());
    }
    let cfg = config(cli)?;
    match &cli.command {
        Command::Fixture { .. } => unreachable!(),
        Command::Config => print!("{}", cfg.to_toml()?),
        Command::Index => run_stage(Stage::Index, &cfg)?,
        Command::Simulate => run_stage(Stage::Simulate, &cfg)?,
        Command::Chains => run_stage(Stage::Chains, &cfg)?,
        Command::Prefs { mode } => run_stage(Stage::Prefs((*mode).into()), &cfg)?,
        Command::Train { mode } => run_stage(Stage::Train((*mode).into()), &cfg)?,
        Command::Interleave => run_stage(Stage::Interleave, &cfg)?,
        Command::Report => {
            run_stage(Stage::Report, &cfg)?;
            let path = Workspace::new(&cfg).path(clickchain::pipeline::artifacts::REPORT_TEXT);
            print!(
                "{}",
                std::fs::read_to_string(&path).map_err(|e| Error::Io { path, source: e })?
            );
        }
        Command::Run => print!("{}", clickchain::pipeline::Report::to_text(&run_all(&cfg)?)),
        Command::Rerank { mode, query, k } => {
            let ws = Workspace::new(&cfg);
            let corpus = ws.corpus()?;
            let terms = tokenize(query);
            let base = corpus.base_retrieve("query", &terms, cfg.k);
            let model = match mode {
                RankerChoice::Base => None,
                RankerChoice::Qc => Some(ws.model(FeedbackMode::Qc)?),
                RankerChoice::Nc => Some(ws.model(FeedbackMode::Nc)?),
            };
            match model {
                None => {
                    for e in base.entries.iter().take(*k) {
                        println!("{}\t{}\t{:.6}", e.rank, e.doc_id, e.score);
                    }
                }
                Some(model) => {
                    let ranking = rerank(&RerankRequest {
                        query_terms: &terms,
                        base_rankings: std::slice::from_ref(&base),
                        model: &model,
                        k: *k,
                    });
                    for (i, e) in ranking.entries.iter().enumerate() {
                        println!("{}\t{}\t{:.6}\t{:?}", i + 1, e.doc_id, e.score, e.origin);
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or(LOG_ENV, "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}
