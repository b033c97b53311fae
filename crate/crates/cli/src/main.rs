use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cmir_cli::{
    cmd_eval, cmd_pipeline, cmd_rank, cmd_score, cmd_sweep, cmd_translate, CliError, Layout,
    PipelineConfig, ProviderKind, TranslateScope,
};
use cmir_core::corpus::InputFormat;
use cmir_core::ranking::RankMode;

#[derive(Debug, Parser)]
#[command(
    name = "cmir",
    version,
    about = "Code-mixed retrieval with LLM relevance scoring"
)]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Translate queries and documents into English.
    Translate,
    /// Score every (query, document) pair.
    Score,
    /// Propagate scores along the conversation and write a run file.
    Rank,
    /// Evaluate a run file against the qrels.
    Eval {
        /// Defaults to the run file of the current run tag.
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Score, rank and evaluate once per temperature.
    Sweep {
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        temperatures: Vec<f64>,
    },
    /// translate, score, rank and eval in one go.
    Pipeline,
}

#[derive(Debug, Args)]
struct Overrides {
    /// TOML config file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus_format: Option<InputFormat>,
    #[arg(long, global = true)]
    queries: Option<PathBuf>,
    #[arg(long, global = true)]
    queries_format: Option<InputFormat>,
    #[arg(long, global = true)]
    qrels: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// http, mock or identity.
    #[arg(long, global = true)]
    provider: Option<ProviderKind>,
    /// JSON object mapping prompt SHA-256 digests to responses.
    #[arg(long, global = true)]
    mock_table: Option<PathBuf>,
    /// both, queries, documents or none.
    #[arg(long, global = true)]
    translate: Option<TranslateScope>,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    #[arg(long, global = true)]
    run_tag: Option<String>,
    #[arg(long, global = true)]
    boost: Option<f64>,
    #[arg(long, global = true)]
    boost_floor: Option<f64>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// all or relevant-only.
    #[arg(long, global = true)]
    mode: Option<RankMode>,
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[arg(long, global = true)]
    max_retries: Option<usize>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    endpoint: Option<String>,
}

impl Overrides {
    fn into_config(self) -> Result<PipelineConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($field:ident => $($target:tt)+) => {
                if let Some(v) = self.$field {
                    c.$($target)+ = v;
                }
            };
        }
        macro_rules! set_some {
            ($field:ident => $($target:tt)+) => {
                if let Some(v) = self.$field {
                    c.$($target)+ = Some(v);
                }
            };
        }
        set_some!(corpus => corpus_path);
        set_some!(corpus_format => corpus_format);
        set_some!(queries => queries_path);
        set_some!(queries_format => queries_format);
        set_some!(qrels => qrels_path);
        set!(output_dir => output_dir);
        set_some!(cache_dir => cache_dir);
        set!(provider => provider);
        set_some!(mock_table => mock_table);
        set!(translate => translate);
        set!(temperature => provider_config.temperature);
        set!(run_tag => run_tag);
        set!(boost => propagation_constants.boost);
        set!(boost_floor => propagation_constants.boost_floor);
        set!(threshold => propagation_constants.relevance_threshold);
        set!(mode => mode);
        set_some!(depth => depth);
        set!(parallelism => provider_config.parallelism_limit);
        set!(max_retries => provider_config.max_retries);
        set!(model => provider_config.model_name);
        set!(endpoint => provider_config.endpoint_url);
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli.opts.into_config()?;
    match cli.command {
        Command::Translate => {
            let s = cmd_translate(&config)?;
            println!(
                "translated {} queries and {} documents ({} already done)",
                s.queries_translated, s.documents_translated, s.skipped
            );
        }
        Command::Score => {
            let s = cmd_score(&config)?;
            println!(
                "{} pairs in {} ({} new, {} degraded)",
                s.pairs,
                s.path.display(),
                s.newly_scored,
                s.degraded
            );
        }
        Command::Rank => {
            let s = cmd_rank(&config)?;
            println!(
                "{} entries for {} queries in {}",
                s.entries,
                s.queries,
                s.run_path.display()
            );
        }
        Command::Eval { run } => {
            let run = run.unwrap_or_else(|| Layout::new(&config.output_dir).run(&config.run_tag));
            print!(
                "{}",
                cmd_eval(&config, &run, config.qrels_path()?)?.to_table()
            );
        }
        Command::Sweep { temperatures } => {
            print!("{}", cmd_sweep(&config, &temperatures)?.to_table());
        }
        Command::Pipeline => {
            print!("{}", cmd_pipeline(&config)?.to_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
