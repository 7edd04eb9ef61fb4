//! `cred` — every pipeline stage as a subcommand. Machine-readable JSON goes
//! to stdout (pretty-printed on a terminal or with --pretty); diagnostics and
//! logs go to stderr. Exit codes: 0 success, 1 domain error, 2 usage error.

mod commands;
mod config;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::SchemaSource;
use config::{apply_env_overrides, load_config, ModeName};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Schema(#[from] cred_core::SchemaError),
    #[error(transparent)]
    Text(#[from] cred_core::TextError),
    #[error(transparent)]
    Cluster(#[from] cred_core::ClusterError),
    #[error(transparent)]
    Retrieve(#[from] cred_core::RetrieveError),
    #[error(transparent)]
    Edl(#[from] cred_core::error::EdlError),
    #[error(transparent)]
    Compile(#[from] cred_core::error::CompileError),
    #[error(transparent)]
    Llm(#[from] cred_core::LlmError),
    #[error(transparent)]
    Exec(#[from] cred_core::ExecError),
}

#[derive(Parser)]
#[command(name = "cred", version, about = "Schema retrieval, EDL plans, and SQL over SQLite", max_term_width = 100)]
struct Cli {
    /// TOML config file (default: cred.toml when present).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override the LLM transport mode from the config.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeName>,
    /// Override the fixture transcript path (paths.fixtures).
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Pretty-print JSON output even when stdout is not a terminal.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SchemaSourceArgs {
    /// Validate/generate against this database id from the manifest.
    #[arg(long)]
    db: Option<String>,
    /// Inline schema, e.g. "Student(StuID, Age); Pets(PetID, PetType)".
    #[arg(long, conflicts_with = "db")]
    snippet: Option<String>,
    /// Schema manifest path (overrides paths.manifest).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl SchemaSourceArgs {
    fn as_source(&self) -> SchemaSource<'_> {
        SchemaSource {
            db: self.db.as_deref(),
            snippet: self.snippet.as_deref(),
            manifest: self.manifest.as_deref(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the schema manifest.
    Schema {
        #[command(subcommand)]
        action: SchemaAction,
    },
    /// Embed and cluster the schema, then write the retrieval index.
    IndexBuild {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Where to write the index (overrides paths.index).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the column-clustering pass and emit the cluster table.
    Cluster {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank tables for a question against a built index.
    Retrieve {
        #[arg(long)]
        question: String,
        #[arg(long)]
        index: Option<PathBuf>,
        /// Tables to return (default: retrieval.k).
        #[arg(short)]
        k: Option<usize>,
    },
    /// Mean recall@k of retrieval over a JSONL question file.
    EvalRecall {
        #[arg(long)]
        questions: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        /// Cutoffs to report.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 3, 5, 10, 15])]
        ks: Vec<usize>,
    },
    /// Parse EDL text (stdin or --file) into its serialized plan.
    ParseEdl {
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Render a serialized plan (stdin or --file) back to canonical EDL text.
    RenderEdl {
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Compile EDL text (stdin or --file) to SQL on stdout.
    CompileEdl {
        #[arg(long)]
        file: Option<PathBuf>,
        #[command(flatten)]
        schema: SchemaSourceArgs,
        /// Also run the SQL against this SQLite file and print the rows.
        #[arg(long)]
        execute: Option<PathBuf>,
    },
    /// Generate an EDL plan for a question with the configured model.
    GenEdl {
        #[arg(long)]
        question: String,
        #[command(flatten)]
        schema: SchemaSourceArgs,
        /// Few-shot example file (default: built-in examples).
        #[arg(long)]
        few_shots: Option<PathBuf>,
        /// Also compile the plan and include the SQL.
        #[arg(long)]
        sql: bool,
    },
    /// Retrieve candidates and let the model pick the final sub-schema.
    SelectSchema {
        #[arg(long)]
        question: String,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(short)]
        k: Option<usize>,
        #[arg(long)]
        few_shots: Option<PathBuf>,
    },
    /// Execution-accuracy verdict for one predicted/gold SQL pair.
    EvalEx {
        /// Predicted SQL.
        #[arg(long)]
        pred: String,
        /// Gold SQL.
        #[arg(long)]
        gold: String,
        /// SQLite file path, or a database id under paths.databases.
        #[arg(long)]
        db: String,
    },
    /// Full run: retrieve → select → generate → SQL → execution accuracy.
    Pipeline {
        #[arg(long)]
        questions: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        /// Realize SQL with the model instead of the compiler.
        #[arg(long)]
        use_llm_sql: bool,
        #[arg(long)]
        few_shots: Option<PathBuf>,
        /// Also write the report to a file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SchemaAction {
    /// Print the merged union schema as JSON.
    Dump {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn emit(value: &impl serde::Serialize, pretty: bool) -> Result<(), CliError> {
    let text = if pretty || std::io::stdout().is_terminal() {
        serde_json::to_string_pretty(value)
    } else {
        serde_json::to_string(value)
    }
    .map_err(|e| CliError::Io(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let explicit = cli.config.is_some();
    let path = cli
        .config
        .clone()
        .or_else(|| Some(PathBuf::from("cred.toml")).filter(|p| p.is_file()));
    let mut config = load_config(path.as_deref(), explicit)?;
    apply_env_overrides(&mut config, |name| std::env::var(name).ok())?;
    if let Some(fixtures) = &cli.fixtures {
        config.paths.fixtures = Some(fixtures.clone());
    }
    if let Some(mode) = cli.mode {
        config.llm.mode = mode;
    }
    let pretty = cli.pretty;

    match &cli.command {
        Command::Schema { action: SchemaAction::Dump { manifest } } => {
            let schema = commands::schema_dump(&config, manifest.as_deref())?;
            emit(&schema, pretty)
        }
        Command::IndexBuild { manifest, out } => {
            let summary = commands::index_build(&config, manifest.as_deref(), out.as_deref())?;
            emit(&summary, pretty)
        }
        Command::Cluster { manifest, out } => {
            match commands::cluster(&config, manifest.as_deref(), out.as_deref())? {
                Some(table) => emit(&table, pretty),
                None => Ok(()),
            }
        }
        Command::Retrieve { question, index, k } => {
            let ranked = commands::retrieve(&config, question, index.as_deref(), *k)?;
            emit(&ranked, pretty)
        }
        Command::EvalRecall { questions, manifest, index, ks } => {
            let report =
                commands::eval_recall(&config, questions, manifest.as_deref(), index.as_deref(), ks)?;
            emit(&report, pretty)
        }
        Command::ParseEdl { file } => {
            let plan = commands::parse_edl_cmd(file.as_deref())?;
            emit(&plan, pretty)
        }
        Command::RenderEdl { file } => {
            let text = commands::render_edl_cmd(file.as_deref())?;
            println!("{text}");
            Ok(())
        }
        Command::CompileEdl { file, schema, execute } => {
            let outcome = commands::compile_edl_cmd(
                &config,
                file.as_deref(),
                &schema.as_source(),
                execute.as_deref(),
            )?;
            println!("{}", outcome.sql.text);
            if let Some(rows) = &outcome.rows {
                emit(rows, pretty)?;
            }
            Ok(())
        }
        Command::GenEdl { question, schema, few_shots, sql } => {
            let generated =
                commands::gen_edl(&config, question, &schema.as_source(), few_shots.as_deref(), *sql)?;
            emit(&generated, pretty)
        }
        Command::SelectSchema { question, manifest, index, k, few_shots } => {
            let sub = commands::select_schema_cmd(
                &config,
                question,
                manifest.as_deref(),
                index.as_deref(),
                *k,
                few_shots.as_deref(),
            )?;
            emit(&sub, pretty)
        }
        Command::EvalEx { pred, gold, db } => {
            let verdict = commands::eval_ex(&config, pred, gold, db)?;
            emit(&verdict, pretty)
        }
        Command::Pipeline { questions, manifest, index, use_llm_sql, few_shots, out } => {
            let report = commands::pipeline(
                &config,
                questions,
                manifest.as_deref(),
                index.as_deref(),
                *use_llm_sql,
                few_shots.as_deref(),
                out.as_deref(),
            )?;
            emit(&report, pretty)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with 2 (usage) on parse failure and 0 on --help/--version
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
