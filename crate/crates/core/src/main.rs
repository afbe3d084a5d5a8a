use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use clinli::backend::{build_backend, BackendConfig, BackendKind};
use clinli::corpus::{generate_corpus, load_corpus};
use clinli::harness::{
    compute_metrics, read_ledgers, render_report, run_condition, ConditionKind, ConditionSpec, ReportFormat,
    RunOptions,
};
use clinli::kb::ClinicalModel;

#[derive(Parser)]
#[command(name = "clinli", version, about = "Clinical NLI by reasoning-family routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic template corpus.
    Generate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        per_family: usize,
        /// Clinical model JSON; the bundled reference model when omitted.
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one or more conditions over a corpus into a ledger.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        kb: Option<PathBuf>,
        /// carenli, oracle, forced:<family>, agnostic-cot, agnostic-direct. Repeatable.
        #[arg(long, required = true)]
        condition: Vec<String>,
        #[arg(long, value_enum, default_value_t = BackendArg::Mock)]
        backend: BackendArg,
        /// Chat-completions base URL (remote backend).
        #[arg(long)]
        endpoint: Option<String>,
        /// Model name sent to the endpoint; also labels the ledger.
        #[arg(long)]
        model: Option<String>,
        /// Remote: record transcripts here. Replay: read them from here.
        #[arg(long)]
        transcripts: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        temperature: f64,
        #[arg(long, default_value_t = 3)]
        max_retries: u32,
        #[arg(long, default_value_t = 4)]
        max_in_flight: usize,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        out_ledger: PathBuf,
        /// Append to an existing ledger instead of replacing it.
        #[arg(long)]
        append: bool,
    },
    /// Compute metrics from one or more ledgers.
    Report {
        #[arg(long, required = true)]
        ledger: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Markdown)]
        format: FormatArg,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Mock,
    Remote,
    Replay,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
}

/// Exit status classes.
enum Failure {
    Validation(String),
    Exhausted(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Exhausted(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Exhausted(m) | Failure::Runtime(m) => m,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load_model(path: Option<&Path>) -> Result<ClinicalModel, Failure> {
    match path {
        Some(p) => ClinicalModel::load(p).map_err(invalid),
        None => Ok(ClinicalModel::reference()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Generate {
            seed,
            per_family,
            kb,
            out,
        } => {
            let model = load_model(kb.as_deref())?;
            let corpus = generate_corpus(seed, per_family, &model).map_err(invalid)?;
            corpus.save(&out).map_err(runtime)?;
            eprintln!("wrote {} items to {}", corpus.items.len(), out.display());
            Ok(())
        }
        Command::Run {
            corpus,
            kb,
            condition,
            backend,
            endpoint,
            model: model_name,
            transcripts,
            temperature,
            max_retries,
            max_in_flight,
            runs,
            workers,
            out_ledger,
            append,
        } => {
            let model = load_model(kb.as_deref())?;
            let corpus = load_corpus(&corpus, &model).map_err(invalid)?;
            let kinds = condition
                .iter()
                .map(|c| c.parse::<ConditionKind>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(invalid)?;
            if runs == 0 {
                return Err(invalid("--runs must be at least 1"));
            }
            let kind = match backend {
                BackendArg::Mock => BackendKind::Mock,
                BackendArg::Remote => BackendKind::Remote,
                BackendArg::Replay => BackendKind::Replay,
            };
            let config = BackendConfig {
                kind,
                endpoint,
                model_name: model_name.or_else(|| (kind == BackendKind::Replay).then(|| "replay".to_string())),
                temperature,
                max_retries,
                max_in_flight,
                transcripts,
                ..BackendConfig::default()
            };
            if kind == BackendKind::Mock {
                if let Some(k) = kinds.iter().find(|k| k.is_baseline()) {
                    return Err(invalid(format!("{k} needs a remote or replay backend")));
                }
            }
            let backend = build_backend(&config).map_err(invalid)?;

            let file = if append {
                fs::OpenOptions::new().create(true).append(true).open(&out_ledger)
            } else {
                File::create(&out_ledger)
            }
            .map_err(runtime)?;
            let mut out = BufWriter::new(file);
            let options = RunOptions { workers };
            let mut exhausted = 0;
            for kind in kinds {
                let spec = ConditionSpec::new(kind, runs);
                let entries = run_condition(&corpus, &spec, &model, backend.as_ref(), Some(&mut out), &options)
                    .map_err(runtime)?;
                exhausted += entries.iter().filter(|e| e.is_exhaustion()).count();
                let correct = entries
                    .iter()
                    .filter(|e| e.gold_verdict.is_some() && e.final_verdict() == e.gold_verdict)
                    .count();
                eprintln!(
                    "{} / {}: {}/{} correct over {} run(s)",
                    backend.label(),
                    kind,
                    correct,
                    entries.len(),
                    runs
                );
            }
            out.flush().map_err(runtime)?;
            if exhausted > 0 {
                return Err(Failure::Exhausted(format!(
                    "{exhausted} attempt(s) exhausted their retries; see {}",
                    out_ledger.display()
                )));
            }
            Ok(())
        }
        Command::Report { ledger, format, out } => {
            let entries = read_ledgers(&ledger).map_err(invalid)?;
            let report = compute_metrics(&entries).map_err(invalid)?;
            let format = match format {
                FormatArg::Markdown => ReportFormat::Markdown,
                FormatArg::Csv => ReportFormat::Csv,
            };
            let text = render_report(&report, format);
            match out {
                Some(p) => fs::write(p, text).map_err(runtime)?,
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}
