use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lookahead_core::verify::VerifyMode;
use lookahead_harness::grid::{run_grid, GridSpec};
use lookahead_harness::report::{combine, read_report, write_csv};
use lookahead_harness::runner::run_experiment;
use lookahead_harness::toy::{write_toy_task, Task, ToyTaskSpec};
use lookahead_harness::{ExperimentConfig, HarnessError, Method, Result};

#[derive(Parser)]
#[command(name = "lookahead", version, about = "Constrained decoding experiments on toy language models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a toy corpus, model descriptors and validation/test splits.
    GenData(GenDataArgs),
    /// Decode a dataset with one method and write reports.
    Run(RunArgs),
    /// Tune CDSL thresholds on a validation split.
    Grid(GridArgs),
    /// Join run reports into one table.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Task::Lexical)]
    task: Task,
    #[arg(long, default_value_t = 200)]
    n_validation: usize,
    #[arg(long, default_value_t = 1000)]
    n_test: usize,
    #[arg(long, default_value_t = 3)]
    concepts: usize,
    #[arg(long, default_value_t = 200)]
    corpus_sentences: usize,
    #[arg(long, default_value_t = 4)]
    target_order: usize,
    #[arg(long, default_value_t = 2)]
    draft_order: usize,
    #[arg(long, default_value_t = 0.01)]
    smoothing: f64,
}

/// Flags shared by `run` and `grid`; each overrides the config file.
#[derive(Args)]
struct ExperimentArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    draft: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long = "a-t")]
    a_t: Option<f64>,
    #[arg(long = "r-t")]
    r_t: Option<f64>,
    #[arg(long = "l-m")]
    l_m: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<VerifyMode>,
    #[arg(long, value_enum)]
    baseline: Option<Method>,
    #[arg(long)]
    reward_threshold: Option<f64>,
}

fn parse_mode(s: &str) -> std::result::Result<VerifyMode, String> {
    s.parse::<VerifyMode>().map_err(|e| e.to_string())
}

impl ExperimentArgs {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        macro_rules! set_some {
            ($($field:ident),*) => { $( if self.$field.is_some() { c.$field = self.$field; } )* };
        }
        set!(method, seed, c, d, k, b, a_t, r_t, l_m, p, beam_width, mode, reward_threshold);
        set_some!(target, draft, data, out, baseline);
        Ok(c)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Comma-separated acceptance thresholds.
    #[arg(long, value_delimiter = ',')]
    a_t_grid: Option<Vec<f64>>,
    /// Comma-separated reward thresholds.
    #[arg(long, value_delimiter = ',')]
    r_t_grid: Option<Vec<f64>>,
    /// Comma-separated Step-1 budgets.
    #[arg(long, value_delimiter = ',')]
    b_grid: Option<Vec<usize>>,
    /// Start from the blocklist search space instead of the lexical one.
    #[arg(long)]
    blocklist_space: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// `report.json` files or run directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Cdlh)]
    baseline: Method,
    /// Re-price every row under this cost coefficient.
    #[arg(long)]
    c: Option<f64>,
    /// CSV destination; the table is printed to stdout either way.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Prints to stdout, staying quiet if the reader has gone away (`| head`).
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => {
            let spec = ToyTaskSpec {
                task: a.task,
                seed: a.seed,
                corpus_sentences: a.corpus_sentences,
                validation: a.n_validation,
                test: a.n_test,
                concepts_per_example: a.concepts,
                target_order: a.target_order,
                draft_order: a.draft_order,
                smoothing: a.smoothing,
            };
            write_toy_task(&a.out, &spec)?;
            emit(&format!("wrote {} task files to {}", a.task.name(), a.out.display()));
        }
        Command::Run(a) => {
            let config = a.experiment.resolve()?;
            let report = run_experiment(&config)?;
            emit(&serde_json::to_string_pretty(&report.metrics).expect("metrics serialize"));
        }
        Command::Grid(a) => {
            let config = a.experiment.resolve()?;
            let mut spec = if a.blocklist_space { GridSpec::blocklist() } else { GridSpec::default() };
            if let Some(v) = a.a_t_grid {
                spec.a_t = v;
            }
            if let Some(v) = a.r_t_grid {
                spec.r_t = v;
            }
            if let Some(v) = a.b_grid {
                spec.b = v;
            }
            let outcome = run_grid(&config, &spec)?;
            emit(&serde_json::to_string_pretty(&outcome.selected).expect("row serializes"));
        }
        Command::Report(a) => {
            let reports = a.inputs.iter().map(|p| read_report(p)).collect::<Result<Vec<_>>>()?;
            let rows = combine(&reports, a.baseline, a.c)?;
            if let Some(out) = &a.out {
                write_csv(out, &rows)?;
            }
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for row in &rows {
                w.serialize(row).map_err(|e| HarnessError::runtime(e.to_string()))?;
            }
            match w.flush() {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other.map_err(|e| HarnessError::runtime(e.to_string()))?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
