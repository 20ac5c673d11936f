//! `gridact`: train, evaluate and benchmark hierarchical growing-grid
//! action recognizers on skeleton sequences.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridact::pipeline::Backend;
use gridact::skeleton::{FLORENCE_FORMAT, MSR_FORMAT, UTKINECT_FORMAT};

use commands::{Failure, Format};
use config::{Overrides, RunConfig, RunFile};

#[derive(Parser)]
#[command(name = "gridact", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Print the file formats the dataset loaders expect, then exit.
    #[arg(long, global = true)]
    describe_format: bool,
    /// More logging on stderr (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Gg,
    Som,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base preset: synthetic, msr10, msr20, utkinect or florence.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Dataset directory or file.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Plain random splits instead of class-stratified ones.
    #[arg(long)]
    no_stratify: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize the configured dataset.
    Inspect {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Write the normalized dataset, canonical link lengths and body-part energies.
    Preprocess {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train a pipeline and save the model, growth history and log.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate a saved model, or train and evaluate under the configured split.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Saved model; without it a model is trained per fold.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Evaluate the model on every sequence instead of the held-out part.
        #[arg(long)]
        all: bool,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Compare growing-grid and SOM backends at matched neuron counts.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Write each sequence's ordered pattern and the second-layer clusters.
    ExportPatterns {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model: PathBuf,
    },
}

fn resolve(run: &RunArgs) -> Result<RunConfig, Failure> {
    let file = match &run.config {
        Some(path) => config::read_run_file(path).map_err(Failure::usage)?,
        None => RunFile::default(),
    };
    let over = Overrides {
        preset: run.preset.clone(),
        seed: run.seed,
        backend: run.backend.map(|b| match b {
            BackendArg::Gg => Backend::Gg,
            BackendArg::Som => Backend::Som,
        }),
        data: run.data.clone(),
        output_dir: run.output_dir.clone(),
        threads: run.threads,
        no_stratify: run.no_stratify,
    };
    let cfg = config::resolve(file, over).map_err(Failure::usage)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::runtime)?;
    }
    Ok(cfg)
}

fn describe_formats() {
    println!("{MSR_FORMAT}\n\n{UTKINECT_FORMAT}\n\n{FLORENCE_FORMAT}\n");
    println!(
        "Interchange: a text file starting with the header line
`version=1 joints=<n> layout=<name> categories=<comma list>`, then per
sequence a line `seq label=<k> subject=<s> event=<e> tag=<tag>` followed by
one line of 3n space-separated reals per frame. Lines starting with # are
comments."
    );
}

fn run(cli: Cli) -> Result<(), Failure> {
    let Some(command) = cli.command else {
        return Err(Failure::usage(anyhow::anyhow!(
            "no command given; see gridact --help"
        )));
    };
    match command {
        Command::Inspect { run, format } => commands::inspect(&resolve(&run)?, format),
        Command::Preprocess { run } => commands::preprocess(&resolve(&run)?),
        Command::Train { run } => commands::train(&resolve(&run)?),
        Command::Eval {
            run,
            model,
            all,
            format,
        } => commands::eval(&resolve(&run)?, model.as_deref(), all, format),
        Command::Bench { run, format } => commands::bench(&resolve(&run)?, format),
        Command::ExportPatterns { run, model } => {
            commands::export_patterns(&resolve(&run)?, &model)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if cli.describe_format {
        describe_formats();
        return ExitCode::SUCCESS;
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
