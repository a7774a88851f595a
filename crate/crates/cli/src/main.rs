//! `bsbench`: run the pipeline stage by stage or end to end.

mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use bsbench::bench::{BenchConfig, BenchError};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bsbench", version, about = "Bowel-sound pattern classification benchmark")]
struct Cli {
    /// BenchConfig JSON; omitted fields take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// One seed for the corpus, the split and the MLP.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic corpus as WAV + annotation CSV + manifest under <out>/corpus.
    Synth,
    /// Cut every recording into labelled windows: <out>/segments.json.
    Segment,
    /// Subject-grouped stratified split of <out>/segments.json: <out>/splits.json.
    Split,
    /// Feature matrices for the roster: <out>/features/<kind>.csv.
    Features,
    /// Train every roster model for every task: <out>/models/.
    Train,
    /// Score trained models on val and test: <out>/reports/ and <out>/run_record.json.
    Eval,
    /// All stages end to end.
    Bench,
    /// Re-emit report files from run records into <out>/reports.
    Report {
        /// Run records to combine; defaults to <out>/run_record.json.
        records: Vec<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Segment => "segment",
            Command::Split => "split",
            Command::Features => "features",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Bench => "bench",
            Command::Report { .. } => "report",
        }
    }
}

fn effective_config(cli: &Cli) -> Result<BenchConfig, BenchError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
            BenchConfig::from_json(&text)?
        }
        None => BenchConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), BenchError> {
    let cfg = effective_config(cli)?;
    stages::write_provenance(&cfg, cli.command.name(), cli.seed)?;
    match &cli.command {
        Command::Synth => stages::synth(&cfg),
        Command::Segment => stages::segment(&cfg),
        Command::Split => stages::split(&cfg),
        Command::Features => stages::features(&cfg),
        Command::Train => stages::train(&cfg),
        Command::Eval => stages::eval(&cfg),
        Command::Bench => stages::bench(&cfg),
        Command::Report { records } => stages::report(&cfg, records),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bsbench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
