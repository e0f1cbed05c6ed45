//! Command-line front end: `ph`, `screen`, `partition`, `train`, `report`.
//! Exit codes: 0 success, 2 configuration error, 1 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fedtopo::config::ExperimentConfig;
use fedtopo::cubical::build_lower_star;
use fedtopo::field::ScalarField;
use fedtopo::persistence::compute_persistence;
use fedtopo::report;
use fedtopo::Error;

#[derive(Parser)]
#[command(name = "fedtopo", about = "Topology-aware federated learning simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Persistence diagram of one scalar field (CSV or grayscale image).
    Ph {
        /// Field as CSV rows of numbers, or a grayscale PNG image.
        #[arg(long)]
        input: PathBuf,
        /// Diagram CSV destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score candidate blocks by topological class separability.
    Screen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a client partition and its summary.
    Partition {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run federated training and emit logs, checkpoint, and report.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize a previous training run.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &PathBuf, seed_override: Option<u64>) -> Result<(ExperimentConfig, u64), Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let seed = cfg.seed;
    Ok((cfg, seed))
}

fn load_field(path: &PathBuf) -> Result<ScalarField, Error> {
    let is_image = matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "jpg" | "jpeg")
    );
    if is_image {
        let img = image::open(path)
            .map_err(|e| Error::Parse {
                location: path.display().to_string(),
                message: e.to_string(),
            })?
            .to_luma8();
        let (w, h) = img.dimensions();
        let values = img.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
        ScalarField::new(h as usize, w as usize, values)
    } else {
        let text = std::fs::read_to_string(path)?;
        let rows = report::parse_field_csv(&text)?;
        ScalarField::from_rows(&rows)
    }
}

fn run(cli: Cli) -> Result<(), (Error, u8)> {
    match cli.command {
        Command::Ph { input, out } => {
            let field = load_field(&input).map_err(|e| (e, 1))?;
            let complex = build_lower_star(&field).map_err(|e| (e, 1))?;
            let diagram = compute_persistence(&complex).map_err(|e| (e, 1))?;
            let csv = diagram.to_csv();
            match out {
                Some(path) => std::fs::write(path, csv).map_err(|e| (Error::Io(e), 1))?,
                None => print!("{csv}"),
            }
        }
        Command::Screen { config, out, seed } => {
            let (cfg, seed) = load_config(&config, seed).map_err(|e| (e, 2))?;
            let (winner, scores) = report::run_screen(&cfg, &out, seed).map_err(runtime)?;
            for s in &scores {
                println!("{}: mean AUC {:.4}", s.block, s.mean_auc);
            }
            println!("winner: {winner}");
        }
        Command::Partition { config, out, seed } => {
            let (cfg, seed) = load_config(&config, seed).map_err(|e| (e, 2))?;
            let partition = report::run_partition(&cfg, &out, seed).map_err(runtime)?;
            println!("wrote partition for {} clients to {}", partition.n_clients(), out.display());
        }
        Command::Train { config, out, seed } => {
            let (cfg, seed) = load_config(&config, seed).map_err(|e| (e, 2))?;
            let train_report = report::run_train(&cfg, &out, seed).map_err(runtime)?;
            println!(
                "final accuracy {:.4} after {} rounds (artifacts in {})",
                train_report.final_accuracy,
                train_report.rounds,
                out.display()
            );
        }
        Command::Report { out } => {
            let text = report::render_report(&out).map_err(|e| (e, 1))?;
            print!("{text}");
        }
    }
    Ok(())
}

/// Config-section errors surfacing during execution still count as config
/// problems; everything else is a runtime failure.
fn runtime(e: Error) -> (Error, u8) {
    let code = match &e {
        Error::Config(_) => 2,
        _ => 1,
    };
    (e, code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, code)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
