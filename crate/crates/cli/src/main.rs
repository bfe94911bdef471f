use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anodiff::commands::{self, Generator};
use anodiff::AppResult;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "anodiff", version, about = "Diffusion-based anomaly detection benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorArg {
    Blobs,
    Ring,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset (.csv or .bin by extension).
    GenData {
        #[arg(long, value_enum)]
        generator: GeneratorArg,
        #[arg(long)]
        n: usize,
        /// Dimension for blobs; ring is always 2-D.
        #[arg(long, default_value_t = 8)]
        d: usize,
        #[arg(long, default_value_t = 0.1)]
        anomaly_frac: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the configured method on a dataset and save the model.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Score every row of a dataset; writes `row,score`.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scoring seed stored in the model.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw samples from a diffusion model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every (dataset, method, seed) cell of a config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
        #[arg(long)]
        out_md: PathBuf,
        /// Also write one ROC curve CSV per cell into this directory.
        #[arg(long)]
        roc_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::GenData { generator, n, d, anomaly_frac, seed, out } => {
            let g = match generator {
                GeneratorArg::Blobs => Generator::Blobs,
                GeneratorArg::Ring => Generator::Ring,
            };
            commands::gen_data(g, n, d, anomaly_frac, seed, &out)
        }
        Command::Train { config, data, model_out } => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            let r = commands::train(&config, &data, &model_out, &mut lock);
            let _ = lock.flush();
            r
        }
        Command::Score { model, data, out, seed } => commands::score(&model, &data, &out, seed),
        Command::Sample { model, n, seed, out } => commands::sample(&model, n, seed, &out),
        Command::Bench { config, out_csv, out_md, roc_dir } => {
            commands::bench(&config, &out_csv, &out_md, roc_dir.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
