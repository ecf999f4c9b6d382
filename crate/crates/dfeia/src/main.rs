use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dfeia::commands::{self, TrainArgs};
use dfeia::dataset::Split;
use dfeia_core::train::LrSchedule;
use dfeia_core::verify::suites::{SuiteOptions, CORRUPTED_GELU};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_SELFTEST: u8 = 3;

/// Wavelet and interaction-attention image classifier.
#[derive(Parser)]
#[command(name = "dfeia", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Schedule {
    Cosine,
    Constant,
}

#[derive(Subcommand)]
enum Command {
    /// Train on an image folder (one sub-directory per class) and save weights.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Network config JSON; the default network when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 400)]
        epochs: usize,
        #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
        batch_size: u64,
        #[arg(long, default_value_t = 5e-4)]
        lr: f64,
        #[arg(long, default_value_t = 0.05)]
        weight_decay: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Schedule::Cosine)]
        schedule: Schedule,
        /// Output weight file.
        #[arg(long, default_value = "weights.dfew")]
        out: PathBuf,
        /// Per-epoch JSON-lines log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Print accuracy, per-class and macro metrics on a dataset split.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Seed of the train/test split; must match the one used for training.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Classify a single image.
    Predict {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        topk: u64,
    },
    /// Count parameters and multiply-accumulates for one image.
    Count {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 224)]
        input_size: usize,
    },
    /// Run the built-in verification suites.
    Selftest {
        /// Probe every gradient element and use larger random samples.
        #[arg(long)]
        thorough: bool,
        /// Swap in a deliberately wrong activation to show the suites catch it.
        #[arg(long, hide = true)]
        corrupt_gelu: bool,
    },
}

fn print_json(v: &impl serde::Serialize) {
    let text = serde_json::to_string_pretty(v).expect("JSON output serialises");
    // a closed pipe (`dfeia count | head`) is not an error
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn run(cmd: Command) -> Result<ExitCode, dfeia::DfeiaError> {
    match cmd {
        Command::Train { data, config, epochs, batch_size, lr, weight_decay, seed, schedule, out, log } => {
            let schedule = match schedule {
                Schedule::Cosine => LrSchedule::Cosine,
                Schedule::Constant => LrSchedule::Constant,
            };
            let train = commands::train_config(epochs, batch_size as usize, lr, weight_decay, seed, schedule);
            let args = TrainArgs { data, config, out, log, train };
            let summary = commands::train(&args, |e| match e.test_acc {
                Some(acc) => eprintln!(
                    "epoch {:>4}  loss {:.4}  train acc {:.3}  test acc {acc:.3}",
                    e.epoch, e.train_loss, e.train_acc
                ),
                None => eprintln!("epoch {:>4}  loss {:.4}  train acc {:.3}", e.epoch, e.train_loss, e.train_acc),
            })?;
            print_json(&summary);
        }
        Command::Eval { data, weights, config, split, seed } => {
            print_json(&commands::eval(&data, &weights, config.as_deref(), split, seed)?);
        }
        Command::Predict { image, weights, config, topk } => {
            let (pred, clamped) = commands::predict(&image, &weights, config.as_deref(), topk as usize)?;
            if clamped {
                eprintln!("warning: --topk {topk} exceeds the number of classes; showing all {}", pred.topk.len());
            }
            print_json(&pred);
        }
        Command::Count { config, input_size } => print_json(&commands::count(config.as_deref(), input_size)?),
        Command::Selftest { thorough, corrupt_gelu } => {
            let mut opts = SuiteOptions { thorough, ..SuiteOptions::default() };
            if corrupt_gelu {
                opts.activation = CORRUPTED_GELU;
            }
            let (report, passed) = commands::selftest(&opts);
            print_json(&report);
            if !passed {
                eprintln!("selftest FAILED");
                return Ok(ExitCode::from(EXIT_SELFTEST));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
