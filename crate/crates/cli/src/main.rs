use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use miniformer_cli::{cmd_params, cmd_score, cmd_train, cmd_translate, CliError, SEED_ENV};

#[derive(Parser)]
#[command(
    name = "miniformer",
    version,
    about = "Train, run and score Mini-Former translation models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a key=value config file.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Greedy-translate a file line by line.
    Translate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Score hypotheses against references with BLEU and ROUGE.
    Score {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Geometric-mean BLEU-n instead of single-order precision.
        #[arg(long)]
        cumulative: bool,
        /// Average sentence-level scores instead of corpus totals.
        #[arg(long)]
        sentence: bool,
    },
    /// Compare Mini-Former and matched Transformer parameter counts.
    Params {
        #[arg(long)]
        config: PathBuf,
    },
}

fn seed_override() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::config(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Train { config } => cmd_train(&config, seed_override()?, &mut stdout).map(drop),
        Command::Translate {
            checkpoint,
            input,
            output,
            max_len,
        } => cmd_translate(&checkpoint, &input, &output, max_len).map(drop),
        Command::Score {
            hyp,
            reference,
            cumulative,
            sentence,
        } => cmd_score(&hyp, &reference, cumulative, sentence, &mut stdout),
        Command::Params { config } => cmd_params(&config, &mut stdout).map(drop),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message.replace('\n', " "));
            ExitCode::from(e.code)
        }
    }
}
