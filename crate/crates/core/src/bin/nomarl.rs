//! Command-line front end: train, eval, oracle, jra, sweep.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use nomarl::cli::{self, CliError, SweepSpec};

#[derive(Parser)]
#[command(
    name = "nomarl",
    about = "Downlink NOMA resource allocation: closed-form power split plus a learned channel assigner",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a channel-assignment policy and write metrics plus a model file
    Train {
        /// Config file of key = value lines; defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed override
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory override
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grade a saved model on held-out seeds against random assignment and
    /// exhaustive search
    Eval {
        /// Model file written by train
        #[arg(long)]
        model: PathBuf,
        /// Config matching the model's network and channel layout
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated held-out instance seeds
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
    },
    /// Exhaustively search assignments for given instance seeds
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated instance seeds
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
    },
    /// Allocate power for an explicit channel-pair table
    Jra {
        /// CSV with header gamma1,gamma2,a1,a2, one channel per row
        #[arg(long)]
        pairs: PathBuf,
        /// Total power budget in watts
        #[arg(long, default_value_t = 12.0)]
        p_t: f64,
        /// Bandwidth per channel in hertz
        #[arg(long, default_value_t = 5e6 / 3.0)]
        b_c: f64,
    },
    /// Train the cross product of one axis's values and grade each run on a
    /// shared held-out set
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Axis to vary: learning_rate, batch_size, n_features,
        /// architecture, p_t, n_users, r_min, replay_on_off
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Training runs per value
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Master seed override
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory override
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run() -> Result<i32, CliError> {
    // clap's own exit code for bad usage clashes with the non-convergence
    // code, so parse errors are mapped to the usage exit by hand.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{}", e);
                return Ok(cli::EXIT_OK);
            }
            return Err(CliError::Usage(e.to_string()));
        }
    };

    let stdout = std::io::stdout();
    match cli.command {
        Command::Train { config, seed, out } => {
            let run = cli::resolve_config(config.as_deref(), seed, out.as_deref())?;
            cli::cmd_train(&run)
        }
        Command::Eval { model, config, seeds } => {
            let run = cli::resolve_config(config.as_deref(), None, None)?;
            cli::cmd_eval(&model, &seeds, &run, &mut stdout.lock())
        }
        Command::Oracle { config, seeds } => {
            let run = cli::resolve_config(config.as_deref(), None, None)?;
            cli::cmd_oracle(&seeds, &run, &mut stdout.lock())
        }
        Command::Jra { pairs, p_t, b_c } => cli::cmd_jra(&pairs, p_t, b_c, &mut stdout.lock()),
        Command::Sweep { config, axis, values, repeats, seed, out } => {
            let run = cli::resolve_config(config.as_deref(), seed, out.as_deref())?;
            let spec = SweepSpec { axis: cli::SweepAxis::parse(&axis)?, values, repeats };
            cli::cmd_sweep(&spec, &run)
        }
    }
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {}", err);
            std::process::exit(err.exit_code());
        }
    }
}
