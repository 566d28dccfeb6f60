use std::path::PathBuf;

use clap::{Parser, Subcommand};
use weakmeas::cli::{
    cmd_compare, cmd_exact, cmd_run, cmd_weakvalue, Failure, Overrides, WeakValueRequest,
};
use weakmeas::config::parse_order;

#[derive(Parser)]
#[command(
    name = "weakmeas",
    version,
    about = "Simulate unsharp spin measurements with post-selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a config file and write a per-trial CSV log
    Run {
        /// Experiment config file
        #[arg(long)]
        config: PathBuf,
        /// CSV output path; relative paths land in $WEAKMEAS_OUTPUT_DIR
        #[arg(long)]
        output: PathBuf,
        /// Override the trial count
        #[arg(long)]
        trials: Option<u64>,
        /// Override the RNG seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the measurement order
        #[arg(long)]
        order: Option<String>,
    },
    /// Print the exact joint outcome distribution as CSV
    Exact {
        /// Experiment config file
        #[arg(long)]
        config: PathBuf,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the measurement order
        #[arg(long)]
        order: Option<String>,
    },
    /// Exact weak value of a spin component, optionally estimated by simulation
    Weakvalue {
        /// Prepared state: x+, x-, y+, y-, z+, z-, or a Bloch triple nx,ny,nz
        #[arg(long, allow_hyphen_values = true)]
        pre: String,
        /// Post-selected state, same tokens as --pre
        #[arg(long, allow_hyphen_values = true)]
        post: String,
        /// Observable direction: x, y, z, a signed axis, or a triple
        #[arg(long, allow_hyphen_values = true)]
        direction: String,
        /// Coupling strength for the simulated estimate
        #[arg(long)]
        epsilon: Option<f64>,
        /// Trial count for the simulated estimate
        #[arg(long)]
        trials: Option<u64>,
        /// RNG seed for the simulated estimate
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Simulate and check the empirical distribution against the exact one
    Compare {
        /// Experiment config file
        #[arg(long)]
        config: PathBuf,
        /// Override the trial count
        #[arg(long)]
        trials: Option<u64>,
        /// Override the RNG seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the measurement order
        #[arg(long)]
        order: Option<String>,
    },
}

fn overrides(
    trials: Option<u64>,
    seed: Option<u64>,
    order: Option<&String>,
) -> Result<Overrides, Failure> {
    let order = order.map(|s| parse_order(s)).transpose()?;
    Ok(Overrides {
        trials,
        seed,
        order,
    })
}

fn dispatch(command: &Command) -> Result<(), Failure> {
    let mut stdout = std::io::stdout();
    match command {
        Command::Run {
            config,
            output,
            trials,
            seed,
            order,
        } => {
            let ov = overrides(*trials, *seed, order.as_ref())?;
            cmd_run(config, output, &ov, &mut stdout)
        }
        Command::Exact {
            config,
            output,
            order,
        } => {
            let ov = overrides(None, None, order.as_ref())?;
            cmd_exact(config, output.as_deref(), &ov, &mut stdout)
        }
        Command::Weakvalue {
            pre,
            post,
            direction,
            epsilon,
            trials,
            seed,
        } => {
            let req = WeakValueRequest {
                pre: pre.clone(),
                post: post.clone(),
                direction: direction.clone(),
                epsilon: *epsilon,
                trials: *trials,
                seed: *seed,
            };
            cmd_weakvalue(&req, &mut stdout)
        }
        Command::Compare {
            config,
            trials,
            seed,
            order,
        } => {
            let ov = overrides(*trials, *seed, order.as_ref())?;
            cmd_compare(config, &ov, &mut stdout)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(f) = dispatch(&cli.command) {
        eprintln!("error: {}", f.message);
        std::process::exit(f.code);
    }
}
