//! Command-line front end: builds constrained spin-chain models, runs the
//! graph census, zero-mode counting and searches, dense spectra, and quench
//! dynamics, writing plain CSV/JSON/DOT artifacts plus a run manifest.

mod ops;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fsc", version, about = "Fock-space cage analysis for constrained spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Preset name (single_cage | multi_cage | o1_cage) or a path to a
    /// model definition JSON file.
    #[arg(long)]
    model: String,

    /// Chain length, or a comma list like 8,10,12.
    #[arg(long = "L", value_delimiter = ',')]
    l: Vec<usize>,

    /// Boundary condition override (defaults: open for single_cage,
    /// periodic otherwise).
    #[arg(long)]
    bc: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the state-space graph and census; export DOT/GraphML/JSON.
    Graph {
        #[command(flatten)]
        model: ModelArgs,
        /// Seed bitstring (most significant site first); defaults to the
        /// model's natural seed.
        #[arg(long = "seed-state")]
        seed_state: Option<String>,
        #[arg(long, default_value = "dot")]
        format: String,
        #[arg(long, default_value_t = 20)]
        site_cap: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count zero modes exactly and run the cage searches.
    Zeromodes {
        #[command(flatten)]
        model: ModelArgs,
        /// Search to run per sublattice: backtracking | chargeflow | none.
        #[arg(long, default_value = "backtracking")]
        search: String,
        #[arg(long = "max-support", default_value_t = 16)]
        max_support: usize,
        #[arg(long = "max-solutions", default_value_t = 32)]
        max_solutions: usize,
        #[arg(long = "rng-seed", default_value_t = 1)]
        rng_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dense sector spectrum with gap-ratio and entanglement diagnostics.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "seed-state")]
        seed_state: Option<String>,
        /// Half-cut override for the entanglement profile.
        #[arg(long)]
        cut: Option<usize>,
        /// Also resolve translation momentum blocks (periodic only).
        #[arg(long, default_value_t = false)]
        momentum: bool,
        /// Also resolve the reflection*parity blocks (open chains).
        #[arg(long, default_value_t = false)]
        reflection: bool,
        #[arg(long = "dense-cap", default_value_t = 1 << 14)]
        dense_cap: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quench evolution: return probability and magnetization series.
    Dynamics {
        #[command(flatten)]
        model: ModelArgs,
        /// Initial state: a bitstring, or one of edge_dot | mid_dot |
        /// mid_pair | even_pair.
        #[arg(long = "seed-state", default_value = "edge_dot")]
        seed_state: String,
        #[arg(long, default_value_t = 2000.0)]
        tmax: f64,
        #[arg(long, default_value_t = 1200)]
        samples: usize,
        #[arg(long, default_value = "log")]
        spacing: String,
        /// Trailing fraction of samples averaged into the saturation value.
        #[arg(long, default_value_t = 0.5)]
        window: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the exact annihilation suite over the cage catalog.
    Verify {
        /// Largest chain length checked per family.
        #[arg(long = "l-max", default_value_t = 16)]
        l_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Graph { model, seed_state, format, site_cap, out } => {
            ops::cmd_graph(&model, seed_state.as_deref(), &format, site_cap, &out)
        }
        Command::Zeromodes { model, search, max_support, max_solutions, rng_seed, out } => {
            ops::cmd_zeromodes(&model, &search, max_support, max_solutions, rng_seed, &out)
        }
        Command::Spectrum { model, seed_state, cut, momentum, reflection, dense_cap, out } => {
            ops::cmd_spectrum(&model, seed_state.as_deref(), cut, momentum, reflection, dense_cap, &out)
        }
        Command::Dynamics { model, seed_state, tmax, samples, spacing, window, out } => {
            ops::cmd_dynamics(&model, &seed_state, tmax, samples, &spacing, window, &out)
        }
        Command::Verify { l_max, out } => ops::cmd_verify(l_max, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(ops::CmdError::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(ops::CmdError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
