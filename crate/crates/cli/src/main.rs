//! `crio`: build resource states, run the protocol, compute geometric
//! measures, analyze control power and regenerate the parameter tables.

mod angle;
mod commands;
mod report;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use report::Format;

#[derive(Parser, Debug)]
#[command(name = "crio", version, about = "Controlled remote implementation of operations over graph states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Output format; each command has its own default.
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Family {
    H3,
    H5,
    H2n1,
    Phi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
enum Table {
    /// Geometric measure of both resource families.
    #[value(name = "I", alias = "i", alias = "1")]
    #[serde(rename = "I")]
    Resource,
    /// Charlie measuring in the computational basis.
    #[value(name = "II", alias = "ii", alias = "2")]
    #[serde(rename = "II")]
    Diagonal,
    /// The off-diagonal family.
    #[value(name = "III", alias = "iii", alias = "3")]
    #[serde(rename = "III")]
    OffDiagonal,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a resource state's amplitudes.
    BuildState {
        /// State family; omit when --edges is given.
        family: Option<Family>,
        #[arg(long)]
        n: Option<usize>,
        /// Controlled groups `k ∈ 3..=N+1`, comma separated, or `none`.
        #[arg(long)]
        groups: Option<String>,
        /// Edge-list file (`n=<count>` header, one `u v` per line).
        #[arg(long, conflicts_with = "family")]
        edges: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the protocol and check every branch.
    RunProtocol {
        /// JSON run configuration; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        /// Axis per group (`x`, `y`, `z` or `nx,ny,nz`); one value applies to all.
        #[arg(long)]
        axis: Vec<String>,
        /// Rotation angle per group; one value applies to all.
        #[arg(long, allow_hyphen_values = true)]
        alpha: Vec<String>,
        #[arg(long)]
        groups: Option<String>,
        #[arg(long, value_parser = ["enumerate", "sample"])]
        mode: Option<String>,
        #[arg(long)]
        permitted: Option<bool>,
        #[command(flatten)]
        common: Common,
    },
    /// Geometric measure of entanglement of a resource state.
    Gm {
        /// Built-in family; omit when --state is given.
        family: Option<Family>,
        #[arg(long)]
        n: Option<usize>,
        /// State JSON as written by build-state.
        #[arg(long, conflicts_with = "family")]
        state: Option<PathBuf>,
        #[arg(long, value_parser = ["nonneg", "general"])]
        mode: Option<String>,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Best success rate of the two-outcome measurement attack.
    ControlPower {
        #[arg(long, allow_hyphen_values = true, conflicts_with = "sweep")]
        alpha: Option<String>,
        /// Evenly spaced angles over one turn.
        #[arg(long)]
        sweep: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Regenerate a parameter table as CSV.
    ReproduceTables {
        #[arg(value_enum)]
        table: Table,
        /// Largest group count for the resource table.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        theta1: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        phi1: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        omega1: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        omega2: Option<String>,
        /// Generic block of the off-diagonal table.
        #[arg(long, allow_hyphen_values = true)]
        lambda1: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Quick end-to-end self check.
    VerifyAll {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> anyhow::Result<commands::Outcome> {
    match cli.command {
        Command::BuildState {
            family,
            n,
            groups,
            edges,
            common,
        } => commands::build_state(family, n, groups.as_deref(), edges.as_deref(), &common),
        Command::RunProtocol {
            config,
            n,
            axis,
            alpha,
            groups,
            mode,
            permitted,
            common,
        } => commands::run_protocol(
            commands::ProtocolFlags {
                config,
                n,
                axis,
                alpha,
                groups,
                mode,
                permitted,
            },
            &common,
        ),
        Command::Gm {
            family,
            n,
            state,
            mode,
            restarts,
            common,
        } => commands::gm(family, n, state.as_deref(), mode.as_deref(), restarts, &common),
        Command::ControlPower { alpha, sweep, common } => {
            commands::control_power(alpha.as_deref(), sweep, &common)
        }
        Command::ReproduceTables {
            table,
            n,
            theta1,
            phi1,
            omega1,
            omega2,
            lambda1,
            common,
        } => commands::reproduce_tables(
            table,
            commands::TableFlags {
                n,
                theta1,
                phi1,
                omega1,
                omega2,
                lambda1,
            },
            &common,
        ),
        Command::VerifyAll { common } => verify::verify_all(&common),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(o) if o.verified => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("verification failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
