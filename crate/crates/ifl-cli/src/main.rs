//! `ifl`: runs the lattice, continuum, SLE and crossing computations and
//! writes JSON or CSV results that embed the resolved configuration.
//!
//! Exit status: 0 on success, 1 when a checked tolerance is violated, 2 on
//! malformed input, 3 on a numerical failure.

mod commands;
mod config;
mod emit;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use ifl_core::IflError;
use serde::Serialize;

use commands::cont::ContCmd;
use commands::crossing::CrossingCmd;
use commands::lowtemp::LowtempCmd;
use commands::obs::ObsCmd;
use commands::sle::SleCmd;
use commands::Ctx;
use config::{InputError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "ifl", version, about = "Ising interfaces with free boundary arcs")]
struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Tolerance for identity checks.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; results go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Low-temperature expansion: partition functions, exact FK crossings, spin samples.
    #[command(subcommand)]
    Lowtemp(LowtempCmd),
    /// Discrete fermionic observable.
    #[command(subcommand)]
    Obs(ObsCmd),
    /// Continuum observable in the upper half-plane.
    #[command(subcommand)]
    Cont(ContCmd),
    /// Loewner evolution of the interface.
    #[command(subcommand)]
    Sle(SleCmd),
    /// Crossing probabilities.
    #[command(subcommand)]
    Crossing(CrossingCmd),
}

impl Command {
    fn name(&self) -> String {
        let v = serde_json::to_value(self).unwrap_or_default();
        // externally tagged: {"group": {"action": ...}} or {"group": "action"}
        let mut parts = Vec::new();
        let mut cur = &v;
        while let Some((k, inner)) = cur.as_object().and_then(|m| m.iter().next()) {
            parts.push(k.clone());
            cur = inner;
        }
        if let Some(s) = cur.as_str() {
            parts.push(s.to_string());
        }
        parts.truncate(2);
        parts.join(" ")
    }

    fn run(&self, ctx: &Ctx) -> Result<Vec<commands::Outcome>> {
        match self {
            Command::Lowtemp(c) => c.run(ctx),
            Command::Obs(c) => c.run(ctx),
            Command::Cont(c) => c.run(ctx),
            Command::Sle(c) => c.run(ctx),
            Command::Crossing(c) => c.run(ctx),
        }
    }
}

fn is_input_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<InputError>()
            || matches!(
                c.downcast_ref::<IflError>(),
                Some(IflError::InvalidDomain(_) | IflError::InvalidBc(_) | IflError::InvalidArgument(_))
            )
    })
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(config::input_error("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    config::require_positive("tol", cli.tol)?;
    let ctx = Ctx { seed: cli.seed, tol: cli.tol };
    let outcomes = cli.command.run(&ctx)?;
    let mut ok = true;
    for o in outcomes {
        let cfg = RunConfig {
            tool: "ifl",
            version: env!("CARGO_PKG_VERSION"),
            command: cli.command.name(),
            seed: cli.seed,
            tol: cli.tol,
            jobs: cli.jobs,
            out: cli.out.clone(),
            inputs: o.inputs.clone(),
            args: serde_json::to_value(&cli.command)?,
        };
        if let Some(path) = emit::emit(&o.output, &cfg, &o.name)? {
            eprintln!("wrote {}", path.display());
        }
        if !o.ok {
            eprintln!("{}: tolerance violated (tol {:e})", o.name, cli.tol);
        }
        ok &= o.ok;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_input_error(&e) { 2 } else { 3 })
        }
    }
}
