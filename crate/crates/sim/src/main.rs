use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gewi_sim::config::{load_config, ScenarioConfig, ScenarioKind};
use gewi_sim::{emit_outputs, run_sweep, SimError};

/// Entanglement-buffered classical communication simulator.
#[derive(Parser)]
#[command(name = "gewi", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Point-to-point link sweep.
    P2p(RunArgs),
    /// Relay network sweep.
    Network(RunArgs),
    /// Distributed k-means sweep.
    Cluster(RunArgs),
    /// Parse and check a scenario file without running it.
    Validate {
        /// Scenario file (TOML).
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(short, long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(short, long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Seeds per sweep point.
    #[arg(long)]
    seeds: Option<usize>,
    /// Ticks per run (p2p and network only).
    #[arg(long)]
    ticks: Option<u64>,
    /// Skip SVG output.
    #[arg(long)]
    no_plots: bool,
}

fn prepare(kind: ScenarioKind, args: &RunArgs) -> Result<ScenarioConfig, SimError> {
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => ScenarioConfig::defaults(kind),
    };
    if config.kind() != kind {
        return Err(SimError::Config(format!(
            "scenario file declares `{}` but the `{kind}` command was used",
            config.kind()
        )));
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(SimError::Config("--workers must be >= 1".into()));
        }
        config.workers = Some(w);
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(s) = args.seeds {
        if s == 0 {
            return Err(SimError::Config("--seeds must be >= 1".into()));
        }
        config.seeds_per_point = s;
    }
    if let Some(t) = args.ticks {
        if kind == ScenarioKind::Cluster {
            return Err(SimError::Config("--ticks does not apply to cluster runs".into()));
        }
        config.set_total_ticks(t);
    }
    Ok(config)
}

fn run(kind: ScenarioKind, args: &RunArgs) -> Result<(), SimError> {
    let config = prepare(kind, args)?;
    let runs = config.point_count() * config.seeds_per_point;
    eprintln!("{kind}: {} points x {} seeds = {runs} runs", config.point_count(), config.seeds_per_point);
    let results = run_sweep(&config)?;
    let written = emit_outputs(&config, &results, &config.output_dir, !args.no_plots)?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::P2p(a) => run(ScenarioKind::P2p, a),
        Command::Network(a) => run(ScenarioKind::Network, a),
        Command::Cluster(a) => run(ScenarioKind::Cluster, a),
        Command::Validate { config } => load_config(config).map(|c| {
            println!(
                "ok: {} scenario, {} points x {} seeds = {} runs",
                c.kind(),
                c.point_count(),
                c.seeds_per_point,
                c.point_count() * c.seeds_per_point
            );
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
