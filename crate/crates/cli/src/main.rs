use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use strider_cli::commands::{self, parse_pose};
use strider_cli::server::{router, AppState};
use strider_cli::{CliError, Suite};
use strider_core::geom::Pose2;

#[derive(Parser)]
#[command(name = "strider", version, about = "Walk and kick planning for kid-size humanoids")]
struct Cli {
    /// Suite configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `strategy.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan footsteps, CoM and joint trajectories between two robot poses.
    PlanWalk {
        /// Start pose `x,y,theta`.
        #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
        start: Pose2,
        /// Target pose `x,y,theta`.
        #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
        target: Pose2,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the offline kick value grid.
    ValueGrid {
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank the kicks of a scenario against a value grid.
    Evaluate {
        #[arg(long)]
        grid: PathBuf,
        /// Scenario JSON file.
        scenario: PathBuf,
    },
    /// Print the effective configuration as TOML.
    ShowConfig,
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Precomputed grid; built in the background otherwise.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
}

fn load(cli: &Cli) -> Result<Suite, CliError> {
    let mut suite = Suite::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        suite.config.strategy.seed = seed;
    }
    Ok(suite)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let suite = load(&cli)?;
    match cli.command {
        Command::PlanWalk { start, target, out } => {
            let summary = commands::plan_walk(&suite, &start, &target, &out)?;
            print!("{}", commands::to_pretty_json(&summary));
        }
        Command::ShowConfig => print!("{}", suite.config.to_toml()),
        Command::ValueGrid { out } => {
            let summary = commands::value_grid(&suite, &out)?;
            print!("{}", commands::to_pretty_json(&summary));
        }
        Command::Evaluate { grid, scenario } => {
            let report = commands::evaluate_files(&suite, &grid, &scenario)?;
            print!("{}", commands::to_pretty_json(&report));
        }
        Command::Serve { port, host, grid } => {
            let grid = grid.map(|g| commands::load_grid(&g, &suite)).transpose()?;
            let base = cli
                .config
                .as_deref()
                .and_then(Path::parent)
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            let addr = SocketAddr::new(host, port);
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::input("io_error", e.to_string()))?;
            rt.block_on(async move {
                let state = AppState::new(suite, &base, grid);
                let listener = tokio::net::TcpListener::bind(addr)
                    .await
                    .map_err(|e| CliError::input("io_error", format!("{addr}: {e}")))?;
                eprintln!("listening on http://{addr}");
                axum::serve(listener, router(state))
                    .await
                    .map_err(|e| CliError::input("io_error", e.to_string()))
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit as u8)
        }
    }
}
