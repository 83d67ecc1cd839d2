use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slingdrone_cli::commands::{self, TrajectoryRequest};
use slingdrone_cli::{load_config, serve};
use slingdrone_core::Vec3;

/// Simulator for slingshot-style drone pointing and delivery.
#[derive(Parser)]
#[command(name = "slingdrone", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve live sessions over websocket at /ws.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Key-value config file; defaults to the bundled demo config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory to write one JSONL log per finished session.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Run an input script headlessly and write the event log.
    Sim {
        /// JSON input script; defaults to the bundled pull-hold-release demo.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a recorded log and check every event is reproduced.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Replay under this config instead of the one embedded in the log.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Export one ballistic trajectory as CSV plus a JSON summary.
    Trajectory {
        #[arg(long, allow_hyphen_values = true)]
        dx: f64,
        #[arg(long, allow_hyphen_values = true)]
        dy: f64,
        #[arg(long, allow_hyphen_values = true)]
        dz: f64,
        /// Launch point as x,y,z; defaults to the hover setpoint.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from: Option<Vec<f64>>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV path; the summary goes next to it with a .json extension.
        #[arg(long)]
        out: PathBuf,
        /// Also write the fitted polynomial reference here.
        #[arg(long)]
        poly: Option<PathBuf>,
    },
    /// Print the effective configuration in key-value form.
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Serve { port, host, config, record } => {
            let cfg = load_config(config.as_deref())?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve::run(SocketAddr::new(host, port), cfg, record))?;
        }
        Command::Sim { script, config, out } => {
            let cfg = load_config(config.as_deref())?;
            commands::sim(script.as_deref(), &cfg, &out)?;
        }
        Command::Replay { log, config } => {
            let cfg = config.as_deref().map(|p| load_config(Some(p))).transpose()?;
            if !commands::replay_log(&log, cfg.as_ref())? {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Trajectory { dx, dy, dz, from, config, out, poly } => {
            let cfg = load_config(config.as_deref())?;
            let from = match from.as_deref() {
                None => None,
                Some(&[x, y, z]) => Some(Vec3::new(x, y, z)),
                Some(v) => anyhow::bail!("--from needs three comma-separated values, got {}", v.len()),
            };
            commands::trajectory(&TrajectoryRequest { d: Vec3::new(dx, dy, dz), from, out, poly }, &cfg)?;
        }
        Command::Config { config } => {
            print!("{}", load_config(config.as_deref())?.to_kv_string());
        }
    }
    Ok(ExitCode::SUCCESS)
}
