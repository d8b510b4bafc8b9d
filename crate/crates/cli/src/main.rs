use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use secant_cli::{CliError, LoadOptions};
use secant_service::coordinator::serve;
use secant_service::store::{ExperimentStore, SystemClock};
use secant_service::worker::{worker_loop, WorkerConfig};
use secant_service::CoordinatorConfig;

#[derive(Parser)]
#[command(name = "secant", about = "Distributed secant-flag experiments on Grassmannians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create an empty store holding the master point set.
    Init {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        master_seed: u64,
    },
    /// Probe and packetize the problems of a Grassmannian or a list file.
    Load {
        #[arg(long)]
        store: PathBuf,
        /// `k,n`
        #[arg(long, value_parser = parse_kn)]
        grassmannian: Option<(usize, usize)>,
        /// One problem per line, e.g. `2 5 | 2,1;1;1;1`.
        #[arg(long)]
        problems: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        degree_min: u64,
        #[arg(long, default_value_t = 3)]
        probe_instances: usize,
        #[arg(long, default_value_t = 60.0)]
        probe_budget_seconds: f64,
        #[arg(long, default_value_t = 60.0)]
        target_packet_seconds: f64,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Ask for more packets of a problem (offline store or live coordinator).
    Request {
        #[arg(long, conflicts_with = "coordinator", required_unless_present = "coordinator")]
        store: Option<PathBuf>,
        #[arg(long)]
        coordinator: Option<String>,
        #[arg(long)]
        problem: u64,
        #[arg(long)]
        packets: u64,
    },
    /// Print a problem's frequency table.
    Report {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        problem: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Recompute journaled packets in a scratch store and compare.
    Verify {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        problem: u64,
        /// e.g. `1-5`
        #[arg(long)]
        packets: String,
        #[arg(long)]
        scratch: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
    },
    /// Roll a problem back to a snapshot.
    Restore {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        problem: u64,
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Run the coordinator.
    Coordinate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run compute units against a coordinator.
    Work {
        #[arg(long)]
        coordinator: String,
        #[arg(long, default_value_t = 3600)]
        max_seconds: u64,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        /// Write canonical payloads here instead of submitting.
        #[arg(long)]
        verify_output: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        backoff_base_seconds: f64,
    },
    /// Show the coordinator's queue and leases.
    Status {
        #[arg(long)]
        coordinator: String,
    },
}

fn parse_kn(s: &str) -> Result<(usize, usize), String> {
    let (k, n) = s.split_once(',').ok_or("expected k,n")?;
    Ok((
        k.trim().parse().map_err(|_| "bad k")?,
        n.trim().parse().map_err(|_| "bad n")?,
    ))
}

fn shutdown_flag() -> Arc<AtomicBool> {
    let flag = Arc::new(AtomicBool::new(false));
    let f = flag.clone();
    let _ = ctrlc::set_handler(move || f.store(true, Ordering::SeqCst));
    flag
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Init { store, master_seed } => secant_cli::init(&store, master_seed),
        Command::Load {
            store,
            grassmannian,
            problems,
            degree_min,
            probe_instances,
            probe_budget_seconds,
            target_packet_seconds,
            log,
        } => secant_cli::load(
            &store,
            &LoadOptions {
                grassmannian,
                problems_file: problems,
                degree_min,
                probe_instances,
                probe_budget_seconds,
                target_packet_seconds,
                log,
            },
        ),
        Command::Request { store: Some(store), problem, packets, .. } => {
            secant_cli::request(&store, problem, packets)
        }
        Command::Request { coordinator: Some(url), problem, packets, .. } => {
            let p = secant_service::client::request_packets(&url, problem, packets as i64)
                .map_err(|e| CliError::Failure(e.to_string()))?;
            Ok(format!("problem {problem}: requested {}", p.packets_requested))
        }
        Command::Request { .. } => Err(CliError::Usage("need --store or --coordinator".into())),
        Command::Report { store, problem, csv } => secant_cli::report(&store, problem, csv.as_deref()),
        Command::Verify { store, problem, packets, scratch, parallelism } => {
            let range = secant_cli::parse_range(&packets)?;
            let rep = secant_cli::verify(&store, problem, &range, &scratch, parallelism)?;
            if rep.mismatches > 0 {
                print!("{}", rep.text);
                return Err(CliError::Mismatch(format!("{} packet(s) disagree", rep.mismatches)));
            }
            Ok(rep.text)
        }
        Command::Restore { store, problem, snapshot } => {
            secant_cli::restore(&store, problem, snapshot.as_deref())
        }
        Command::Coordinate { config } => {
            let cfg = CoordinatorConfig::load(&config).map_err(|e| CliError::Usage(e.to_string()))?;
            let store = ExperimentStore::open(&cfg.store_path, Arc::new(SystemClock))?;
            if store.data().master_seed != cfg.master_seed {
                eprintln!("warning: config master_seed differs from the store's; the store wins");
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Failure(e.to_string()))?;
            rt.block_on(serve(&cfg, store, |addr| {
                println!("listening on {addr}");
            }))
            .map_err(|e| CliError::Failure(e.to_string()))?;
            Ok("coordinator stopped".into())
        }
        Command::Work { coordinator, max_seconds, parallelism, verify_output, backoff_base_seconds } => {
            let mut cfg = WorkerConfig::new(coordinator);
            cfg.max_seconds = max_seconds;
            cfg.parallelism = parallelism;
            cfg.verify_output = verify_output;
            cfg.backoff_base = std::time::Duration::from_secs_f64(backoff_base_seconds.max(0.01));
            let stats = worker_loop(&cfg, shutdown_flag()).map_err(|e| CliError::Failure(e.to_string()))?;
            Ok(format!(
                "packets run {}, accepted {}, superseded {}, duplicate {}, failures {}",
                stats.packets_run.load(Ordering::SeqCst),
                stats.accepted.load(Ordering::SeqCst),
                stats.superseded.load(Ordering::SeqCst),
                stats.duplicate.load(Ordering::SeqCst),
                stats.failures.load(Ordering::SeqCst)
            ))
        }
        Command::Status { coordinator } => secant_cli::status(&coordinator),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            if !out.is_empty() && !out.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
