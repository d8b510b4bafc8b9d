//! Operator commands behind the `secant` binary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use secant_core::algebra::GroebnerConfig;
use secant_core::packet::{PacketOutcome, PacketSpec};
use secant_core::prng::derive_packet_state;
use secant_core::schubert::{enumerate_problems, make_instances, Outcome, SchubertProblem, INSTANCES_PER_CHOICE};
use secant_core::table::FrequencyTable;
use secant_service::store::{latest_snapshot, load_snapshot, Clock, snapshot_dir, ExperimentStore, Submission, SystemClock};
use secant_service::worker::{run_local, thread_cpu_seconds};
use secant_service::StoreError;
use thiserror::Error;

pub const MIN_INSTANCES: u64 = 5;
pub const MAX_INSTANCES: u64 = 50_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("{0}")]
    Storage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Failure(_) => 1,
            CliError::Mismatch(_) => 2,
            CliError::Storage(_) => 3,
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownProblem(_) | StoreError::InvalidRequest(_) | StoreError::InvalidSubmission(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Storage(e.to_string()),
        }
    }
}

fn open_store(path: &Path) -> Result<ExperimentStore, CliError> {
    Ok(ExperimentStore::open(path, Arc::new(SystemClock))?)
}

pub fn init(store: &Path, master_seed: u64) -> Result<String, CliError> {
    let s = ExperimentStore::create(store, master_seed, Arc::new(SystemClock))?;
    Ok(format!("initialized {} with {} points, master seed {master_seed}", store.display(), s.data().points.len()))
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub grassmannian: Option<(usize, usize)>,
    pub problems_file: Option<PathBuf>,
    pub degree_min: u64,
    pub probe_instances: usize,
    pub probe_budget_seconds: f64,
    pub target_packet_seconds: f64,
    pub log: Option<PathBuf>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            grassmannian: None,
            problems_file: None,
            degree_min: 2,
            probe_instances: 3,
            probe_budget_seconds: 60.0,
            target_packet_seconds: 60.0,
            log: None,
        }
    }
}

/// Chooses the packet size for a measured per-instance time: the multiple of
/// five nearest `target / per_instance`, clamped to the allowed range.
pub fn packet_size(per_instance_seconds: f64, target_seconds: f64) -> u64 {
    let per = INSTANCES_PER_CHOICE as f64;
    let raw = if per_instance_seconds > 0.0 { target_seconds / per_instance_seconds } else { f64::INFINITY };
    let rounded = ((raw / per).round() * per).min(MAX_INSTANCES as f64);
    (rounded as u64).clamp(MIN_INSTANCES, MAX_INSTANCES)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeResult {
    Fits { per_instance_seconds: f64 },
    TooLarge,
}

/// Times `count` instances of `problem` drawn from a probe stream. Any
/// instance hitting the budget marks the problem as too large.
pub fn probe(problem: &SchubertProblem, seed: u64, count: usize, budget_seconds: f64) -> ProbeResult {
    let count = count.max(1);
    let choices = count.div_ceil(INSTANCES_PER_CHOICE);
    let mut state = derive_packet_state(seed, 1).expect("index 1");
    let Ok(instances) = make_instances(problem, &mut state, choices) else {
        return ProbeResult::TooLarge;
    };
    let started = Instant::now();
    let config = GroebnerConfig {
        deadline: Some(started + Duration::from_secs_f64(budget_seconds)),
        ..GroebnerConfig::default()
    };
    let cpu0 = thread_cpu_seconds();
    for inst in instances.iter().take(count) {
        match inst.solve(problem, &config) {
            Ok(Outcome::Solved { .. }) | Ok(Outcome::Degenerate(secant_core::schubert::DegenerateReason::ShapeCheck)) => {}
            _ => return ProbeResult::TooLarge,
        }
        if started.elapsed().as_secs_f64() > budget_seconds {
            return ProbeResult::TooLarge;
        }
    }
    ProbeResult::Fits { per_instance_seconds: (thread_cpu_seconds() - cpu0).max(0.0) / count as f64 }
}

pub fn load(store_path: &Path, opts: &LoadOptions) -> Result<String, CliError> {
    let store = open_store(store_path)?;
    let mut report = String::new();
    let mut problems: Vec<SchubertProblem> = Vec::new();
    if let Some(file) = &opts.problems_file {
        let text = fs::read_to_string(file).map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))?;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            match line.parse::<SchubertProblem>() {
                Ok(p) => problems.push(p),
                Err(e) => {
                    let _ = writeln!(report, "invalid problem {line:?}: {e}");
                }
            }
        }
    } else if let Some((k, n)) = opts.grassmannian {
        problems = enumerate_problems(k, n, opts.degree_min).map_err(|e| CliError::Usage(e.to_string()))?;
    } else {
        return Err(CliError::Usage("load needs --grassmannian or --problems".into()));
    }

    let master_seed = store.data().master_seed;
    for (i, problem) in problems.iter().enumerate() {
        if store.data().problems.values().any(|p| p.problem == *problem) {
            let _ = writeln!(report, "skip {problem}: already loaded");
            continue;
        }
        // Probe draws come from the complemented master seed, away from any
        // problem's initial seed.
        let probe_seed = derive_packet_state(!master_seed, i as u64 + 1).expect("index >= 1").state;
        match probe(problem, probe_seed, opts.probe_instances, opts.probe_budget_seconds) {
            ProbeResult::TooLarge => {
                let _ = writeln!(report, "skip {problem}: probe exceeded {}s budget", opts.probe_budget_seconds);
            }
            ProbeResult::Fits { per_instance_seconds } => {
                let ipp = packet_size(per_instance_seconds, opts.target_packet_seconds);
                let expected = (per_instance_seconds * ipp as f64).ceil().max(1.0) as u64;
                let added = store.add_problem(problem, ipp, expected)?;
                let row = store.data().problems[&added.id].clone();
                let _ = writeln!(
                    report,
                    "load {problem}: id {} degree {} probe {:.4}s/instance, {ipp} instances ({} T-choices) per packet, expected {expected}s, seed {}",
                    added.id,
                    problem.degree,
                    per_instance_seconds,
                    ipp / INSTANCES_PER_CHOICE as u64,
                    row.initial_seed
                );
            }
        }
    }
    let log_path = opts.log.clone().unwrap_or_else(|| {
        let mut s = store_path.as_os_str().to_owned();
        s.push(".load.log");
        PathBuf::from(s)
    });
    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(|e| CliError::Storage(format!("{}: {e}", log_path.display())))?;
    let stamp = secant_service::api::iso8601(SystemClock.now());
    for line in report.lines() {
        let _ = writeln!(log, "{stamp} {line}");
    }
    Ok(report)
}

pub fn request(store_path: &Path, problem: u64, packets: u64) -> Result<String, CliError> {
    let store = open_store(store_path)?;
    let row = store.request_packets(problem, packets)?;
    Ok(format!(
        "problem {problem}: requested {}, started {}, completed {}",
        row.packets_requested, row.packets_started, row.packets_completed
    ))
}

pub fn report(store_path: &Path, problem: u64, csv: Option<&Path>) -> Result<String, CliError> {
    let store = open_store(store_path)?;
    let (p, req, res) = store.problem(problem).ok_or(StoreError::UnknownProblem(problem))?;
    let mut out = String::new();
    let _ = writeln!(out, "problem {}: {} (degree {})", p.id, p.problem, p.problem.degree);
    let _ = writeln!(
        out,
        "packets {}/{} completed, {} instances, {} degenerate, {:.1} cpu seconds",
        req.packets_completed,
        req.packets_requested,
        res.cells.total() + res.degenerate_count,
        res.degenerate_count,
        res.cpu_seconds()
    );
    out.push_str(&res.cells.render_text(p.problem.degree));
    if let Some(path) = csv {
        fs::write(path, res.cells.to_csv(p.problem.degree))
            .map_err(|e| CliError::Storage(format!("{}: {e}", path.display())))?;
    }
    Ok(out)
}

/// Parses `a-b`, `a..b`, `a..=b` or a single index.
pub fn parse_range(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("bad packet range {s:?}"));
    let parse = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let (a, b) = if let Some((a, b)) = s.split_once("..=") {
        (parse(a)?, parse(b)?)
    } else if let Some((a, b)) = s.split_once("..") {
        (parse(a)?, parse(b)?.checked_sub(1).ok_or_else(bad)?)
    } else if let Some((a, b)) = s.split_once('-') {
        (parse(a)?, parse(b)?)
    } else {
        let a = parse(s)?;
        (a, a)
    };
    if a == 0 {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

#[derive(Debug, Default)]
pub struct VerifyReport {
    pub text: String,
    pub mismatches: usize,
    pub unverifiable: Vec<u64>,
    pub matched: usize,
}

/// Recomputes journaled packets in a scratch store and diffs their cells.
pub fn verify(
    store_path: &Path,
    problem: u64,
    packets: &[u64],
    scratch: &Path,
    parallelism: usize,
) -> Result<VerifyReport, CliError> {
    let (row, journal) = {
        let store = open_store(store_path)?;
        let (row, _, _) = store.problem(problem).ok_or(StoreError::UnknownProblem(problem))?;
        let journal: BTreeMap<u64, (FrequencyTable, u64)> = store
            .journal(problem)
            .into_iter()
            .map(|j| (j.packet_index, (j.cells, j.degenerate_count)))
            .collect();
        (row, journal)
    };
    let mut rep = VerifyReport::default();
    if packets.is_empty() {
        let _ = writeln!(rep.text, "warning: empty packet range, nothing to verify");
        return Ok(rep);
    }
    let (present, missing): (Vec<u64>, Vec<u64>) = packets.iter().partition(|i| journal.contains_key(i));
    for i in &missing {
        let _ = writeln!(rep.text, "packet {i}: no journal entry, unverifiable");
    }
    rep.unverifiable = missing;
    if present.is_empty() {
        let _ = writeln!(rep.text, "warning: no journaled packets in range");
        return Ok(rep);
    }

    let scratch_store = ExperimentStore::create(scratch, store_seed(store_path)?, Arc::new(SystemClock))?;
    scratch_store.import_problem(&row)?;
    scratch_store.request_packets(problem, *present.iter().max().expect("nonempty"))?;
    let template = PacketSpec {
        problem: row.problem.clone(),
        initial_seed: row.initial_seed,
        packet_index: 1,
        instances_per_packet: row.instances_per_packet,
    };
    let outcomes: Vec<(u64, PacketOutcome)> =
        run_local(&template, &present, parallelism).map_err(|e| CliError::Failure(e.to_string()))?;
    for (index, outcome) in &outcomes {
        scratch_store.submit_result(&Submission {
            worker_id: "verify".into(),
            problem_id: problem,
            packet_index: *index,
            cells: outcome.cells.cells(),
            degenerate_count: outcome.degenerate_count,
            cpu_seconds: 0.0,
        })?;
        let (old_cells, old_degenerate) = &journal[index];
        let diffs = diff_cells(old_cells, &outcome.cells);
        if diffs.is_empty() && *old_degenerate == outcome.degenerate_count {
            rep.matched += 1;
            let _ = writeln!(rep.text, "packet {index}: match");
        } else {
            rep.mismatches += 1;
            let _ = writeln!(rep.text, "packet {index}: MISMATCH");
            for (real, overlap, old, new) in diffs {
                let _ = writeln!(rep.text, "  cell real={real} overlap={overlap}: journal {old}, recomputed {new}");
            }
            if *old_degenerate != outcome.degenerate_count {
                let _ = writeln!(
                    rep.text,
                    "  degenerate: journal {old_degenerate}, recomputed {}",
                    outcome.degenerate_count
                );
            }
        }
    }
    let _ = writeln!(rep.text, "{} matched, {} mismatched, {} unverifiable", rep.matched, rep.mismatches, rep.unverifiable.len());
    Ok(rep)
}

fn store_seed(path: &Path) -> Result<u64, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Storage(e.to_string()))?;
    Ok(secant_service::store::StoreData::from_text(&text)?.master_seed)
}

/// `(real, overlap, old, new)` for every cell whose count differs.
pub fn diff_cells(old: &FrequencyTable, new: &FrequencyTable) -> Vec<(u64, u64, u64, u64)> {
    let keys: std::collections::BTreeSet<(u64, u64)> =
        old.cells().iter().chain(new.cells().iter()).map(|c| (c.real, c.overlap)).collect();
    keys.into_iter()
        .filter_map(|(r, o)| {
            let (a, b) = (old.get(r, o), new.get(r, o));
            (a != b).then_some((r, o, a, b))
        })
        .collect()
}

pub fn restore(store_path: &Path, problem: u64, snapshot: Option<&Path>) -> Result<String, CliError> {
    let store = open_store(store_path)?;
    let snap_path = match snapshot {
        Some(p) => p.to_path_buf(),
        None => latest_snapshot(&snapshot_dir(store_path))?
            .ok_or_else(|| CliError::Usage(format!("no snapshot found for {}", store_path.display())))?,
    };
    let snap = load_snapshot(&snap_path)?;
    let missing = store.restore_problem(problem, &snap)?;
    let mut out = format!("restored problem {problem} from {}\n", snap_path.display());
    if missing.is_empty() {
        out.push_str("no packets missing\n");
    } else {
        let list: Vec<String> = missing.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "missing packets: {}", list.join(" "));
    }
    Ok(out)
}

pub fn status(coordinator: &str) -> Result<String, CliError> {
    let net = |e: reqwest::Error| CliError::Failure(format!("coordinator unreachable: {e}"));
    let st = secant_service::client::fetch_status(coordinator).map_err(net)?;
    let problems = secant_service::client::fetch_problems(coordinator).map_err(net)?;
    let mut out = String::new();
    let _ = writeln!(out, "now {}  queue depth {}  overdue {}", st.now, st.queue_depth, st.overdue);
    let _ = writeln!(out, "reclaimed {}  superseded {}  duplicate {}", st.reclaimed, st.superseded, st.duplicate);
    for p in &problems {
        let _ = writeln!(
            out,
            "problem {:>4}  {:<28} degree {:>4}  {}/{} packets ({} started)  {:.1} GHz-s",
            p.id, p.problem, p.degree, p.packets_completed, p.packets_requested, p.packets_started, p.ghz_seconds
        );
    }
    for r in &st.running {
        let _ = writeln!(
            out,
            "lease problem {} packet {} worker {} deadline {}{}",
            r.problem_id,
            r.packet_index,
            r.worker_id,
            r.deadline,
            if r.overdue { " OVERDUE" } else { "" }
        );
    }
    Ok(out)
}
