//! Persistent experiment state.
//!
//! The whole store lives in one text file that is rewritten through a
//! temporary file and an atomic rename on every committed transaction.
//! Snapshots use the same format. An advisory lock on `<path>.lock` keeps
//! offline tools away from a store that a coordinator owns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, Mutex};

use secant_core::algebra::{format_rational, parse_rational};
use secant_core::prng::derive_packet_state;
use secant_core::schubert::{master_points, SchubertProblem, INSTANCES_PER_CHOICE};
use secant_core::table::{Cell, FrequencyTable};
use secant_core::BigRational;
use thiserror::Error;

const FORMAT_HEADER: &str = "secant-store 1";

/// Lease duration floor in seconds.
pub const DEFAULT_LEASE_FLOOR: i64 = 120;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("store file is malformed at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("store already exists at {0}")]
    Exists(PathBuf),
    #[error("store at {0} is locked by another process")]
    Locked(PathBuf),
    #[error("no problem with id {0}")]
    UnknownProblem(u64),
    #[error("invalid submission: {0}")]
    InvalidSubmission(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

pub type Result<T> = std::result::Result<T, StoreError>;

/// Source of epoch seconds. Injectable so lease expiry can be tested.
pub trait Clock: Send + Sync {
    fn now(&self) -> i64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> i64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Clone, Default)]
pub struct ManualClock(Arc<AtomicI64>);

impl ManualClock {
    pub fn new(start: i64) -> Self {
        ManualClock(Arc::new(AtomicI64::new(start)))
    }

    pub fn set(&self, t: i64) {
        self.0.store(t, Ordering::SeqCst);
    }

    pub fn advance(&self, secs: i64) {
        self.0.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> i64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemRow {
    pub id: u64,
    pub problem: SchubertProblem,
    pub initial_seed: u64,
    pub instances_per_packet: u64,
    pub expected_seconds: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RequestRow {
    pub packets_requested: u64,
    pub packets_started: u64,
    pub packets_completed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultRow {
    pub cells: FrequencyTable,
    pub degenerate_count: u64,
    pub cpu_micros: u64,
}

impl ResultRow {
    pub fn cpu_seconds(&self) -> f64 {
        self.cpu_micros as f64 / 1e6
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunningRow {
    pub problem_id: u64,
    pub packet_index: u64,
    pub worker_id: String,
    pub started_at: i64,
    pub expected_completion: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JournalRow {
    pub problem_id: u64,
    pub packet_index: u64,
    pub worker_id: String,
    pub submitted_at: i64,
    pub cells: FrequencyTable,
    pub degenerate_count: u64,
    pub cpu_micros: u64,
}

/// Counts of lease-arbitration events, kept for monitoring and tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounters {
    pub reclaimed: u64,
    pub superseded: u64,
    pub duplicate: u64,
}

/// All tables, in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreData {
    pub master_seed: u64,
    pub points: Vec<BigRational>,
    pub problems: BTreeMap<u64, ProblemRow>,
    pub requests: BTreeMap<u64, RequestRow>,
    pub results: BTreeMap<u64, ResultRow>,
    pub running: BTreeMap<(u64, u64), RunningRow>,
    pub journal: BTreeMap<(u64, u64), JournalRow>,
    pub events: EventCounters,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketLease {
    pub problem_id: u64,
    pub problem: SchubertProblem,
    pub packet_index: u64,
    pub initial_seed: u64,
    pub instances_per_packet: u64,
    pub expected_seconds: u64,
    pub deadline: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub worker_id: String,
    pub problem_id: u64,
    pub packet_index: u64,
    pub cells: Vec<Cell>,
    pub degenerate_count: u64,
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    Superseded,
    Duplicate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Accepted => "accepted",
            Verdict::Superseded => "superseded",
            Verdict::Duplicate => "duplicate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddedProblem {
    pub id: u64,
    pub created: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreStatus {
    pub now: i64,
    pub queue_depth: u64,
    pub running: Vec<RunningRow>,
    pub overdue: u64,
    pub events: EventCounters,
}

impl StoreData {
    pub fn new(master_seed: u64) -> Self {
        StoreData {
            master_seed,
            points: master_points().to_vec(),
            problems: BTreeMap::new(),
            requests: BTreeMap::new(),
            results: BTreeMap::new(),
            running: BTreeMap::new(),
            journal: BTreeMap::new(),
            events: EventCounters::default(),
        }
    }

    fn running_count(&self, id: u64) -> u64 {
        self.running.range((id, 0)..=(id, u64::MAX)).count() as u64
    }

    fn journal_keys(&self, id: u64) -> BTreeSet<u64> {
        self.journal.range((id, 0)..=(id, u64::MAX)).map(|(&(_, i), _)| i).collect()
    }

    /// Checks the per-problem bookkeeping identities.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.points != master_points() {
            return Err("Points table differs from the master set".into());
        }
        for (&id, p) in &self.problems {
            let r = self.requests.get(&id).ok_or(format!("problem {id} has no Requests row"))?;
            let res = self.results.get(&id).ok_or(format!("problem {id} has no Results row"))?;
            if !(r.packets_completed <= r.packets_started && r.packets_started <= r.packets_requested) {
                return Err(format!("problem {id}: completed <= started <= requested violated"));
            }
            let journaled = self.journal_keys(id).len() as u64;
            if journaled != r.packets_completed {
                return Err(format!("problem {id}: {journaled} journal rows, {} completed", r.packets_completed));
            }
            if r.packets_started != r.packets_completed + self.running_count(id) {
                return Err(format!("problem {id}: started != completed + running"));
            }
            if res.cells.total() + res.degenerate_count != r.packets_completed * p.instances_per_packet {
                return Err(format!("problem {id}: accounting identity violated"));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{FORMAT_HEADER}");
        let _ = writeln!(s, "[meta]");
        let _ = writeln!(s, "master_seed\t{}", self.master_seed);
        let e = self.events;
        let _ = writeln!(s, "events\t{}\t{}\t{}", e.reclaimed, e.superseded, e.duplicate);
        let _ = writeln!(s, "[points]");
        for (i, p) in self.points.iter().enumerate() {
            let _ = writeln!(s, "{i}\t{}", format_rational(p));
        }
        let _ = writeln!(s, "[problems]");
        for p in self.problems.values() {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}",
                p.id, p.problem.degree, p.initial_seed, p.instances_per_packet, p.expected_seconds, p.problem
            );
        }
        let _ = writeln!(s, "[requests]");
        for (id, r) in &self.requests {
            let _ = writeln!(s, "{id}\t{}\t{}\t{}", r.packets_requested, r.packets_started, r.packets_completed);
        }
        let _ = writeln!(s, "[results]");
        for (id, r) in &self.results {
            let _ = writeln!(s, "{id}\t{}\t{}\t{}", r.degenerate_count, r.cpu_micros, encode_cells(&r.cells));
        }
        let _ = writeln!(s, "[running]");
        for r in self.running.values() {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                r.problem_id, r.packet_index, r.worker_id, r.started_at, r.expected_completion
            );
        }
        let _ = writeln!(s, "[journal]");
        for j in self.journal.values() {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                j.problem_id,
                j.packet_index,
                j.worker_id,
                j.submitted_at,
                j.degenerate_count,
                j.cpu_micros,
                encode_cells(&j.cells)
            );
        }
        let _ = writeln!(s, "[end]");
        s
    }

    pub fn from_text(text: &str) -> Result<StoreData> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, FORMAT_HEADER)) => {}
            _ => return Err(corrupt(1, "missing or unsupported header")),
        }
        let mut data = StoreData {
            master_seed: 0,
            points: Vec::new(),
            problems: BTreeMap::new(),
            requests: BTreeMap::new(),
            results: BTreeMap::new(),
            running: BTreeMap::new(),
            journal: BTreeMap::new(),
            events: EventCounters::default(),
        };
        let mut section = String::new();
        let mut seen_meta = false;
        let mut ended = false;
        for (no, line) in lines {
            if ended {
                return Err(corrupt(no, "content after [end]"));
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.to_string();
                ended = name == "end";
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let want = match section.as_str() {
                "meta" => if f.first() == Some(&"events") { 4 } else { 2 },
                "points" => 2,
                "problems" => 6,
                "requests" => 4,
                "results" => 4,
                "running" => 5,
                "journal" => 7,
                _ => return Err(corrupt(no, "record outside a known section")),
            };
            if f.len() != want {
                return Err(corrupt(no, "wrong field count"));
            }
            let num = |i: usize| f[i].parse::<u64>().map_err(|_| corrupt(no, "bad integer"));
            let int = |i: usize| f[i].parse::<i64>().map_err(|_| corrupt(no, "bad integer"));
            match section.as_str() {
                "meta" => match f[0] {
                    "master_seed" => {
                        data.master_seed = num(1)?;
                        seen_meta = true;
                    }
                    "events" => {
                        data.events = EventCounters { reclaimed: num(1)?, superseded: num(2)?, duplicate: num(3)? };
                    }
                    _ => return Err(corrupt(no, "unknown meta key")),
                },
                "points" => {
                    if num(0)? as usize != data.points.len() {
                        return Err(corrupt(no, "points out of order"));
                    }
                    data.points.push(parse_rational(f[1]).ok_or_else(|| corrupt(no, "bad rational"))?);
                }
                "problems" => {
                    let problem: SchubertProblem = f[5].parse().map_err(|_| corrupt(no, "bad problem"))?;
                    if problem.degree != num(1)? {
                        return Err(corrupt(no, "stored degree disagrees with the problem"));
                    }
                    let row = ProblemRow {
                        id: num(0)?,
                        problem,
                        initial_seed: num(2)?,
                        instances_per_packet: num(3)?,
                        expected_seconds: num(4)?,
                    };
                    data.problems.insert(row.id, row);
                }
                "requests" => {
                    data.requests.insert(
                        num(0)?,
                        RequestRow { packets_requested: num(1)?, packets_started: num(2)?, packets_completed: num(3)? },
                    );
                }
                "results" => {
                    data.results.insert(
                        num(0)?,
                        ResultRow {
                            degenerate_count: num(1)?,
                            cpu_micros: num(2)?,
                            cells: decode_cells(f[3]).ok_or_else(|| corrupt(no, "bad cells"))?,
                        },
                    );
                }
                "running" => {
                    let row = RunningRow {
                        problem_id: num(0)?,
                        packet_index: num(1)?,
                        worker_id: f[2].to_string(),
                        started_at: int(3)?,
                        expected_completion: int(4)?,
                    };
                    data.running.insert((row.problem_id, row.packet_index), row);
                }
                "journal" => {
                    let row = JournalRow {
                        problem_id: num(0)?,
                        packet_index: num(1)?,
                        worker_id: f[2].to_string(),
                        submitted_at: int(3)?,
                        degenerate_count: num(4)?,
                        cpu_micros: num(5)?,
                        cells: decode_cells(f[6]).ok_or_else(|| corrupt(no, "bad cells"))?,
                    };
                    if data.journal.insert((row.problem_id, row.packet_index), row).is_some() {
                        return Err(corrupt(no, "duplicate journal entry"));
                    }
                }
                _ => unreachable!(),
            }
        }
        if !ended || !seen_meta {
            return Err(corrupt(0, "truncated file"));
        }
        data.check_invariants().map_err(|r| corrupt(0, &r))?;
        Ok(data)
    }
}

fn corrupt(line: usize, reason: &str) -> StoreError {
    StoreError::Corrupt { line, reason: reason.to_string() }
}

/// `real:overlap:count` triples joined by commas, or `-` when empty.
pub fn encode_cells(t: &FrequencyTable) -> String {
    if t.is_empty() {
        return "-".into();
    }
    t.cells()
        .iter()
        .map(|c| format!("{}:{}:{}", c.real, c.overlap, c.count))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn decode_cells(s: &str) -> Option<FrequencyTable> {
    let mut t = FrequencyTable::new();
    if s == "-" {
        return Some(t);
    }
    for part in s.split(',') {
        let v: Vec<u64> = part.split(':').map(|x| x.parse().ok()).collect::<Option<_>>()?;
        if v.len() != 3 || v[2] == 0 {
            return None;
        }
        t.add(v[0], v[1], v[2]);
    }
    Some(t)
}

fn valid_worker_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 200 && !id.chars().any(|c| c.is_control())
}

fn write_atomically(path: &Path, text: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

fn lock_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".lock");
    PathBuf::from(s)
}

/// Snapshot directory belonging to a store file.
pub fn snapshot_dir(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".snapshots");
    PathBuf::from(s)
}

/// The most recent snapshot in `dir`, by file name.
pub fn latest_snapshot(dir: &Path) -> Result<Option<PathBuf>> {
    if !dir.exists() {
        return Ok(None);
    }
    let mut best: Option<PathBuf> = None;
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        let is_snap = p
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("snapshot-") && n.ends_with(".txt"));
        if is_snap && best.as_ref().is_none_or(|b| p > *b) {
            best = Some(p);
        }
    }
    Ok(best)
}

pub fn load_snapshot(path: &Path) -> Result<StoreData> {
    StoreData::from_text(&fs::read_to_string(path)?)
}

/// The experiment store. All mutations are serialized through one mutex and
/// committed to disk before they become visible.
pub struct ExperimentStore {
    path: PathBuf,
    data: Mutex<StoreData>,
    clock: Arc<dyn Clock>,
    lease_floor: i64,
    _lock: File,
}

impl std::fmt::Debug for ExperimentStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExperimentStore").field("path", &self.path).finish_non_exhaustive()
    }
}

impl ExperimentStore {
    /// Creates a fresh store. Refuses to touch an existing nonempty file.
    pub fn create(path: &Path, master_seed: u64, clock: Arc<dyn Clock>) -> Result<Self> {
        if fs::metadata(path).is_ok_and(|m| m.len() > 0) {
            return Err(StoreError::Exists(path.to_path_buf()));
        }
        let lock = acquire_lock(path)?;
        let data = StoreData::new(master_seed);
        write_atomically(path, &data.to_text())?;
        Ok(Self::from_parts(path, data, clock, lock))
    }

    pub fn open(path: &Path, clock: Arc<dyn Clock>) -> Result<Self> {
        let lock = acquire_lock(path)?;
        let data = StoreData::from_text(&fs::read_to_string(path)?)?;
        Ok(Self::from_parts(path, data, clock, lock))
    }

    fn from_parts(path: &Path, data: StoreData, clock: Arc<dyn Clock>, lock: File) -> Self {
        ExperimentStore {
            path: path.to_path_buf(),
            data: Mutex::new(data),
            clock,
            lease_floor: DEFAULT_LEASE_FLOOR,
            _lock: lock,
        }
    }

    pub fn with_lease_floor(mut self, secs: i64) -> Self {
        self.lease_floor = secs.max(1);
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn now(&self) -> i64 {
        self.clock.now()
    }

    /// A copy of every table.
    pub fn data(&self) -> StoreData {
        self.lock().clone()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, StoreData> {
        self.data.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs `f` on a copy of the tables. If it succeeds and reports a change,
    /// the copy is written to disk and then replaces the live tables.
    fn transact<R>(&self, f: impl FnOnce(&mut StoreData, i64) -> Result<(R, bool)>) -> Result<R> {
        let mut guard = self.lock();
        let mut next = guard.clone();
        let (out, dirty) = f(&mut next, self.clock.now())?;
        if dirty {
            debug_assert_eq!(next.check_invariants(), Ok(()));
            write_atomically(&self.path, &next.to_text())?;
            *guard = next;
        }
        Ok(out)
    }

    /// Registers a problem, or finds it if an identical one is present. The
    /// initial seed is derived from the master seed and the problem id.
    pub fn add_problem(
        &self,
        problem: &SchubertProblem,
        instances_per_packet: u64,
        expected_seconds: u64,
    ) -> Result<AddedProblem> {
        if instances_per_packet == 0 || !instances_per_packet.is_multiple_of(INSTANCES_PER_CHOICE as u64) {
            return Err(StoreError::InvalidRequest(format!(
                "instances per packet must be a positive multiple of {INSTANCES_PER_CHOICE}"
            )));
        }
        self.transact(|d, _| {
            if let Some(p) = d.problems.values().find(|p| p.problem == *problem) {
                return Ok((AddedProblem { id: p.id, created: false }, false));
            }
            let id = d.problems.keys().next_back().map_or(1, |k| k + 1);
            let initial_seed = derive_packet_state(d.master_seed, id).expect("id >= 1").state;
            d.problems.insert(
                id,
                ProblemRow {
                    id,
                    problem: problem.clone(),
                    initial_seed,
                    instances_per_packet,
                    expected_seconds: expected_seconds.max(1),
                },
            );
            d.requests.insert(id, RequestRow::default());
            d.results.insert(id, ResultRow::default());
            Ok((AddedProblem { id, created: true }, true))
        })
    }

    /// Copies a problem row verbatim, keeping its initial seed. Used to build
    /// scratch stores for verification.
    pub fn import_problem(&self, row: &ProblemRow) -> Result<AddedProblem> {
        self.transact(|d, _| {
            if let Some(p) = d.problems.get(&row.id) {
                if p.problem == row.problem && p.initial_seed == row.initial_seed {
                    return Ok((AddedProblem { id: row.id, created: false }, false));
                }
                return Err(StoreError::InvalidRequest(format!("problem id {} is taken", row.id)));
            }
            d.problems.insert(row.id, row.clone());
            d.requests.insert(row.id, RequestRow::default());
            d.results.insert(row.id, ResultRow::default());
            Ok((AddedProblem { id: row.id, created: true }, true))
        })
    }

    pub fn request_packets(&self, id: u64, additional: u64) -> Result<RequestRow> {
        if additional == 0 {
            return Err(StoreError::InvalidRequest("additional_packets must be positive".into()));
        }
        self.transact(|d, _| {
            let r = d.requests.get_mut(&id).ok_or(StoreError::UnknownProblem(id))?;
            r.packets_requested += additional;
            Ok((*r, true))
        })
    }

    fn lease_seconds(&self, expected: u64) -> i64 {
        self.lease_floor.max(3 * expected as i64)
    }

    /// Leases a packet to `worker_id`. Overdue leases are reclaimed before any
    /// fresh packet is handed out; fresh packets come from the problem with
    /// the largest expected time that still fits in `max_seconds`.
    pub fn claim_packet(&self, worker_id: &str, max_seconds: u64) -> Result<Option<PacketLease>> {
        if !valid_worker_id(worker_id) {
            return Err(StoreError::InvalidRequest("worker_id must be nonempty printable text".into()));
        }
        self.transact(|d, now| {
            let fits = |id: &u64| d.problems[id].expected_seconds <= max_seconds;
            let overdue = d
                .running
                .values()
                .filter(|r| r.expected_completion < now && fits(&r.problem_id))
                .min_by_key(|r| (r.expected_completion, r.problem_id, r.packet_index))
                .map(|r| (r.problem_id, r.packet_index));
            let (id, index) = if let Some(key) = overdue {
                d.running.remove(&key);
                d.events.reclaimed += 1;
                key
            } else {
                let choice = d
                    .problems
                    .values()
                    .filter(|p| fits(&p.id))
                    .filter(|p| {
                        let r = &d.requests[&p.id];
                        r.packets_started < r.packets_requested
                    })
                    .max_by_key(|p| (p.expected_seconds, std::cmp::Reverse(p.id)))
                    .map(|p| p.id);
                let Some(id) = choice else {
                    return Ok((None, false));
                };
                let requested = d.requests[&id].packets_requested;
                let index = (1..=requested)
                    .find(|i| !d.journal.contains_key(&(id, *i)) && !d.running.contains_key(&(id, *i)))
                    .expect("started < requested leaves a free index");
                d.requests.get_mut(&id).unwrap().packets_started += 1;
                (id, index)
            };
            let p = &d.problems[&id];
            let deadline = now + self.lease_seconds(p.expected_seconds);
            let lease = PacketLease {
                problem_id: id,
                problem: p.problem.clone(),
                packet_index: index,
                initial_seed: p.initial_seed,
                instances_per_packet: p.instances_per_packet,
                expected_seconds: p.expected_seconds,
                deadline,
            };
            d.running.insert(
                (id, index),
                RunningRow {
                    problem_id: id,
                    packet_index: index,
                    worker_id: worker_id.to_string(),
                    started_at: now,
                    expected_completion: deadline,
                },
            );
            Ok((Some(lease), true))
        })
    }

    /// Checks a submission against its problem without touching the store.
    pub fn validate_submission(&self, s: &Submission) -> Result<()> {
        validate(&self.lock(), s)
    }

    pub fn submit_result(&self, s: &Submission) -> Result<Verdict> {
        self.transact(|d, now| {
            validate(d, s)?;
            let key = (s.problem_id, s.packet_index);
            if d.journal.contains_key(&key) {
                d.events.duplicate += 1;
                return Ok((Verdict::Duplicate, true));
            }
            if d.running.get(&key).is_some_and(|r| r.worker_id != s.worker_id) {
                d.events.superseded += 1;
                return Ok((Verdict::Superseded, true));
            }
            let cells = FrequencyTable::from_cells(&s.cells);
            let cpu_micros = (s.cpu_seconds * 1e6).round() as u64;
            let res = d.results.get_mut(&s.problem_id).expect("validated");
            res.cells.merge(&cells);
            res.degenerate_count += s.degenerate_count;
            res.cpu_micros += cpu_micros;
            let req = d.requests.get_mut(&s.problem_id).expect("validated");
            req.packets_completed += 1;
            if d.running.remove(&key).is_none() {
                // The lease was dropped (restore); the packet still counts once.
                req.packets_started += 1;
            }
            d.journal.insert(
                key,
                JournalRow {
                    problem_id: s.problem_id,
                    packet_index: s.packet_index,
                    worker_id: s.worker_id.clone(),
                    submitted_at: now,
                    cells,
                    degenerate_count: s.degenerate_count,
                    cpu_micros,
                },
            );
            Ok((Verdict::Accepted, true))
        })
    }

    /// Writes every table to a new file in `dir` and returns its path.
    pub fn snapshot(&self, dir: &Path) -> Result<PathBuf> {
        let guard = self.lock();
        fs::create_dir_all(dir)?;
        let now = self.clock.now();
        let mut seq = 0;
        let path = loop {
            let p = dir.join(format!("snapshot-{now:012}-{seq:03}.txt"));
            if !p.exists() {
                break p;
            }
            seq += 1;
        };
        write_atomically(&path, &guard.to_text())?;
        Ok(path)
    }

    /// Rolls one problem back to its state in `snapshot`. Returns the packet
    /// indices that were completed in the live store but not in the snapshot.
    pub fn restore_problem(&self, id: u64, snapshot: &StoreData) -> Result<Vec<u64>> {
        let snap_problem = snapshot.problems.get(&id).ok_or(StoreError::UnknownProblem(id))?;
        self.transact(|d, _| {
            let live = d.problems.get(&id).ok_or(StoreError::UnknownProblem(id))?;
            if live.problem != snap_problem.problem || live.initial_seed != snap_problem.initial_seed {
                return Err(StoreError::InvalidRequest(format!(
                    "snapshot problem {id} differs from the live problem"
                )));
            }
            let missing: Vec<u64> =
                d.journal_keys(id).difference(&snapshot.journal_keys(id)).copied().collect();
            d.running.retain(|&(p, _), _| p != id);
            d.journal.retain(|&(p, _), _| p != id);
            for (k, v) in snapshot.journal.range((id, 0)..=(id, u64::MAX)) {
                d.journal.insert(*k, v.clone());
            }
            let mut req = snapshot.requests[&id];
            req.packets_started = req.packets_completed;
            d.requests.insert(id, req);
            d.results.insert(id, snapshot.results[&id].clone());
            Ok((missing, true))
        })
    }

    pub fn status(&self) -> StoreStatus {
        let d = self.lock();
        let now = self.clock.now();
        StoreStatus {
            now,
            queue_depth: d.requests.values().map(|r| r.packets_requested - r.packets_started).sum(),
            running: d.running.values().cloned().collect(),
            overdue: d.running.values().filter(|r| r.expected_completion < now).count() as u64,
            events: d.events,
        }
    }

    pub fn problem(&self, id: u64) -> Option<(ProblemRow, RequestRow, ResultRow)> {
        let d = self.lock();
        let p = d.problems.get(&id)?.clone();
        Some((p, d.requests[&id], d.results[&id].clone()))
    }

    pub fn problems(&self) -> Vec<(ProblemRow, RequestRow, ResultRow)> {
        let d = self.lock();
        d.problems
            .values()
            .map(|p| (p.clone(), d.requests[&p.id], d.results[&p.id].clone()))
            .collect()
    }

    pub fn journal(&self, id: u64) -> Vec<JournalRow> {
        let d = self.lock();
        d.journal.range((id, 0)..=(id, u64::MAX)).map(|(_, j)| j.clone()).collect()
    }
}

fn validate(d: &StoreData, s: &Submission) -> Result<()> {
    let bad = |m: String| Err(StoreError::InvalidSubmission(m));
    if !valid_worker_id(&s.worker_id) {
        return bad("worker_id must be nonempty printable text".into());
    }
    let p = d.problems.get(&s.problem_id).ok_or(StoreError::UnknownProblem(s.problem_id))?;
    let req = d.requests[&s.problem_id];
    if s.packet_index == 0 || s.packet_index > req.packets_requested {
        return bad(format!("packet index {} was never requested", s.packet_index));
    }
    if !(s.cpu_seconds.is_finite() && s.cpu_seconds >= 0.0) {
        return bad("cpu_seconds must be finite and nonnegative".into());
    }
    secant_core::table::validate_cells(&s.cells, p.problem.degree).or_else(|e| bad(e.to_string()))?;
    let mut seen = BTreeSet::new();
    if !s.cells.iter().all(|c| seen.insert((c.real, c.overlap))) {
        return bad("repeated cell".into());
    }
    let total: u64 = s.cells.iter().map(|c| c.count).sum::<u64>() + s.degenerate_count;
    if total != p.instances_per_packet {
        return bad(format!("packet accounts for {total} instances, expected {}", p.instances_per_packet));
    }
    Ok(())
}

fn acquire_lock(path: &Path) -> Result<File> {
    let lp = lock_path(path);
    let f = OpenOptions::new().create(true).truncate(false).write(true).open(&lp)?;
    match f.try_lock() {
        Ok(()) => Ok(f),
        Err(std::fs::TryLockError::WouldBlock) => Err(StoreError::Locked(path.to_path_buf())),
        Err(std::fs::TryLockError::Error(e)) => Err(StoreError::Io(e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_lines() -> SchubertProblem {
        "2 4 | 1;1;1;1".parse().unwrap()
    }

    fn fresh(dir: &Path) -> (ExperimentStore, ManualClock) {
        let clock = ManualClock::new(1_000_000);
        let store = ExperimentStore::create(&dir.join("s.txt"), 7, Arc::new(clock.clone())).unwrap();
        (store, clock)
    }

    fn submission(lease: &PacketLease, worker: &str) -> Submission {
        Submission {
            worker_id: worker.into(),
            problem_id: lease.problem_id,
            packet_index: lease.packet_index,
            cells: vec![Cell { real: 2, overlap: 0, count: lease.instances_per_packet }],
            degenerate_count: 0,
            cpu_seconds: 0.25,
        }
    }

    #[test]
    fn text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (s, _) = fresh(dir.path());
        let id = s.add_problem(&four_lines(), 10, 30).unwrap().id;
        s.request_packets(id, 3).unwrap();
        let lease = s.claim_packet("w1", 100).unwrap().unwrap();
        s.submit_result(&submission(&lease, "w1")).unwrap();
        s.claim_packet("w2", 100).unwrap().unwrap();
        let d = s.data();
        assert_eq!(StoreData::from_text(&d.to_text()).unwrap(), d);
        assert_eq!(fs::read_to_string(s.path()).unwrap(), d.to_text());
    }

    #[test]
    fn create_refuses_existing_and_lock_excludes() {
        let dir = tempfile::tempdir().unwrap();
        let (s, _) = fresh(dir.path());
        let before = fs::read_to_string(s.path()).unwrap();
        assert!(matches!(
            ExperimentStore::create(s.path(), 9, Arc::new(SystemClock)),
            Err(StoreError::Exists(_))
        ));
        assert!(matches!(ExperimentStore::open(s.path(), Arc::new(SystemClock)), Err(StoreError::Locked(_))));
        assert_eq!(fs::read_to_string(s.path()).unwrap(), before);
        let path = s.path().to_path_buf();
        drop(s);
        assert!(ExperimentStore::open(&path, Arc::new(SystemClock)).is_ok());
    }

    #[test]
    fn points_and_seeds() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let (sa, _) = fresh(a.path());
        let (sb, _) = fresh(b.path());
        assert_eq!(sa.data().points.len(), 111);
        let ia = sa.add_problem(&four_lines(), 5, 1).unwrap();
        let ib = sb.add_problem(&four_lines(), 5, 1).unwrap();
        assert_eq!(sa.data().problems[&ia.id].initial_seed, sb.data().problems[&ib.id].initial_seed);
        assert_eq!(sa.data().problems[&ia.id].initial_seed, derive_packet_state(7, 1).unwrap().state);
        assert_eq!(sa.add_problem(&four_lines(), 5, 1).unwrap(), AddedProblem { id: 1, created: false });
    }

    #[test]
    fn claim_rules() {
        let dir = tempfile::tempdir().unwrap();
        let (s, clock) = fresh(dir.path());
        assert_eq!(s.claim_packet("w", 1000).unwrap(), None);
        let small = s.add_problem(&four_lines(), 5, 10).unwrap().id;
        let big = s.add_problem(&"2 5 | 2;1;1;1;1".parse().unwrap(), 5, 50).unwrap().id;
        s.request_packets(small, 2).unwrap();
        s.request_packets(big, 1).unwrap();
        assert_eq!(s.claim_packet("w", 5).unwrap(), None);

        let first = s.claim_packet("w", 100).unwrap().unwrap();
        assert_eq!((first.problem_id, first.packet_index), (big, 1));
        assert_eq!(first.deadline, clock.now() + 150);
        assert_eq!(s.data().requests[&big].packets_started, 1);

        let second = s.claim_packet("w", 100).unwrap().unwrap();
        assert_eq!((second.problem_id, second.packet_index), (small, 1));
        assert_eq!(second.deadline, clock.now() + DEFAULT_LEASE_FLOOR);

        clock.advance(151);
        let again = s.claim_packet("x", 100).unwrap().unwrap();
        assert_eq!((again.problem_id, again.packet_index), (small, 1));
        let again = s.claim_packet("x", 100).unwrap().unwrap();
        assert_eq!((again.problem_id, again.packet_index), (big, 1));
        assert_eq!(s.data().events.reclaimed, 2);
        assert_eq!(s.data().requests[&big].packets_started, 1);
        let fresh = s.claim_packet("x", 100).unwrap().unwrap();
        assert_eq!((fresh.problem_id, fresh.packet_index), (small, 2));
    }

    #[test]
    fn submit_verdicts() {
        let dir = tempfile::tempdir().unwrap();
        let (s, clock) = fresh(dir.path());
        let id = s.add_problem(&four_lines(), 10, 10).unwrap().id;
        s.request_packets(id, 2).unwrap();
        let lease = s.claim_packet("a", 100).unwrap().unwrap();
        assert_eq!(s.submit_result(&submission(&lease, "a")).unwrap(), Verdict::Accepted);
        assert!(s.data().running.is_empty());
        let before = s.problem(id).unwrap();
        assert_eq!(s.submit_result(&submission(&lease, "a")).unwrap(), Verdict::Duplicate);
        assert_eq!(s.problem(id).unwrap().2, before.2);

        let lease2 = s.claim_packet("a", 100).unwrap().unwrap();
        clock.advance(10_000);
        let stolen = s.claim_packet("b", 100).unwrap().unwrap();
        assert_eq!(stolen.packet_index, lease2.packet_index);
        assert_eq!(s.submit_result(&submission(&lease2, "a")).unwrap(), Verdict::Superseded);
        assert_eq!(s.submit_result(&submission(&stolen, "b")).unwrap(), Verdict::Accepted);
        let (_, req, res) = s.problem(id).unwrap();
        assert_eq!(req.packets_completed, 2);
        assert_eq!(res.cells.total(), 20);
        assert_eq!(res.cpu_micros, 500_000);
        assert_eq!(s.data().check_invariants(), Ok(()));
    }

    #[test]
    fn submit_validation() {
        let dir = tempfile::tempdir().unwrap();
        let (s, _) = fresh(dir.path());
        let id = s.add_problem(&four_lines(), 10, 10).unwrap().id;
        s.request_packets(id, 1).unwrap();
        let lease = s.claim_packet("a", 100).unwrap().unwrap();
        let mut sub = submission(&lease, "a");
        sub.cells = vec![Cell { real: 1, overlap: 0, count: 10 }];
        assert!(matches!(s.submit_result(&sub), Err(StoreError::InvalidSubmission(_))));
        sub.cells = vec![Cell { real: 2, overlap: 0, count: 9 }];
        assert!(matches!(s.submit_result(&sub), Err(StoreError::InvalidSubmission(_))));
        sub.packet_index = 2;
        assert!(matches!(s.submit_result(&sub), Err(StoreError::InvalidSubmission(_))));
        sub.problem_id = 99;
        assert!(matches!(s.submit_result(&sub), Err(StoreError::UnknownProblem(99))));
        assert_eq!(s.data().requests[&id].packets_completed, 0);
    }

    #[test]
    fn malformed_files_rejected() {
        let d = StoreData::new(1);
        let text = d.to_text();
        assert!(StoreData::from_text(&text).is_ok());
        assert!(StoreData::from_text(&text.replace("[end]\n", "")).is_err());
        assert!(StoreData::from_text(&text.replace("secant-store 1", "secant-store 2")).is_err());
        assert!(StoreData::from_text(&text.replace("\t-1/1\n", "\t-2/1\n")).is_err());
    }

    #[test]
    fn snapshot_and_restore() {
        let dir = tempfile::tempdir().unwrap();
        let (s, clock) = fresh(dir.path());
        let a = s.add_problem(&four_lines(), 5, 10).unwrap().id;
        let b = s.add_problem(&"2 5 | 2;2;1;1".parse().unwrap(), 5, 10).unwrap().id;
        s.request_packets(a, 4).unwrap();
        s.request_packets(b, 1).unwrap();
        let finish = |worker: &str| {
            let l = s.claim_packet(worker, 100).unwrap().unwrap();
            let real = if l.problem_id == a { 2 } else { 0 };
            let sub = Submission {
                cells: vec![Cell { real, overlap: 0, count: 5 }],
                ..submission(&l, worker)
            };
            assert_eq!(s.submit_result(&sub).unwrap(), Verdict::Accepted);
        };
        finish("w");
        finish("w");
        let snap_dir = snapshot_dir(s.path());
        let snap = s.snapshot(&snap_dir).unwrap();
        clock.advance(1);
        finish("w");
        finish("w");
        s.claim_packet("w", 100).unwrap().unwrap();
        let b_before = s.problem(b).unwrap();

        assert_eq!(latest_snapshot(&snap_dir).unwrap(), Some(snap.clone()));
        let missing = s.restore_problem(a, &load_snapshot(&snap).unwrap()).unwrap();
        assert_eq!(missing, vec![3, 4]);
        let (_, req, res) = s.problem(a).unwrap();
        assert_eq!((req.packets_requested, req.packets_started, req.packets_completed), (4, 2, 2));
        assert_eq!(res.cells.total(), 10);
        assert!(s.data().running.keys().all(|&(p, _)| p != a));
        assert_eq!(s.problem(b).unwrap(), b_before);
        assert_eq!(s.data().check_invariants(), Ok(()));

        finish("w");
        finish("w");
        let (_, req, res) = s.problem(a).unwrap();
        assert_eq!(req.packets_completed, 4);
        assert_eq!(res.cells.total() + res.degenerate_count, 4 * 5);
    }
}
