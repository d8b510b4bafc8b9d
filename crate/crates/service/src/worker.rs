//! Compute client: claim, regenerate, solve, submit.

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use rand::Rng;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use secant_core::packet::{canonical_payload, run_packet, PacketError, PacketOutcome, PacketSpec};
use secant_core::SchubertProblem;
use thiserror::Error;

use crate::api::{CellJson, ClaimRequest, LeaseJson, ResultRequest, ResultResponse};

/// CPU seconds consumed by the calling thread.
pub fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

#[derive(Debug, Error)]
pub enum WorkerError {
    #[error("lease is malformed: {0}")]
    BadLease(String),
    #[error(transparent)]
    Packet(#[from] PacketError),
}

pub fn lease_spec(lease: &LeaseJson) -> Result<PacketSpec, WorkerError> {
    let problem: SchubertProblem = lease.problem.parse().map_err(|_| WorkerError::BadLease(lease.problem.clone()))?;
    if problem.degree != lease.degree {
        return Err(WorkerError::BadLease(format!("degree {} disagrees with {}", lease.degree, lease.problem)));
    }
    let initial_seed = lease.initial_seed.parse().map_err(|_| WorkerError::BadLease(lease.initial_seed.clone()))?;
    Ok(PacketSpec {
        problem,
        initial_seed,
        packet_index: lease.packet_index,
        instances_per_packet: lease.instances_per_packet,
    })
}

/// Runs one packet and measures this thread's CPU time.
pub fn run_timed(spec: &PacketSpec) -> Result<(PacketOutcome, f64), PacketError> {
    let start = thread_cpu_seconds();
    let out = run_packet(spec)?;
    Ok((out, (thread_cpu_seconds() - start).max(0.0)))
}

#[derive(Debug, Clone)]
pub struct WorkerConfig {
    pub coordinator: String,
    pub max_seconds: u64,
    pub parallelism: usize,
    pub worker_prefix: String,
    pub backoff_base: Duration,
    pub backoff_cap: Duration,
    /// Write canonical payloads here instead of submitting; stop when idle.
    pub verify_output: Option<PathBuf>,
}

impl WorkerConfig {
    pub fn new(coordinator: impl Into<String>) -> Self {
        WorkerConfig {
            coordinator: coordinator.into().trim_end_matches('/').to_string(),
            max_seconds: 3600,
            parallelism: 1,
            worker_prefix: default_worker_prefix(),
            backoff_base: Duration::from_secs(5),
            backoff_cap: Duration::from_secs(300),
            verify_output: None,
        }
    }
}

fn default_worker_prefix() -> String {
    let host = std::fs::read_to_string("/proc/sys/kernel/hostname")
        .ok()
        .or_else(|| std::env::var("HOSTNAME").ok())
        .map(|h| h.trim().to_string())
        .filter(|h| !h.is_empty())
        .unwrap_or_else(|| "worker".into());
    format!("{host}-{}", std::process::id())
}

/// Exponential backoff with jitter: a uniform draw from the upper half of
/// `min(cap, base * 2^attempt)`.
pub fn backoff_delay(base: Duration, cap: Duration, attempt: u32) -> Duration {
    let full = base.saturating_mul(1u32 << attempt.min(16)).min(cap);
    let half = full / 2;
    half + full.mul_f64(rand::rng().random_range(0.0..=0.5))
}

#[derive(Debug, Default)]
pub struct WorkerStats {
    pub packets_run: AtomicU64,
    pub accepted: AtomicU64,
    pub superseded: AtomicU64,
    pub duplicate: AtomicU64,
    pub failures: AtomicU64,
}

enum Claim {
    Lease(Box<LeaseJson>),
    Idle,
    Unreachable,
}

struct Unit {
    id: String,
    cfg: WorkerConfig,
    client: Client,
    shutdown: Arc<AtomicBool>,
    stats: Arc<WorkerStats>,
    verify_sink: Option<Arc<Mutex<std::fs::File>>>,
}

impl Unit {
    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.cfg.coordinator)
    }

    fn claim(&self) -> Claim {
        let body = ClaimRequest { worker_id: self.id.clone(), max_seconds: self.cfg.max_seconds };
        match self.client.post(self.url("/api/packet/claim")).json(&body).send() {
            Ok(r) if r.status() == StatusCode::OK => match r.json::<LeaseJson>() {
                Ok(lease) => Claim::Lease(Box::new(lease)),
                Err(e) => {
                    tracing::warn!(unit = %self.id, "unreadable lease: {e}");
                    Claim::Unreachable
                }
            },
            Ok(r) if r.status() == StatusCode::NO_CONTENT => Claim::Idle,
            Ok(r) => {
                tracing::warn!(unit = %self.id, status = %r.status(), "claim refused");
                Claim::Unreachable
            }
            Err(e) => {
                tracing::warn!(unit = %self.id, "coordinator unreachable: {e}");
                Claim::Unreachable
            }
        }
    }

    /// Sleeps in short slices so shutdown stays responsive.
    fn sleep(&self, d: Duration) {
        let step = Duration::from_millis(100);
        let mut left = d;
        while !left.is_zero() && !self.shutdown.load(Ordering::SeqCst) {
            let s = left.min(step);
            thread::sleep(s);
            left -= s;
        }
    }

    fn submit(&self, req: &ResultRequest) {
        let mut attempt = 0;
        while !self.shutdown.load(Ordering::SeqCst) {
            match self.client.post(self.url("/api/packet/result")).json(req).send() {
                Ok(r) if r.status().is_success() => {
                    let verdict = r.json::<ResultResponse>().map(|v| v.status).unwrap_or_default();
                    let counter = match verdict.as_str() {
                        "accepted" => &self.stats.accepted,
                        "superseded" => &self.stats.superseded,
                        _ => &self.stats.duplicate,
                    };
                    counter.fetch_add(1, Ordering::SeqCst);
                    tracing::info!(unit = %self.id, problem = req.problem_id, packet = req.packet_index, %verdict, "submitted");
                    return;
                }
                Ok(r) if r.status().is_client_error() => {
                    self.stats.failures.fetch_add(1, Ordering::SeqCst);
                    tracing::error!(unit = %self.id, status = %r.status(), "submission rejected");
                    return;
                }
                Ok(r) => tracing::warn!(unit = %self.id, status = %r.status(), "submission failed, retrying"),
                Err(e) => tracing::warn!(unit = %self.id, "submission failed, retrying: {e}"),
            }
            self.sleep(backoff_delay(self.cfg.backoff_base, self.cfg.backoff_cap, attempt));
            attempt += 1;
        }
    }

    fn run(&self) {
        let mut idle_attempt = 0;
        while !self.shutdown.load(Ordering::SeqCst) {
            let lease = match self.claim() {
                Claim::Lease(l) => l,
                Claim::Idle if self.verify_sink.is_some() => return,
                Claim::Idle | Claim::Unreachable => {
                    self.sleep(backoff_delay(self.cfg.backoff_base, self.cfg.backoff_cap, idle_attempt));
                    idle_attempt += 1;
                    continue;
                }
            };
            idle_attempt = 0;
            let spec = match lease_spec(&lease) {
                Ok(s) => s,
                Err(e) => {
                    self.stats.failures.fetch_add(1, Ordering::SeqCst);
                    tracing::error!(unit = %self.id, "abandoning packet: {e}");
                    continue;
                }
            };
            let (outcome, cpu) = match run_timed(&spec) {
                Ok(r) => r,
                Err(e) => {
                    self.stats.failures.fetch_add(1, Ordering::SeqCst);
                    tracing::error!(unit = %self.id, "abandoning packet: {e}");
                    continue;
                }
            };
            self.stats.packets_run.fetch_add(1, Ordering::SeqCst);
            if let Some(sink) = &self.verify_sink {
                let text = canonical_payload(&spec, &outcome);
                let mut f = sink.lock().unwrap_or_else(|e| e.into_inner());
                if let Err(e) = f.write_all(text.as_bytes()).and_then(|_| f.flush()) {
                    tracing::error!(unit = %self.id, "cannot write verify output: {e}");
                    return;
                }
                continue;
            }
            let req = ResultRequest {
                worker_id: self.id.clone(),
                problem_id: lease.problem_id,
                packet_index: lease.packet_index,
                cells: outcome.cells.cells().into_iter().map(CellJson::from).collect(),
                degenerate_count: outcome.degenerate_count,
                cpu_seconds: cpu,
            };
            self.submit(&req);
        }
    }
}

/// Runs `parallelism` independent units until `shutdown` is set (or, in
/// verify mode, until the coordinator has nothing left to hand out).
pub fn worker_loop(cfg: &WorkerConfig, shutdown: Arc<AtomicBool>) -> std::io::Result<Arc<WorkerStats>> {
    let stats = Arc::new(WorkerStats::default());
    let sink = match &cfg.verify_output {
        Some(p) => Some(Arc::new(Mutex::new(
            OpenOptions::new().create(true).append(true).open(p)?,
        ))),
        None => None,
    };
    let client = Client::builder()
        .timeout(Duration::from_secs(60))
        .build()
        .map_err(std::io::Error::other)?;
    let handles: Vec<_> = (0..cfg.parallelism.max(1))
        .map(|i| {
            let unit = Unit {
                id: format!("{}-{i}", cfg.worker_prefix),
                cfg: cfg.clone(),
                client: client.clone(),
                shutdown: shutdown.clone(),
                stats: stats.clone(),
                verify_sink: sink.clone(),
            };
            thread::spawn(move || unit.run())
        })
        .collect();
    for h in handles {
        let _ = h.join();
    }
    Ok(stats)
}

/// Computes the given packets locally on `parallelism` threads. Results come
/// back in index order regardless of scheduling.
pub fn run_local(
    template: &PacketSpec,
    indices: &[u64],
    parallelism: usize,
) -> Result<Vec<(u64, PacketOutcome)>, PacketError> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(u64, Result<PacketOutcome, PacketError>)>> = Mutex::new(Vec::new());
    thread::scope(|scope| {
        for _ in 0..parallelism.max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&index) = indices.get(i) else { break };
                let spec = PacketSpec { packet_index: index, ..template.clone() };
                let out = run_packet(&spec);
                results.lock().unwrap_or_else(|e| e.into_inner()).push((index, out));
            });
        }
    });
    let mut all = results.into_inner().unwrap_or_else(|e| e.into_inner());
    all.sort_by_key(|(i, _)| *i);
    all.into_iter().map(|(i, r)| r.map(|o| (i, o))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_bounds() {
        let base = Duration::from_secs(5);
        let cap = Duration::from_secs(300);
        for attempt in 0..20 {
            let d = backoff_delay(base, cap, attempt);
            let full = (base * 2u32.pow(attempt.min(16))).min(cap);
            assert!(d >= full / 2 && d <= full, "attempt {attempt}: {d:?}");
        }
        assert!(backoff_delay(base, cap, 30) <= cap);
    }

    #[test]
    fn thread_cpu_advances() {
        let a = thread_cpu_seconds();
        let mut x = 0u64;
        for i in 0..5_000_000u64 {
            x = x.wrapping_mul(31).wrapping_add(i);
        }
        std::hint::black_box(x);
        assert!(thread_cpu_seconds() > a);
    }

    #[test]
    fn local_runs_are_order_independent() {
        let template = PacketSpec {
            problem: "2 4 | 1;1;1;1".parse().unwrap(),
            initial_seed: 99,
            packet_index: 1,
            instances_per_packet: 10,
        };
        let one = run_local(&template, &[1, 2, 3, 4], 1).unwrap();
        let three = run_local(&template, &[1, 2, 3, 4], 3).unwrap();
        assert_eq!(one, three);
        assert_eq!(one.iter().map(|(i, _)| *i).collect::<Vec<_>>(), [1, 2, 3, 4]);
    }

    #[test]
    fn lease_parsing() {
        let lease = LeaseJson {
            problem_id: 1,
            problem: "2 4 | 1;1;1;1".into(),
            degree: 2,
            packet_index: 2,
            initial_seed: "12345".into(),
            instances_per_packet: 5,
            expected_seconds: 1,
            deadline: String::new(),
        };
        let spec = lease_spec(&lease).unwrap();
        assert_eq!(spec.initial_seed, 12345);
        assert!(lease_spec(&LeaseJson { degree: 3, ..lease.clone() }).is_err());
        assert!(lease_spec(&LeaseJson { initial_seed: "x".into(), ..lease }).is_err());
    }
}
