//! JSON bodies shared by the coordinator, the worker and the dashboard.
//!
//! Seeds are sent as decimal strings so that clients without 64-bit
//! integers read them exactly. Timestamps are UTC ISO-8601.

use chrono::{DateTime, Utc};
use secant_core::table::Cell;
use serde::{Deserialize, Serialize};

use crate::store::{PacketLease, ProblemRow, RequestRow, ResultRow, RunningRow, StoreStatus, Submission};

pub fn iso8601(epoch: i64) -> String {
    DateTime::<Utc>::from_timestamp(epoch, 0)
        .unwrap_or_default()
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimRequest {
    pub worker_id: String,
    pub max_seconds: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaseJson {
    pub problem_id: u64,
    pub problem: String,
    pub degree: u64,
    pub packet_index: u64,
    pub initial_seed: String,
    pub instances_per_packet: u64,
    pub expected_seconds: u64,
    pub deadline: String,
}

impl From<&PacketLease> for LeaseJson {
    fn from(l: &PacketLease) -> Self {
        LeaseJson {
            problem_id: l.problem_id,
            problem: l.problem.to_string(),
            degree: l.problem.degree,
            packet_index: l.packet_index,
            initial_seed: l.initial_seed.to_string(),
            instances_per_packet: l.instances_per_packet,
            expected_seconds: l.expected_seconds,
            deadline: iso8601(l.deadline),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellJson {
    pub real_count: u64,
    pub overlap: u64,
    pub count: u64,
}

impl From<Cell> for CellJson {
    fn from(c: Cell) -> Self {
        CellJson { real_count: c.real, overlap: c.overlap, count: c.count }
    }
}

impl From<CellJson> for Cell {
    fn from(c: CellJson) -> Self {
        Cell { real: c.real_count, overlap: c.overlap, count: c.count }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRequest {
    pub worker_id: String,
    pub problem_id: u64,
    pub packet_index: u64,
    pub cells: Vec<CellJson>,
    pub degenerate_count: u64,
    pub cpu_seconds: f64,
}

impl From<ResultRequest> for Submission {
    fn from(r: ResultRequest) -> Self {
        Submission {
            worker_id: r.worker_id,
            problem_id: r.problem_id,
            packet_index: r.packet_index,
            cells: r.cells.into_iter().map(Cell::from).collect(),
            degenerate_count: r.degenerate_count,
            cpu_seconds: r.cpu_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultResponse {
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorJson {
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestPackets {
    pub additional_packets: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub id: u64,
    pub problem: String,
    pub k: usize,
    pub n: usize,
    pub conditions: Vec<String>,
    pub degree: u64,
    pub initial_seed: String,
    pub instances_per_packet: u64,
    pub expected_seconds: u64,
    pub packets_requested: u64,
    pub packets_started: u64,
    pub packets_completed: u64,
    pub cpu_seconds: f64,
    pub ghz_seconds: f64,
}

impl ProblemSummary {
    pub fn new(p: &ProblemRow, r: &RequestRow, res: &ResultRow, nominal_ghz: f64) -> Self {
        ProblemSummary {
            id: p.id,
            problem: p.problem.to_string(),
            k: p.problem.k,
            n: p.problem.n,
            conditions: p.problem.conditions.iter().map(|c| c.to_string()).collect(),
            degree: p.problem.degree,
            initial_seed: p.initial_seed.to_string(),
            instances_per_packet: p.instances_per_packet,
            expected_seconds: p.expected_seconds,
            packets_requested: r.packets_requested,
            packets_started: r.packets_started,
            packets_completed: r.packets_completed,
            cpu_seconds: res.cpu_seconds(),
            ghz_seconds: res.cpu_seconds() * nominal_ghz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BorderEntry {
    pub overlap: u64,
    pub min_real: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDetail {
    #[serde(flatten)]
    pub summary: ProblemSummary,
    pub cells: Vec<CellJson>,
    pub degenerate_count: u64,
    pub inner_border: Vec<BorderEntry>,
}

impl ProblemDetail {
    pub fn new(p: &ProblemRow, r: &RequestRow, res: &ResultRow, nominal_ghz: f64) -> Self {
        ProblemDetail {
            summary: ProblemSummary::new(p, r, res, nominal_ghz),
            cells: res.cells.cells().into_iter().map(CellJson::from).collect(),
            degenerate_count: res.degenerate_count,
            inner_border: res
                .cells
                .inner_border()
                .into_iter()
                .map(|(overlap, min_real)| BorderEntry { overlap, min_real })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaseStatus {
    pub problem_id: u64,
    pub packet_index: u64,
    pub worker_id: String,
    pub started_at: String,
    pub deadline: String,
    pub overdue: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusJson {
    pub now: String,
    pub queue_depth: u64,
    pub running: Vec<LeaseStatus>,
    pub overdue: u64,
    pub reclaimed: u64,
    pub superseded: u64,
    pub duplicate: u64,
}

impl From<&StoreStatus> for StatusJson {
    fn from(s: &StoreStatus) -> Self {
        let lease = |r: &RunningRow| LeaseStatus {
            problem_id: r.problem_id,
            packet_index: r.packet_index,
            worker_id: r.worker_id.clone(),
            started_at: iso8601(r.started_at),
            deadline: iso8601(r.expected_completion),
            overdue: r.expected_completion < s.now,
        };
        StatusJson {
            now: iso8601(s.now),
            queue_depth: s.queue_depth,
            running: s.running.iter().map(lease).collect(),
            overdue: s.overdue,
            reclaimed: s.events.reclaimed,
            superseded: s.events.superseded,
            duplicate: s.events.duplicate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iso_format() {
        assert_eq!(iso8601(0), "1970-01-01T00:00:00Z");
        assert_eq!(iso8601(1_262_304_000), "2010-01-01T00:00:00Z");
    }

    #[test]
    fn seed_travels_as_string() {
        let lease = PacketLease {
            problem_id: 1,
            problem: "2 4 | 1;1;1;1".parse().unwrap(),
            packet_index: 3,
            initial_seed: u64::MAX,
            instances_per_packet: 50,
            expected_seconds: 2,
            deadline: 0,
        };
        let v = serde_json::to_value(LeaseJson::from(&lease)).unwrap();
        assert_eq!(v["initial_seed"], "18446744073709551615");
        assert_eq!(v["degree"], 2);
        assert_eq!(v["problem"], "2 4 | 1;1;1;1");
    }
}
