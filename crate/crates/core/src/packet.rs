//! Deterministic regeneration and solving of one work packet.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::GroebnerConfig;
use crate::prng::{derive_packet_state, PrngError};
use crate::schubert::{
    build_flags, formulate, make_instances, solve_system, Outcome, SchubertError, SchubertProblem,
    INSTANCES_PER_CHOICE,
};
use crate::table::FrequencyTable;

/// Upper bound on systems held in memory at once.
pub const MAX_BATCH: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PacketError {
    #[error("instances per packet must be a positive multiple of {INSTANCES_PER_CHOICE}, got {0}")]
    InstanceCount(u64),
    #[error(transparent)]
    Prng(#[from] PrngError),
    #[error(transparent)]
    Schubert(#[from] SchubertError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub problem: SchubertProblem,
    pub initial_seed: u64,
    pub packet_index: u64,
    pub instances_per_packet: u64,
}

impl PacketSpec {
    pub fn t_choices(&self) -> Result<usize, PacketError> {
        let per = INSTANCES_PER_CHOICE as u64;
        if self.instances_per_packet == 0 || !self.instances_per_packet.is_multiple_of(per) {
            return Err(PacketError::InstanceCount(self.instances_per_packet));
        }
        Ok((self.instances_per_packet / per) as usize)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketOutcome {
    pub cells: FrequencyTable,
    pub degenerate_count: u64,
}

impl PacketOutcome {
    pub fn instances(&self) -> u64 {
        self.cells.total() + self.degenerate_count
    }
}

/// Regenerates the packet's instances from `(initial_seed, packet_index)` and
/// solves them in batches of at most [`MAX_BATCH`] systems.
pub fn run_packet(spec: &PacketSpec) -> Result<PacketOutcome, PacketError> {
    run_packet_with(spec, &GroebnerConfig::default())
}

pub fn run_packet_with(spec: &PacketSpec, config: &GroebnerConfig) -> Result<PacketOutcome, PacketError> {
    let choices = spec.t_choices()?;
    let mut state = derive_packet_state(spec.initial_seed, spec.packet_index)?;
    let instances = make_instances(&spec.problem, &mut state, choices)?;
    let mut out = PacketOutcome::default();
    for batch in instances.chunks(MAX_BATCH) {
        let systems = batch
            .iter()
            .map(|inst| {
                let flags = build_flags(&spec.problem, &inst.blocks_by_condition())?;
                Ok((formulate(&spec.problem, &flags)?, inst.overlap as u64))
            })
            .collect::<Result<Vec<_>, SchubertError>>()?;
        for (system, overlap) in systems {
            match solve_system(&spec.problem, &system, config) {
                Outcome::Solved { real_count, .. } => out.cells.add(real_count, overlap, 1),
                Outcome::Degenerate(_) => out.degenerate_count += 1,
            }
        }
    }
    Ok(out)
}

/// The submission payload in a fixed textual form. CPU time is excluded so
/// that two runs of the same packet produce identical bytes.
pub fn canonical_payload(spec: &PacketSpec, outcome: &PacketOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "problem {}", spec.problem);
    let _ = writeln!(s, "initial_seed {}", spec.initial_seed);
    let _ = writeln!(s, "packet_index {}", spec.packet_index);
    let _ = writeln!(s, "instances {}", outcome.instances());
    let _ = writeln!(s, "degenerate {}", outcome.degenerate_count);
    for c in outcome.cells.cells() {
        let _ = writeln!(s, "cell {} {} {}", c.real, c.overlap, c.count);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(problem: &str, index: u64, instances: u64) -> PacketSpec {
        PacketSpec {
            problem: problem.parse().unwrap(),
            initial_seed: 20_091_231,
            packet_index: index,
            instances_per_packet: instances,
        }
    }

    #[test]
    fn four_lines_packet() {
        let s = spec("2 4 | 1;1;1;1", 1, 50);
        let out = run_packet(&s).unwrap();
        assert_eq!(out.instances(), 50);
        for c in out.cells.cells() {
            assert!(c.real == 0 || c.real == 2);
        }
        assert!(out.cells.get(2, 0) >= 10 - out.degenerate_count);
        assert!(out.cells.validate(2).is_ok());
    }

    #[test]
    fn disjoint_instances_are_all_real() {
        let s = spec("2 4 | 1;1;1;1", 3, 50);
        let mut state = derive_packet_state(s.initial_seed, s.packet_index).unwrap();
        let inst = make_instances(&s.problem, &mut state, 10).unwrap();
        for i in inst.iter().step_by(INSTANCES_PER_CHOICE) {
            let o = i.solve(&s.problem, &GroebnerConfig::default()).unwrap();
            assert_eq!(o.real_count(), Some(2));
        }
    }

    #[test]
    fn odd_degree_parity() {
        let s = spec("2 5 | 2;1;1;1;1", 2, 10);
        let out = run_packet(&s).unwrap();
        assert_eq!(out.instances(), 10);
        assert!(out.cells.cells().iter().all(|c| c.real % 2 == 1));
    }

    #[test]
    fn replay_is_byte_identical() {
        let s = spec("2 4 | 1;1;1;1", 4, 25);
        let a = canonical_payload(&s, &run_packet(&s).unwrap());
        let b = canonical_payload(&s, &run_packet(&s).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with("problem 2 4 | 1;1;1;1\ninitial_seed 20091231\npacket_index 4\ninstances 25\n"));
    }

    #[test]
    fn rejects_bad_counts() {
        assert_eq!(run_packet(&spec("2 4 | 1;1;1;1", 1, 7)), Err(PacketError::InstanceCount(7)));
        assert_eq!(run_packet(&spec("2 4 | 1;1;1;1", 1, 0)), Err(PacketError::InstanceCount(0)));
        assert!(matches!(run_packet(&spec("2 4 | 1;1;1;1", 0, 5)), Err(PacketError::Prng(_))));
    }
}
