use serde::{Deserialize, Serialize};

use super::flags::{master_points, overlap_number, MASTER_SIZE};
use super::formulate::{solve_instance, Outcome};
use super::{SchubertError, SchubertProblem};
use crate::algebra::{BigRational, GroebnerConfig};
use crate::prng::SeedState;

/// Instances generated from each choice of `T`.
pub const INSTANCES_PER_CHOICE: usize = 5;

/// One secant-flag instance of a Schubert problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecantInstance {
    /// Master-point indices of `T`, ascending.
    pub points: Vec<usize>,
    /// `condition_order[i]` is the condition that block `i` serves.
    pub condition_order: Vec<usize>,
    /// Master-point indices per block, each ascending.
    pub blocks: Vec<Vec<usize>>,
    pub overlap: usize,
}

impl SecantInstance {
    fn new(points: &[usize], condition_order: &[usize], assignment: &[usize], sizes: &[usize]) -> Self {
        let mut blocks = Vec::with_capacity(condition_order.len());
        let mut at = 0;
        for &cond in condition_order {
            let mut b = assignment[at..at + sizes[cond]].to_vec();
            b.sort_unstable();
            at += sizes[cond];
            blocks.push(b);
        }
        let overlap = overlap_number(&blocks).expect("blocks are nonempty");
        SecantInstance {
            points: points.to_vec(),
            condition_order: condition_order.to_vec(),
            blocks,
            overlap,
        }
    }

    /// Curve parameters per condition, in the problem's condition order.
    pub fn blocks_by_condition(&self) -> Vec<Vec<BigRational>> {
        let master = master_points();
        let mut out = vec![Vec::new(); self.blocks.len()];
        for (block, &cond) in self.blocks.iter().zip(&self.condition_order) {
            out[cond] = block.iter().map(|&i| master[i].clone()).collect();
        }
        out
    }

    pub fn solve(&self, problem: &SchubertProblem, config: &GroebnerConfig) -> Result<Outcome, SchubertError> {
        solve_instance(problem, &self.blocks_by_condition(), config)
    }
}

/// `5 * choices` instances, regenerated from `state` in a fixed draw order.
///
/// For each choice of `T`: draw `T` as a subset of the master set, shuffle
/// the condition order, emit the disjoint instance (sorted `T` cut into
/// consecutive blocks), then four instances whose blocks come from
/// independent shuffles of `T`.
pub fn make_instances(
    problem: &SchubertProblem,
    state: &mut SeedState,
    choices: usize,
) -> Result<Vec<SecantInstance>, SchubertError> {
    let sizes = problem.points_per_condition();
    let m = problem.total_points();
    let mut out = Vec::with_capacity(choices * INSTANCES_PER_CHOICE);
    for _ in 0..choices {
        let mut t = state
            .sample_subset(m, MASTER_SIZE)
            .map_err(|_| SchubertError::TooManyPoints { needed: m, available: MASTER_SIZE })?;
        t.sort_unstable();
        let mut condition_order: Vec<usize> = (0..sizes.len()).collect();
        state.shuffle(&mut condition_order);
        out.push(SecantInstance::new(&t, &condition_order, &t, &sizes));
        for _ in 1..INSTANCES_PER_CHOICE {
            let mut assignment = t.clone();
            state.shuffle(&mut assignment);
            out.push(SecantInstance::new(&t, &condition_order, &assignment, &sizes));
        }
    }
    Ok(out)
}
