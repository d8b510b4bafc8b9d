//! Schubert problems with secant flags along the rational normal curve.

mod calculus;
mod flags;
mod formulate;
mod instance;
mod partition;
mod problem;

use thiserror::Error;

pub use calculus::{
    enumerate_problems, hook_length_rectangle, intersection_number, lr_coefficient, multiply, pieri,
};
pub use flags::{build_flags, master_points, moment_curve_point, overlap_number, rank, SecantFlag, MASTER_SIZE};
pub use formulate::{
    chart_matrix, formulate, keep_var_order, solve_instance, solve_system, y_var, DegenerateReason,
    Outcome,
};
pub use instance::{make_instances, SecantInstance, INSTANCES_PER_CHOICE};
pub use partition::Partition;
pub use problem::SchubertProblem;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchubertError {
    #[error("invalid partition {0:?}")]
    InvalidPartition(String),
    #[error("invalid problem {0:?}")]
    InvalidProblem(String),
    #[error("G({k},{n}) is not a valid Grassmannian")]
    InvalidGrassmannian { k: usize, n: usize },
    #[error("partition {0} does not fit the rectangle")]
    PartitionOutsideRectangle(String),
    #[error("conditions have total codimension {got}, expected {expected}")]
    CodimensionMismatch { expected: usize, got: usize },
    #[error("expected {expected} blocks, got {got}")]
    BlockCountMismatch { expected: usize, got: usize },
    #[error("block has {got} points, expected {expected}")]
    BlockSizeMismatch { expected: usize, got: usize },
    #[error("the same point appears in two blocks")]
    DuplicatePoint,
    #[error("empty block")]
    EmptyBlock,
    #[error("flag lacks a subspace of dimension {0}")]
    MissingSubspace(usize),
    #[error("problem needs {needed} points but only {available} are available")]
    TooManyPoints { needed: usize, available: usize },
}
