//! Exact computational kernel for secant-flag experiments on Grassmannians.
//!
//! The crate is organised bottom-up:
//!
//! - [`prng`]: the splitmix64 generator and the sampling disciplines built on it.
//! - [`algebra`]: rationals, sparse multivariate polynomials, Buchberger, Sturm sequences.
//! - [`schubert`]: partitions, intersection numbers, secant flags, instance formulation.
//! - [`packet`]: deterministic regeneration and solving of one work packet.
//! - [`table`]: frequency tables of real solutions against overlap number.

pub mod algebra;
pub mod packet;
pub mod prng;
pub mod schubert;
pub mod table;

pub use algebra::{BigRational, MonomialOrder, MultiPoly, UniPoly};
pub use packet::{canonical_payload, run_packet, PacketOutcome, PacketSpec};
pub use prng::{ProblemSeed, SeedState};
pub use schubert::{Partition, SchubertProblem, SecantInstance};
pub use table::FrequencyTable;
