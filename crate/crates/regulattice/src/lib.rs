//! Regular block partitions of real matrices and weighted graphs.
//!
//! The library refines a balanced block partition until the density of
//! every block is stable under passing to large subsets, in the sense of
//! a deviation threshold epsilon measured on the mass-normalized matrix.
//! Progress is driven by a cutoff potential: each refinement step splits
//! witnessed irregular blocks and the potential rises by a guaranteed
//! amount, so the process terminates in a bounded number of steps.

pub mod driver;
pub mod error;
pub mod io;
pub mod matrix;
pub mod modes;
pub mod partition;
pub mod potential;
pub mod refine;
pub mod regularity;
pub mod report;
pub mod seeding;

pub use driver::{
    default_iteration_cap, graph_regular_partition, regular_partition, simultaneous_partition,
    symmetric_regular_partition, verify_partition, CensusSummary, GraphRunResult, PairVerdict,
    RunConfig, RunResult, RunStatus, VerificationReport,
};
pub use error::{Error, Result};
pub use io::{load_matrix, MatrixFormat};
pub use matrix::{RealMatrix, Subset};
pub use modes::{find_mode, modes, Mode, ModeOutcome, PairSummary};
pub use partition::{
    averaged_matrix, common_refinement, is_refinement, BlockPartition, Partition,
};
pub use potential::{phi_block, phi_partition, phi_scalar, Cutoff, PotentialConfig};
pub use refine::{refinement_step, symmetric_refinement_step, RefineOutcome, StepParams};
pub use regularity::{
    check_block, exact_check, gain_split, heuristic_witness_search, shrink_witness, CheckMethod,
    GainSplit, RegularityParams, RegularityStatus, RegularityVerdict, Witness,
};
pub use report::{build_report, from_json, to_json, write_trajectory, RunReport};
