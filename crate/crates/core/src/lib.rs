//! Sparse extension, chordal conversion and low-rank recovery for SDPs whose
//! data matrices are sparse plus low rank.

pub mod completion;
pub mod conversion;
pub mod error;
pub mod extension;
pub mod graph;
pub mod instances;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod sdpa;
mod serde_util;
pub mod solver;

pub use error::{Error, Result};
pub use graph::{Graph, TreeDecomposition};
pub use completion::{recover_low_rank, RecoverOptions, Recovery, RecoveryMode};
pub use conversion::{convert, BlockSdp};
pub use extension::{build_extension, extend_solution, ExtendedSdp};
pub use model::{Constraint, FactoredSolution, SparseSymMatrix, SplrMatrix, SplrSdp};
pub use solver::{admm_solve, dense_reference_solve, AdmmParams, BlockSolution, SolveStats};
