//! End-to-end driver: decompose, extend, convert, solve and recover.

use crate::completion::{recover_low_rank, RecoverOptions, Recovery};
use crate::conversion::{convert, BlockSdp};
use crate::error::Result;
use crate::extension::{build_extension, ExtendedSdp};
use crate::graph::{heuristic_decomposition, Graph, TreeDecomposition};
use crate::model::SplrSdp;
use crate::solver::{admm_solve, AdmmParams, BlockSolution};

/// Min-degree clique tree made binary and rooted.
pub fn default_decomposition(g: &Graph) -> Result<TreeDecomposition> {
    heuristic_decomposition(g).to_binary().root_binary()
}

/// Extension and block form; `td` defaults to [`default_decomposition`].
/// Unrooted or non-binary decompositions are made binary and rooted first.
pub fn prepare(p: &SplrSdp, td: Option<&TreeDecomposition>) -> Result<(ExtendedSdp, BlockSdp)> {
    let td = match td {
        Some(t) if t.is_rooted() => t.clone(),
        Some(t) => t.to_binary().root_binary()?,
        None => default_decomposition(&p.pattern)?,
    };
    let ext = build_extension(p, &td)?;
    let bs = convert(&ext)?;
    Ok((ext, bs))
}

pub struct PipelineRun {
    pub extension: ExtendedSdp,
    pub blocks: BlockSdp,
    pub solution: BlockSolution,
    pub recovery: Recovery,
}

pub fn run_pipeline(p: &SplrSdp, td: Option<&TreeDecomposition>, params: &AdmmParams, opts: &RecoverOptions) -> Result<PipelineRun> {
    let (extension, blocks) = prepare(p, td)?;
    let solution = admm_solve(&blocks, params)?;
    let recovery = recover_low_rank(&extension, &blocks, &solution.blocks, opts)?;
    Ok(PipelineRun { extension, blocks, solution, recovery })
}
