use std::path::Path;
use std::process::ExitCode;

use log::{info, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use splr_core::completion::{bp_bound, phi_upper, rank_bound};
use splr_core::extension::verify_extension;
use splr_core::graph::heuristic_decomposition;
use splr_core::solver::dense_reference_solve;
use splr_core::{
    admm_solve, build_extension, convert, instances, recover_low_rank, sdpa, AdmmParams, BlockSolution, Error, ExtendedSdp, Graph, RecoverOptions,
    Recovery, RecoveryMode, Result, SolveStats, SplrSdp, TreeDecomposition,
};

use crate::io::{read_json, read_text, write_json, write_text, SCHEMA_VERSION};
use crate::{Cli, Command, GenKind, Global, Mode};

const VERIFY_TOL: f64 = 1e-9;

/// Default solver tolerance when no parameter file is given. Residuals are
/// relative, so this keeps absolute violations near 1e-7 on small instances.
const SOLVE_TOL: f64 = 1e-10;

pub fn run(cli: &Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen { kind, out } => gen(g, kind, out),
        Command::Convert { input, out, report, pattern, rank_tol, decomposition } => {
            let p = match pattern {
                Some(pat) => {
                    let graph = Graph::parse_text(&read_text(pat)?)?;
                    sdpa::import_sdpa(&read_text(input)?, &graph, *rank_tol)?
                }
                None => read_json(input)?,
            };
            let td = match decomposition {
                Some(path) => Some(read_json::<TreeDecomposition>(path)?),
                None => None,
            };
            let ext = extend(&p, td, g.path_mode)?;
            write_json(out, &ext)?;
            if let Some(path) = report {
                write_json(path, &ConvertReport::new(&ext, g.path_mode))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve { input, params, out, stats } => {
            let ext: ExtendedSdp = read_json(input)?;
            let params = solver_params(g, params.as_deref())?;
            let bs = convert(&ext)?;
            info!("{} blocks, {} constraints", bs.blocks.len(), bs.constraints.len());
            let result = admm_solve(&bs, &params);
            let run_stats = match &result {
                Ok(sol) => Some(sol.stats.clone()),
                Err(Error::NotConverged { stats } | Error::Diverged { stats }) => Some((**stats).clone()),
                Err(_) => None,
            };
            if let (Some(path), Some(s)) = (stats, run_stats) {
                write_json(path, &StatsDoc { schema_version: SCHEMA_VERSION, stats: s })?;
            }
            let solution = result?;
            write_json(out, &SolveDoc { schema_version: SCHEMA_VERSION, extension: ext, solution })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Recover { extended_solution, problem, out, mode } => {
            let doc: SolveDoc = read_json(extended_solution)?;
            let ext = match problem {
                Some(path) => read_json(path)?,
                None => doc.extension,
            };
            let mode = recovery_mode(*mode, g.path_mode, &ext);
            let bs = convert(&ext)?;
            let opts = RecoverOptions { mode, ..RecoverOptions::default() };
            let recovery = recover_low_rank(&ext, &bs, &doc.solution.blocks, &opts)?;
            if recovery.rank > recovery.bound {
                warn!("recovered rank {} exceeds the bound {}", recovery.rank, recovery.bound);
            }
            write_json(out, &RecoverDoc { schema_version: SCHEMA_VERSION, mode, within_bound: recovery.rank <= recovery.bound, recovery })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { problem, extension, samples, out } => {
            let p: SplrSdp = read_json(problem)?;
            let ext = match extension {
                Some(path) => read_json(path)?,
                None => extend(&p, None, g.path_mode)?,
            };
            let report = verify_extension(&p, &ext, *samples, g.tol.unwrap_or(VERIFY_TOL), g.seed.unwrap_or(0))?;
            let passed = report.passed;
            write_json(out, &VersionedReport { schema_version: SCHEMA_VERSION, report })?;
            Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Export { input, out } => {
            let p: SplrSdp = read_json(input)?;
            write_text(out, &sdpa::write_sdpa(&p)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { input, out, dense_check } => {
            let p: SplrSdp = read_json(input)?;
            let params = solver_params(g, None)?;
            let doc = full_report(&p, &params, g.path_mode, *dense_check)?;
            write_json(out, &doc)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn gen(g: &Global, kind: &GenKind, out: &Path) -> Result<ExitCode> {
    let seed = g.seed.unwrap_or(0);
    let p = match kind {
        GenKind::Simex { n, a, b } => match a {
            Some(a) => {
                let l1: f64 = a.iter().map(|x| x.abs()).sum();
                instances::gen_simex(a.len(), a, b.unwrap_or(l1 * l1 / 2.0))?
            }
            None => {
                let mut p = instances::random_simex(*n, seed)?;
                if let Some(b) = b {
                    let last = p.constraints.last_mut().expect("simex has a low-rank row");
                    (last.lower, last.upper) = (Some(*b), Some(*b));
                }
                p
            }
        },
        GenKind::Minbisect { graph, n } => {
            let graph = match graph {
                Some(path) => Graph::parse_text(&read_text(path)?)?,
                None => Graph::path(*n),
            };
            instances::gen_min_bisection(&graph)?
        }
        GenKind::Bqp { n, rows } => instances::random_bqp(*n, *rows, seed)?,
        GenKind::Phi { ell } => {
            write_json(out, &SliceDoc::new(*ell)?)?;
            return Ok(ExitCode::SUCCESS);
        }
        GenKind::LbSmall { ell } => instances::gen_lb_small(*ell)?,
        GenKind::LbPadded { ell, sigma, n_hat } => {
            let base = instances::gen_lb_small(*ell)?;
            let n_hat = n_hat.unwrap_or(base.n + sigma);
            instances::gen_lb_padded(&base, *sigma, n_hat)?
        }
        GenKind::LbTree { ell } => instances::gen_lb_tree(*ell, None)?,
    };
    write_json(out, &p)?;
    Ok(ExitCode::SUCCESS)
}

/// Extension on `td` (or the min-degree heuristic), made binary and rooted.
fn extend(p: &SplrSdp, td: Option<TreeDecomposition>, path_mode: bool) -> Result<ExtendedSdp> {
    let td = td.unwrap_or_else(|| heuristic_decomposition(&p.pattern));
    if path_mode && !td.is_path() {
        warn!("decomposition is not a path; falling back to the tree pipeline");
    }
    let td = td.to_binary().root_binary()?;
    build_extension(p, &td)
}

fn recovery_mode(explicit: Option<Mode>, path_mode: bool, ext: &ExtendedSdp) -> RecoveryMode {
    match explicit {
        Some(Mode::Path) => {
            if !ext.is_path() {
                warn!("path recovery on a branching decomposition skips block rank reduction");
            }
            RecoveryMode::Path
        }
        Some(Mode::Tree) => RecoveryMode::Tree,
        None if path_mode && ext.is_path() => RecoveryMode::Path,
        None => RecoveryMode::Tree,
    }
}

fn solver_params(g: &Global, file: Option<&Path>) -> Result<AdmmParams> {
    let mut p: AdmmParams = match file {
        Some(path) => read_json(path)?,
        None => AdmmParams { tol_primal: SOLVE_TOL, tol_dual: SOLVE_TOL, ..AdmmParams::default() },
    };
    if let Some(t) = g.tol {
        p.tol_primal = t;
        p.tol_dual = t;
    }
    if let Some(m) = g.max_iter {
        p.max_iter = m;
    }
    if let Some(r) = g.rho {
        p.rho = r;
    }
    if let Some(s) = g.seed {
        p.seed = s;
    }
    p.check()?;
    Ok(p)
}

#[derive(Serialize, Deserialize)]
struct SolveDoc {
    schema_version: u32,
    extension: ExtendedSdp,
    solution: BlockSolution,
}

#[derive(Serialize)]
struct StatsDoc {
    schema_version: u32,
    #[serde(flatten)]
    stats: SolveStats,
}

#[derive(Serialize)]
struct VersionedReport<T> {
    schema_version: u32,
    #[serde(flatten)]
    report: T,
}

#[derive(Serialize)]
struct RecoverDoc {
    schema_version: u32,
    mode: RecoveryMode,
    within_bound: bool,
    #[serde(flatten)]
    recovery: Recovery,
}

#[derive(Serialize)]
struct ConvertReport {
    schema_version: u32,
    n: usize,
    n_hat: usize,
    ell: usize,
    k: usize,
    m: usize,
    width_before: usize,
    width_after: usize,
    /// `width_before + 3ℓ`, the width guarantee for tree decompositions.
    bound_3l: usize,
    /// `width_before + 2ℓ`, the guarantee for path decompositions.
    bound_2l: usize,
    is_path: bool,
    path_mode: bool,
    rank_bound: usize,
}

impl ConvertReport {
    fn new(ext: &ExtendedSdp, path_mode: bool) -> Self {
        let (w, ell) = (ext.width_before(), ext.ell());
        let mode = if path_mode && ext.is_path() { RecoveryMode::Path } else { RecoveryMode::Tree };
        ConvertReport {
            schema_version: SCHEMA_VERSION,
            n: ext.n(),
            n_hat: ext.n_hat(),
            ell,
            k: ext.k(),
            m: ext.problem.m(),
            width_before: w,
            width_after: ext.width_after(),
            bound_3l: w + 3 * ell,
            bound_2l: w + 2 * ell,
            is_path: ext.is_path(),
            path_mode,
            rank_bound: rank_bound(ext, mode),
        }
    }
}

#[derive(Serialize)]
struct SliceRow {
    matrix: Vec<Vec<f64>>,
    rhs: f64,
}

#[derive(Serialize)]
struct SliceDoc {
    schema_version: u32,
    ell: usize,
    dim: usize,
    constraints: Vec<SliceRow>,
    /// Factor of the feasible start point.
    start: Vec<Vec<f64>>,
    bp_bound: usize,
    phi_upper: usize,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl SliceDoc {
    fn new(ell: usize) -> Result<Self> {
        let s = instances::gen_phi_witness(ell)?;
        Ok(SliceDoc {
            schema_version: SCHEMA_VERSION,
            ell,
            dim: s.dim,
            bp_bound: bp_bound(s.constraints.len()),
            phi_upper: phi_upper(ell),
            constraints: s.constraints.iter().map(|(m, rhs)| SliceRow { matrix: rows(m), rhs: *rhs }).collect(),
            start: rows(&s.start.factor),
        })
    }
}

#[derive(Serialize)]
struct FullReport {
    schema_version: u32,
    n: usize,
    m: usize,
    ell: usize,
    edges: usize,
    conversion: ConvertReport,
    solve: SolveStats,
    recovery: RecoverySummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    dense: Option<DenseCheck>,
}

#[derive(Serialize)]
struct RecoverySummary {
    mode: RecoveryMode,
    rank: usize,
    bound: usize,
    within_bound: bool,
    objective: f64,
    max_violation: f64,
    block_ranks: Vec<usize>,
}

#[derive(Serialize)]
struct DenseCheck {
    objective: f64,
    iterations: usize,
    relative_gap: f64,
}

fn full_report(p: &SplrSdp, params: &AdmmParams, path_mode: bool, dense_check: bool) -> Result<FullReport> {
    let ext = extend(p, None, path_mode)?;
    let bs = convert(&ext)?;
    let sol = admm_solve(&bs, params)?;
    let mode = recovery_mode(None, path_mode, &ext);
    let rec = recover_low_rank(&ext, &bs, &sol.blocks, &RecoverOptions { mode, ..RecoverOptions::default() })?;
    let dense = if dense_check {
        let (_, stats) = dense_reference_solve(p, params)?;
        let gap = (stats.objective - rec.objective).abs() / (1.0 + stats.objective.abs());
        Some(DenseCheck { objective: stats.objective, iterations: stats.iterations, relative_gap: gap })
    } else {
        None
    };
    Ok(FullReport {
        schema_version: SCHEMA_VERSION,
        n: p.n,
        m: p.m(),
        ell: p.ell(),
        edges: p.pattern.edge_count(),
        conversion: ConvertReport::new(&ext, path_mode),
        solve: sol.stats,
        recovery: RecoverySummary {
            mode,
            rank: rec.rank,
            bound: rec.bound,
            within_bound: rec.rank <= rec.bound,
            objective: rec.objective,
            max_violation: rec.max_violation,
            block_ranks: rec.block_ranks,
        },
        dense,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn global() -> Global {
        Global { tol: None, max_iter: None, rho: None, seed: None, threads: None, path_mode: false }
    }

    #[test]
    fn flags_override_file_and_defaults() {
        let p = solver_params(&global(), None).unwrap();
        assert_eq!((p.tol_primal, p.tol_dual), (SOLVE_TOL, SOLVE_TOL));
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("params.json");
        std::fs::write(&f, r#"{"rho": 4.0, "max_iter": 7}"#).unwrap();
        let g = Global { max_iter: Some(9), ..global() };
        let p = solver_params(&g, Some(&f)).unwrap();
        assert_eq!((p.rho, p.max_iter), (4.0, 9));
        assert_eq!(p.tol_primal, AdmmParams::default().tol_primal);
        assert!(solver_params(&Global { rho: Some(-1.0), ..global() }, None).is_err());
    }
}
