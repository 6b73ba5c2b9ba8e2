use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use splr_core::completion::complete_from_blocks;
use splr_core::linalg::RANK_TOL;
use splr_core::pipeline::prepare;
use splr_core::{admm_solve, build_extension, instances, AdmmParams, FactoredSolution};

fn to_binary(c: &mut Criterion) {
    let mut group = c.benchmark_group("to_binary");
    for nodes in [50, 200] {
        let (_, td) = instances::random_tree_decomposition(nodes, 4, 4 * nodes, 11);
        group.bench_with_input(BenchmarkId::from_parameter(nodes), &td, |b, td| b.iter(|| black_box(td.to_binary())));
    }
    group.finish();
}

fn extension(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_extension");
    for ell in [1, 3] {
        let (g, td) = instances::random_tree_decomposition(40, 4, 60, 5);
        let (p, _) = instances::random_splr(&g, ell, 10, 5).unwrap();
        let td = td.to_binary().root_binary().unwrap();
        group.bench_with_input(BenchmarkId::new("ell", ell), &(p, td), |b, (p, td)| b.iter(|| build_extension(black_box(p), td).unwrap()));
    }
    group.finish();
}

fn admm(c: &mut Criterion) {
    let p = instances::random_simex(20, 7).unwrap();
    let (_, bs) = prepare(&p, None).unwrap();
    let params = AdmmParams { max_iter: 20000, ..AdmmParams::default() };
    let mut group = c.benchmark_group("admm");
    group.sample_size(10);
    group.bench_function("simex20", |b| b.iter(|| admm_solve(black_box(&bs), &params).unwrap()));
    group.finish();
}

fn completion(c: &mut Criterion) {
    let (g, td) = instances::random_tree_decomposition(30, 5, 40, 3);
    let td = td.to_binary().root_binary().unwrap();
    let x = FactoredSolution::new(DMatrix::from_fn(g.n(), 4, |i, j| ((i * 5 + j * 3) as f64).sin()));
    let dense = x.to_dense();
    let blocks: BTreeMap<usize, _> = td.nodes().map(|t| (t, dense.select_rows(td.bag(t)).select_columns(td.bag(t)))).collect();
    c.bench_function("complete_from_blocks", |b| b.iter(|| complete_from_blocks(black_box(&td), &blocks, g.n(), RANK_TOL).unwrap()));
}

criterion_group!(benches, to_binary, extension, admm, completion);
criterion_main!(benches);
