use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use sparse_radon::decomposition::{cz_decompose, dyadic_maximal};
use sparse_radon::dyadic::build_grid;
use sparse_radon::geometry::{cc_distance, models};
use sparse_radon::operators::{split_kernel, CZKernel, Piece};
use sparse_radon::sparse::{random_block_pair, starting_cube, SelectParams, Selector, WhitneyRule};
use sparse_radon::weights::{a_p_constant, Weight};
use sparse_radon_bench::{parabola_cloud, parabola_grid, parabola_operator, smooth};

fn grids(c: &mut Criterion) {
    let mut group = c.benchmark_group("grid");
    group.sample_size(10);
    for n1 in [16, 32] {
        let sht = parabola_cloud(n1);
        group.bench_with_input(BenchmarkId::new("build", sht.len()), &sht, |b, s| b.iter(|| build_grid(s.clone(), 0.5, 0).unwrap()));
        let g = build_grid(sht.clone(), 0.5, 0).unwrap();
        group.bench_with_input(BenchmarkId::new("verify", sht.len()), &g, |b, g| b.iter(|| g.verify()));
    }
    group.finish();
}

fn decompositions(c: &mut Criterion) {
    let g = parabola_grid(32);
    let f = smooth(g.sht());
    c.bench_function("maximal/16384", |b| b.iter(|| dyadic_maximal(&g, black_box(&f), 1.0).unwrap()));
    c.bench_function("cz/16384", |b| b.iter(|| cz_decompose(&g, black_box(&f), 1.0).unwrap()));
}

fn kernels(c: &mut Criterion) {
    c.bench_function("ladder/hilbert/J=10", |b| b.iter(|| split_kernel(CZKernel::hilbert(0.25), 0.25, 10).unwrap()));
}

fn operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator");
    group.sample_size(10);
    let sht = parabola_cloud(16);
    let op = parabola_operator(sht.clone());
    let f = smooth(&sht);
    let piece = Piece::centered_bump(0.25);
    group.bench_function("single_scale/4096", |b| b.iter(|| op.apply_single_scale(&piece, black_box(&f)).unwrap()));
    group.bench_function("full/4096", |b| b.iter(|| op.apply_full(black_box(&f)).unwrap()));
    group.finish();
}

fn selection(c: &mut Criterion) {
    let mut group = c.benchmark_group("sparse");
    group.sample_size(10);
    let g = parabola_grid(32);
    let op = parabola_operator(g.sht_arc().clone());
    let params = SelectParams { r: 2.0, s: 2.0, sigma: 0.5, whitney: WhitneyRule::Constrained };
    let sel = Selector::new(&op, &g, params).unwrap();
    let q0 = starting_cube(&g, g.sht().cloud().nearest(&[0.0, 0.0]), 1).unwrap();
    let (f1, f2) = random_block_pair(&g, q0, 16, 0);
    group.bench_function("select/16384", |b| b.iter(|| sel.select(q0, &f1, &f2).unwrap()));
    group.finish();
}

fn weights(c: &mut Criterion) {
    let g = parabola_grid(32);
    let w = Weight::power(g.sht(), 0, 0.5).unwrap();
    c.bench_function("a_p/16384", |b| b.iter(|| a_p_constant(&w, 1.6, &g).unwrap()));
}

fn geometry(c: &mut Criterion) {
    let sys = models::grushin_system();
    c.bench_function("cc_distance/grushin", |b| b.iter(|| cc_distance(&sys, black_box(&[0.1, -0.2]), black_box(&[0.4, 0.3]), 1e-3).unwrap()));
}

criterion_group!(benches, grids, decompositions, kernels, operators, selection, weights, geometry);
criterion_main!(benches);
