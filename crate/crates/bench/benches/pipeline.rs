use std::collections::BTreeSet;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ducut_bench::{corpus_sources, largest_source};
use ducut_core::ast::{parse_source, unparse};
use ducut_core::dataflow::{check_du_consistency, compute_du_chains, du_closure};
use ducut_core::reducer::{ddmin, max_level, propose_units};

fn frontend(c: &mut Criterion) {
    let mut g = c.benchmark_group("frontend");
    for (name, src) in corpus_sources() {
        g.bench_with_input(BenchmarkId::new("parse", &name), &src, |b, s| {
            b.iter(|| parse_source(black_box(s)).unwrap())
        });
        let ast = parse_source(&src).unwrap();
        g.bench_with_input(BenchmarkId::new("unparse", &name), &ast, |b, a| {
            b.iter(|| unparse(black_box(a)).unwrap())
        });
    }
    g.finish();
}

fn dataflow(c: &mut Criterion) {
    let (name, src) = largest_source();
    let ast = parse_source(&src).unwrap();
    let mut g = c.benchmark_group("dataflow");
    g.bench_function(BenchmarkId::new("du_chains", &name), |b| {
        b.iter(|| compute_du_chains(black_box(&ast)).unwrap())
    });
    g.bench_function(BenchmarkId::new("consistency", &name), |b| {
        b.iter(|| check_du_consistency(black_box(&ast)))
    });
    let seeds: Vec<BTreeSet<_>> = propose_units(&ast, 0)
        .into_iter()
        .map(|u| u.roots.into_iter().collect())
        .collect();
    g.bench_function(BenchmarkId::new("closure_level0", &name), |b| {
        b.iter(|| {
            for s in &seeds {
                let _ = black_box(du_closure(&ast, s));
            }
        })
    });
    g.bench_function(BenchmarkId::new("propose_all_levels", &name), |b| {
        b.iter(|| {
            for l in 0..=max_level(&ast).unwrap_or(0) {
                black_box(propose_units(&ast, l));
            }
        })
    });
    g.finish();
}

fn delta(c: &mut Criterion) {
    let mut g = c.benchmark_group("ddmin");
    for n in [16u32, 64, 256] {
        let units: Vec<u32> = (0..n).collect();
        // keep every seventh element
        g.bench_with_input(BenchmarkId::from_parameter(n), &units, |b, u| {
            b.iter(|| {
                ddmin(black_box(u), |s| {
                    (0..n).filter(|i| i % 7 == 0).all(|i| s.contains(&i))
                })
                .unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, frontend, dataflow, delta);
criterion_main!(benches);
