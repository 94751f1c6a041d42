use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fogalloc::catalog::{default_catalog, make_scenario, Layout};
use fogalloc::config::{LoadRange, RunConfig};
use fogalloc::harness::sweep_with;
use fogalloc::opt::{brute_force_with, formulate, solve_exact_with, SolveLimits};
use fogalloc::par::Execution;
use fogalloc::topology::{Architecture, Topology, TopologyOptions};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sweeps(c: &mut Criterion) {
    let config = RunConfig::default();
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    for arch in [Architecture::PonBased, Architecture::SpineLeaf] {
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, arch.slug()), &arch, |b, &arch| {
                b.iter(|| sweep_with(arch, LoadRange::default(), &config, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn exact_search(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_exact");
    for load in [11.0, 16.0] {
        let s = make_scenario(load, &default_catalog(), Layout::default()).unwrap();
        let t = Topology::build(Architecture::PonBased, &s, &TopologyOptions::default()).unwrap();
        let p = formulate(&t, &s, Architecture::PonBased).unwrap();
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, load), &p, |b, p| {
                b.iter(|| solve_exact_with(p, &SolveLimits::default(), exec).unwrap())
            });
        }
    }
    g.finish();
}

fn enumeration(c: &mut Criterion) {
    let layout = Layout { rooms: 2, users_per_room: 8, demanding_per_room: 2 };
    let s = make_scenario(8.0, &default_catalog(), layout).unwrap();
    let t = Topology::build(Architecture::PonBased, &s, &TopologyOptions::default()).unwrap();
    let mut g = c.benchmark_group("brute_force");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| brute_force_with(&t, &s, Architecture::PonBased, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, sweeps, exact_search, enumeration);
criterion_main!(benches);
