use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use examforge_core::kg_store::{KnowledgeGraph, NodeKind, SubjectId};
use examforge_core::psychometrics::{item_statistics, ResponseMatrix};
use examforge_core::ranking::{pagerank, PageRankConfig};
use examforge_core::Parallelism;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn random_graph(nodes: usize, edges: usize) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut g = KnowledgeGraph::new(SubjectId::new("bench").unwrap());
    for i in 0..nodes {
        g.upsert_entity(&format!("n{i}"), NodeKind::Text).unwrap();
    }
    for k in 0..edges {
        let (u, v) = (rng.random_range(0..nodes), rng.random_range(0..nodes));
        if u != v {
            g.assert_fact_triple(&format!("n{u}"), &format!("r{}", k % 17), &format!("n{v}")).unwrap();
        }
    }
    g
}

fn random_matrix(participants: usize, items: usize) -> ResponseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rows = (0..participants).map(|_| (0..items).map(|_| rng.random_bool(0.6)).collect()).collect();
    ResponseMatrix::new(
        (0..participants).map(|i| format!("p{i:05}")).collect(),
        (0..items).map(|i| format!("i{i:04}")).collect(),
        rows,
    )
    .unwrap()
}

fn bench_pagerank(c: &mut Criterion) {
    let mut group = c.benchmark_group("pagerank");
    group.sample_size(10);
    for nodes in [2_000, 20_000] {
        let graph = random_graph(nodes, nodes * 5);
        for (name, mode) in MODES {
            let cfg = PageRankConfig { parallelism: mode, ..Default::default() };
            group.bench_with_input(BenchmarkId::new(name, nodes), &graph, |b, g| b.iter(|| pagerank(g, &cfg).unwrap()));
        }
    }
    group.finish();
}

fn bench_item_statistics(c: &mut Criterion) {
    let mut group = c.benchmark_group("item_statistics");
    group.sample_size(10);
    for (participants, items) in [(200, 50), (5_000, 400)] {
        let m = random_matrix(participants, items);
        let label = format!("{participants}x{items}");
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, &label), &m, |b, m| {
                b.iter(|| item_statistics(m, 0.25, mode).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_pagerank, bench_item_statistics);
criterion_main!(benches);
