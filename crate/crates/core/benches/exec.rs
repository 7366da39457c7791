use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use txpar::exec::{default_labels, Amplified, ParallelExecutor};
use txpar::fixtures;
use txpar::format::UtxoBlock;
use txpar::swap::RwAnalysis;
use txpar::utxo::{OutRef, Output, Script, UtxoTransaction};
use txpar::{exec_serial, txid, Platform};

const WORKERS: [usize; 3] = [1, 2, 4];

/// Each transaction spends the output of the previous one.
fn utxo_chain(n: usize) -> UtxoBlock {
    let out = || vec![Output { script: Script::int(1), value: 1 }];
    let genesis = UtxoTransaction { id: txid("C0"), inputs: vec![], witnesses: vec![], outputs: out() };
    let block = (1..=n)
        .map(|i| UtxoTransaction {
            id: txid(&format!("C{i}")),
            inputs: vec![OutRef::new(txid(&format!("C{}", i - 1)), 1)],
            witnesses: vec![vec![]],
            outputs: out(),
        })
        .collect();
    UtxoBlock { genesis: vec![genesis], block, labels: None }
}

fn compare<P: Platform + RwAnalysis<P::Tx>>(c: &mut Criterion, name: &str, p: &P, block: &[P::Tx]) {
    let s0 = p.initial_state();
    let labels = default_labels(block.len());
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    group.bench_function("serial", |b| b.iter(|| exec_serial(black_box(block), &s0, p)));
    for w in WORKERS {
        let ex = ParallelExecutor::new(w).unwrap();
        group.bench_with_input(BenchmarkId::new("parallel", w), &w, |b, _| {
            b.iter(|| ex.run(black_box(block), &labels, &s0, p, p).unwrap().state)
        });
    }
    group.finish();
}

fn benches(c: &mut Criterion) {
    let fx = fixtures::utxo_disjoint(128);
    compare(c, "disjoint_amplified", &Amplified::new(fx.platform(), 200_000), &fx.block);

    let fx = fixtures::lottery_replay(8);
    compare(c, "lottery_replay", &Amplified::new(fx.platform(), 50_000), &fx.block);

    let fx = utxo_chain(64);
    compare(c, "dependent_chain", &Amplified::new(fx.platform(), 50_000), &fx.block);
}

criterion_group!(exec, benches);
criterion_main!(exec);
