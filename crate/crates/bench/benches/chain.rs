use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use htlcflood_bench::{chain_with_mempool, independent_tx, OWNER};
use htlcflood_core::ChainState;

fn mine_block(c: &mut Criterion) {
    let mut group = c.benchmark_group("mine_block");
    for n in [100u32, 1_000, 5_000] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter_batched(
                || chain_with_mempool(n, 4_000_000),
                |mut chain| {
                    chain.mine_block();
                    chain
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn submit_and_replace(c: &mut Criterion) {
    let mut group = c.benchmark_group("submit");
    group.bench_function("fresh_1000", |b| {
        b.iter_batched(
            || {
                let chain = ChainState::with_genesis(4_000_000, &vec![(OWNER, 10_000_000); 1_000]);
                let txs: Vec<_> = (0..1_000).map(|i| independent_tx(i, 2_500)).collect();
                (chain, txs)
            },
            |(mut chain, txs)| {
                for tx in txs {
                    chain.submit(tx).unwrap();
                }
                chain
            },
            BatchSize::LargeInput,
        )
    });
    group.bench_function("replace_1000", |b| {
        b.iter_batched(
            || chain_with_mempool(1_000, 4_000_000),
            |mut chain| {
                for i in 0..1_000 {
                    chain.submit(independent_tx(i, 50_000)).unwrap();
                }
                chain
            },
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, mine_block, submit_and_replace);
criterion_main!(benches);
