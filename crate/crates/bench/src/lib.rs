//! Fixtures shared by the benchmarks.

use htlcflood_core::chain::{OutputKind, Transaction, TxOutput, GENESIS_TXID};
use htlcflood_core::{ChainState, Feerate, NodeId, OutputRef, Weight};

pub const OWNER: NodeId = NodeId(7);

/// A chain whose mempool holds `n` independent transactions with distinct
/// feerates, each spending its own genesis coin.
pub fn chain_with_mempool(n: u32, blockmaxweight: Weight) -> ChainState {
    let mut chain =
        ChainState::with_genesis(blockmaxweight, &vec![(OWNER, 10_000_000); n as usize]);
    for i in 0..n {
        chain
            .submit(independent_tx(i, 1_000 + (i as u64 * 7_919) % 20_000))
            .unwrap();
    }
    chain
}

/// Spends genesis coin `i` at `rate` sat/kWU with a fixed 2,000 wu weight.
pub fn independent_tx(i: u32, rate: u64) -> Transaction {
    let weight = 2_000;
    let fee = Feerate(rate).fee_for(weight);
    Transaction::new(
        vec![OutputRef::new(GENESIS_TXID, i)],
        vec![TxOutput::new(10_000_000 - fee, OWNER, OutputKind::Wallet)],
        weight,
        fee,
        true,
        OWNER,
    )
}
