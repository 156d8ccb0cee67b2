//! Bitcoin-layer simulation: UTXO set, BIP-125 mempool and greedy
//! feerate-ordered block assembly.
//!
//! One block is mined per call to [`ChainState::mine_block`]; there are no
//! reorgs. BIP-125 rules 1, 3 and 4 are enforced (opt-in signaling with
//! inheritance, absolute fee, feerate). Rules 2 and 5 are not.

mod block;
mod mempool;
mod tx;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use thiserror::Error;

pub use block::{available_space, Block};
pub use mempool::{Mempool, MempoolEntry};
pub use tx::{ChannelId, OutputKind, Transaction, TxOutput};

use crate::types::{Feerate, Height, NodeId, OutputRef, Sat, Txid, Weight};

/// Id of the pseudo-transaction holding the genesis grants.
pub const GENESIS_TXID: Txid = Txid(0);

/// Successful outcome of [`ChainState::submit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Submitted {
    Accepted(Txid),
    /// The transaction was accepted and these pending transactions (direct
    /// conflicts followed by their descendants) were evicted.
    Replaced {
        txid: Txid,
        evicted: Vec<Txid>,
    },
}

impl Submitted {
    pub fn txid(&self) -> Txid {
        match self {
            Submitted::Accepted(id) | Submitted::Replaced { txid: id, .. } => *id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Rejected {
    #[error("input {0} is neither an unspent confirmed output nor a pending output")]
    MissingInput(OutputRef),
    #[error("conflicts with non-replaceable pending transaction {0}")]
    ConflictNotReplaceable(Txid),
    #[error("replacement pays {offered_fee} sat at {offered_rate}; must exceed {evicted_fees} sat and {max_evicted_rate}")]
    InsufficientReplacementFee {
        offered_fee: Sat,
        offered_rate: Feerate,
        evicted_fees: Sat,
        max_evicted_rate: Feerate,
    },
    #[error("input {0} is spent twice by the same transaction")]
    DoubleSpendOfOwnInput(OutputRef),
    #[error("malformed transaction: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvariantViolation {
    #[error(
        "value not conserved at height {height}: utxo {utxo} + fees {fees} != granted {granted}"
    )]
    ValueConservation {
        height: Height,
        utxo: Sat,
        fees: Sat,
        granted: Sat,
    },
    #[error("block {height} weighs {weight} > {max}")]
    Overweight {
        height: Height,
        weight: Weight,
        max: Weight,
    },
    #[error("output {0} spent by two confirmed transactions")]
    DoubleSpend(OutputRef),
    #[error("mempool transactions {0} and {1} spend the same output")]
    MempoolConflict(Txid, Txid),
}

/// The simulated chain: confirmed blocks, UTXO set and mempool.
#[derive(Debug, Clone)]
pub struct ChainState {
    max_block_weight: Weight,
    blocks: Vec<Block>,
    utxo_set: HashMap<OutputRef, TxOutput>,
    mempool: Mempool,
    /// txid -> (height, index in block)
    confirmed: HashMap<Txid, (Height, usize)>,
    /// Confirmed spends: outref -> spending txid.
    spent_by: HashMap<OutputRef, Txid>,
    next_seq: u64,
    granted: Sat,
    fees_paid: Sat,
    audit: bool,
}

impl ChainState {
    /// Starts a chain whose genesis block grants the listed outputs. Grant
    /// `i` becomes output `GENESIS_TXID:i`.
    pub fn with_genesis(max_block_weight: Weight, grants: &[(NodeId, Sat)]) -> Self {
        let mut utxo_set = HashMap::with_capacity(grants.len());
        for (i, (owner, value)) in grants.iter().enumerate() {
            utxo_set.insert(
                OutputRef::new(GENESIS_TXID, i as u32),
                TxOutput::wallet(*value, *owner),
            );
        }
        let mut confirmed = HashMap::new();
        confirmed.insert(GENESIS_TXID, (0, usize::MAX));
        Self {
            max_block_weight,
            blocks: vec![Block::empty(0, max_block_weight)],
            utxo_set,
            mempool: Mempool::default(),
            confirmed,
            spent_by: HashMap::new(),
            next_seq: 0,
            granted: grants.iter().map(|(_, v)| v).sum(),
            fees_paid: 0,
            audit: true,
        }
    }

    /// Enables or disables the full invariant check after every block.
    pub fn set_audit(&mut self, audit: bool) {
        self.audit = audit;
    }

    /// Height of the chain tip.
    pub fn height(&self) -> Height {
        (self.blocks.len() - 1) as Height
    }

    pub fn max_block_weight(&self) -> Weight {
        self.max_block_weight
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, height: Height) -> Option<&Block> {
        self.blocks.get(height as usize)
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("genesis always present")
    }

    pub fn mempool(&self) -> &Mempool {
        &self.mempool
    }

    pub fn utxo(&self, outref: &OutputRef) -> Option<&TxOutput> {
        self.utxo_set.get(outref)
    }

    pub fn utxo_set(&self) -> &HashMap<OutputRef, TxOutput> {
        &self.utxo_set
    }

    pub fn granted_value(&self) -> Sat {
        self.granted
    }

    pub fn confirmed_fees(&self) -> Sat {
        self.fees_paid
    }

    /// Height at which `txid` confirmed.
    pub fn confirmation_height(&self, txid: &Txid) -> Option<Height> {
        self.confirmed.get(txid).map(|(h, _)| *h)
    }

    pub fn is_confirmed(&self, txid: &Txid) -> bool {
        self.confirmed.contains_key(txid)
    }

    pub fn confirmed_tx(&self, txid: &Txid) -> Option<&Transaction> {
        let (h, i) = self.confirmed.get(txid)?;
        self.blocks.get(*h as usize)?.txs.get(*i)
    }

    /// Confirmed transaction spending `outref`.
    pub fn confirmed_spender(&self, outref: &OutputRef) -> Option<Txid> {
        self.spent_by.get(outref).copied()
    }

    /// Output referenced by `outref`, confirmed-unspent or created by a
    /// pending transaction.
    pub fn lookup_output(&self, outref: &OutputRef) -> Option<&TxOutput> {
        self.utxo_set
            .get(outref)
            .or_else(|| self.mempool.get(&outref.txid)?.output(outref.vout))
    }

    /// Unspent outputs owned by `owner`: confirmed ones not spent in the
    /// mempool, then pending ones, each sorted by outref.
    pub fn spendable_outputs(&self, owner: NodeId, kind: OutputKind) -> Vec<(OutputRef, Sat)> {
        let mut confirmed: Vec<_> = self
            .utxo_set
            .iter()
            .filter(|(r, o)| {
                o.owner == owner && o.kind == kind && self.mempool.spender_of(r).is_none()
            })
            .map(|(r, o)| (*r, o.value))
            .collect();
        confirmed.sort();
        let mut pending: Vec<_> = self
            .mempool
            .entries()
            .flat_map(|e| {
                e.tx.outputs()
                    .iter()
                    .enumerate()
                    .map(move |(i, o)| (e.tx.outpoint(i as u32), o))
            })
            .filter(|(r, o)| {
                o.owner == owner && o.kind == kind && self.mempool.spender_of(r).is_none()
            })
            .map(|(r, o)| (r, o.value))
            .collect();
        pending.sort();
        confirmed.extend(pending);
        confirmed
    }

    /// Offers `tx` to the mempool under BIP-125 replacement rules.
    pub fn submit(&mut self, tx: Transaction) -> Result<Submitted, Rejected> {
        if tx.weight() == 0 || tx.weight() > self.max_block_weight {
            return Err(Rejected::Malformed(format!(
                "weight {} outside (0, {}]",
                tx.weight(),
                self.max_block_weight
            )));
        }
        if let Some(dup) = tx.duplicate_input() {
            return Err(Rejected::DoubleSpendOfOwnInput(dup));
        }
        if tx.inputs().is_empty() {
            return Err(Rejected::Malformed("no inputs".into()));
        }
        if self.mempool.contains(&tx.id()) || self.confirmed.contains_key(&tx.id()) {
            return Err(Rejected::Malformed(format!("{} already known", tx.id())));
        }

        let mut input_value: Sat = 0;
        for input in tx.inputs() {
            let out = self
                .lookup_output(input)
                .ok_or(Rejected::MissingInput(*input))?;
            input_value += out.value;
        }
        if input_value < tx.output_value() || input_value - tx.output_value() != tx.fee() {
            return Err(Rejected::Malformed(format!(
                "declared fee {} but inputs {} - outputs {}",
                tx.fee(),
                input_value,
                tx.output_value()
            )));
        }

        let mut conflicts: Vec<Txid> = Vec::new();
        for input in tx.inputs() {
            if let Some(other) = self.mempool.spender_of(input) {
                if !conflicts.contains(&other) {
                    conflicts.push(other);
                }
            }
        }

        let seq = self.next_seq;
        self.next_seq += 1;
        if conflicts.is_empty() {
            let id = tx.id();
            self.mempool.insert(tx, seq);
            return Ok(Submitted::Accepted(id));
        }

        if let Some(c) = conflicts.iter().find(|c| !self.mempool.is_replaceable(c)) {
            return Err(Rejected::ConflictNotReplaceable(*c));
        }
        let mut evicted = conflicts.clone();
        evicted.extend(self.mempool.descendants(&conflicts));
        let evicted_set: HashSet<Txid> = evicted.iter().copied().collect();
        if let Some(input) = tx.inputs().iter().find(|i| evicted_set.contains(&i.txid)) {
            return Err(Rejected::MissingInput(*input));
        }
        let evicted_fees = self.mempool.fees_of(&evicted);
        let max_evicted_rate = evicted
            .iter()
            .filter_map(|id| self.mempool.get(id))
            .map(|t| t.feerate())
            .max()
            .unwrap_or(Feerate::ZERO);
        if tx.fee() <= evicted_fees || tx.feerate() <= max_evicted_rate {
            return Err(Rejected::InsufficientReplacementFee {
                offered_fee: tx.fee(),
                offered_rate: tx.feerate(),
                evicted_fees,
                max_evicted_rate,
            });
        }
        for id in &evicted {
            self.mempool.remove(id);
        }
        let id = tx.id();
        self.mempool.insert(tx, seq);
        Ok(Submitted::Replaced { txid: id, evicted })
    }

    /// Ids the next block would contain, in inclusion order, without
    /// touching state.
    pub fn block_template(&self) -> Vec<Txid> {
        let mut pending_parents: HashMap<Txid, usize> = HashMap::new();
        let mut children: HashMap<Txid, Vec<Txid>> = HashMap::new();
        let mut heap = BinaryHeap::new();
        for e in self.mempool.entries() {
            let parents = self.mempool.pending_parents(&e.tx);
            for p in &parents {
                children.entry(*p).or_default().push(e.tx.id());
            }
            if parents.is_empty() {
                heap.push((e.tx.feerate(), Reverse(e.seq), e.tx.id()));
            } else {
                pending_parents.insert(e.tx.id(), parents.len());
            }
        }

        let mut remaining = self.max_block_weight;
        let mut selected = Vec::new();
        while let Some((_, _, id)) = heap.pop() {
            let tx = &self.mempool.entry(&id).expect("pending").tx;
            if tx.weight() > remaining {
                continue;
            }
            remaining -= tx.weight();
            selected.push(id);
            for child in children.get(&id).into_iter().flatten() {
                let left = pending_parents.get_mut(child).expect("tracked child");
                *left -= 1;
                if *left == 0 {
                    let entry = self.mempool.entry(child).expect("pending");
                    heap.push((entry.tx.feerate(), Reverse(entry.seq), *child));
                }
            }
        }
        selected
    }

    /// Mines the next block: greedy by feerate over transactions whose
    /// ancestors are confirmed or already selected, skipping any that do not
    /// fit. Ties go to the earlier submission.
    pub fn mine_block(&mut self) -> &Block {
        let height = self.height() + 1;
        let ids = self.block_template();
        let mut block = Block::empty(height, self.max_block_weight);
        for id in ids {
            let entry = self.mempool.remove(&id).expect("selected tx is pending");
            let tx = entry.tx;
            for input in tx.inputs() {
                self.utxo_set
                    .remove(input)
                    .expect("inputs of selected tx are confirmed by now");
                let prev = self.spent_by.insert(*input, tx.id());
                assert!(prev.is_none(), "confirmed double spend of {input}");
            }
            for (vout, out) in tx.outputs().iter().enumerate() {
                self.utxo_set.insert(tx.outpoint(vout as u32), out.clone());
            }
            self.fees_paid += tx.fee();
            block.total_weight += tx.weight();
            self.confirmed.insert(tx.id(), (height, block.txs.len()));
            block.txs.push(tx);
        }
        self.blocks.push(block);
        if self.audit {
            if let Err(v) = self.check_invariants() {
                panic!("chain invariant violated: {v}");
            }
        }
        self.tip()
    }

    /// Mines blocks until the tip reaches `height`.
    pub fn mine_until(&mut self, height: Height) {
        while self.height() < height {
            self.mine_block();
        }
    }

    /// Value conservation, the weight limit on the tip and mempool
    /// conflict-freedom. Runs after every block while auditing is on.
    pub fn check_invariants(&self) -> Result<(), InvariantViolation> {
        let utxo: Sat = self.utxo_set.values().map(|o| o.value).sum();
        if utxo + self.fees_paid != self.granted {
            return Err(InvariantViolation::ValueConservation {
                height: self.height(),
                utxo,
                fees: self.fees_paid,
                granted: self.granted,
            });
        }
        let tip = self.tip();
        let w: Weight = tip.txs.iter().map(|t| t.weight()).sum();
        if w != tip.total_weight || w > self.max_block_weight {
            return Err(InvariantViolation::Overweight {
                height: tip.height,
                weight: w,
                max: self.max_block_weight,
            });
        }
        let mut spent: HashMap<OutputRef, Txid> = HashMap::new();
        for e in self.mempool.entries() {
            for input in e.tx.inputs() {
                if let Some(other) = spent.insert(*input, e.tx.id()) {
                    return Err(InvariantViolation::MempoolConflict(other, e.tx.id()));
                }
            }
        }
        Ok(())
    }

    /// Rescans the whole chain for double spends and overweight blocks.
    pub fn audit_history(&self) -> Result<(), InvariantViolation> {
        let mut seen = HashSet::new();
        for b in &self.blocks {
            let w: Weight = b.txs.iter().map(|t| t.weight()).sum();
            if w != b.total_weight || w > self.max_block_weight {
                return Err(InvariantViolation::Overweight {
                    height: b.height,
                    weight: w,
                    max: self.max_block_weight,
                });
            }
            for tx in &b.txs {
                for input in tx.inputs() {
                    if !seen.insert(*input) {
                        return Err(InvariantViolation::DoubleSpend(*input));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALICE: NodeId = NodeId(1);
    const BOB: NodeId = NodeId(2);

    fn chain(grants: &[(NodeId, Sat)]) -> ChainState {
        ChainState::with_genesis(4_000_000, grants)
    }

    fn g(i: u32) -> OutputRef {
        OutputRef::new(GENESIS_TXID, i)
    }

    fn spend(input: OutputRef, value: Sat, fee: Sat, weight: Weight, rbf: bool) -> Transaction {
        Transaction::new(
            vec![input],
            vec![TxOutput::wallet(value - fee, ALICE)],
            weight,
            fee,
            rbf,
            ALICE,
        )
    }

    #[test]
    fn dominating_replacement_evicts() {
        let mut c = chain(&[(ALICE, 10_000)]);
        let a = spend(g(0), 10_000, 1_000, 700, true);
        let a_id = a.id();
        assert_eq!(c.submit(a), Ok(Submitted::Accepted(a_id)));
        let b = spend(g(0), 10_000, 2_000, 700, false);
        let b_id = b.id();
        assert_eq!(
            c.submit(b),
            Ok(Submitted::Replaced {
                txid: b_id,
                evicted: vec![a_id]
            })
        );
        assert!(!c.mempool().contains(&a_id));
    }

    #[test]
    fn non_signaling_conflict_is_final() {
        let mut c = chain(&[(ALICE, 10_000)]);
        let a = spend(g(0), 10_000, 1_000, 700, false);
        let a_id = a.id();
        c.submit(a).unwrap();
        let b = spend(g(0), 10_000, 9_000, 700, true);
        assert_eq!(c.submit(b), Err(Rejected::ConflictNotReplaceable(a_id)));
    }

    #[test]
    fn replaceability_inherited_from_ancestor() {
        let mut c = chain(&[(ALICE, 10_000)]);
        let a = spend(g(0), 10_000, 1_000, 700, true);
        let a_out = a.outpoint(0);
        c.submit(a).unwrap();
        let child = spend(a_out, 9_000, 500, 700, false);
        let child_id = child.id();
        c.submit(child).unwrap();
        let b = spend(a_out, 9_000, 2_000, 700, false);
        let b_id = b.id();
        assert_eq!(
            c.submit(b),
            Ok(Submitted::Replaced {
                txid: b_id,
                evicted: vec![child_id]
            })
        );
    }

    #[test]
    fn replacement_must_beat_fee_and_feerate() {
        let mut c = chain(&[(ALICE, 10_000)]);
        c.submit(spend(g(0), 10_000, 1_000, 700, true)).unwrap();
        // Equal fee.
        let r = c.submit(spend(g(0), 10_000, 1_000, 600, true));
        assert!(matches!(
            r,
            Err(Rejected::InsufficientReplacementFee { .. })
        ));
        // Higher fee, lower feerate.
        let r = c.submit(spend(g(0), 10_000, 1_100, 1_400, true));
        assert!(matches!(
            r,
            Err(Rejected::InsufficientReplacementFee { .. })
        ));
    }

    #[test]
    fn replacement_pays_for_descendants() {
        let mut c = chain(&[(ALICE, 10_000)]);
        let parent = spend(g(0), 10_000, 1_000, 700, true);
        let out = parent.outpoint(0);
        c.submit(parent).unwrap();
        c.submit(spend(out, 9_000, 3_000, 400, false)).unwrap();
        // Beats the parent alone but not parent + child.
        let r = c.submit(spend(g(0), 10_000, 3_500, 400, false));
        assert!(matches!(
            r,
            Err(Rejected::InsufficientReplacementFee { .. })
        ));
        let r = c.submit(spend(g(0), 10_000, 4_001, 400, false)).unwrap();
        assert!(matches!(r, Submitted::Replaced { ref evicted, .. } if evicted.len() == 2));
    }

    #[test]
    fn missing_and_duplicate_inputs() {
        let mut c = chain(&[(ALICE, 10_000)]);
        let r = c.submit(spend(g(7), 10_000, 10, 100, false));
        assert_eq!(r, Err(Rejected::MissingInput(g(7))));
        let dup = Transaction::new(vec![g(0), g(0)], vec![], 100, 10_000, false, ALICE);
        assert_eq!(c.submit(dup), Err(Rejected::DoubleSpendOfOwnInput(g(0))));
    }

    #[test]
    fn fee_must_match_value_difference() {
        let mut c = chain(&[(ALICE, 10_000)]);
        let tx = Transaction::new(
            vec![g(0)],
            vec![TxOutput::wallet(9_000, ALICE)],
            100,
            5,
            false,
            ALICE,
        );
        assert!(matches!(c.submit(tx), Err(Rejected::Malformed(_))));
    }

    #[test]
    fn greedy_skips_what_does_not_fit() {
        let mut c = chain(&[(ALICE, 100_000), (BOB, 100_000)]);
        // A: 2M wu @ 10 sat/kWU, B: 3M wu @ 5 sat/kWU.
        let a = spend(g(0), 100_000, 20_000, 2_000_000, false);
        let b = Transaction::new(
            vec![g(1)],
            vec![TxOutput::wallet(85_000, BOB)],
            3_000_000,
            15_000,
            false,
            BOB,
        );
        let (a_id, b_id) = (a.id(), b.id());
        c.submit(a).unwrap();
        c.submit(b).unwrap();
        let block = c.mine_block();
        assert_eq!(
            block.txs.iter().map(|t| t.id()).collect::<Vec<_>>(),
            vec![a_id]
        );
        assert_eq!(block.total_weight, 2_000_000);
        assert!(c.mempool().contains(&b_id));
    }

    #[test]
    fn empty_block() {
        let mut c = chain(&[(ALICE, 1)]);
        let b = c.mine_block();
        assert!(b.txs.is_empty());
        assert_eq!(b.total_weight, 0);
        assert_eq!(c.height(), 1);
    }

    #[test]
    fn parent_only_by_own_merit() {
        // P: feerate 1, child C: feerate 100, competitor X: feerate 50.
        let mut c = ChainState::with_genesis(10_000, &[(ALICE, 1_000_000), (BOB, 1_000_000)]);
        let p = spend(g(0), 1_000_000, 4, 4_000, false);
        let child = spend(p.outpoint(0), 1_000_000 - 4, 200, 2_000, false);
        let x = Transaction::new(
            vec![g(1)],
            vec![TxOutput::wallet(1_000_000 - 300, BOB)],
            6_000,
            300,
            false,
            BOB,
        );
        let ids = [p.id(), child.id(), x.id()];
        c.submit(p).unwrap();
        c.submit(child).unwrap();
        c.submit(x).unwrap();
        // X (6000) then P (4000) exactly fill the block; C has no room.
        assert_eq!(c.block_template(), vec![ids[2], ids[0]]);
        c.mine_block();
        // Next block: C alone.
        assert_eq!(c.block_template(), vec![ids[1]]);
    }

    #[test]
    fn available_space_counts_strictly_higher_feerates() {
        let mut c = chain(&[(ALICE, 100_000), (BOB, 100_000)]);
        c.submit(spend(g(0), 100_000, 8_000, 1_000_000, false))
            .unwrap();
        let b = Transaction::new(
            vec![g(1)],
            vec![TxOutput::wallet(100_000 - 1_500, BOB)],
            500_000,
            1_500,
            false,
            BOB,
        );
        c.submit(b).unwrap();
        let block = c.mine_block().clone();
        assert_eq!(block.available_space(Feerate(5)), 3_000_000);
        assert_eq!(block.available_space(Feerate(8)), 4_000_000);
        assert_eq!(block.available_space(Feerate(2)), 2_500_000);
        assert_eq!(
            Block::empty(9, 4_000_000).available_space(Feerate(1)),
            4_000_000
        );
    }

    #[test]
    fn conservation_after_mining() {
        let mut c = chain(&[(ALICE, 50_000), (BOB, 70_000)]);
        let a = spend(g(0), 50_000, 1_000, 500, true);
        let a_out = a.outpoint(0);
        c.submit(a).unwrap();
        c.submit(spend(a_out, 49_000, 700, 500, true)).unwrap();
        c.mine_block();
        assert_eq!(c.confirmed_fees(), 1_700);
        c.check_invariants().unwrap();
        c.audit_history().unwrap();
        assert!(c.confirmed_spender(&a_out).is_some());
    }
}
