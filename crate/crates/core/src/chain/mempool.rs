use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use crate::chain::tx::Transaction;
use crate::types::{Feerate, OutputRef, Sat, Txid};

#[derive(Debug, Clone)]
pub struct MempoolEntry {
    pub tx: Transaction,
    /// Submission order, used to break feerate ties.
    pub seq: u64,
}

/// Pending transactions with a spent-outpoint index for conflict detection.
///
/// The pool itself only stores; acceptance rules live in
/// [`ChainState::submit`](crate::chain::ChainState::submit).
#[derive(Debug, Clone, Default)]
pub struct Mempool {
    entries: HashMap<Txid, MempoolEntry>,
    spent_index: HashMap<OutputRef, Txid>,
    by_priority: BTreeSet<(Reverse<Feerate>, u64, Txid)>,
}

impl Mempool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, txid: &Txid) -> bool {
        self.entries.contains_key(txid)
    }

    pub fn get(&self, txid: &Txid) -> Option<&Transaction> {
        self.entries.get(txid).map(|e| &e.tx)
    }

    pub fn entry(&self, txid: &Txid) -> Option<&MempoolEntry> {
        self.entries.get(txid)
    }

    /// Pending transaction spending `outref`, if any.
    pub fn spender_of(&self, outref: &OutputRef) -> Option<Txid> {
        self.spent_index.get(outref).copied()
    }

    /// Pending transactions from highest to lowest feerate, ties by
    /// submission order.
    pub fn iter_by_priority(&self) -> impl Iterator<Item = &MempoolEntry> + '_ {
        self.by_priority.iter().map(|(_, _, id)| &self.entries[id])
    }

    pub fn total_weight(&self) -> u64 {
        self.entries.values().map(|e| e.tx.weight()).sum()
    }

    /// Highest feerate currently pending.
    pub fn top_feerate(&self) -> Option<Feerate> {
        self.by_priority.first().map(|(Reverse(f), _, _)| *f)
    }

    /// Pending parents of `tx`, in input order, deduplicated.
    pub fn pending_parents(&self, tx: &Transaction) -> Vec<Txid> {
        let mut out = Vec::new();
        for input in tx.inputs() {
            if self.entries.contains_key(&input.txid) && !out.contains(&input.txid) {
                out.push(input.txid);
            }
        }
        out
    }

    /// Pending transactions spending outputs of `txid`.
    pub fn children(&self, txid: &Txid) -> Vec<Txid> {
        let Some(entry) = self.entries.get(txid) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for vout in 0..entry.tx.outputs().len() as u32 {
            if let Some(child) = self.spent_index.get(&OutputRef::new(*txid, vout)) {
                if !out.contains(child) {
                    out.push(*child);
                }
            }
        }
        out
    }

    /// All pending descendants of the given roots (roots excluded), in
    /// breadth-first discovery order.
    pub fn descendants(&self, roots: &[Txid]) -> Vec<Txid> {
        let mut seen: HashSet<Txid> = roots.iter().copied().collect();
        let mut queue: VecDeque<Txid> = roots.iter().copied().collect();
        let mut out = Vec::new();
        while let Some(id) = queue.pop_front() {
            for child in self.children(&id) {
                if seen.insert(child) {
                    out.push(child);
                    queue.push_back(child);
                }
            }
        }
        out
    }

    /// BIP-125 opt-in: the transaction signals, or some unconfirmed
    /// ancestor does.
    pub fn is_replaceable(&self, txid: &Txid) -> bool {
        let mut seen = HashSet::new();
        let mut stack = vec![*txid];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            let Some(entry) = self.entries.get(&id) else {
                continue;
            };
            if entry.tx.rbf_signal() {
                return true;
            }
            stack.extend(self.pending_parents(&entry.tx));
        }
        false
    }

    pub fn fees_of(&self, ids: &[Txid]) -> Sat {
        ids.iter()
            .filter_map(|id| self.get(id))
            .map(|t| t.fee())
            .sum()
    }

    pub(crate) fn insert(&mut self, tx: Transaction, seq: u64) {
        let id = tx.id();
        for input in tx.inputs() {
            self.spent_index.insert(*input, id);
        }
        self.by_priority.insert((Reverse(tx.feerate()), seq, id));
        self.entries.insert(id, MempoolEntry { tx, seq });
    }

    pub(crate) fn remove(&mut self, txid: &Txid) -> Option<MempoolEntry> {
        let entry = self.entries.remove(txid)?;
        for input in entry.tx.inputs() {
            if self.spent_index.get(input) == Some(txid) {
                self.spent_index.remove(input);
            }
        }
        self.by_priority
            .remove(&(Reverse(entry.tx.feerate()), entry.seq, *txid));
        Some(entry)
    }

    pub(crate) fn entries(&self) -> impl Iterator<Item = &MempoolEntry> + '_ {
        self.entries.values()
    }
}
