use std::collections::HashSet;
use std::hash::{DefaultHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::types::{Feerate, NodeId, OutputRef, Sat, Txid, Weight};

/// Channel identifier, unique within one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelId(pub u32);

/// What an output pays to. Scripts are not modeled; the kind records which
/// spending path the simulation allows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutputKind {
    /// Single-key wallet output.
    Wallet,
    /// 2-of-2 channel funding output.
    Funding(ChannelId),
    /// Commitment output paying the commitment holder.
    ToLocal(ChannelId),
    /// Commitment output paying the holder's counterparty.
    ToRemote(ChannelId),
    /// HTLC output on a commitment.
    Htlc { channel: ChannelId, htlc: u64 },
    /// Output of an HTLC claim (success or timeout).
    HtlcClaim { channel: ChannelId, htlc: u64 },
    /// Background traffic.
    Filler,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TxOutput {
    pub value: Sat,
    pub owner: NodeId,
    pub kind: OutputKind,
}

impl TxOutput {
    pub fn new(value: Sat, owner: NodeId, kind: OutputKind) -> Self {
        Self { value, owner, kind }
    }

    pub fn wallet(value: Sat, owner: NodeId) -> Self {
        Self::new(value, owner, OutputKind::Wallet)
    }
}

/// An on-chain transaction.
///
/// The id is derived from the content, so building the same transaction
/// twice yields the same id and a resubmission is recognized as such.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    id: Txid,
    inputs: Vec<OutputRef>,
    outputs: Vec<TxOutput>,
    weight: Weight,
    fee: Sat,
    rbf_signal: bool,
    origin: NodeId,
}

impl Transaction {
    pub fn new(
        inputs: Vec<OutputRef>,
        outputs: Vec<TxOutput>,
        weight: Weight,
        fee: Sat,
        rbf_signal: bool,
        origin: NodeId,
    ) -> Self {
        let mut h = DefaultHasher::new();
        inputs.hash(&mut h);
        outputs.hash(&mut h);
        weight.hash(&mut h);
        fee.hash(&mut h);
        rbf_signal.hash(&mut h);
        origin.hash(&mut h);
        Self {
            id: Txid(h.finish()),
            inputs,
            outputs,
            weight,
            fee,
            rbf_signal,
            origin,
        }
    }

    pub fn id(&self) -> Txid {
        self.id
    }

    pub fn inputs(&self) -> &[OutputRef] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[TxOutput] {
        &self.outputs
    }

    pub fn output(&self, vout: u32) -> Option<&TxOutput> {
        self.outputs.get(vout as usize)
    }

    pub fn outpoint(&self, vout: u32) -> OutputRef {
        OutputRef::new(self.id, vout)
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    pub fn fee(&self) -> Sat {
        self.fee
    }

    pub fn feerate(&self) -> Feerate {
        Feerate::of(self.fee, self.weight)
    }

    pub fn rbf_signal(&self) -> bool {
        self.rbf_signal
    }

    pub fn origin(&self) -> NodeId {
        self.origin
    }

    pub fn output_value(&self) -> Sat {
        self.outputs.iter().map(|o| o.value).sum()
    }

    /// First input listed twice, if any.
    pub(crate) fn duplicate_input(&self) -> Option<OutputRef> {
        let mut seen = HashSet::with_capacity(self.inputs.len());
        self.inputs.iter().copied().find(|i| !seen.insert(*i))
    }
}
