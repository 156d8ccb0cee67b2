use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::types::{Height, NodeId, Sat};

/// Opaque payment secret. Cryptography is not simulated; [`Preimage::hash`]
/// is a fixed bijective mix so that hash/preimage pairs can be checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Preimage(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PaymentHash(pub u64);

impl Preimage {
    pub fn hash(&self) -> PaymentHash {
        // splitmix64 finalizer
        let mut z = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        PaymentHash(z ^ (z >> 31))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HtlcState {
    Pending,
    FulfilledOffchain,
    Failed,
    ClaimedBySuccess,
    ClaimedByTimeout,
}

impl HtlcState {
    pub fn is_terminal(self) -> bool {
        !matches!(self, HtlcState::Pending)
    }
}

/// Direction as seen from one of the two channel parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HtlcDirection {
    OfferedByLocal,
    OfferedByRemote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Htlc {
    pub id: u64,
    pub amount: Sat,
    pub payment_hash: PaymentHash,
    pub preimage_known_by: BTreeSet<NodeId>,
    pub expiry_height: Height,
    pub offerer: NodeId,
    pub receiver: NodeId,
    pub state: HtlcState,
}

impl Htlc {
    pub fn direction_for(&self, node: NodeId) -> HtlcDirection {
        if node == self.offerer {
            HtlcDirection::OfferedByLocal
        } else {
            HtlcDirection::OfferedByRemote
        }
    }

    pub fn knows_preimage(&self, node: NodeId) -> bool {
        self.preimage_known_by.contains(&node)
    }

    pub fn is_pending(&self) -> bool {
        self.state == HtlcState::Pending
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_preimages_distinct_hashes() {
        let hashes: BTreeSet<_> = (0..10_000u64).map(|i| Preimage(i).hash()).collect();
        assert_eq!(hashes.len(), 10_000);
    }
}
