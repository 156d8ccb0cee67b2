//! Primitive identifiers and units shared by every module.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Amount in satoshis.
pub type Sat = u64;

/// Transaction or block weight in weight units.
pub type Weight = u64;

/// Block height. Height 0 is the genesis block.
pub type Height = u32;

/// Default consensus block weight limit.
pub const DEFAULT_BLOCK_MAX_WEIGHT: Weight = 4_000_000;

/// Identifier of a simulated node (lightning node or wallet owner).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node{}", self.0)
    }
}

/// Transaction identifier. Allocated sequentially by the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Txid(pub u64);

impl fmt::Display for Txid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tx{}", self.0)
    }
}

/// Reference to a transaction output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutputRef {
    pub txid: Txid,
    pub vout: u32,
}

impl OutputRef {
    pub fn new(txid: Txid, vout: u32) -> Self {
        Self { txid, vout }
    }
}

impl fmt::Display for OutputRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.txid, self.vout)
    }
}

/// Feerate in satoshis per 1000 weight units (sat/kWU).
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Feerate(pub u64);

impl Feerate {
    pub const ZERO: Feerate = Feerate(0);

    /// Feerate paid by `fee` over `weight`, rounded down.
    pub fn of(fee: Sat, weight: Weight) -> Feerate {
        if weight == 0 {
            return Feerate(u64::MAX);
        }
        Feerate(((fee as u128 * 1000) / weight as u128) as u64)
    }

    /// Fee for a transaction of `weight` at this feerate, rounded down.
    pub fn fee_for(self, weight: Weight) -> Sat {
        ((self.0 as u128 * weight as u128) / 1000) as u64
    }

    /// Smallest fee whose feerate over `weight` is strictly above `self`.
    pub fn min_fee_exceeding(self, weight: Weight) -> Sat {
        // floor(fee * 1000 / w) > r  <=>  fee * 1000 >= (r + 1) * w
        let need = (self.0 as u128 + 1) * weight as u128;
        need.div_ceil(1000) as u64
    }

    /// Converts satoshis per virtual byte (1 vB = 4 WU) to sat/kWU.
    pub fn from_sat_per_vbyte(sat_vb: f64) -> Feerate {
        Feerate((sat_vb * 250.0).floor().max(0.0) as u64)
    }

    pub fn sat_per_kwu(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Feerate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} sat/kWU", self.0)
    }
}
