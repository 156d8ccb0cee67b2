//! Simulation of mass HTLC theft against payment channels: a closed chain
//! with a replace-by-fee mempool, channels loaded with HTLCs, an attacker
//! that floods the chain with force-closes and then claims whatever the
//! victims could not confirm in time.

pub mod attack;
pub mod chain;
pub mod channel;
pub mod fees;
pub mod mitigation;
pub mod types;

pub use attack::{AttackConfig, AttackError, AttackReport};
pub use chain::{Block, ChainState, Transaction};
pub use channel::{NodeProfile, ProfileKind, WeightSchedule};
pub use fees::{FeerateSeries, FeerateStrategy};
pub use mitigation::MitigationPolicy;
pub use types::{Feerate, Height, NodeId, OutputRef, Sat, Txid, Weight, DEFAULT_BLOCK_MAX_WEIGHT};
