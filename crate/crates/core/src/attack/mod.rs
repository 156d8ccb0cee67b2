//! Mass HTLC theft: open many channels to victims, load them with
//! HTLCs the victims can claim, make every victim force-close at once and
//! claim by timeout whatever did not confirm before expiry.

mod config;
mod engine;
mod report;
mod traffic;

use std::ops::RangeInclusive;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{AttackConfig, PreimageRelease, DEFAULT_CHANNEL_FUNDING, SETUP_HORIZON};
pub use engine::{run_attack, victim_node, CPFP_CHILD_WEIGHT, FILLER, SOURCE, TARGET};
pub use report::{
    write_report_csv, write_sweep_trace_csv, write_trace_csv, AttackReport, ReplacementRecord,
    TraceRow,
};
pub use traffic::BackgroundTraffic;

use crate::chain::InvariantViolation;
use crate::channel::{ChannelError, NodeProfile, WeightSchedule};
use crate::fees::FeeError;
use crate::types::{Height, Sat, Weight};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error("invalid attack configuration: {0}")]
    InvalidConfig(String),
    #[error("channel capacity {funding} sat does not cover the {fee} sat commitment fee")]
    NonpositiveCapacity { funding: Sat, fee: Sat },
    #[error("{context}: {source}")]
    Channel {
        context: String,
        #[source]
        source: ChannelError,
    },
    #[error("fee series: {0}")]
    Fee(#[from] FeeError),
    #[error("background traffic rejected: {0}")]
    Background(String),
    #[error("invariant broken at height {height}: {violation}")]
    Invariant {
        height: Height,
        #[source]
        violation: InvariantViolation,
    },
    #[error("csv output: {0}")]
    Csv(String),
}

impl From<csv::Error> for AttackError {
    fn from(e: csv::Error) -> Self {
        AttackError::Csv(e.to_string())
    }
}

/// `floor(min(max_in_flight, funding - fee) / htlcs)`, where `fee` is the
/// commitment fee with all `htlcs` outputs present.
pub fn compute_htlc_value(
    funding: Sat,
    max_in_flight: Sat,
    htlcs: u32,
    fee: Sat,
) -> Result<Sat, AttackError> {
    if htlcs == 0 {
        return Err(AttackError::InvalidConfig(
            "at least one htlc per channel".into(),
        ));
    }
    if funding <= fee {
        return Err(AttackError::NonpositiveCapacity { funding, fee });
    }
    Ok(max_in_flight.min(funding - fee) / htlcs as Sat)
}

/// Smallest channel count whose force-close weight exceeds everything the
/// window's blocks can hold, assuming full blocks are available to victims.
pub fn min_channels_guaranteed_theft(
    profile: &NodeProfile,
    weights: &WeightSchedule,
    blockmaxweight: Weight,
    window: u32,
) -> u64 {
    let per_channel = weights
        .force_close_weight(profile.max_accepted_htlcs as usize)
        .max(1);
    (window as u64 * blockmaxweight) / per_channel + 1
}

/// Runs `template` for every channel count in `range`, in parallel when
/// `jobs` allows, returning results in ascending `n`.
pub fn sweep_channels(
    range: RangeInclusive<u32>,
    template: &AttackConfig,
    jobs: Option<usize>,
) -> Result<Vec<(u32, AttackReport)>, AttackError> {
    if range.is_empty() {
        return Err(AttackError::InvalidConfig("empty channel range".into()));
    }
    let ns: Vec<u32> = range.collect();
    let run = || {
        ns.par_iter()
            .map(|&n| run_attack(&template.clone().with_channels(n)).map(|r| (n, r)))
            .collect::<Result<Vec<_>, _>>()
    };
    match jobs {
        None => run(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| AttackError::InvalidConfig(e.to_string()))?
            .install(run),
    }
}

/// First channel count in a sweep at which anything was stolen.
pub fn simulated_break_even(runs: &[(u32, AttackReport)]) -> Option<u32> {
    runs.iter()
        .find(|(_, r)| r.stolen_htlcs > 0)
        .map(|(n, _)| *n)
}
