//! Fee-estimate series and the block-space analyses built on them.

mod series;
mod space;
mod strategy;
mod synthetic;

use thiserror::Error;

pub use series::{FeerateSample, FeerateSeries};
pub use space::{
    sweep_launch_heights, victim_available_space, write_launch_csv, write_threshold_csv, LaunchRow,
    LaunchSweep, SpaceAnalysis, ThresholdRow,
};
pub use strategy::{simulate_feerate_strategy, FeerateStrategy, FeerateTrace};
pub use synthetic::{SyntheticBlocksSpec, SyntheticSeriesSpec};

use crate::types::Height;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeeError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: heights must strictly increase")]
    NonMonotonicHeights { line: u64 },
    #[error("line {line}: feerate must be positive")]
    NonpositiveFeerate { line: u64 },
    #[error("feerate series is empty")]
    EmptySeries,
    #[error("height {height} outside series range [{first}, {last}]")]
    HeightOutOfRange {
        height: Height,
        first: Height,
        last: Height,
    },
    #[error("no block data for {window} blocks from height {start}")]
    InsufficientBlockData { start: Height, window: u32 },
    #[error("window must be at least one block")]
    InvalidWindow,
    #[error("invalid synthetic generator settings: {0}")]
    InvalidSynthetic(String),
    #[error("csv output: {0}")]
    Csv(String),
}

impl From<csv::Error> for FeeError {
    fn from(e: csv::Error) -> Self {
        FeeError::Csv(e.to_string())
    }
}
