use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{FeeError, FeerateSeries, FeerateStrategy};
use crate::chain::Block;
use crate::types::{Feerate, Height, Weight};

/// Block space left to victims paying `channel_feerate` during the window
/// after a launch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceAnalysis {
    pub start_height: Height,
    pub window: u32,
    pub avg_available_space: f64,
    /// threshold -> fraction of the window's blocks leaving at least that
    /// much space.
    pub fraction_of_time_above: BTreeMap<Weight, f64>,
}

fn window_blocks(blocks: &[Block], start: Height, window: u32) -> Result<&[Block], FeeError> {
    if window == 0 {
        return Err(FeeError::InvalidWindow);
    }
    let missing = FeeError::InsufficientBlockData { start, window };
    let first = blocks.partition_point(|b| b.height < start);
    let slice = blocks
        .get(first..first + window as usize)
        .ok_or(missing.clone())?;
    let contiguous = slice
        .iter()
        .enumerate()
        .all(|(i, b)| b.height == start + i as Height);
    if contiguous {
        Ok(slice)
    } else {
        Err(missing)
    }
}

/// `blocks` must be sorted by height and cover
/// `[launch_height, launch_height + window)`.
pub fn victim_available_space(
    blocks: &[Block],
    launch_height: Height,
    channel_feerate: Feerate,
    window: u32,
    thresholds: &[Weight],
) -> Result<SpaceAnalysis, FeeError> {
    let slice = window_blocks(blocks, launch_height, window)?;
    let spaces: Vec<Weight> = slice
        .iter()
        .map(|b| b.available_space(channel_feerate))
        .collect();
    let n = spaces.len() as f64;
    let fraction_of_time_above = thresholds
        .iter()
        .map(|t| (*t, spaces.iter().filter(|s| **s >= *t).count() as f64 / n))
        .collect();
    Ok(SpaceAnalysis {
        start_height: launch_height,
        window,
        avg_available_space: spaces.iter().sum::<Weight>() as f64 / n,
        fraction_of_time_above,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaunchRow {
    pub launch_height: Height,
    pub feerate_naive: Feerate,
    pub feerate_minimized: Feerate,
    pub avg_naive: f64,
    pub avg_minimized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub threshold: Weight,
    pub fraction_naive: f64,
    pub fraction_minimized: f64,
}

/// Naive and minimizing attackers compared at every launch height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunchSweep {
    pub duration: u32,
    pub window: u32,
    pub rows: Vec<LaunchRow>,
    pub thresholds: Vec<ThresholdRow>,
}

/// Evaluates every launch height `L` with full data: the naive attacker
/// opens at `L` and pays the estimate there, the minimizing one opened at
/// `L - d` and pays the lowest estimate over `[L - d, L]`. A launch counts
/// towards a threshold when its average available space is at least the
/// threshold.
pub fn sweep_launch_heights(
    series: &FeerateSeries,
    blocks: &[Block],
    strategy: FeerateStrategy,
    window: u32,
    thresholds: &[Weight],
) -> Result<LaunchSweep, FeeError> {
    if window == 0 {
        return Err(FeeError::InvalidWindow);
    }
    let d = strategy.duration();
    let first = series.first_height();
    let last_block = blocks
        .last()
        .map(|b| b.height)
        .ok_or(FeeError::InsufficientBlockData {
            start: first,
            window,
        })?;
    let last = series
        .last_height()
        .min(last_block.saturating_sub(window - 1));
    let lo = first.saturating_add(d);
    if lo > last {
        return Err(FeeError::InsufficientBlockData { start: lo, window });
    }

    // Per-height estimates from `first` to `last`, then a sliding minimum
    // over the trailing d + 1 heights.
    let estimates: Vec<Feerate> = (first..=last)
        .map(|h| series.estimate_at(h))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity((last - lo + 1) as usize);
    let mut window_min: VecDeque<usize> = VecDeque::new();
    for (i, f) in estimates.iter().enumerate() {
        while window_min.back().is_some_and(|&j| estimates[j] >= *f) {
            window_min.pop_back();
        }
        window_min.push_back(i);
        if window_min[0] + (d as usize) < i {
            window_min.pop_front();
        }
        let launch = first + i as Height;
        if launch < lo {
            continue;
        }
        let naive = *f;
        let minimized = estimates[window_min[0]];
        let avg = |rate| {
            victim_available_space(blocks, launch, rate, window, &[]).map(|a| a.avg_available_space)
        };
        rows.push(LaunchRow {
            launch_height: launch,
            feerate_naive: naive,
            feerate_minimized: minimized,
            avg_naive: avg(naive)?,
            avg_minimized: avg(minimized)?,
        });
    }

    let n = rows.len() as f64;
    let thresholds = thresholds
        .iter()
        .map(|&t| ThresholdRow {
            threshold: t,
            fraction_naive: rows.iter().filter(|r| r.avg_naive >= t as f64).count() as f64 / n,
            fraction_minimized: rows.iter().filter(|r| r.avg_minimized >= t as f64).count() as f64
                / n,
        })
        .collect();
    Ok(LaunchSweep {
        duration: d,
        window,
        rows,
        thresholds,
    })
}

#[derive(Serialize)]
struct SpaceCsvRow {
    launch_height: Height,
    avg_available_space: f64,
}

/// Writes `launch_height,avg_available_space` for one of the two attackers.
pub fn write_launch_csv<W: Write>(
    sweep: &LaunchSweep,
    minimized: bool,
    out: W,
) -> Result<(), FeeError> {
    let mut w = csv::Writer::from_writer(out);
    for r in &sweep.rows {
        w.serialize(SpaceCsvRow {
            launch_height: r.launch_height,
            avg_available_space: if minimized {
                r.avg_minimized
            } else {
                r.avg_naive
            },
        })?;
    }
    w.flush().map_err(|e| FeeError::Csv(e.to_string()))
}

/// Writes `threshold,fraction_naive,fraction_minimized`.
pub fn write_threshold_csv<W: Write>(sweep: &LaunchSweep, out: W) -> Result<(), FeeError> {
    let mut w = csv::Writer::from_writer(out);
    for r in &sweep.thresholds {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| FeeError::Csv(e.to_string()))
}
