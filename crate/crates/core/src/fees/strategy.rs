use serde::{Deserialize, Serialize};

use super::{FeeError, FeerateSeries};
use crate::types::{Feerate, Height};

/// How the attacker sets the feerate of the channels it opens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeerateStrategy {
    /// Keep the estimate in force when the channel opens.
    #[default]
    Naive,
    /// Lower the channel feerate whenever the estimate drops, never raise
    /// it, for `duration` blocks before launching.
    Minimize { duration: u32 },
}

impl FeerateStrategy {
    pub fn duration(self) -> u32 {
        match self {
            FeerateStrategy::Naive => 0,
            FeerateStrategy::Minimize { duration } => duration,
        }
    }
}

/// Channel feerate over time under a strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeerateTrace {
    pub open_height: Height,
    pub launch_height: Height,
    /// `(height, feerate)` from which each rate is in force; the first entry
    /// is the opening rate and every later one an accepted `update_fee`.
    pub updates: Vec<(Height, Feerate)>,
}

impl FeerateTrace {
    /// Feerate in force when the attack launches.
    pub fn final_feerate(&self) -> Feerate {
        self.updates.last().expect("trace has an opening rate").1
    }

    pub fn feerate_at(&self, height: Height) -> Option<Feerate> {
        if height < self.open_height || height > self.launch_height {
            return None;
        }
        let idx = self.updates.partition_point(|(h, _)| *h <= height);
        Some(self.updates[idx - 1].1)
    }
}

/// Channel feerate trace for a channel opened at `open_height`.
///
/// Each minimizing step proposes exactly the counterparty's current
/// estimate, so it always lies inside the acceptance band.
pub fn simulate_feerate_strategy(
    series: &FeerateSeries,
    strategy: FeerateStrategy,
    open_height: Height,
) -> Result<FeerateTrace, FeeError> {
    let launch_height =
        open_height
            .checked_add(strategy.duration())
            .ok_or(FeeError::HeightOutOfRange {
                height: Height::MAX,
                first: series.first_height(),
                last: series.last_height(),
            })?;
    let estimates = series.estimates_between(open_height, launch_height)?;
    let mut updates = vec![estimates[0]];
    if let FeerateStrategy::Minimize { .. } = strategy {
        for &(h, f) in &estimates[1..] {
            if f < updates.last().expect("non-empty").1 {
                updates.push((h, f));
            }
        }
    }
    Ok(FeerateTrace {
        open_height,
        launch_height,
        updates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fees::FeerateSample;

    fn series(rates: &[u64]) -> FeerateSeries {
        FeerateSeries::new(
            rates
                .iter()
                .enumerate()
                .map(|(i, r)| FeerateSample {
                    height: i as Height,
                    feerate: Feerate(*r),
                    conf_target: 2,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn running_minimum() {
        let s = series(&[100, 80, 120]);
        let t =
            simulate_feerate_strategy(&s, FeerateStrategy::Minimize { duration: 2 }, 0).unwrap();
        assert_eq!(t.final_feerate(), Feerate(80));
        assert_eq!(t.updates, vec![(0, Feerate(100)), (1, Feerate(80))]);
        assert_eq!(t.feerate_at(2), Some(Feerate(80)));
    }

    #[test]
    fn rising_series_keeps_open_rate() {
        let s = series(&[10, 20, 30, 40]);
        let t =
            simulate_feerate_strategy(&s, FeerateStrategy::Minimize { duration: 3 }, 0).unwrap();
        assert_eq!(t.final_feerate(), Feerate(10));
        let n = simulate_feerate_strategy(&s, FeerateStrategy::Naive, 2).unwrap();
        assert_eq!(n.final_feerate(), Feerate(30));
        assert_eq!(n.launch_height, 2);
    }

    #[test]
    fn out_of_range() {
        let s = series(&[10, 20]);
        assert!(
            simulate_feerate_strategy(&s, FeerateStrategy::Minimize { duration: 5 }, 0).is_err()
        );
        assert!(simulate_feerate_strategy(&s, FeerateStrategy::Naive, 7).is_err());
    }
}
