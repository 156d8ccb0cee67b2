use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::types::{Feerate, Weight};

/// Unrelated transactions arriving every block, with weight and feerate
/// drawn uniformly from the given ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundTraffic {
    pub txs_per_block: u32,
    pub weight_min: Weight,
    pub weight_max: Weight,
    pub feerate_min: Feerate,
    pub feerate_max: Feerate,
}

impl BackgroundTraffic {
    pub fn validate(&self, blockmaxweight: Weight) -> Result<(), String> {
        if self.weight_min == 0
            || self.weight_min > self.weight_max
            || self.weight_max > blockmaxweight
        {
            return Err(format!(
                "background weights must satisfy 0 < {} <= {} <= {}",
                self.weight_min, self.weight_max, blockmaxweight
            ));
        }
        if self.feerate_min == Feerate::ZERO || self.feerate_min > self.feerate_max {
            return Err("background feerates must satisfy 0 < min <= max".into());
        }
        Ok(())
    }

    /// `(weight, feerate)` of every transaction for `ticks` consecutive
    /// blocks.
    pub fn plan(&self, ticks: u32, seed: u64) -> Vec<Vec<(Weight, Feerate)>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..ticks)
            .map(|_| {
                (0..self.txs_per_block)
                    .map(|_| {
                        let w = rng.random_range(self.weight_min..=self.weight_max);
                        let f = rng.random_range(self.feerate_min.0..=self.feerate_max.0);
                        (w, Feerate(f))
                    })
                    .collect()
            })
            .collect()
    }
}
