//! Seeded stand-ins for mainnet fee estimates and block contents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use super::{FeeError, FeerateSample, FeerateSeries};
use crate::chain::{Block, OutputKind, Transaction, TxOutput};
use crate::types::{Feerate, Height, NodeId, OutputRef, Txid, Weight};

/// Piecewise-constant fee regimes with multiplicative jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSeriesSpec {
    pub start_height: Height,
    pub len: u32,
    pub base_feerate: Feerate,
    pub floor_feerate: Feerate,
    pub mean_regime_blocks: f64,
    /// Standard deviation of the log of each jump factor.
    pub jump_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSeriesSpec {
    fn default() -> Self {
        Self {
            start_height: 0,
            len: 4_000,
            base_feerate: Feerate(5_000),
            floor_feerate: Feerate(253),
            mean_regime_blocks: 72.0,
            jump_sigma: 0.6,
            seed: 0,
        }
    }
}

impl SyntheticSeriesSpec {
    pub fn generate(&self) -> Result<FeerateSeries, FeeError> {
        if self.len == 0
            || self.mean_regime_blocks.is_nan()
            || self.mean_regime_blocks <= 0.0
            || self.jump_sigma.is_nan()
            || self.jump_sigma < 0.0
        {
            return Err(FeeError::InvalidSynthetic(format!("{self:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let lengths = Exp::new(1.0 / self.mean_regime_blocks)
            .map_err(|e| FeeError::InvalidSynthetic(e.to_string()))?;
        let jumps = LogNormal::new(0.0, self.jump_sigma)
            .map_err(|e| FeeError::InvalidSynthetic(e.to_string()))?;
        let floor = self.floor_feerate.0.max(1) as f64;
        let mut level = (self.base_feerate.0 as f64).max(floor);
        let mut samples = Vec::with_capacity(self.len as usize);
        while samples.len() < self.len as usize {
            let regime = (lengths.sample(&mut rng).ceil() as usize).max(1);
            for _ in 0..regime.min(self.len as usize - samples.len()) {
                samples.push(FeerateSample {
                    height: self.start_height + samples.len() as Height,
                    feerate: Feerate(level as u64),
                    conf_target: 2,
                });
            }
            level = (level * jumps.sample(&mut rng)).max(floor);
        }
        FeerateSeries::new(samples)
    }
}

/// Block bodies whose feerates scatter around the estimate in force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticBlocksSpec {
    pub max_weight: Weight,
    pub fill_min: f64,
    pub fill_max: f64,
    pub tx_weight_min: Weight,
    pub tx_weight_max: Weight,
    /// Standard deviation of log(tx feerate / estimate).
    pub spread_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticBlocksSpec {
    fn default() -> Self {
        Self {
            max_weight: crate::types::DEFAULT_BLOCK_MAX_WEIGHT,
            fill_min: 0.6,
            fill_max: 1.0,
            tx_weight_min: 50_000,
            tx_weight_max: 400_000,
            spread_sigma: 0.7,
            seed: 1,
        }
    }
}

const SYNTHETIC_OWNER: NodeId = NodeId(u32::MAX);

impl SyntheticBlocksSpec {
    /// One block per sample height of `series`.
    pub fn generate(&self, series: &FeerateSeries) -> Result<Vec<Block>, FeeError> {
        let valid = self.max_weight > 0
            && (0.0..=1.0).contains(&self.fill_min)
            && (self.fill_min..=1.0).contains(&self.fill_max)
            && self.tx_weight_min > 0
            && self.tx_weight_min <= self.tx_weight_max
            && self.spread_sigma >= 0.0;
        if !valid {
            return Err(FeeError::InvalidSynthetic(format!("{self:?}")));
        }
        let spread = LogNormal::new(0.0, self.spread_sigma)
            .map_err(|e| FeeError::InvalidSynthetic(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut tag = 0u64;
        let mut blocks = Vec::with_capacity(series.len());
        for s in series.samples() {
            let target = (self.max_weight as f64 * rng.random_range(self.fill_min..=self.fill_max))
                as Weight;
            let mut block = Block::empty(s.height, self.max_weight);
            loop {
                let weight = rng
                    .random_range(self.tx_weight_min..=self.tx_weight_max)
                    .min(self.max_weight);
                if block.total_weight + weight > target {
                    break;
                }
                let rate = ((s.feerate.0 as f64) * spread.sample(&mut rng)).max(1.0) as u64;
                tag += 1;
                let fee = Feerate(rate).fee_for(weight);
                block.txs.push(Transaction::new(
                    vec![OutputRef::new(Txid(tag), 0)],
                    vec![TxOutput::new(0, SYNTHETIC_OWNER, OutputKind::Filler)],
                    weight,
                    fee,
                    false,
                    SYNTHETIC_OWNER,
                ));
                block.total_weight += weight;
            }
            blocks.push(block);
        }
        Ok(blocks)
    }
}
