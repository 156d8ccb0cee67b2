use serde::{Deserialize, Serialize};

use crate::chain::tx::Transaction;
use crate::types::{Feerate, Height, Weight};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Block {
    pub height: Height,
    /// Parents always precede children.
    pub txs: Vec<Transaction>,
    pub total_weight: Weight,
    pub max_weight: Weight,
}

impl Block {
    pub fn empty(height: Height, max_weight: Weight) -> Self {
        Self {
            height,
            txs: Vec::new(),
            total_weight: 0,
            max_weight,
        }
    }

    /// Block space left for a transaction paying `feerate`: the limit minus
    /// everything in the block that pays strictly more.
    pub fn available_space(&self, feerate: Feerate) -> Weight {
        available_space(
            self.max_weight,
            self.txs.iter().map(|t| (t.feerate(), t.weight())),
            feerate,
        )
    }

    /// `(feerate, weight)` for every transaction in the block.
    pub fn feerate_profile(&self) -> Vec<(Feerate, Weight)> {
        self.txs.iter().map(|t| (t.feerate(), t.weight())).collect()
    }
}

/// `max_weight − Σ weight(tx) over txs with feerate > f`, saturating at 0.
pub fn available_space<I>(max_weight: Weight, txs: I, feerate: Feerate) -> Weight
where
    I: IntoIterator<Item = (Feerate, Weight)>,
{
    let above: Weight = txs
        .into_iter()
        .filter(|(f, _)| *f > feerate)
        .map(|(_, w)| w)
        .sum();
    max_weight.saturating_sub(above)
}
