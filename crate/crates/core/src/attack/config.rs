use serde::{Deserialize, Serialize};

use super::traffic::BackgroundTraffic;
use super::AttackError;
use crate::channel::{NodeProfile, WeightSchedule};
use crate::fees::{FeerateSeries, FeerateStrategy};
use crate::types::{Feerate, Height, Sat, Weight, DEFAULT_BLOCK_MAX_WEIGHT};

/// Largest channel allowed without large-channel support.
pub const DEFAULT_CHANNEL_FUNDING: Sat = 16_777_215;

/// Order in which the target hands preimages back to the victims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreimageRelease {
    /// All of one channel's preimages together, channel by channel.
    #[default]
    PerChannelBatch,
    /// One HTLC at a time, round-robin over channels.
    Interleaved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub num_victim_channels: u32,
    pub victim_profile: NodeProfile,
    pub htlc_expiry_height: Height,
    pub channel_funding: Sat,
    /// Per-channel cap on HTLC value in flight; the channel funding if unset.
    pub max_htlc_value_in_flight: Option<Sat>,
    pub attacker_fee_bump_increment: Sat,
    pub blockmaxweight: Weight,
    pub weights: WeightSchedule,
    pub channel_feerate: Feerate,
    pub background_traffic: Option<BackgroundTraffic>,
    pub feerate_strategy: FeerateStrategy,
    /// Fee estimates the channel feerate follows. Without one the channel
    /// stays at `channel_feerate`.
    pub fee_series: Option<FeerateSeries>,
    /// Series height at which channels open; the first sample if unset.
    pub fee_series_open_height: Option<Height>,
    pub preimage_release: PreimageRelease,
    /// At the expiry tick the attacker moves before victims bump fees.
    pub attacker_first_at_expiry: bool,
    /// Package feerate victims aim for when they bump a pending claim.
    pub victim_bump_feerate: Feerate,
    pub max_post_expiry_ticks: u32,
    pub seed: u64,
    /// Checks value conservation and spend uniqueness after every block.
    pub audit: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            num_victim_channels: 1,
            victim_profile: NodeProfile::lnd(),
            htlc_expiry_height: 100,
            channel_funding: DEFAULT_CHANNEL_FUNDING,
            max_htlc_value_in_flight: None,
            attacker_fee_bump_increment: 1,
            blockmaxweight: DEFAULT_BLOCK_MAX_WEIGHT,
            weights: WeightSchedule::default(),
            channel_feerate: Feerate(2_500),
            background_traffic: None,
            feerate_strategy: FeerateStrategy::Naive,
            fee_series: None,
            fee_series_open_height: None,
            preimage_release: PreimageRelease::PerChannelBatch,
            attacker_first_at_expiry: true,
            victim_bump_feerate: Feerate(10_000),
            max_post_expiry_ticks: 200,
            seed: 0,
            audit: true,
        }
    }
}

/// Blocks mined before HTLCs are routed: the funding block.
pub const SETUP_HORIZON: Height = 1;

impl AttackConfig {
    pub fn with_channels(mut self, n: u32) -> Self {
        self.num_victim_channels = n;
        self
    }

    pub fn htlcs_per_channel(&self) -> u32 {
        self.victim_profile.max_accepted_htlcs
    }

    pub fn max_in_flight(&self) -> Sat {
        self.max_htlc_value_in_flight
            .unwrap_or(self.channel_funding)
    }

    /// Broadcast delta victims use with a full channel.
    pub fn close_delta(&self) -> u32 {
        self.victim_profile
            .effective_broadcast_delta(self.htlcs_per_channel() as usize)
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        let bad = |m: String| Err(AttackError::InvalidConfig(m));
        if self.num_victim_channels == 0 {
            return bad("num_victim_channels must be at least 1".into());
        }
        if self.victim_profile.max_accepted_htlcs == 0 {
            return bad("max_accepted_htlcs must be at least 1".into());
        }
        if self.channel_feerate == Feerate::ZERO {
            return bad("channel_feerate must be positive".into());
        }
        if self.blockmaxweight == 0 {
            return bad("blockmaxweight must be positive".into());
        }
        self.weights
            .validate()
            .map_err(AttackError::InvalidConfig)?;
        let delta = self.close_delta();
        if self.htlc_expiry_height <= SETUP_HORIZON + delta {
            return bad(format!(
                "htlc_expiry_height {} must exceed setup horizon {} + broadcast delta {}",
                self.htlc_expiry_height, SETUP_HORIZON, delta
            ));
        }
        if let Some(t) = &self.background_traffic {
            t.validate(self.blockmaxweight)
                .map_err(AttackError::InvalidConfig)?;
        }
        Ok(())
    }
}
