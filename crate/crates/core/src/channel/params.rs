use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::types::{Feerate, Sat, Weight};

/// Weight estimates for the channel's pre-signed transactions.
///
/// Defaults follow the protocol's weight-estimation appendix for
/// non-anchor channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightSchedule {
    pub commitment_base_weight: Weight,
    pub per_htlc_output_weight: Weight,
    pub htlc_success_weight: Weight,
    pub htlc_timeout_weight: Weight,
}

impl Default for WeightSchedule {
    fn default() -> Self {
        Self {
            commitment_base_weight: 724,
            per_htlc_output_weight: 172,
            htlc_success_weight: 703,
            htlc_timeout_weight: 663,
        }
    }
}

impl WeightSchedule {
    pub fn commitment_weight(&self, htlcs: usize) -> Weight {
        self.commitment_base_weight + self.per_htlc_output_weight * htlcs as Weight
    }

    /// Weight a victim must confirm to close one channel carrying `htlcs`
    /// incoming HTLCs: the commitment plus one HTLC-success per HTLC.
    pub fn force_close_weight(&self, htlcs: usize) -> Weight {
        self.commitment_weight(htlcs) + self.htlc_success_weight * htlcs as Weight
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [
            ("commitment_base_weight", self.commitment_base_weight),
            ("per_htlc_output_weight", self.per_htlc_output_weight),
            ("htlc_success_weight", self.htlc_success_weight),
            ("htlc_timeout_weight", self.htlc_timeout_weight),
        ];
        match all.iter().find(|(_, w)| *w == 0) {
            Some((name, _)) => Err(format!("{name} must be positive")),
            None => Ok(()),
        }
    }
}

/// One side's channel parameters. Limits constrain what the *other* side
/// may offer to this side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub max_accepted_htlcs: u32,
    pub max_htlc_value_in_flight: Sat,
    /// Stored for completeness; revocation is not simulated.
    pub to_self_delay: u32,
    pub channel_feerate: Feerate,
    pub commitment_broadcast_delta: u32,
    pub htlc_expiry_delta: u32,
    pub wait_for_commit_confirmation: bool,
    pub htlc_minimum: Sat,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_accepted_htlcs == 0 {
            return Err("max_accepted_htlcs must be at least 1".into());
        }
        if self.channel_feerate == Feerate::ZERO {
            return Err("channel_feerate must be positive".into());
        }
        if self.commitment_broadcast_delta == 0
            || self.commitment_broadcast_delta > self.htlc_expiry_delta
        {
            return Err(format!(
                "commitment_broadcast_delta {} must be in [1, htlc_expiry_delta={}]",
                self.commitment_broadcast_delta, self.htlc_expiry_delta
            ));
        }
        Ok(())
    }
}

/// Lightning implementation whose defaults a node follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Lnd,
    CLightning,
    Eclair,
    Custom,
}

impl ProfileKind {
    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::Lnd => "lnd",
            ProfileKind::CLightning => "c-lightning",
            ProfileKind::Eclair => "eclair",
            ProfileKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProfileKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lnd" => Ok(ProfileKind::Lnd),
            "c-lightning" | "clightning" | "cln" => Ok(ProfileKind::CLightning),
            "eclair" => Ok(ProfileKind::Eclair),
            "custom" => Ok(ProfileKind::Custom),
            other => Err(format!("unknown node profile `{other}`")),
        }
    }
}

/// Close earlier the more unresolved HTLCs a channel carries:
/// `delta = min(base + per_htlc_blocks * pending, cap)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearDelta {
    pub per_htlc_blocks: f64,
    pub cap: u32,
}

/// How a victim tries to speed up its HTLC-success transactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeeBumping {
    #[default]
    None,
    /// Anchor-style HTLC transactions: extra wallet inputs may be added to
    /// raise the fee.
    Anchor,
    /// Attach a high-fee child to each pending HTLC-success.
    Cpfp,
}

/// Behavior profile of a node: the implementation defaults plus any
/// mitigation applied on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProfile {
    pub kind: ProfileKind,
    pub htlc_expiry_delta: u32,
    pub commitment_broadcast_delta: u32,
    pub max_accepted_htlcs: u32,
    pub wait_for_commit_confirmation: bool,
    pub to_self_delay: u32,
    pub dynamic_delta: Option<LinearDelta>,
    /// HTLC-success transactions do not signal replaceability.
    pub non_replaceable_htlc_success: bool,
    pub fee_bumping: FeeBumping,
}

impl NodeProfile {
    pub fn new(kind: ProfileKind) -> Self {
        let (expiry, broadcast, max_htlcs, wait) = match kind {
            ProfileKind::CLightning => (14, 7, 30, true),
            ProfileKind::Lnd | ProfileKind::Custom => (40, 10, 483, true),
            ProfileKind::Eclair => (144, 6, 30, false),
        };
        Self {
            kind,
            htlc_expiry_delta: expiry,
            commitment_broadcast_delta: broadcast,
            max_accepted_htlcs: max_htlcs,
            wait_for_commit_confirmation: wait,
            to_self_delay: 144,
            dynamic_delta: None,
            non_replaceable_htlc_success: false,
            fee_bumping: FeeBumping::None,
        }
    }

    pub fn lnd() -> Self {
        Self::new(ProfileKind::Lnd)
    }

    pub fn c_lightning() -> Self {
        Self::new(ProfileKind::CLightning)
    }

    pub fn eclair() -> Self {
        Self::new(ProfileKind::Eclair)
    }

    pub fn by_name(name: &str) -> Result<Self, String> {
        name.parse().map(Self::new)
    }

    /// Broadcast delta in force when the channel carries `pending_htlcs`
    /// unresolved incoming HTLCs.
    pub fn effective_broadcast_delta(&self, pending_htlcs: usize) -> u32 {
        match self.dynamic_delta {
            None => self.commitment_broadcast_delta,
            Some(rule) => {
                let extra = (rule.per_htlc_blocks * pending_htlcs as f64).floor();
                let delta = self.commitment_broadcast_delta as f64 + extra.max(0.0);
                (delta.min(rule.cap as f64) as u32).max(1)
            }
        }
    }

    pub fn channel_params(&self, feerate: Feerate, max_in_flight: Sat) -> ChannelParams {
        ChannelParams {
            max_accepted_htlcs: self.max_accepted_htlcs,
            max_htlc_value_in_flight: max_in_flight,
            to_self_delay: self.to_self_delay,
            channel_feerate: feerate,
            commitment_broadcast_delta: self.commitment_broadcast_delta,
            htlc_expiry_delta: self.htlc_expiry_delta,
            wait_for_commit_confirmation: self.wait_for_commit_confirmation,
            htlc_minimum: 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_defaults() {
        let lnd = NodeProfile::by_name("lnd").unwrap();
        assert_eq!(
            (
                lnd.htlc_expiry_delta,
                lnd.commitment_broadcast_delta,
                lnd.max_accepted_htlcs
            ),
            (40, 10, 483)
        );
        let cln = NodeProfile::by_name("c-lightning").unwrap();
        assert_eq!(
            (
                cln.htlc_expiry_delta,
                cln.commitment_broadcast_delta,
                cln.max_accepted_htlcs
            ),
            (14, 7, 30)
        );
        let eclair = NodeProfile::by_name("eclair").unwrap();
        assert_eq!(
            (
                eclair.htlc_expiry_delta,
                eclair.commitment_broadcast_delta,
                eclair.max_accepted_htlcs
            ),
            (144, 6, 30)
        );
        assert!(!eclair.wait_for_commit_confirmation);
        assert!(lnd.wait_for_commit_confirmation);
        assert!(NodeProfile::by_name("btcd").is_err());
    }

    #[test]
    fn weight_schedule_is_affine() {
        let w = WeightSchedule::default();
        assert_eq!(w.commitment_weight(0), 724);
        assert_eq!(w.commitment_weight(483), 83_800);
        for n in 0..600 {
            assert_eq!(w.commitment_weight(n + 1) - w.commitment_weight(n), 172);
        }
        assert_eq!(w.force_close_weight(483), 423_349);
    }

    #[test]
    fn dynamic_delta_rule() {
        let mut p = NodeProfile::lnd();
        p.dynamic_delta = Some(LinearDelta {
            per_htlc_blocks: 0.0,
            cap: 40,
        });
        assert_eq!(p.effective_broadcast_delta(483), 10);
        p.dynamic_delta = Some(LinearDelta {
            per_htlc_blocks: 0.05,
            cap: 30,
        });
        assert_eq!(p.effective_broadcast_delta(100), 15);
        assert_eq!(p.effective_broadcast_delta(483), 30);
    }

    #[test]
    fn params_validation() {
        let mut p = NodeProfile::lnd().channel_params(Feerate(2500), 1_000_000);
        assert!(p.validate().is_ok());
        p.commitment_broadcast_delta = 41;
        assert!(p.validate().is_err());
        p.commitment_broadcast_delta = 0;
        assert!(p.validate().is_err());
    }
}
