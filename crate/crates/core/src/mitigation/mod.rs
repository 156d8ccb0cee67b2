//! Victim-side countermeasures expressed as profile changes, and
//! side-by-side attack runs under each.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

use crate::attack::{
    min_channels_guaranteed_theft, run_attack, AttackConfig, AttackError, AttackReport,
};
use crate::chain::{ChainState, OutputKind, Transaction};
use crate::channel::{
    Channel, ChannelError, ClaimKind, ClaimOptions, FeeBumping, LinearDelta, NodeProfile,
    BUMP_INPUT_WEIGHT,
};
use crate::types::{Feerate, NodeId};

/// Upper bound on HTLCs a channel party may accept.
pub const PROTOCOL_MAX_ACCEPTED_HTLCS: u32 = 483;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MitigationError {
    #[error("policy {policy}: {reason}")]
    InvalidOverride { policy: String, reason: String },
    #[error("no mitigation policies given")]
    NoPolicies,
    #[error("no spare confirmed wallet output to bump the fee")]
    NoBumpFunds,
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Attack(#[from] AttackError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigationPolicy {
    pub id: String,
    pub commitment_broadcast_delta_override: Option<u32>,
    pub max_accepted_htlcs_override: Option<u32>,
    pub immediate_htlc_publication: bool,
    pub dynamic_delta: Option<LinearDelta>,
    pub anchor_outputs_mode: bool,
    pub non_replaceable_htlc_success: bool,
    pub cpfp_demo: bool,
}

impl MitigationPolicy {
    pub fn baseline() -> Self {
        Self {
            id: "baseline".into(),
            ..Default::default()
        }
    }

    pub fn validate(&self, profile: &NodeProfile) -> Result<(), MitigationError> {
        let invalid = |reason: String| {
            Err(MitigationError::InvalidOverride {
                policy: self.id.clone(),
                reason,
            })
        };
        if let Some(d) = self.commitment_broadcast_delta_override {
            if d == 0 || d > profile.htlc_expiry_delta {
                return invalid(format!(
                    "broadcast delta {d} outside [1, {}]",
                    profile.htlc_expiry_delta
                ));
            }
        }
        if let Some(m) = self.max_accepted_htlcs_override {
            if m == 0 || m > PROTOCOL_MAX_ACCEPTED_HTLCS {
                return invalid(format!(
                    "max accepted htlcs {m} outside [1, {PROTOCOL_MAX_ACCEPTED_HTLCS}]"
                ));
            }
        }
        if let Some(rule) = self.dynamic_delta {
            if rule.per_htlc_blocks.is_nan()
                || rule.per_htlc_blocks < 0.0
                || rule.cap == 0
                || rule.cap > profile.htlc_expiry_delta
            {
                return invalid(format!(
                    "dynamic delta needs a non-negative slope and a cap in [1, {}]",
                    profile.htlc_expiry_delta
                ));
            }
        }
        if self.anchor_outputs_mode && self.non_replaceable_htlc_success {
            return invalid(
                "anchor outputs and non-replaceable htlc transactions are exclusive".into(),
            );
        }
        if self.anchor_outputs_mode && self.cpfp_demo {
            return invalid("anchor outputs and cpfp pick different fee bumping".into());
        }
        Ok(())
    }
}

/// `profile` with `policy` applied.
pub fn apply_policy(
    policy: &MitigationPolicy,
    profile: &NodeProfile,
) -> Result<NodeProfile, MitigationError> {
    policy.validate(profile)?;
    let mut p = profile.clone();
    if let Some(d) = policy.commitment_broadcast_delta_override {
        p.commitment_broadcast_delta = d;
    }
    if let Some(m) = policy.max_accepted_htlcs_override {
        p.max_accepted_htlcs = m;
    }
    if policy.immediate_htlc_publication {
        p.wait_for_commit_confirmation = false;
    }
    if policy.dynamic_delta.is_some() {
        p.dynamic_delta = policy.dynamic_delta;
    }
    if policy.non_replaceable_htlc_success {
        p.non_replaceable_htlc_success = true;
    }
    if policy.anchor_outputs_mode {
        p.fee_bumping = FeeBumping::Anchor;
    } else if policy.cpfp_demo {
        p.fee_bumping = FeeBumping::Cpfp;
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitigationRow {
    pub policy_id: String,
    pub n_channels: u32,
    pub stolen_htlcs: u64,
    pub stolen_value_sat: u64,
    pub break_even_n: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MitigationRun {
    pub row: MitigationRow,
    pub report: AttackReport,
}

/// Every policy at every channel count in `ns`, ordered by policy then `n`.
pub fn run_mitigation_matrix(
    base: &AttackConfig,
    policies: &[MitigationPolicy],
    ns: &[u32],
    jobs: Option<usize>,
) -> Result<Vec<MitigationRun>, MitigationError> {
    if policies.is_empty() {
        return Err(MitigationError::NoPolicies);
    }
    let mut cells = Vec::with_capacity(policies.len() * ns.len());
    for policy in policies {
        let profile = apply_policy(policy, &base.victim_profile)?;
        let window = profile.effective_broadcast_delta(profile.max_accepted_htlcs as usize);
        let break_even =
            min_channels_guaranteed_theft(&profile, &base.weights, base.blockmaxweight, window);
        for &n in ns {
            let cfg = AttackConfig {
                victim_profile: profile.clone(),
                ..base.clone().with_channels(n)
            };
            cells.push((policy.id.clone(), n, break_even, cfg));
        }
    }
    let run = || {
        cells
            .par_iter()
            .map(|(id, n, break_even, cfg)| {
                let report = run_attack(cfg)?;
                Ok(MitigationRun {
                    row: MitigationRow {
                        policy_id: id.clone(),
                        n_channels: *n,
                        stolen_htlcs: report.stolen_htlcs,
                        stolen_value_sat: report.stolen_value,
                        break_even_n: *break_even,
                    },
                    report,
                })
            })
            .collect::<Result<Vec<_>, MitigationError>>()
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

/// `policy_id,n_channels,stolen_htlcs,stolen_value_sat,break_even_n`.
pub fn write_matrix_csv<'a, W, I>(rows: I, out: W) -> Result<(), AttackError>
where
    W: Write,
    I: IntoIterator<Item = &'a MitigationRow>,
{
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| AttackError::Csv(e.to_string()))
}

/// The victim's HTLC-success on an anchor channel, bumped to
/// `target_feerate` with one of its confirmed wallet outputs.
pub fn anchor_mode_claim_behavior(
    channel: &Channel,
    chain: &ChainState,
    victim: NodeId,
    htlc_id: u64,
    target_feerate: Feerate,
) -> Result<Transaction, MitigationError> {
    let success_weight = channel.weights().htlc_success_weight;
    let fee = target_feerate.fee_for(success_weight + BUMP_INPUT_WEIGHT);
    let presigned = channel.feerate().fee_for(success_weight);
    let extra = fee.saturating_sub(presigned);
    let coin = chain
        .spendable_outputs(victim, OutputKind::Wallet)
        .into_iter()
        .find(|(r, v)| chain.utxo(r).is_some() && *v >= extra)
        .ok_or(MitigationError::NoBumpFunds)?;
    let opts = ClaimOptions {
        fee_override: Some(fee.max(presigned)),
        signal_rbf: true,
        bump_input: Some(coin),
    };
    Ok(channel.build_htlc_claim(
        chain.height(),
        victim,
        htlc_id,
        ClaimKind::SuccessLocal,
        opts,
    )?)
}
