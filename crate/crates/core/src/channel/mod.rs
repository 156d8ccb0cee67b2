//! Payment channel state machine: funding, commitments with HTLC outputs,
//! the HTLC lifecycle, HTLC claim transactions and `update_fee`.
//!
//! Balances are tracked gross of the commitment fee; the fee is taken from
//! the initiator's output whenever a commitment is built.

mod htlc;
mod params;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use htlc::{Htlc, HtlcDirection, HtlcState, PaymentHash, Preimage};
pub use params::{
    ChannelParams, FeeBumping, LinearDelta, NodeProfile, ProfileKind, WeightSchedule,
};

use crate::chain::{ChainState, ChannelId, OutputKind, Rejected, Transaction, TxOutput};
use crate::types::{Feerate, Height, NodeId, OutputRef, Sat, Txid, Weight};

/// Weight of a funding transaction without inputs.
pub const FUNDING_TX_BASE_WEIGHT: Weight = 300;
/// Weight added per wallet input (P2WPKH).
pub const WALLET_INPUT_WEIGHT: Weight = 272;
/// Extra weight of an anchor-style HTLC transaction that carries one added
/// wallet input and a change output.
pub const BUMP_INPUT_WEIGHT: Weight = 396;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("insufficient funds: need {need} sat, wallet has {have} sat")]
    InsufficientFunds { need: Sat, have: Sat },
    #[error("too many htlcs: counterparty accepts at most {limit}")]
    TooManyHtlcs { limit: u32 },
    #[error("value in flight {attempted} sat would exceed {limit} sat")]
    ValueInFlightExceeded { attempted: Sat, limit: Sat },
    #[error("insufficient balance: need {need} sat, have {have} sat")]
    InsufficientBalance { need: Sat, have: Sat },
    #[error("htlc amount {amount} below counterparty minimum {minimum}")]
    BelowMinimum { amount: Sat, minimum: Sat },
    #[error("channel is not open")]
    ChannelNotOpen,
    #[error("channel is already closing")]
    AlreadyClosing,
    #[error("counterparty does not respond")]
    CounterpartyUnresponsive,
    #[error("preimage does not match the payment hash")]
    UnknownPreimage,
    #[error("claimer does not know the preimage")]
    PreimageMissing,
    #[error("htlc expires at {expiry}, chain is at {height}")]
    PrematureTimeout { expiry: Height, height: Height },
    #[error("fee of a dual-signed htlc transaction cannot be changed")]
    FeeOverrideOnDualSigned,
    #[error("no wallet funds to bump the fee")]
    NoBumpFunds,
    #[error("htlc of {amount} sat cannot pay a {fee} sat fee")]
    HtlcValueBelowFee { amount: Sat, fee: Sat },
    #[error("{node} cannot build a {kind:?} claim for this htlc")]
    WrongClaimant { node: NodeId, kind: ClaimKind },
    #[error("{0} is not a party of this channel")]
    NotAParty(NodeId),
    #[error("unknown htlc {0}")]
    UnknownHtlc(u64),
    #[error("no commitment has been published")]
    NoCommitmentPublished,
    #[error("update_fee proposed by the non-initiator")]
    NotInitiator,
    #[error("proposed feerate {proposed} is not within tolerance of estimate {estimate}")]
    UnreasonableFeerate {
        proposed: Feerate,
        estimate: Feerate,
    },
    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),
    #[error("chain rejected transaction: {0}")]
    Chain(#[from] Rejected),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelStatus {
    Open,
    ForceClosing,
    Closed,
}

/// Whether a peer answers protocol messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Responsiveness {
    Responsive,
    Silent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClaimKind {
    /// Spend from one's own commitment with the preimage; pre-signed by both.
    SuccessLocal,
    /// Spend from the counterparty's commitment with the preimage.
    SuccessRemote,
    /// Refund from one's own commitment after expiry; pre-signed by both.
    TimeoutLocal,
    /// Refund from the counterparty's commitment after expiry.
    TimeoutRemote,
}

impl ClaimKind {
    pub fn is_dual_signed(self) -> bool {
        matches!(self, ClaimKind::SuccessLocal | ClaimKind::TimeoutLocal)
    }

    pub fn is_success(self) -> bool {
        matches!(self, ClaimKind::SuccessLocal | ClaimKind::SuccessRemote)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClaimOptions {
    /// Absolute fee. Only single-signed claims, or anchor-channel claims
    /// with a bump input, may set it.
    pub fee_override: Option<Sat>,
    /// Replaceability signal for single-signed claims.
    pub signal_rbf: bool,
    /// Wallet output funding a fee bump on an anchor channel.
    pub bump_input: Option<(OutputRef, Sat)>,
}

/// Counterparty acceptance rule for `update_fee`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeeUpdatePolicy {
    pub tolerance_percent: u64,
}

impl Default for FeeUpdatePolicy {
    fn default() -> Self {
        Self {
            tolerance_percent: 10,
        }
    }
}

impl FeeUpdatePolicy {
    pub fn accepts(&self, proposed: Feerate, estimate: Feerate) -> bool {
        let diff = proposed.0.abs_diff(estimate.0) as u128;
        diff * 100 <= estimate.0 as u128 * self.tolerance_percent as u128
    }
}

/// Everything needed to open a single-funded channel.
#[derive(Debug, Clone)]
pub struct ChannelSetup {
    pub id: ChannelId,
    pub initiator: NodeId,
    pub peer: NodeId,
    pub funding: Sat,
    pub initiator_params: ChannelParams,
    pub peer_params: ChannelParams,
    pub weights: WeightSchedule,
    /// Pre-signed HTLC transactions signal replaceability.
    pub htlc_txs_signal_rbf: bool,
    /// Pre-signed HTLC transactions accept extra fee inputs.
    pub anchor_outputs: bool,
}

/// The commitment a party broadcast to force-close.
#[derive(Debug, Clone)]
pub struct PublishedCommitment {
    pub holder: NodeId,
    pub tx: Transaction,
    pub published_at: Height,
    /// htlc id -> output index on `tx`.
    pub htlc_vouts: BTreeMap<u64, u32>,
}

impl PublishedCommitment {
    pub fn htlc_outpoint(&self, htlc_id: u64) -> Option<OutputRef> {
        self.htlc_vouts
            .get(&htlc_id)
            .map(|v| OutputRef::new(self.tx.id(), *v))
    }
}

#[derive(Debug, Clone)]
pub struct Channel {
    id: ChannelId,
    initiator: NodeId,
    parties: [NodeId; 2],
    /// Per party, excluding HTLCs in flight, before the commitment fee.
    balances: [Sat; 2],
    htlcs: Vec<Htlc>,
    params: [ChannelParams; 2],
    feerate: Feerate,
    weights: WeightSchedule,
    funding_outpoint: OutputRef,
    funding_value: Sat,
    status: ChannelStatus,
    htlc_txs_signal_rbf: bool,
    anchor_outputs: bool,
    published: Option<PublishedCommitment>,
}

impl Channel {
    /// Broadcasts the funding transaction without waiting for it to confirm.
    /// The initiator holds the whole balance.
    pub fn open_unconfirmed(
        setup: ChannelSetup,
        chain: &mut ChainState,
    ) -> Result<Self, ChannelError> {
        setup
            .initiator_params
            .validate()
            .and_then(|_| setup.peer_params.validate())
            .and_then(|_| setup.weights.validate())
            .map_err(ChannelError::InvalidParams)?;
        let feerate = setup.initiator_params.channel_feerate;
        let base_fee = feerate.fee_for(setup.weights.commitment_weight(0));
        if setup.funding < base_fee {
            return Err(ChannelError::InsufficientBalance {
                need: base_fee,
                have: setup.funding,
            });
        }

        let coins = chain.spendable_outputs(setup.initiator, OutputKind::Wallet);
        let mut inputs = Vec::new();
        let mut total: Sat = 0;
        let mut fee = 0;
        for (outref, value) in &coins {
            inputs.push(*outref);
            total += value;
            fee = feerate
                .fee_for(FUNDING_TX_BASE_WEIGHT + WALLET_INPUT_WEIGHT * inputs.len() as Weight);
            if total >= setup.funding + fee {
                break;
            }
        }
        if inputs.is_empty() || total < setup.funding + fee {
            let fee = feerate.fee_for(FUNDING_TX_BASE_WEIGHT + WALLET_INPUT_WEIGHT);
            return Err(ChannelError::InsufficientFunds {
                need: setup.funding + fee,
                have: total,
            });
        }
        let weight = FUNDING_TX_BASE_WEIGHT + WALLET_INPUT_WEIGHT * inputs.len() as Weight;
        let mut outputs = vec![TxOutput::new(
            setup.funding,
            setup.initiator,
            OutputKind::Funding(setup.id),
        )];
        let change = total - setup.funding - fee;
        if change > 0 {
            outputs.push(TxOutput::wallet(change, setup.initiator));
        }
        let tx = Transaction::new(inputs, outputs, weight, fee, false, setup.initiator);
        let funding_outpoint = tx.outpoint(0);
        chain.submit(tx)?;

        Ok(Self {
            id: setup.id,
            initiator: setup.initiator,
            parties: [setup.initiator, setup.peer],
            balances: [setup.funding, 0],
            htlcs: Vec::new(),
            params: [setup.initiator_params, setup.peer_params],
            feerate,
            weights: setup.weights,
            funding_outpoint,
            funding_value: setup.funding,
            status: ChannelStatus::Open,
            htlc_txs_signal_rbf: setup.htlc_txs_signal_rbf,
            anchor_outputs: setup.anchor_outputs,
            published: None,
        })
    }

    /// Broadcasts the funding transaction and mines until it confirms.
    pub fn open(setup: ChannelSetup, chain: &mut ChainState) -> Result<Self, ChannelError> {
        let channel = Self::open_unconfirmed(setup, chain)?;
        let funding_tx = channel.funding_outpoint.txid;
        while !chain.is_confirmed(&funding_tx) {
            if !chain.mempool().contains(&funding_tx) {
                // Cannot happen: funding txs are never replaceable.
                return Err(ChannelError::ChannelNotOpen);
            }
            chain.mine_block();
        }
        Ok(channel)
    }

    pub fn id(&self) -> ChannelId {
        self.id
    }

    pub fn initiator(&self) -> NodeId {
        self.initiator
    }

    pub fn parties(&self) -> [NodeId; 2] {
        self.parties
    }

    pub fn counterparty(&self, node: NodeId) -> Result<NodeId, ChannelError> {
        Ok(self.parties[1 - self.side(node)?])
    }

    pub fn status(&self) -> ChannelStatus {
        self.status
    }

    pub fn feerate(&self) -> Feerate {
        self.feerate
    }

    pub fn weights(&self) -> &WeightSchedule {
        &self.weights
    }

    pub fn funding_outpoint(&self) -> OutputRef {
        self.funding_outpoint
    }

    pub fn funding_value(&self) -> Sat {
        self.funding_value
    }

    pub fn params_of(&self, node: NodeId) -> Result<&ChannelParams, ChannelError> {
        Ok(&self.params[self.side(node)?])
    }

    pub fn htlcs(&self) -> &[Htlc] {
        &self.htlcs
    }

    pub fn htlc(&self, id: u64) -> Option<&Htlc> {
        // ids are assigned sequentially
        self.htlcs.get(id as usize)
    }

    pub fn pending_htlcs(&self) -> impl Iterator<Item = &Htlc> + '_ {
        self.htlcs.iter().filter(|h| h.is_pending())
    }

    pub fn pending_count(&self) -> usize {
        self.pending_htlcs().count()
    }

    pub fn published_commitment(&self) -> Option<&PublishedCommitment> {
        self.published.as_ref()
    }

    /// Balance of `node` excluding in-flight HTLCs and before fees.
    pub fn balance(&self, node: NodeId) -> Result<Sat, ChannelError> {
        Ok(self.balances[self.side(node)?])
    }

    pub fn in_flight_offered_by(&self, node: NodeId) -> Sat {
        self.pending_htlcs()
            .filter(|h| h.offerer == node)
            .map(|h| h.amount)
            .sum()
    }

    /// Commitment fee at the current feerate with `htlcs` HTLC outputs.
    pub fn commitment_fee(&self, htlcs: usize) -> Sat {
        self.feerate.fee_for(self.weights.commitment_weight(htlcs))
    }

    fn side(&self, node: NodeId) -> Result<usize, ChannelError> {
        self.parties
            .iter()
            .position(|p| *p == node)
            .ok_or(ChannelError::NotAParty(node))
    }

    /// Offers an HTLC from `offerer` to the other party. Both commitments
    /// gain the matching HTLC output.
    pub fn add_htlc(
        &mut self,
        offerer: NodeId,
        amount: Sat,
        payment_hash: PaymentHash,
        expiry_height: Height,
    ) -> Result<u64, ChannelError> {
        if self.status != ChannelStatus::Open {
            return Err(ChannelError::ChannelNotOpen);
        }
        let side = self.side(offerer)?;
        let receiver = self.parties[1 - side];
        let limits = self.params[1 - side];

        let offered = self
            .pending_htlcs()
            .filter(|h| h.offerer == offerer)
            .count();
        if offered as u64 + 1 > limits.max_accepted_htlcs as u64 {
            return Err(ChannelError::TooManyHtlcs {
                limit: limits.max_accepted_htlcs,
            });
        }
        let attempted = self.in_flight_offered_by(offerer) + amount;
        if attempted > limits.max_htlc_value_in_flight {
            return Err(ChannelError::ValueInFlightExceeded {
                attempted,
                limit: limits.max_htlc_value_in_flight,
            });
        }
        if amount < limits.htlc_minimum {
            return Err(ChannelError::BelowMinimum {
                amount,
                minimum: limits.htlc_minimum,
            });
        }
        let new_fee = self.commitment_fee(self.pending_count() + 1);
        let need = if offerer == self.initiator {
            amount + new_fee
        } else {
            amount
        };
        if self.balances[side] < need {
            return Err(ChannelError::InsufficientBalance {
                need,
                have: self.balances[side],
            });
        }
        if offerer != self.initiator {
            let init = 1 - side;
            if self.balances[init] < new_fee {
                return Err(ChannelError::InsufficientBalance {
                    need: new_fee,
                    have: self.balances[init],
                });
            }
        }

        let id = self.htlcs.len() as u64;
        self.balances[side] -= amount;
        self.htlcs.push(Htlc {
            id,
            amount,
            payment_hash,
            preimage_known_by: BTreeSet::new(),
            expiry_height,
            offerer,
            receiver,
            state: HtlcState::Pending,
        });
        Ok(id)
    }

    /// Records that `node` learned the preimage of an HTLC.
    pub fn learn_preimage(
        &mut self,
        htlc_id: u64,
        node: NodeId,
        preimage: Preimage,
    ) -> Result<(), ChannelError> {
        let htlc = self.htlc_mut(htlc_id)?;
        if preimage.hash() != htlc.payment_hash {
            return Err(ChannelError::UnknownPreimage);
        }
        htlc.preimage_known_by.insert(node);
        Ok(())
    }

    /// The receiver presents the preimage and asks the offerer to settle
    /// off-chain. A silent offerer leaves the HTLC pending.
    pub fn fulfill_htlc_offchain(
        &mut self,
        htlc_id: u64,
        preimage: Preimage,
        offerer_behavior: Responsiveness,
    ) -> Result<(), ChannelError> {
        if self.status != ChannelStatus::Open {
            return Err(ChannelError::ChannelNotOpen);
        }
        let htlc = self.htlc_mut(htlc_id)?;
        if !htlc.is_pending() {
            return Err(ChannelError::UnknownHtlc(htlc_id));
        }
        if preimage.hash() != htlc.payment_hash {
            return Err(ChannelError::UnknownPreimage);
        }
        let receiver = htlc.receiver;
        htlc.preimage_known_by.insert(receiver);
        if offerer_behavior == Responsiveness::Silent {
            return Err(ChannelError::CounterpartyUnresponsive);
        }
        htlc.state = HtlcState::FulfilledOffchain;
        let amount = htlc.amount;
        let side = self.side(receiver)?;
        self.balances[side] += amount;
        Ok(())
    }

    fn htlc_mut(&mut self, id: u64) -> Result<&mut Htlc, ChannelError> {
        self.htlcs
            .get_mut(id as usize)
            .ok_or(ChannelError::UnknownHtlc(id))
    }

    /// `holder`'s latest commitment: to_local, to_remote, then one output
    /// per pending HTLC in id order. Never signals replaceability.
    pub fn build_commitment(&self, holder: NodeId) -> Result<Transaction, ChannelError> {
        let side = self.side(holder)?;
        let other = self.parties[1 - side];
        let pending: Vec<&Htlc> = self.pending_htlcs().collect();
        let weight = self.weights.commitment_weight(pending.len());
        let fee = self.feerate.fee_for(weight);
        let net = |s: usize| {
            let gross = self.balances[s];
            if self.parties[s] == self.initiator {
                gross.saturating_sub(fee)
            } else {
                gross
            }
        };
        let mut outputs = Vec::with_capacity(2 + pending.len());
        outputs.push(TxOutput::new(
            net(side),
            holder,
            OutputKind::ToLocal(self.id),
        ));
        outputs.push(TxOutput::new(
            net(1 - side),
            other,
            OutputKind::ToRemote(self.id),
        ));
        for h in &pending {
            outputs.push(TxOutput::new(
                h.amount,
                holder,
                OutputKind::Htlc {
                    channel: self.id,
                    htlc: h.id,
                },
            ));
        }
        // Outputs + fee always equal the funding value; when the initiator
        // cannot cover the fee the shortfall comes out of the fee.
        let fee = self.funding_value - outputs.iter().map(|o| o.value).sum::<Sat>();
        Ok(Transaction::new(
            vec![self.funding_outpoint],
            outputs,
            weight,
            fee,
            false,
            holder,
        ))
    }

    /// Builds a transaction spending one HTLC output of the published
    /// commitment.
    pub fn build_htlc_claim(
        &self,
        height: Height,
        claimer: NodeId,
        htlc_id: u64,
        kind: ClaimKind,
        opts: ClaimOptions,
    ) -> Result<Transaction, ChannelError> {
        let published = self
            .published
            .as_ref()
            .ok_or(ChannelError::NoCommitmentPublished)?;
        let htlc = self
            .htlc(htlc_id)
            .ok_or(ChannelError::UnknownHtlc(htlc_id))?;
        let outref = published
            .htlc_outpoint(htlc_id)
            .ok_or(ChannelError::UnknownHtlc(htlc_id))?;

        let own_commitment = claimer == published.holder;
        let role_ok = match kind {
            ClaimKind::SuccessLocal => own_commitment && claimer == htlc.receiver,
            ClaimKind::SuccessRemote => !own_commitment && claimer == htlc.receiver,
            ClaimKind::TimeoutLocal => own_commitment && claimer == htlc.offerer,
            ClaimKind::TimeoutRemote => !own_commitment && claimer == htlc.offerer,
        };
        if !role_ok {
            return Err(ChannelError::WrongClaimant {
                node: claimer,
                kind,
            });
        }
        if kind.is_success() && !htlc.knows_preimage(claimer) {
            return Err(ChannelError::PreimageMissing);
        }
        if !kind.is_success() && height < htlc.expiry_height {
            return Err(ChannelError::PrematureTimeout {
                expiry: htlc.expiry_height,
                height,
            });
        }

        let base_weight = if kind.is_success() {
            self.weights.htlc_success_weight
        } else {
            self.weights.htlc_timeout_weight
        };
        let claim_kind = OutputKind::HtlcClaim {
            channel: self.id,
            htlc: htlc_id,
        };

        if kind.is_dual_signed() {
            let presigned_fee = self.feerate.fee_for(base_weight);
            if presigned_fee > htlc.amount {
                return Err(ChannelError::HtlcValueBelowFee {
                    amount: htlc.amount,
                    fee: presigned_fee,
                });
            }
            let claim_out = TxOutput::new(htlc.amount - presigned_fee, claimer, claim_kind);
            let Some(fee) = opts.fee_override else {
                return Ok(Transaction::new(
                    vec![outref],
                    vec![claim_out],
                    base_weight,
                    presigned_fee,
                    self.htlc_txs_signal_rbf,
                    claimer,
                ));
            };
            if !self.anchor_outputs {
                return Err(ChannelError::FeeOverrideOnDualSigned);
            }
            let (bump_ref, bump_value) = opts.bump_input.ok_or(ChannelError::NoBumpFunds)?;
            let extra = fee.saturating_sub(presigned_fee);
            if fee < presigned_fee || bump_value < extra {
                return Err(ChannelError::NoBumpFunds);
            }
            let mut outputs = vec![claim_out];
            if bump_value > extra {
                outputs.push(TxOutput::wallet(bump_value - extra, claimer));
            }
            return Ok(Transaction::new(
                vec![outref, bump_ref],
                outputs,
                base_weight + BUMP_INPUT_WEIGHT,
                fee,
                self.htlc_txs_signal_rbf,
                claimer,
            ));
        }

        let fee = opts
            .fee_override
            .unwrap_or_else(|| self.feerate.fee_for(base_weight));
        if fee > htlc.amount {
            return Err(ChannelError::HtlcValueBelowFee {
                amount: htlc.amount,
                fee,
            });
        }
        Ok(Transaction::new(
            vec![outref],
            vec![TxOutput::new(htlc.amount - fee, claimer, claim_kind)],
            base_weight,
            fee,
            opts.signal_rbf,
            claimer,
        ))
    }

    /// Initiator-only feerate change, accepted if the counterparty's policy
    /// finds it close enough to its own fee estimate.
    pub fn update_fee(
        &mut self,
        proposer: NodeId,
        new_feerate: Feerate,
        counterparty_estimate: Feerate,
        policy: FeeUpdatePolicy,
    ) -> Result<(), ChannelError> {
        self.side(proposer)?;
        if self.status != ChannelStatus::Open {
            return Err(ChannelError::ChannelNotOpen);
        }
        if proposer != self.initiator {
            return Err(ChannelError::NotInitiator);
        }
        if new_feerate == Feerate::ZERO || !policy.accepts(new_feerate, counterparty_estimate) {
            return Err(ChannelError::UnreasonableFeerate {
                proposed: new_feerate,
                estimate: counterparty_estimate,
            });
        }
        let need = new_feerate.fee_for(self.weights.commitment_weight(self.pending_count()));
        let have = self.balances[self.side(self.initiator)?];
        if have < need {
            return Err(ChannelError::InsufficientBalance { need, have });
        }
        self.feerate = new_feerate;
        Ok(())
    }

    /// Publishes `closer`'s commitment. Unless the closer waits for the
    /// commitment to confirm, HTLC-success claims for every incoming HTLC
    /// whose preimage it knows go out in the same call.
    pub fn force_close(
        &mut self,
        closer: NodeId,
        chain: &mut ChainState,
    ) -> Result<Vec<Txid>, ChannelError> {
        if self.status != ChannelStatus::Open {
            return Err(ChannelError::AlreadyClosing);
        }
        let tx = self.build_commitment(closer)?;
        let mut htlc_vouts = BTreeMap::new();
        for (i, h) in self.pending_htlcs().enumerate() {
            htlc_vouts.insert(h.id, 2 + i as u32);
        }
        let txid = chain.submit(tx.clone())?.txid();
        self.status = ChannelStatus::ForceClosing;
        self.published = Some(PublishedCommitment {
            holder: closer,
            tx,
            published_at: chain.height(),
            htlc_vouts,
        });
        let mut submitted = vec![txid];
        if !self.params_of(closer)?.wait_for_commit_confirmation {
            for result in self.claim_incoming(closer, chain) {
                submitted.push(result?);
            }
        }
        Ok(submitted)
    }

    /// HTLCs on the published commitment that `node` can claim by preimage
    /// and whose output is not yet spent on chain or in the mempool.
    pub fn claimable_incoming(&self, node: NodeId, chain: &ChainState) -> Vec<u64> {
        let Some(published) = &self.published else {
            return Vec::new();
        };
        self.htlcs
            .iter()
            .filter(|h| h.is_pending() && h.receiver == node && h.knows_preimage(node))
            .filter(|h| {
                let Some(outref) = published.htlc_outpoint(h.id) else {
                    return false;
                };
                chain.confirmed_spender(&outref).is_none()
                    && chain.mempool().spender_of(&outref).is_none()
            })
            .map(|h| h.id)
            .collect()
    }

    /// Submits HTLC-success (local) for every claimable incoming HTLC.
    pub fn claim_incoming(
        &self,
        node: NodeId,
        chain: &mut ChainState,
    ) -> Vec<Result<Txid, ChannelError>> {
        let height = chain.height();
        self.claimable_incoming(node, chain)
            .into_iter()
            .map(|id| {
                let tx = self.build_htlc_claim(
                    height,
                    node,
                    id,
                    ClaimKind::SuccessLocal,
                    ClaimOptions::default(),
                )?;
                Ok(chain.submit(tx)?.txid())
            })
            .collect()
    }

    /// Moves HTLCs whose outputs were spent on chain to their terminal
    /// state and closes the channel once nothing is left unresolved.
    pub fn sync_with_chain(&mut self, chain: &ChainState) {
        let Some(published) = &self.published else {
            return;
        };
        if !chain.is_confirmed(&published.tx.id()) {
            return;
        }
        let mut updates = Vec::new();
        for h in self.htlcs.iter().filter(|h| h.is_pending()) {
            let Some(outref) = published.htlc_outpoint(h.id) else {
                continue;
            };
            let Some(spender) = chain.confirmed_spender(&outref) else {
                continue;
            };
            let origin = chain.confirmed_tx(&spender).map(|t| t.origin());
            let state = if origin == Some(h.receiver) {
                HtlcState::ClaimedBySuccess
            } else {
                HtlcState::ClaimedByTimeout
            };
            updates.push((h.id, state));
        }
        for (id, state) in updates {
            if let Ok(h) = self.htlc_mut(id) {
                h.state = state;
            }
        }
        if self.pending_count() == 0 {
            self.status = ChannelStatus::Closed;
        }
    }
}

#[cfg(test)]
mod tests;
