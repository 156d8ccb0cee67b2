use super::config::{AttackConfig, PreimageRelease};
use super::report::{AttackReport, ReplacementRecord, TraceRow};
use super::{compute_htlc_value, AttackError};
use crate::chain::{
    ChainState, ChannelId, OutputKind, Rejected, Submitted, Transaction, TxOutput, GENESIS_TXID,
};
use crate::channel::{
    Channel, ChannelError, ChannelSetup, ChannelStatus, ClaimKind, ClaimOptions, FeeBumping,
    FeeUpdatePolicy, HtlcState, Preimage, Responsiveness, BUMP_INPUT_WEIGHT,
    FUNDING_TX_BASE_WEIGHT, WALLET_INPUT_WEIGHT,
};
use crate::fees::simulate_feerate_strategy;
use crate::types::{Feerate, NodeId, OutputRef, Sat, Txid, Weight};

/// The attacker's paying node.
pub const SOURCE: NodeId = NodeId(0);
/// The attacker's receiving node.
pub const TARGET: NodeId = NodeId(1);
/// Owner of background traffic.
pub const FILLER: NodeId = NodeId(u32::MAX);
/// Weight of a one-input, one-output child used for CPFP.
pub const CPFP_CHILD_WEIGHT: Weight = 440;

pub fn victim_node(i: u32) -> NodeId {
    NodeId(2 + i)
}

fn is_victim(node: NodeId) -> bool {
    node.0 >= 2 && node != FILLER
}

struct Victim {
    node: NodeId,
    /// Source to victim: the channel the attacker drains.
    attacked: Channel,
    /// Victim to target: settled off-chain.
    outgoing: Channel,
    bump_coins: Vec<(OutputRef, Sat)>,
}

fn ctx(what: &'static str, i: usize) -> impl Fn(ChannelError) -> AttackError {
    move |source| AttackError::Channel {
        context: format!("{what} on victim channel {i}"),
        source,
    }
}

/// Runs one attack from channel opening to the last resolved HTLC.
///
/// Each tick the chain sits at height `h`; agents act and then block `h+1`
/// is mined. Victims close once `h + delta >= expiry` and may add new
/// HTLC-success claims only while `h < expiry`. The attacker starts
/// claiming by timeout at `h = expiry`, replacing any victim claim still
/// in the mempool.
pub fn run_attack(config: &AttackConfig) -> Result<AttackReport, AttackError> {
    config.validate()?;
    let n = config.num_victim_channels;
    let a = config.htlcs_per_channel();
    let profile = &config.victim_profile;
    let expiry = config.htlc_expiry_height;
    let weights = config.weights;

    let fee_trace = match &config.fee_series {
        Some(series) => {
            let open = config
                .fee_series_open_height
                .unwrap_or(series.first_height());
            Some(simulate_feerate_strategy(
                series,
                config.feerate_strategy,
                open,
            )?)
        }
        None => None,
    };
    let open_rate = fee_trace
        .as_ref()
        .map_or(config.channel_feerate, |t| t.updates[0].1);

    // Genesis: one exact-size coin per funding transaction, bump coins for
    // anchor-style victims, one coin per background transaction.
    let funding_grant =
        config.channel_funding + open_rate.fee_for(FUNDING_TX_BASE_WEIGHT + WALLET_INPUT_WEIGHT);
    let anchor = profile.fee_bumping == FeeBumping::Anchor;
    let bump_fee = config
        .victim_bump_feerate
        .fee_for(weights.htlc_success_weight + BUMP_INPUT_WEIGHT);
    let ticks = expiry + config.max_post_expiry_ticks;
    let traffic_plan = config
        .background_traffic
        .map(|t| t.plan(ticks + 1, config.seed))
        .unwrap_or_default();

    let mut grants: Vec<(NodeId, Sat)> = Vec::new();
    grants.extend((0..n).map(|_| (SOURCE, funding_grant)));
    grants.extend((0..n).map(|i| (victim_node(i), funding_grant)));
    let bump_base = grants.len();
    if anchor {
        for i in 0..n {
            grants.extend((0..a).map(|_| (victim_node(i), bump_fee)));
        }
    }
    let filler_base = grants.len();
    for (w, f) in traffic_plan.iter().flatten() {
        grants.push((FILLER, f.fee_for(*w) + 1));
    }
    let mut chain = ChainState::with_genesis(config.blockmaxweight, &grants);
    chain.set_audit(false);

    // Open every channel in one go.
    let max_in_flight = config.max_in_flight();
    let params = profile.channel_params(open_rate, max_in_flight);
    let mut victims = Vec::with_capacity(n as usize);
    for i in 0..n {
        let node = victim_node(i);
        let setup = |id, initiator, peer| ChannelSetup {
            id: ChannelId(id),
            initiator,
            peer,
            funding: config.channel_funding,
            initiator_params: params,
            peer_params: params,
            weights,
            htlc_txs_signal_rbf: !profile.non_replaceable_htlc_success,
            anchor_outputs: anchor,
        };
        let attacked = Channel::open_unconfirmed(setup(2 * i, SOURCE, node), &mut chain)
            .map_err(ctx("open", i as usize))?;
        let outgoing = Channel::open_unconfirmed(setup(2 * i + 1, node, TARGET), &mut chain)
            .map_err(ctx("open", i as usize))?;
        let bump_coins = if anchor {
            let first = bump_base + (i * a) as usize;
            (first..first + a as usize)
                .rev()
                .map(|k| (OutputRef::new(GENESIS_TXID, k as u32), bump_fee))
                .collect()
        } else {
            Vec::new()
        };
        victims.push(Victim {
            node,
            attacked,
            outgoing,
            bump_coins,
        });
    }
    let mut trace = Vec::new();
    let mut audited = 0;
    while !chain.mempool().is_empty() {
        mine(&mut chain, config, &mut trace, &mut audited)?;
    }
    if chain.height() + config.close_delta() >= expiry {
        return Err(AttackError::InvalidConfig(format!(
            "setup took {} blocks, leaving no room before closing for expiry {}",
            chain.height(),
            expiry
        )));
    }

    // Optional feerate minimization, accepted by victims because every
    // proposal equals their own estimate.
    if let Some(t) = &fee_trace {
        for &(_, rate) in &t.updates[1..] {
            for (i, v) in victims.iter_mut().enumerate() {
                v.attacked
                    .update_fee(SOURCE, rate, rate, FeeUpdatePolicy::default())
                    .map_err(ctx("update_fee", i))?;
                v.outgoing
                    .update_fee(v.node, rate, rate, FeeUpdatePolicy::default())
                    .map_err(ctx("update_fee", i))?;
            }
        }
    }
    let channel_feerate = victims[0].attacked.feerate();

    // Route `a` HTLCs per channel through each victim.
    let fee = victims[0].attacked.commitment_fee(a as usize);
    let htlc_value = compute_htlc_value(config.channel_funding, max_in_flight, a, fee)?;
    let preimage = |i: u32, k: u32| Preimage(((i as u64) << 32) | k as u64);
    let forward_expiry = expiry
        .saturating_sub(profile.htlc_expiry_delta)
        .max(chain.height() + 1);
    for (i, v) in victims.iter_mut().enumerate() {
        for k in 0..a {
            let hash = preimage(i as u32, k).hash();
            v.attacked
                .add_htlc(SOURCE, htlc_value, hash, expiry)
                .map_err(ctx("add_htlc", i))?;
            v.outgoing
                .add_htlc(v.node, htlc_value, hash, forward_expiry)
                .map_err(ctx("add_htlc", i))?;
        }
    }

    // The target settles with the victims, the source goes silent.
    let order: Vec<(u32, u32)> = match config.preimage_release {
        PreimageRelease::PerChannelBatch => {
            (0..n).flat_map(|i| (0..a).map(move |k| (i, k))).collect()
        }
        PreimageRelease::Interleaved => (0..a).flat_map(|k| (0..n).map(move |i| (i, k))).collect(),
    };
    for (i, k) in order {
        let v = &mut victims[i as usize];
        let pre = preimage(i, k);
        v.outgoing
            .fulfill_htlc_offchain(k as u64, pre, Responsiveness::Responsive)
            .map_err(ctx("fulfill", i as usize))?;
        match v
            .attacked
            .fulfill_htlc_offchain(k as u64, pre, Responsiveness::Silent)
        {
            Err(ChannelError::CounterpartyUnresponsive) => {}
            other => other.map_err(ctx("fulfill", i as usize))?,
        }
    }

    // Closing race.
    let mut state = TickState {
        replacements: Vec::new(),
        late_victim_submissions: 0,
        attacker_rejections: 0,
    };
    let end = expiry + config.max_post_expiry_ticks;
    loop {
        let h = chain.height();
        if let Some(batch) = traffic_plan.get(h as usize) {
            let first = filler_base + h as usize * batch.len();
            for (j, &(w, f)) in batch.iter().enumerate() {
                let coin = OutputRef::new(GENESIS_TXID, (first + j) as u32);
                let fee = f.fee_for(w);
                let tx = Transaction::new(
                    vec![coin],
                    vec![TxOutput::new(1, FILLER, OutputKind::Filler)],
                    w,
                    fee,
                    false,
                    FILLER,
                );
                chain
                    .submit(tx)
                    .map_err(|e| AttackError::Background(e.to_string()))?;
            }
        }

        let attacker_moves = h >= expiry;
        if attacker_moves && config.attacker_first_at_expiry {
            attacker_tick(&mut chain, &victims, config, &mut state)?;
            victims_tick(&mut chain, &mut victims, config, &mut state)?;
        } else {
            victims_tick(&mut chain, &mut victims, config, &mut state)?;
            if attacker_moves {
                attacker_tick(&mut chain, &victims, config, &mut state)?;
            }
        }

        mine(&mut chain, config, &mut trace, &mut audited)?;
        for v in victims.iter_mut() {
            v.attacked.sync_with_chain(&chain);
        }
        let done = victims
            .iter()
            .all(|v| v.attacked.status() == ChannelStatus::Closed);
        if done || chain.height() >= end {
            break;
        }
    }
    if config.audit {
        chain
            .audit_history()
            .map_err(|violation| AttackError::Invariant {
                height: chain.height(),
                violation,
            })?;
    }

    let mut report = AttackReport {
        n_channels: n,
        htlcs_per_channel: a,
        htlc_value,
        channel_feerate,
        close_delta: config.close_delta(),
        total_htlcs: 0,
        stolen_htlcs: 0,
        victim_claimed_htlcs: 0,
        unresolved_htlcs: 0,
        stolen_value: 0,
        victim_fees_paid: 0,
        attacker_cost: 0,
        final_height: chain.height(),
        late_victim_submissions: state.late_victim_submissions,
        attacker_rejections: state.attacker_rejections,
        heights_audited: audited,
        replacements: state.replacements,
        trace,
    };
    for v in &victims {
        for htlc in v.attacked.htlcs() {
            report.total_htlcs += 1;
            match htlc.state {
                HtlcState::ClaimedByTimeout if htlc.knows_preimage(v.node) => {
                    report.stolen_htlcs += 1;
                    report.stolen_value += htlc.amount;
                }
                HtlcState::ClaimedBySuccess => report.victim_claimed_htlcs += 1,
                _ => report.unresolved_htlcs += 1,
            }
        }
    }
    for tx in chain.blocks().iter().flat_map(|b| &b.txs) {
        let first_kind = tx.outputs().first().map(|o| o.kind);
        if matches!(first_kind, Some(OutputKind::ToLocal(_))) {
            // The source opened every attacked channel and pays its
            // commitment fee.
            report.attacker_cost += tx.fee();
        } else if tx.origin() == SOURCE || tx.origin() == TARGET {
            report.attacker_cost += tx.fee();
        } else if is_victim(tx.origin()) && !matches!(first_kind, Some(OutputKind::Funding(_))) {
            report.victim_fees_paid += tx.fee();
        }
    }
    Ok(report)
}

struct TickState {
    replacements: Vec<ReplacementRecord>,
    late_victim_submissions: u64,
    attacker_rejections: u64,
}

fn mine(
    chain: &mut ChainState,
    config: &AttackConfig,
    trace: &mut Vec<TraceRow>,
    audited: &mut u32,
) -> Result<(), AttackError> {
    let block = chain.mine_block();
    let mut row = TraceRow {
        height: block.height,
        block_weight_used: block.total_weight,
        victim_tx_confirmed: 0,
        attacker_tx_confirmed: 0,
    };
    for tx in &block.txs {
        if is_victim(tx.origin()) {
            row.victim_tx_confirmed += 1;
        } else if tx.origin() == SOURCE || tx.origin() == TARGET {
            row.attacker_tx_confirmed += 1;
        }
    }
    trace.push(row);
    if config.audit {
        chain
            .check_invariants()
            .map_err(|violation| AttackError::Invariant {
                height: chain.height(),
                violation,
            })?;
        *audited += 1;
    }
    Ok(())
}

fn victims_tick(
    chain: &mut ChainState,
    victims: &mut [Victim],
    config: &AttackConfig,
    state: &mut TickState,
) -> Result<(), AttackError> {
    let h = chain.height();
    let expiry = config.htlc_expiry_height;
    let profile = &config.victim_profile;
    for (i, v) in victims.iter_mut().enumerate() {
        match v.attacked.status() {
            ChannelStatus::Open => {
                let delta = profile.effective_broadcast_delta(v.attacked.pending_count());
                if h + delta >= expiry {
                    let sent = v
                        .attacked
                        .force_close(v.node, chain)
                        .map_err(ctx("force_close", i))?;
                    if h >= expiry {
                        state.late_victim_submissions += sent.len() as u64 - 1;
                    }
                }
            }
            ChannelStatus::ForceClosing => {
                let commitment = v.attacked.published_commitment().expect("closing").tx.id();
                let may_claim =
                    chain.is_confirmed(&commitment) || !profile.wait_for_commit_confirmation;
                if may_claim && h < expiry {
                    for r in v.attacked.claim_incoming(v.node, chain) {
                        r.map_err(ctx("claim", i))?;
                    }
                }
                if h == expiry {
                    bump_pending_claims(chain, v, config);
                }
            }
            ChannelStatus::Closed => {}
        }
    }
    Ok(())
}

/// Last-moment fee bumps on the victim's claims still in the mempool at the
/// expiry tick. Rejections are expected when the attacker already holds the
/// output.
fn bump_pending_claims(chain: &mut ChainState, v: &mut Victim, config: &AttackConfig) {
    let bumping = config.victim_profile.fee_bumping;
    if bumping == FeeBumping::None {
        return;
    }
    let Some(published) = v.attacked.published_commitment() else {
        return;
    };
    let pending: Vec<(u64, Transaction)> = v
        .attacked
        .pending_htlcs()
        .filter_map(|htlc| {
            let outref = published.htlc_outpoint(htlc.id)?;
            let spender = chain.mempool().spender_of(&outref)?;
            let tx = chain.mempool().get(&spender)?;
            (tx.origin() == v.node).then(|| (htlc.id, tx.clone()))
        })
        .collect();
    let h = chain.height();
    for (htlc_id, claim) in pending {
        match bumping {
            FeeBumping::Cpfp => {
                let target = config
                    .victim_bump_feerate
                    .fee_for(claim.weight() + CPFP_CHILD_WEIGHT);
                let child_fee = target.saturating_sub(claim.fee()).max(1);
                let value = claim.outputs()[0].value;
                if child_fee >= value {
                    continue;
                }
                let child = Transaction::new(
                    vec![claim.outpoint(0)],
                    vec![TxOutput::wallet(value - child_fee, v.node)],
                    CPFP_CHILD_WEIGHT,
                    child_fee,
                    true,
                    v.node,
                );
                let _ = chain.submit(child);
            }
            FeeBumping::Anchor => {
                let Some(coin) = v.bump_coins.pop() else {
                    continue;
                };
                let fee = config
                    .victim_bump_feerate
                    .fee_for(v.attacked.weights().htlc_success_weight + BUMP_INPUT_WEIGHT);
                let opts = ClaimOptions {
                    fee_override: Some(fee),
                    signal_rbf: true,
                    bump_input: Some(coin),
                };
                if let Ok(tx) =
                    v.attacked
                        .build_htlc_claim(h, v.node, htlc_id, ClaimKind::SuccessLocal, opts)
                {
                    let _ = chain.submit(tx);
                }
            }
            FeeBumping::None => unreachable!(),
        }
    }
}

fn attacker_tick(
    chain: &mut ChainState,
    victims: &[Victim],
    config: &AttackConfig,
    state: &mut TickState,
) -> Result<(), AttackError> {
    let h = chain.height();
    let timeout_weight = config.weights.htlc_timeout_weight;
    for (i, v) in victims.iter().enumerate() {
        let Some(published) = v.attacked.published_commitment() else {
            continue;
        };
        let commitment = published.tx.id();
        if !chain.is_confirmed(&commitment) && !chain.mempool().contains(&commitment) {
            continue;
        }
        for htlc in v.attacked.pending_htlcs() {
            if htlc.expiry_height > h {
                continue;
            }
            let outref = published
                .htlc_outpoint(htlc.id)
                .expect("pending htlc has an output");
            if chain.confirmed_spender(&outref).is_some() {
                continue;
            }
            let conflict = match chain.mempool().spender_of(&outref) {
                Some(id)
                    if chain
                        .mempool()
                        .get(&id)
                        .is_some_and(|t| t.origin() == SOURCE) =>
                {
                    continue
                }
                Some(id) => Some(eviction_cost(chain, id)),
                None => None,
            };
            let fee = match conflict {
                Some((fees, top)) => (fees + config.attacker_fee_bump_increment)
                    .max(top.min_fee_exceeding(timeout_weight)),
                None => v.attacked.feerate().fee_for(timeout_weight),
            };
            if fee > htlc.amount {
                state.attacker_rejections += 1;
                continue;
            }
            let opts = ClaimOptions {
                fee_override: Some(fee),
                signal_rbf: false,
                bump_input: None,
            };
            let tx = v
                .attacked
                .build_htlc_claim(h, SOURCE, htlc.id, ClaimKind::TimeoutRemote, opts)
                .map_err(ctx("timeout claim", i))?;
            let feerate = tx.feerate();
            match chain.submit(tx) {
                Ok(Submitted::Replaced { .. }) => {
                    let (evicted_fees, max_evicted_rate) =
                        conflict.expect("replacement had a conflict");
                    state.replacements.push(ReplacementRecord {
                        height: h,
                        fee,
                        feerate,
                        evicted_fees,
                        max_evicted_rate,
                    });
                }
                Ok(Submitted::Accepted(_)) => {}
                Err(
                    Rejected::ConflictNotReplaceable(_)
                    | Rejected::InsufficientReplacementFee { .. },
                ) => {
                    state.attacker_rejections += 1;
                }
                Err(e) => {
                    return Err(AttackError::Channel {
                        context: format!("timeout claim on victim channel {i}"),
                        source: e.into(),
                    })
                }
            }
        }
    }
    Ok(())
}

/// Total fee and highest feerate among a pending transaction and its
/// descendants.
fn eviction_cost(chain: &ChainState, root: Txid) -> (Sat, Feerate) {
    let mut evicted = vec![root];
    evicted.extend(chain.mempool().descendants(&[root]));
    let top = evicted
        .iter()
        .filter_map(|t| chain.mempool().get(t))
        .map(|t| t.feerate())
        .max()
        .unwrap_or(Feerate::ZERO);
    (chain.mempool().fees_of(&evicted), top)
}
