use proptest::prelude::*;

use super::*;
use crate::chain::{Submitted, GENESIS_TXID};

const SOURCE: NodeId = NodeId(0);
const VICTIM: NodeId = NodeId(2);
const RATE: Feerate = Feerate(2_500);

fn setup(profile: &NodeProfile, funding: Sat) -> (ChainState, Channel) {
    let mut chain = ChainState::with_genesis(4_000_000, &[(SOURCE, 50_000_000), (VICTIM, 1_000)]);
    let params = profile.channel_params(RATE, Sat::MAX);
    let ch = Channel::open(
        ChannelSetup {
            id: ChannelId(1),
            initiator: SOURCE,
            peer: VICTIM,
            funding,
            initiator_params: params,
            peer_params: params,
            weights: WeightSchedule::default(),
            htlc_txs_signal_rbf: true,
            anchor_outputs: false,
        },
        &mut chain,
    )
    .unwrap();
    (chain, ch)
}

fn load(ch: &mut Channel, n: u64, amount: Sat, expiry: Height) -> Vec<u64> {
    (0..n)
        .map(|i| {
            let id = ch
                .add_htlc(SOURCE, amount, Preimage(i).hash(), expiry)
                .unwrap();
            ch.learn_preimage(id, VICTIM, Preimage(i)).unwrap();
            id
        })
        .collect()
}

#[test]
fn single_funded_open() {
    let (chain, ch) = setup(&NodeProfile::lnd(), 1_000_000);
    assert_eq!(ch.balance(SOURCE).unwrap(), 1_000_000);
    assert_eq!(ch.balance(VICTIM).unwrap(), 0);
    assert_eq!(ch.status(), ChannelStatus::Open);
    let out = chain.utxo(&ch.funding_outpoint()).unwrap();
    assert_eq!(out.value, 1_000_000);
    assert_eq!(out.kind, OutputKind::Funding(ChannelId(1)));
}

#[test]
fn open_beyond_wallet_fails() {
    let mut chain = ChainState::with_genesis(4_000_000, &[(SOURCE, 500_000)]);
    let params = NodeProfile::lnd().channel_params(RATE, Sat::MAX);
    let err = Channel::open(
        ChannelSetup {
            id: ChannelId(1),
            initiator: SOURCE,
            peer: VICTIM,
            funding: 1_000_000,
            initiator_params: params,
            peer_params: params,
            weights: WeightSchedule::default(),
            htlc_txs_signal_rbf: true,
            anchor_outputs: false,
        },
        &mut chain,
    )
    .unwrap_err();
    assert!(matches!(
        err,
        ChannelError::InsufficientFunds { have: 500_000, .. }
    ));
}

#[test]
fn successive_opens_use_distinct_outpoints() {
    let mut chain = ChainState::with_genesis(4_000_000, &[(SOURCE, 5_000_000)]);
    let params = NodeProfile::lnd().channel_params(RATE, Sat::MAX);
    let mk = |id| ChannelSetup {
        id: ChannelId(id),
        initiator: SOURCE,
        peer: VICTIM,
        funding: 1_000_000,
        initiator_params: params,
        peer_params: params,
        weights: WeightSchedule::default(),
        htlc_txs_signal_rbf: true,
        anchor_outputs: false,
    };
    // The second spends the first's unconfirmed change.
    let a = Channel::open_unconfirmed(mk(1), &mut chain).unwrap();
    let b = Channel::open_unconfirmed(mk(2), &mut chain).unwrap();
    chain.mine_block();
    assert_ne!(a.funding_outpoint(), b.funding_outpoint());
    assert!(chain.utxo(&a.funding_outpoint()).is_some());
    assert!(chain.utxo(&b.funding_outpoint()).is_some());
    let funded: Vec<_> = chain
        .utxo_set()
        .values()
        .filter(|o| matches!(o.kind, OutputKind::Funding(_)))
        .collect();
    assert_eq!(funded.len(), 2);
    assert_ne!(a.funding_outpoint().txid, GENESIS_TXID);
}

#[test]
fn htlc_limit_483() {
    let (_, mut ch) = setup(&NodeProfile::lnd(), 16_000_000);
    load(&mut ch, 483, 2_049, 100);
    let err = ch
        .add_htlc(SOURCE, 2_049, Preimage(999).hash(), 100)
        .unwrap_err();
    assert_eq!(err, ChannelError::TooManyHtlcs { limit: 483 });
}

#[test]
fn in_flight_total_483_by_2049() {
    let (_, mut ch) = setup(&NodeProfile::lnd(), 16_000_000);
    load(&mut ch, 483, 2_049, 100);
    assert_eq!(ch.in_flight_offered_by(SOURCE), 989_667);
    assert_eq!(ch.pending_count(), 483);
}

#[test]
fn zero_amount_htlc_depends_on_minimum() {
    let (_, mut ch) = setup(&NodeProfile::lnd(), 1_000_000);
    let err = ch.add_htlc(SOURCE, 0, Preimage(1).hash(), 100).unwrap_err();
    assert_eq!(
        err,
        ChannelError::BelowMinimum {
            amount: 0,
            minimum: 1
        }
    );

    let mut chain = ChainState::with_genesis(4_000_000, &[(SOURCE, 5_000_000)]);
    let mut params = NodeProfile::lnd().channel_params(RATE, Sat::MAX);
    params.htlc_minimum = 0;
    let mut ch = Channel::open(
        ChannelSetup {
            id: ChannelId(1),
            initiator: SOURCE,
            peer: VICTIM,
            funding: 1_000_000,
            initiator_params: params,
            peer_params: params,
            weights: WeightSchedule::default(),
            htlc_txs_signal_rbf: true,
            anchor_outputs: false,
        },
        &mut chain,
    )
    .unwrap();
    let id = ch.add_htlc(SOURCE, 0, Preimage(1).hash(), 100).unwrap();
    assert!(ch.htlc(id).unwrap().is_pending());
}

#[test]
fn value_in_flight_limit() {
    let mut chain = ChainState::with_genesis(4_000_000, &[(SOURCE, 5_000_000)]);
    let params = NodeProfile::lnd().channel_params(RATE, 10_000);
    let mut ch = Channel::open(
        ChannelSetup {
            id: ChannelId(1),
            initiator: SOURCE,
            peer: VICTIM,
            funding: 1_000_000,
            initiator_params: params,
            peer_params: params,
            weights: WeightSchedule::default(),
            htlc_txs_signal_rbf: true,
            anchor_outputs: false,
        },
        &mut chain,
    )
    .unwrap();
    ch.add_htlc(SOURCE, 6_000, Preimage(1).hash(), 100).unwrap();
    let err = ch
        .add_htlc(SOURCE, 4_001, Preimage(2).hash(), 100)
        .unwrap_err();
    assert_eq!(
        err,
        ChannelError::ValueInFlightExceeded {
            attempted: 10_001,
            limit: 10_000
        }
    );
}

#[test]
fn add_requires_balance_for_amount_and_fee() {
    let (_, mut ch) = setup(&NodeProfile::lnd(), 100_000);
    // 100_000 - fee(1 htlc)=2_240 leaves 97_760.
    let err = ch
        .add_htlc(SOURCE, 97_761, Preimage(1).hash(), 100)
        .unwrap_err();
    assert!(matches!(err, ChannelError::InsufficientBalance { .. }));
    ch.add_htlc(SOURCE, 97_760, Preimage(1).hash(), 100)
        .unwrap();
    // Victim has nothing to offer.
    let err = ch.add_htlc(VICTIM, 1, Preimage(2).hash(), 100).unwrap_err();
    assert!(matches!(err, ChannelError::InsufficientBalance { .. }));
}

#[test]
fn fulfill_offchain_paths() {
    let (_, mut ch) = setup(&NodeProfile::lnd(), 1_000_000);
    let a = ch
        .add_htlc(SOURCE, 10_000, Preimage(1).hash(), 100)
        .unwrap();
    let b = ch
        .add_htlc(SOURCE, 20_000, Preimage(2).hash(), 100)
        .unwrap();

    ch.fulfill_htlc_offchain(a, Preimage(1), Responsiveness::Responsive)
        .unwrap();
    assert_eq!(ch.balance(VICTIM).unwrap(), 10_000);
    assert_eq!(ch.htlc(a).unwrap().state, HtlcState::FulfilledOffchain);

    assert_eq!(
        ch.fulfill_htlc_offchain(b, Preimage(3), Responsiveness::Responsive),
        Err(ChannelError::UnknownPreimage)
    );
    assert_eq!(
        ch.fulfill_htlc_offchain(b, Preimage(2), Responsiveness::Silent),
        Err(ChannelError::CounterpartyUnresponsive)
    );
    let htlc = ch.htlc(b).unwrap();
    assert!(htlc.is_pending());
    assert!(htlc.knows_preimage(VICTIM));
    assert_eq!(ch.balance(VICTIM).unwrap(), 10_000);
}

#[test]
fn commitment_weight_and_fee() {
    let (_, mut ch) = setup(&NodeProfile::lnd(), 16_000_000);
    let empty = ch.build_commitment(VICTIM).unwrap();
    assert_eq!(empty.weight(), 724);
    assert_eq!(empty.fee(), 1_810);
    assert_eq!(empty.outputs().len(), 2);
    assert!(!empty.rbf_signal());

    load(&mut ch, 483, 2_049, 100);
    let full = ch.build_commitment(VICTIM).unwrap();
    assert_eq!(full.weight(), 83_800);
    assert_eq!(full.fee(), 209_500);
    assert_eq!(full.outputs().len(), 2 + 483);
    assert_eq!(full.output_value() + full.fee(), 16_000_000);
    // Fee comes out of the initiator's output, which is to_remote for the
    // victim's commitment.
    assert_eq!(full.outputs()[0].value, 0);
    assert_eq!(full.outputs()[1].value, 16_000_000 - 989_667 - 209_500);
}

#[test]
fn success_local_fee_is_presigned() {
    let (mut chain, mut ch) = setup(&NodeProfile::lnd(), 16_000_000);
    let ids = load(&mut ch, 3, 50_000, 100);
    ch.force_close(VICTIM, &mut chain).unwrap();
    let tx = ch
        .build_htlc_claim(
            chain.height(),
            VICTIM,
            ids[0],
            ClaimKind::SuccessLocal,
            ClaimOptions::default(),
        )
        .unwrap();
    assert_eq!(tx.fee(), 1_757);
    assert_eq!(tx.weight(), 703);
    assert!(tx.rbf_signal());
    let err = ch
        .build_htlc_claim(
            chain.height(),
            VICTIM,
            ids[0],
            ClaimKind::SuccessLocal,
            ClaimOptions {
                fee_override: Some(5_000),
                ..Default::default()
            },
        )
        .unwrap_err();
    assert_eq!(err, ChannelError::FeeOverrideOnDualSigned);
}

#[test]
fn timeout_claim_waits_for_expiry() {
    let (mut chain, mut ch) = setup(&NodeProfile::lnd(), 16_000_000);
    let ids = load(&mut ch, 1, 50_000, 5);
    ch.force_close(VICTIM, &mut chain).unwrap();
    chain.mine_block();
    let early = ch.build_htlc_claim(
        chain.height(),
        SOURCE,
        ids[0],
        ClaimKind::TimeoutRemote,
        ClaimOptions::default(),
    );
    assert_eq!(
        early.unwrap_err(),
        ChannelError::PrematureTimeout {
            expiry: 5,
            height: 2
        }
    );
    assert!(ch
        .build_htlc_claim(
            5,
            SOURCE,
            ids[0],
            ClaimKind::TimeoutRemote,
            ClaimOptions::default()
        )
        .is_ok());
}

#[test]
fn attacker_timeout_replaces_victim_success() {
    let (mut chain, mut ch) = setup(&NodeProfile::lnd(), 16_000_000);
    let ids = load(&mut ch, 1, 50_000, 1);
    ch.force_close(VICTIM, &mut chain).unwrap();
    chain.mine_block();
    let victim_tx = ch
        .build_htlc_claim(
            chain.height(),
            VICTIM,
            ids[0],
            ClaimKind::SuccessLocal,
            ClaimOptions::default(),
        )
        .unwrap();
    let victim_id = chain.submit(victim_tx.clone()).unwrap().txid();
    let attacker_tx = ch
        .build_htlc_claim(
            chain.height(),
            SOURCE,
            ids[0],
            ClaimKind::TimeoutRemote,
            ClaimOptions {
                fee_override: Some(victim_tx.fee() + 1),
                signal_rbf: false,
                bump_input: None,
            },
        )
        .unwrap();
    assert!(attacker_tx.feerate() > victim_tx.feerate());
    assert!(!attacker_tx.rbf_signal());
    let r = chain.submit(attacker_tx.clone()).unwrap();
    assert_eq!(
        r,
        Submitted::Replaced {
            txid: attacker_tx.id(),
            evicted: vec![victim_id]
        }
    );
    // The victim cannot take it back.
    assert_eq!(
        chain.submit(victim_tx),
        Err(Rejected::ConflictNotReplaceable(attacker_tx.id()))
    );
    chain.mine_block();
    ch.sync_with_chain(&chain);
    assert_eq!(ch.htlc(ids[0]).unwrap().state, HtlcState::ClaimedByTimeout);
    assert_eq!(ch.status(), ChannelStatus::Closed);
}

#[test]
fn claim_role_checks() {
    let (mut chain, mut ch) = setup(&NodeProfile::lnd(), 16_000_000);
    let id = ch
        .add_htlc(SOURCE, 50_000, Preimage(1).hash(), 100)
        .unwrap();
    assert_eq!(
        ch.build_htlc_claim(
            0,
            VICTIM,
            id,
            ClaimKind::SuccessLocal,
            ClaimOptions::default()
        ),
        Err(ChannelError::NoCommitmentPublished)
    );
    ch.force_close(VICTIM, &mut chain).unwrap();
    assert_eq!(
        ch.build_htlc_claim(
            1,
            VICTIM,
            id,
            ClaimKind::SuccessLocal,
            ClaimOptions::default()
        ),
        Err(ChannelError::PreimageMissing)
    );
    assert!(matches!(
        ch.build_htlc_claim(
            200,
            SOURCE,
            id,
            ClaimKind::TimeoutLocal,
            ClaimOptions::default()
        ),
        Err(ChannelError::WrongClaimant { .. })
    ));
    assert!(matches!(
        ch.build_htlc_claim(
            200,
            VICTIM,
            id,
            ClaimKind::SuccessRemote,
            ClaimOptions::default()
        ),
        Err(ChannelError::WrongClaimant { .. })
    ));
}

#[test]
fn update_fee_rules() {
    let (_, mut ch) = setup(&NodeProfile::lnd(), 1_000_000);
    let policy = FeeUpdatePolicy::default();
    ch.update_fee(SOURCE, Feerate(2_000), Feerate(2_000), policy)
        .unwrap();
    assert_eq!(ch.feerate(), Feerate(2_000));
    assert_eq!(
        ch.update_fee(VICTIM, Feerate(1_000), Feerate(1_000), policy),
        Err(ChannelError::NotInitiator)
    );
    assert!(matches!(
        ch.update_fee(SOURCE, Feerate(20_000), Feerate(2_000), policy),
        Err(ChannelError::UnreasonableFeerate { .. })
    ));
    // Band edges.
    assert!(policy.accepts(Feerate(2_200), Feerate(2_000)));
    assert!(!policy.accepts(Feerate(2_201), Feerate(2_000)));
    assert!(policy.accepts(Feerate(1_800), Feerate(2_000)));
    assert!(!policy.accepts(Feerate(1_799), Feerate(2_000)));
}

#[test]
fn update_fee_changes_claim_fees_before_close_only() {
    let (mut chain, mut ch) = setup(&NodeProfile::lnd(), 16_000_000);
    let ids = load(&mut ch, 2, 50_000, 100);
    ch.update_fee(
        SOURCE,
        Feerate(1_000),
        Feerate(1_000),
        FeeUpdatePolicy::default(),
    )
    .unwrap();
    ch.force_close(VICTIM, &mut chain).unwrap();
    let claim = ch
        .build_htlc_claim(
            1,
            VICTIM,
            ids[0],
            ClaimKind::SuccessLocal,
            ClaimOptions::default(),
        )
        .unwrap();
    assert_eq!(claim.fee(), 703);
    assert_eq!(
        ch.update_fee(
            SOURCE,
            Feerate(5_000),
            Feerate(5_000),
            FeeUpdatePolicy::default()
        ),
        Err(ChannelError::ChannelNotOpen)
    );
}

#[test]
fn lnd_waits_for_commitment_eclair_does_not() {
    let (mut chain, mut ch) = setup(&NodeProfile::lnd(), 16_000_000);
    load(&mut ch, 5, 50_000, 100);
    let sent = ch.force_close(VICTIM, &mut chain).unwrap();
    assert_eq!(sent.len(), 1);
    assert_eq!(
        ch.force_close(VICTIM, &mut chain),
        Err(ChannelError::AlreadyClosing)
    );

    let (mut chain, mut ch) = setup(&NodeProfile::eclair(), 16_000_000);
    load(&mut ch, 5, 50_000, 100);
    let sent = ch.force_close(VICTIM, &mut chain).unwrap();
    assert_eq!(sent.len(), 6);
    // All six confirm together: claims follow their parent in one block.
    let block = chain.mine_block();
    assert_eq!(block.txs.len(), 6);
    assert_eq!(block.txs[0].id(), sent[0]);
}

#[test]
fn close_without_htlcs_is_commitment_only() {
    let (mut chain, mut ch) = setup(&NodeProfile::eclair(), 1_000_000);
    let sent = ch.force_close(VICTIM, &mut chain).unwrap();
    assert_eq!(sent.len(), 1);
    chain.mine_block();
    ch.sync_with_chain(&chain);
    assert_eq!(ch.status(), ChannelStatus::Closed);
}

#[derive(Debug, Clone)]
enum Op {
    Add { by_source: bool, amount: Sat },
    Fulfill { idx: usize, responsive: bool },
    Fee(u64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (any::<bool>(), 0u64..400_000).prop_map(|(by_source, amount)| Op::Add { by_source, amount }),
        2 => (0usize..64, any::<bool>()).prop_map(|(idx, responsive)| Op::Fulfill { idx, responsive }),
        1 => (250u64..20_000).prop_map(Op::Fee),
    ]
}

fn multiset(tx: &Transaction) -> Vec<Sat> {
    let mut v: Vec<Sat> = tx
        .outputs()
        .iter()
        .filter(|o| matches!(o.kind, OutputKind::Htlc { .. }))
        .map(|o| o.value)
        .collect();
    v.sort();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn channel_invariants_hold(ops in proptest::collection::vec(op(), 1..80)) {
        let mut chain = ChainState::with_genesis(4_000_000, &[(SOURCE, 50_000_000)]);
        let mut params = NodeProfile::c_lightning().channel_params(RATE, 3_000_000);
        params.max_accepted_htlcs = 12;
        let mut ch = Channel::open(ChannelSetup {
            id: ChannelId(7),
            initiator: SOURCE,
            peer: VICTIM,
            funding: 4_000_000,
            initiator_params: params,
            peer_params: params,
            weights: WeightSchedule::default(),
            htlc_txs_signal_rbf: true,
            anchor_outputs: false,
        }, &mut chain).unwrap();
        let mut next = 0u64;
        for op in ops {
            match op {
                Op::Add { by_source, amount } => {
                    let who = if by_source { SOURCE } else { VICTIM };
                    next += 1;
                    let _ = ch.add_htlc(who, amount, Preimage(next).hash(), 100);
                }
                Op::Fulfill { idx, responsive } => {
                    if let Some(h) = ch.htlcs().get(idx).cloned() {
                        let pre = (1..=next).map(Preimage).find(|p| p.hash() == h.payment_hash);
                        if let Some(pre) = pre {
                            let r = if responsive { Responsiveness::Responsive } else { Responsiveness::Silent };
                            let _ = ch.fulfill_htlc_offchain(h.id, pre, r);
                        }
                    }
                }
                Op::Fee(rate) => {
                    let _ = ch.update_fee(SOURCE, Feerate(rate), Feerate(rate), FeeUpdatePolicy::default());
                }
            }

            // Limit enforcement.
            for node in [SOURCE, VICTIM] {
                let offered = ch.pending_htlcs().filter(|h| h.offerer == node).count();
                prop_assert!(offered <= 12);
                prop_assert!(ch.in_flight_offered_by(node) <= 3_000_000);
            }
            // Conservation and mirrored HTLC sets.
            let local = ch.build_commitment(VICTIM).unwrap();
            let remote = ch.build_commitment(SOURCE).unwrap();
            prop_assert_eq!(local.output_value() + local.fee(), 4_000_000);
            prop_assert_eq!(remote.output_value() + remote.fee(), 4_000_000);
            prop_assert_eq!(local.fee(), ch.commitment_fee(ch.pending_count()));
            prop_assert_eq!(multiset(&local), multiset(&remote));
            // Weight is affine in the HTLC count.
            prop_assert_eq!(local.weight(), 724 + 172 * ch.pending_count() as u64);
        }
    }
}
