use proptest::prelude::*;

use stablefee_core::crypto::{CanonicalDigest, SecretKey};
use stablefee_core::encoding::{Decode, Encode};
use stablefee_core::governance::{GovernanceBody, ProposalAction};
use stablefee_core::oracle::FeedCall;
use stablefee_core::types::{
    Address, Amount, Block, CurrencyUnit, Digest, Rate, Signature, TaggedTransaction, TxEnvelope, TxKind, ValidatorId,
};
use stablefee_core::U256;

fn unit() -> impl Strategy<Value = CurrencyUnit> {
    prop::sample::select(vec!["USD", "CNY", "EUR", "JPY", "GBP"]).prop_map(|c| CurrencyUnit::new(c).unwrap())
}

fn amount() -> impl Strategy<Value = Amount> {
    any::<[u64; 4]>().prop_map(|w| Amount(U256(w)))
}

fn kind() -> impl Strategy<Value = TxKind> {
    prop::sample::select(vec![TxKind::Transfer, TxKind::Payload, TxKind::Proposal, TxKind::Vote])
}

prop_compose! {
    fn envelope()(
        key in "[a-z]{1,8}",
        to in prop::option::of(any::<[u8; 20]>()),
        nonce in any::<u64>(),
        tip in amount(),
        gas_limit in any::<u64>(),
        value in amount(),
        payload in prop::collection::vec(any::<u8>(), 0..300),
        kind in kind(),
    ) -> TxEnvelope {
        let key = SecretKey::from_name(&key);
        TxEnvelope {
            sender: key.address(),
            recipient: to.map(Address),
            nonce,
            tip,
            gas_limit,
            transfer_amount: value,
            payload,
            kind,
            signature: Signature([0; 64]),
        }
        .sign(&key)
    }
}

prop_compose! {
    fn tagged()(env in envelope(), unit in unit(), base in amount()) -> TaggedTransaction {
        TaggedTransaction::from_envelope(env, unit, base)
    }
}

prop_compose! {
    fn block()(
        height in any::<u64>(),
        proposer in any::<u32>(),
        parent in any::<[u8; 32]>(),
        txs in prop::collection::vec(tagged(), 0..6),
        snap in any::<u64>(),
        root in any::<[u8; 32]>(),
    ) -> Block {
        Block {
            height,
            proposer: ValidatorId(proposer),
            parent_hash: Digest(parent),
            transactions: txs,
            rate_snapshot_height: snap,
            state_root: Digest(root),
        }
    }
}

fn action() -> impl Strategy<Value = ProposalAction> {
    let addr = any::<[u8; 20]>().prop_map(Address);
    prop_oneof![
        (addr.clone(), amount()).prop_map(|(to, amount)| ProposalAction::Mint { to, amount }),
        (addr.clone(), amount()).prop_map(|(from, amount)| ProposalAction::Burn { from, amount }),
        addr.clone().prop_map(|member| ProposalAction::WhitelistAdd { member }),
        addr.clone().prop_map(|member| ProposalAction::WhitelistRemove { member }),
        addr.clone().prop_map(|account| ProposalAction::BlacklistAdd { account }),
        addr.prop_map(|account| ProposalAction::BlacklistRemove { account }),
        any::<u32>().prop_map(ProposalAction::SetCommitteeSize),
        any::<u32>().prop_map(ProposalAction::SetQuorumSize),
    ]
}

proptest! {
    #[test]
    fn envelope_round_trip(env in envelope()) {
        let bytes = env.encode();
        prop_assert_eq!(TxEnvelope::decode(&bytes).unwrap(), env.clone());
        prop_assert!(env.signature_well_formed());
    }

    #[test]
    fn tagged_round_trip_and_digest(tx in tagged()) {
        let bytes = tx.encode();
        let back = TaggedTransaction::decode(&bytes).unwrap();
        prop_assert_eq!(back.digest(), tx.digest());
        prop_assert_eq!(back, tx.clone());
        prop_assert_eq!(tx.envelope().encode(), TaggedTransaction::from_envelope(tx.envelope(), tx.unit, tx.base_fee).envelope().encode());
    }

    #[test]
    fn block_round_trip(b in block()) {
        let bytes = b.encode();
        let back = Block::decode(&bytes).unwrap();
        prop_assert_eq!(back.digest(), b.digest());
        prop_assert_eq!(back, b);
    }

    #[test]
    fn trailing_bytes_rejected(b in block(), extra in 1usize..4) {
        let mut bytes = b.encode();
        bytes.extend(std::iter::repeat_n(0u8, extra));
        prop_assert!(Block::decode(&bytes).is_err());
    }

    #[test]
    fn truncation_rejected(tx in tagged(), cut in 1usize..40) {
        let bytes = tx.encode();
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(TaggedTransaction::decode(&bytes[..keep]).is_err());
    }

    #[test]
    fn unit_change_changes_digest(tx in tagged(), other in unit()) {
        prop_assume!(other != tx.unit);
        let moved = TaggedTransaction { unit: other, ..tx.clone() };
        prop_assert_ne!(moved.digest(), tx.digest());
        // the wallet signature does not cover the unit
        prop_assert!(moved.signature_well_formed());
    }

    #[test]
    fn governance_body_round_trip(a in action(), evidence in prop::collection::vec(any::<u8>(), 0..64), id in any::<[u8; 32]>()) {
        let p = GovernanceBody::Propose { action: a, evidence };
        prop_assert_eq!(GovernanceBody::decode(&p.encode()).unwrap(), p);
        let v = GovernanceBody::Vote { proposal: Digest(id) };
        prop_assert_eq!(GovernanceBody::decode(&v.encode()).unwrap(), v);
    }

    #[test]
    fn feed_call_round_trip(from in unit(), to in unit(), value in 1u64..u64::MAX) {
        let call = FeedCall { rate: Rate { from, to, value } };
        prop_assert_eq!(FeedCall::decode(&call.encode()).unwrap(), call);
    }
}
