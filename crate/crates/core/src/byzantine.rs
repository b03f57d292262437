//! Misbehaviour injected on validators flagged as Byzantine.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::consensus::Vote;
use crate::crypto::{sha256, CanonicalDigest, SecretKey};
use crate::fees::base_fee_for_unit;
use crate::oracle::ExchangeRateTable;
use crate::types::{Amount, Block, ChainConfig, Digest, Signature, TaggedTransaction, TxEnvelope, TxKind, ValidatorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ByzantineStrategy {
    /// Sends nothing at all.
    Silence,
    /// Sends conflicting proposals and votes to different peers.
    Equivocate,
    /// Packs an unfunded transaction into its proposals.
    PackInvalid,
    /// Rewrites a packed transaction's unit (even heights) or base fee (odd heights).
    UnitTamper,
}

impl ByzantineStrategy {
    pub const ALL: [ByzantineStrategy; 4] =
        [ByzantineStrategy::Silence, ByzantineStrategy::Equivocate, ByzantineStrategy::PackInvalid, ByzantineStrategy::UnitTamper];

    pub fn name(&self) -> &'static str {
        match self {
            ByzantineStrategy::Silence => "silence",
            ByzantineStrategy::Equivocate => "equivocate",
            ByzantineStrategy::PackInvalid => "pack_invalid",
            ByzantineStrategy::UnitTamper => "unit_tamper",
        }
    }
}

impl fmt::Display for ByzantineStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ByzantineStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ByzantineStrategy::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

/// Appends a transfer from an account that holds nothing.
pub fn pack_invalid(block: &mut Block, config: &ChainConfig, rates: &ExchangeRateTable) {
    let key = SecretKey::from_name(&format!("byzantine:unfunded:{}", block.height));
    let env = TxEnvelope {
        sender: key.address(),
        recipient: Some(key.address()),
        nonce: 0,
        tip: Amount::ZERO,
        gas_limit: crate::ledger::TRANSFER_GAS,
        transfer_amount: Amount::tokens(1),
        payload: vec![],
        kind: TxKind::Transfer,
        signature: Signature([0; 64]),
    }
    .sign(&key);
    let unit = config.reference_unit;
    let base = base_fee_for_unit(unit, rates, config).map(|q| q.base_fee_per_gas).unwrap_or(config.reference_base_fee);
    block.transactions.push(TaggedTransaction::from_envelope(env, unit, base));
}

/// Alters the first packed transaction and returns the digest of the altered
/// copy, or `None` if the block is empty.
pub fn tamper_unit(block: &mut Block, config: &ChainConfig) -> Option<Digest> {
    let flip_unit = block.height.is_multiple_of(2) && config.units.len() > 1;
    let tx = block.transactions.first_mut()?;
    if flip_unit {
        let i = config.units.iter().position(|u| *u == tx.unit).unwrap_or(0);
        tx.unit = config.units[(i + 1) % config.units.len()];
    } else {
        tx.base_fee = tx.base_fee.checked_add(Amount::giga(1)).unwrap_or(Amount::ZERO);
    }
    Some(tx.digest())
}

/// A conflicting twin of an outbound vote.
pub fn conflicting_vote(v: &Vote) -> Vote {
    let block = match v.block {
        Some(_) => None,
        None => Some(sha256(&[b"equivocation", &v.height.to_be_bytes(), &v.round.to_be_bytes()])),
    };
    Vote { block, ..v.clone() }
}

/// Recipients that get the second message of an equivocating pair.
pub fn equivocation_targets(peers: &[ValidatorId]) -> Vec<ValidatorId> {
    peers.iter().copied().filter(|p| p.0 % 2 == 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::VoteKind;
    use crate::types::CurrencyUnit;

    fn block(height: u64) -> Block {
        let key = SecretKey::from_name("x");
        let env = TxEnvelope {
            sender: key.address(),
            recipient: Some(key.address()),
            nonce: 0,
            tip: Amount::ZERO,
            gas_limit: 21_000,
            transfer_amount: Amount::ZERO,
            payload: vec![],
            kind: TxKind::Transfer,
            signature: Signature([0; 64]),
        }
        .sign(&key);
        Block {
            height,
            proposer: ValidatorId(0),
            parent_hash: Digest::zero(),
            transactions: vec![TaggedTransaction::from_envelope(env, CurrencyUnit::new("USD").unwrap(), Amount::giga(1))],
            rate_snapshot_height: 0,
            state_root: Digest::zero(),
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in ByzantineStrategy::ALL {
            assert_eq!(s.name().parse::<ByzantineStrategy>(), Ok(s));
        }
        assert_eq!("Unit-Tamper".parse::<ByzantineStrategy>(), Ok(ByzantineStrategy::UnitTamper));
    }

    #[test]
    fn tamper_changes_unit_or_base_fee() {
        let config = ChainConfig::example(4);
        let mut even = block(2);
        let before = even.transactions[0].digest();
        let after = tamper_unit(&mut even, &config).unwrap();
        assert_ne!(before, after);
        assert_eq!(even.transactions[0].unit.as_str(), "CNY");
        let mut odd = block(3);
        tamper_unit(&mut odd, &config).unwrap();
        assert_eq!(odd.transactions[0].base_fee, Amount::giga(2));
        let mut empty = Block { transactions: vec![], ..block(2) };
        assert_eq!(tamper_unit(&mut empty, &config), None);
    }

    #[test]
    fn conflicting_vote_differs() {
        let v = Vote { kind: VoteKind::Prevote, height: 1, round: 0, block: Some(Digest([1; 32])), voter: ValidatorId(0) };
        assert_eq!(conflicting_vote(&v).block, None);
        assert!(conflicting_vote(&conflicting_vote(&v)).block.is_some());
    }
}
