//! Deterministic state transition over multi-currency accounts.
//!
//! Every transaction touches exactly one currency unit: its fee, its value
//! transfer and any governance action all live in `tx.unit`. Fees collected in
//! a block are credited to the proposer, never burned.

use std::collections::BTreeMap;

use primitive_types::U256;
use serde::Serialize;
use thiserror::Error;

use crate::crypto::{sha256, validator_address, CanonicalDigest};
use crate::encoding::{put_u64, Decode, Encode};
use crate::fees::{check_base_fee_matches_unit, gas_fee, FeeError};
use crate::governance::{GovError, GovernanceBody, StablecoinGovernance, UnitBalances, VoteOutcome};
use crate::oracle::{ExchangeRateTable, FeedCall, FeedContractState, FEED_CONTRACT};
use crate::types::{Address, Amount, Block, ChainConfig, CurrencyUnit, Digest, TaggedTransaction, TxKind, ValidatorId};
use crate::validation::{validate_stateless, StatelessError};

pub const TRANSFER_GAS: u64 = 21_000;
pub const PAYLOAD_SURCHARGE_GAS: u64 = 40_000;
pub const PAYLOAD_BYTE_GAS: u64 = 16;
pub const GOVERNANCE_GAS: u64 = 50_000;

/// Gas schedule: transfers 21_000; payload calls 21_000 + 40_000 + 16 per byte;
/// proposals and votes 50_000 flat.
pub fn gas_used_for(tx: &TaggedTransaction) -> u64 {
    match tx.kind {
        TxKind::Transfer => TRANSFER_GAS,
        TxKind::Payload => TRANSFER_GAS
            .saturating_add(PAYLOAD_SURCHARGE_GAS)
            .saturating_add(PAYLOAD_BYTE_GAS.saturating_mul(tx.payload.len() as u64)),
        TxKind::Proposal | TxKind::Vote => GOVERNANCE_GAS,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MultiBalanceAccount {
    pub nonce: u64,
    pub balances: BTreeMap<CurrencyUnit, Amount>,
}

impl MultiBalanceAccount {
    pub fn balance(&self, unit: CurrencyUnit) -> Amount {
        self.balances.get(&unit).copied().unwrap_or_default()
    }

    fn is_empty(&self) -> bool {
        self.nonce == 0 && self.balances.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiptStatus {
    Success,
    Reverted,
    /// Never executed (rejected before inclusion).
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Receipt {
    pub tx_digest: Digest,
    pub status: ReceiptStatus,
    pub gas_used: u64,
    pub fee_charged: Amount,
    pub unit: CurrencyUnit,
    pub block_height: u64,
    pub index: u32,
    pub sender: Address,
    pub recipient: Option<Address>,
    pub effective_gas_price: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error(transparent)]
    Stateless(#[from] StatelessError),
    #[error(transparent)]
    Fee(#[from] FeeError),
    #[error("bad nonce: expected {expected}, found {found}")]
    BadNonce { expected: u64, found: u64 },
    #[error("insufficient {unit} balance: need {needed}, have {available}")]
    InsufficientBalance { unit: CurrencyUnit, needed: Amount, available: Amount },
    #[error("{0} is blacklisted for {1}")]
    Blacklisted(Address, CurrencyUnit),
    #[error("balance overflow")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlockError {
    #[error("invalid transaction at index {index}: {reason}")]
    InvalidTransaction { index: usize, reason: ExecError },
    #[error("block gas {used} exceeds limit {limit}")]
    GasLimit { used: u64, limit: u64 },
    #[error("block uses rate snapshot {found}, node holds {expected}")]
    SnapshotMismatch { expected: u64, found: u64 },
    #[error("block height {found} does not follow {expected}")]
    Height { expected: u64, found: u64 },
}

impl BlockError {
    pub fn offending_index(&self) -> Option<usize> {
        match self {
            BlockError::InvalidTransaction { index, .. } => Some(*index),
            _ => None,
        }
    }
}

/// Per-unit fees collected while applying a block.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeeBucket(pub BTreeMap<CurrencyUnit, Amount>);

impl FeeBucket {
    fn add(&mut self, unit: CurrencyUnit, fee: Amount) -> Result<(), ExecError> {
        if fee.is_zero() {
            return Ok(());
        }
        let cur = self.0.get(&unit).copied().unwrap_or_default();
        self.0.insert(unit, cur.checked_add(fee).ok_or(ExecError::Overflow)?);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerState {
    pub height: u64,
    pub accounts: BTreeMap<Address, MultiBalanceAccount>,
    pub governance: BTreeMap<CurrencyUnit, StablecoinGovernance>,
    pub feed: FeedContractState,
    /// Sum of genesis allocations per unit.
    pub genesis_supply: BTreeMap<CurrencyUnit, Amount>,
}

/// Balance handle scoped to one unit of one ledger.
pub struct UnitView<'a> {
    unit: CurrencyUnit,
    accounts: &'a mut BTreeMap<Address, MultiBalanceAccount>,
}

impl UnitBalances for UnitView<'_> {
    fn unit(&self) -> CurrencyUnit {
        self.unit
    }

    fn balance_of(&self, who: &Address) -> Amount {
        self.accounts.get(who).map(|a| a.balance(self.unit)).unwrap_or_default()
    }

    fn credit(&mut self, who: &Address, amount: Amount) -> Result<(), GovError> {
        credit(self.accounts, who, self.unit, amount).map_err(|_| GovError::Overflow)
    }

    fn debit(&mut self, who: &Address, amount: Amount) -> Result<(), GovError> {
        debit(self.accounts, who, self.unit, amount).map_err(|_| GovError::Overflow)
    }
}

fn credit(
    accounts: &mut BTreeMap<Address, MultiBalanceAccount>,
    who: &Address,
    unit: CurrencyUnit,
    amount: Amount,
) -> Result<(), ExecError> {
    if amount.is_zero() {
        return Ok(());
    }
    let acct = accounts.entry(*who).or_default();
    let next = acct.balance(unit).checked_add(amount).ok_or(ExecError::Overflow)?;
    acct.balances.insert(unit, next);
    Ok(())
}

fn debit(
    accounts: &mut BTreeMap<Address, MultiBalanceAccount>,
    who: &Address,
    unit: CurrencyUnit,
    amount: Amount,
) -> Result<(), ExecError> {
    if amount.is_zero() {
        return Ok(());
    }
    let available = accounts.get(who).map(|a| a.balance(unit)).unwrap_or_default();
    let next = available
        .checked_sub(amount)
        .ok_or(ExecError::InsufficientBalance { unit, needed: amount, available })?;
    let acct = accounts.get_mut(who).expect("non-zero balance implies account");
    if next.is_zero() {
        acct.balances.remove(&unit);
    } else {
        acct.balances.insert(unit, next);
    }
    if acct.is_empty() {
        accounts.remove(who);
    }
    Ok(())
}

impl LedgerState {
    /// Genesis state: allocations, per-unit governance seeded from the config,
    /// and the feed contract holding the genesis rates.
    pub fn genesis(config: &ChainConfig, allocations: &[(Address, CurrencyUnit, Amount)]) -> Self {
        let mut state = LedgerState {
            height: 0,
            accounts: BTreeMap::new(),
            governance: BTreeMap::new(),
            feed: FeedContractState::new(config.feeder),
            genesis_supply: BTreeMap::new(),
        };
        for (who, unit, amount) in allocations {
            credit(&mut state.accounts, who, *unit, *amount).expect("genesis allocation overflow");
            let s = state.genesis_supply.entry(*unit).or_default();
            *s = s.checked_add(*amount).expect("genesis supply overflow");
        }
        for (unit, rate) in &config.genesis_rates {
            let r = crate::types::Rate { from: config.reference_unit, to: *unit, value: *rate };
            state.feed.feed_update(config.feeder, r, 0).expect("validated genesis rate");
        }
        state.ensure_units(config);
        state
    }

    /// Seeds governance for any active unit that has none yet.
    pub fn ensure_units(&mut self, config: &ChainConfig) {
        for unit in &config.units {
            if !self.governance.contains_key(unit) {
                let gov = match config.committees.get(unit) {
                    Some(seed) => StablecoinGovernance::from_seed(*unit, seed, config.proposal_ttl),
                    None => StablecoinGovernance::unmanaged(*unit, config.proposal_ttl),
                };
                self.governance.insert(*unit, gov);
            }
        }
    }

    pub fn account(&self, who: &Address) -> Option<&MultiBalanceAccount> {
        self.accounts.get(who)
    }

    pub fn nonce(&self, who: &Address) -> u64 {
        self.accounts.get(who).map(|a| a.nonce).unwrap_or(0)
    }

    pub fn balance(&self, who: &Address, unit: CurrencyUnit) -> Amount {
        self.accounts.get(who).map(|a| a.balance(unit)).unwrap_or_default()
    }

    pub fn total_supply(&self, unit: CurrencyUnit) -> U256 {
        self.accounts.values().fold(U256::zero(), |acc, a| acc + a.balance(unit).0)
    }

    /// genesis + minted - burned for `unit`.
    pub fn expected_supply(&self, unit: CurrencyUnit) -> U256 {
        let genesis = self.genesis_supply.get(&unit).copied().unwrap_or_default().0;
        match self.governance.get(&unit) {
            Some(g) => genesis + g.minted.0 - g.burned.0,
            None => genesis,
        }
    }

    pub fn unit_view(&mut self, unit: CurrencyUnit) -> UnitView<'_> {
        UnitView { unit, accounts: &mut self.accounts }
    }

    /// Sorted-key digest chain over the whole state; see `docs/state-root.md`.
    pub fn state_root(&self) -> Digest {
        let mut acc = sha256(&[b"stablefee/state-root/v1"]);
        let mut step = |tag: u8, body: Vec<u8>| {
            acc = sha256(&[&acc.0, &[tag], &body]);
        };
        let mut h = Vec::new();
        put_u64(&mut h, self.height);
        step(0x00, h);
        for (addr, account) in &self.accounts {
            let mut b = addr.encode();
            put_u64(&mut b, account.nonce);
            account.balances.encode_to(&mut b);
            step(0x01, b);
        }
        for gov in self.governance.values() {
            step(0x02, gov.encode());
        }
        step(0x03, self.feed.encode());
        for (unit, supply) in &self.genesis_supply {
            let mut b = unit.encode();
            supply.encode_to(&mut b);
            step(0x04, b);
        }
        acc
    }
}

/// Outcome of the pre-execution checks shared by the mempool and execution.
pub fn check_transaction(
    state: &LedgerState,
    tx: &TaggedTransaction,
    rates: &ExchangeRateTable,
    config: &ChainConfig,
) -> Result<(), ExecError> {
    validate_stateless(tx, config)?;
    check_base_fee_matches_unit(tx, rates, config)?;
    if let Some(gov) = state.governance.get(&tx.unit) {
        gov.enforce_blacklist(tx).map_err(|_| ExecError::Blacklisted(tx.sender, tx.unit))?;
    }
    let expected = state.nonce(&tx.sender);
    if tx.nonce != expected {
        return Err(ExecError::BadNonce { expected, found: tx.nonce });
    }
    let needed = max_cost(tx)?;
    let available = state.balance(&tx.sender, tx.unit);
    if available < needed {
        return Err(ExecError::InsufficientBalance { unit: tx.unit, needed, available });
    }
    Ok(())
}

/// Transfer amount plus the fee at the full gas limit.
pub fn max_cost(tx: &TaggedTransaction) -> Result<Amount, ExecError> {
    gas_fee(tx.base_fee, tx.tip, tx.gas_limit)
        .map_err(|_| ExecError::Overflow)?
        .checked_add(tx.transfer_amount)
        .ok_or(ExecError::Overflow)
}

/// Applies one transaction in place. On error the state is unchanged.
pub fn apply_transaction(
    state: &mut LedgerState,
    tx: &TaggedTransaction,
    rates: &ExchangeRateTable,
    config: &ChainConfig,
    fees: &mut FeeBucket,
    index: u32,
) -> Result<Receipt, ExecError> {
    check_transaction(state, tx, rates, config)?;
    let digest = tx.digest();
    let gas_used = gas_used_for(tx);
    let fee = gas_fee(tx.base_fee, tx.tip, gas_used)?;
    let unit = tx.unit;
    let height = state.height + 1;

    debit(&mut state.accounts, &tx.sender, unit, fee)?;
    state.accounts.entry(tx.sender).or_default().nonce += 1;
    fees.add(unit, fee)?;

    let status = match tx.kind {
        TxKind::Transfer => {
            let to = tx.recipient.expect("validated transfer has a recipient");
            move_value(state, tx, &to)?;
            ReceiptStatus::Success
        }
        TxKind::Payload => execute_payload(state, tx, height)?,
        TxKind::Proposal | TxKind::Vote => execute_governance(state, tx, digest, height),
    };

    Ok(Receipt {
        tx_digest: digest,
        status,
        gas_used,
        fee_charged: fee,
        unit,
        block_height: height,
        index,
        sender: tx.sender,
        recipient: tx.recipient,
        effective_gas_price: tx.base_fee.checked_add(tx.tip).ok_or(ExecError::Overflow)?,
    })
}

fn move_value(state: &mut LedgerState, tx: &TaggedTransaction, to: &Address) -> Result<(), ExecError> {
    debit(&mut state.accounts, &tx.sender, tx.unit, tx.transfer_amount)?;
    credit(&mut state.accounts, to, tx.unit, tx.transfer_amount)
}

/// Abstract contract call. Calls to the feed contract update rates; any other
/// call moves its value to the recipient. Failures revert the body but keep the fee.
fn execute_payload(state: &mut LedgerState, tx: &TaggedTransaction, height: u64) -> Result<ReceiptStatus, ExecError> {
    match tx.recipient {
        Some(to) if to == FEED_CONTRACT => {
            if !tx.transfer_amount.is_zero() {
                return Ok(ReceiptStatus::Reverted);
            }
            let Ok(call) = FeedCall::decode(&tx.payload) else {
                return Ok(ReceiptStatus::Reverted);
            };
            Ok(match state.feed.feed_update(tx.sender, call.rate, height) {
                Ok(()) => ReceiptStatus::Success,
                Err(_) => ReceiptStatus::Reverted,
            })
        }
        Some(to) => {
            move_value(state, tx, &to)?;
            Ok(ReceiptStatus::Success)
        }
        None if tx.transfer_amount.is_zero() => Ok(ReceiptStatus::Success),
        None => Ok(ReceiptStatus::Reverted),
    }
}

fn execute_governance(state: &mut LedgerState, tx: &TaggedTransaction, digest: Digest, height: u64) -> ReceiptStatus {
    let Ok(body) = GovernanceBody::decode(&tx.payload) else {
        return ReceiptStatus::Reverted;
    };
    let Some(gov) = state.governance.get_mut(&tx.unit) else {
        return ReceiptStatus::Reverted;
    };
    let mut view = UnitView { unit: tx.unit, accounts: &mut state.accounts };
    let result = match body {
        GovernanceBody::Propose { action, evidence } => {
            gov.submit_proposal(digest, tx.sender, action, evidence, height, &mut view)
        }
        GovernanceBody::Vote { proposal } => gov.cast_vote(tx.sender, proposal, height, &mut view),
    };
    match result {
        Ok(VoteOutcome::Pending | VoteOutcome::Executed | VoteOutcome::ExecutionFailed(_)) => ReceiptStatus::Success,
        Err(_) => ReceiptStatus::Reverted,
    }
}

/// Credits all collected fees to the proposer. Supply per unit is unchanged
/// because the same amounts were debited from senders.
pub fn distribute_fees(state: &mut LedgerState, fees: &FeeBucket, proposer: ValidatorId) {
    let to = validator_address(proposer);
    for (unit, amount) in &fees.0 {
        credit(&mut state.accounts, &to, *unit, *amount).expect("fees were debited from existing balances");
    }
}

#[derive(Debug, Clone)]
pub struct AppliedBlock {
    pub state: LedgerState,
    pub receipts: Vec<Receipt>,
    pub state_root: Digest,
    pub fees: FeeBucket,
}

/// Applies a block to a copy of `state`. Any failing transaction invalidates the whole block.
pub fn apply_block(
    state: &LedgerState,
    block: &Block,
    rates: &ExchangeRateTable,
    config: &ChainConfig,
) -> Result<AppliedBlock, BlockError> {
    if block.height != state.height + 1 {
        return Err(BlockError::Height { expected: state.height + 1, found: block.height });
    }
    if block.rate_snapshot_height != rates.snapshot_height {
        return Err(BlockError::SnapshotMismatch { expected: rates.snapshot_height, found: block.rate_snapshot_height });
    }
    let used: u64 = block.transactions.iter().map(|t| t.gas_limit).fold(0u64, u64::saturating_add);
    if used > config.block_gas_limit {
        return Err(BlockError::GasLimit { used, limit: config.block_gas_limit });
    }
    let mut next = state.clone();
    next.ensure_units(config);
    for gov in next.governance.values_mut() {
        gov.expire(block.height);
    }
    let mut fees = FeeBucket::default();
    let mut receipts = Vec::with_capacity(block.transactions.len());
    for (index, tx) in block.transactions.iter().enumerate() {
        let r = apply_transaction(&mut next, tx, rates, config, &mut fees, index as u32)
            .map_err(|reason| BlockError::InvalidTransaction { index, reason })?;
        receipts.push(r);
    }
    distribute_fees(&mut next, &fees, block.proposer);
    next.height = block.height;
    let state_root = next.state_root();
    Ok(AppliedBlock { state: next, receipts, state_root, fees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::SecretKey;
    use crate::encoding::Encode;
    use crate::governance::ProposalAction;
    use crate::types::{CommitteeSeed, Signature, TxEnvelope};

    fn usd() -> CurrencyUnit {
        CurrencyUnit::new("USD").unwrap()
    }
    fn cny() -> CurrencyUnit {
        CurrencyUnit::new("CNY").unwrap()
    }

    struct Fixture {
        config: ChainConfig,
        rates: ExchangeRateTable,
        state: LedgerState,
        alice: SecretKey,
        bob: SecretKey,
    }

    fn fixture() -> Fixture {
        let alice = SecretKey::from_name("alice");
        let bob = SecretKey::from_name("bob");
        let mut config = ChainConfig::example(4);
        config.committees.insert(
            cny(),
            CommitteeSeed { members: vec![alice.address()], committee_size: 1, quorum_size: 1 },
        );
        let rates = ExchangeRateTable::genesis(usd(), &config.genesis_rates);
        let state = LedgerState::genesis(
            &config,
            &[(alice.address(), usd(), Amount::tokens(100)), (alice.address(), cny(), Amount::tokens(7))],
        );
        Fixture { config, rates, state, alice, bob }
    }

    fn signed(key: &SecretKey, kind: TxKind, to: Option<Address>, nonce: u64, amount: Amount, payload: Vec<u8>, gas: u64) -> TxEnvelope {
        TxEnvelope {
            sender: key.address(),
            recipient: to,
            nonce,
            tip: Amount::ZERO,
            gas_limit: gas,
            transfer_amount: amount,
            payload,
            kind,
            signature: Signature([0; 64]),
        }
        .sign(key)
    }

    fn tag(f: &Fixture, env: TxEnvelope, unit: CurrencyUnit) -> TaggedTransaction {
        let base = crate::fees::base_fee_for_unit(unit, &f.rates, &f.config).unwrap().base_fee_per_gas;
        TaggedTransaction::from_envelope(env, unit, base)
    }

    fn block(f: &Fixture, txs: Vec<TaggedTransaction>) -> Block {
        Block {
            height: f.state.height + 1,
            proposer: ValidatorId(2),
            parent_hash: Digest::zero(),
            transactions: txs,
            rate_snapshot_height: 0,
            state_root: Digest::zero(),
        }
    }

    #[test]
    fn gas_schedule() {
        let f = fixture();
        let t = tag(&f, signed(&f.alice, TxKind::Transfer, Some(f.bob.address()), 0, Amount::ZERO, vec![], 21_000), usd());
        assert_eq!(gas_used_for(&t), 21_000);
        let p = tag(&f, signed(&f.alice, TxKind::Payload, Some(f.bob.address()), 0, Amount::ZERO, vec![], 70_000), usd());
        assert_eq!(gas_used_for(&p), 61_000);
        let big = tag(&f, signed(&f.alice, TxKind::Payload, None, 0, Amount::ZERO, vec![0; 4_139], 200_000), usd());
        assert_eq!(gas_used_for(&big), 127_224);
    }

    #[test]
    fn transfer_touches_only_its_unit() {
        let mut f = fixture();
        let mut env = signed(&f.alice, TxKind::Transfer, Some(f.bob.address()), 0, Amount::tokens(10), vec![], 21_000);
        env.tip = Amount::giga(1);
        let env = env.sign(&f.alice);
        let tx = tag(&f, env, usd());
        let mut fees = FeeBucket::default();
        let r = apply_transaction(&mut f.state, &tx, &f.rates, &f.config, &mut fees, 0).unwrap();
        assert_eq!(r.fee_charged, Amount::giga(42_000));
        assert_eq!(r.status, ReceiptStatus::Success);
        let expected = Amount::tokens(100).checked_sub(Amount::tokens(10)).unwrap().checked_sub(Amount::giga(42_000)).unwrap();
        assert_eq!(f.state.balance(&f.alice.address(), usd()), expected);
        assert_eq!(f.state.balance(&f.alice.address(), cny()), Amount::tokens(7));
        assert_eq!(f.state.balance(&f.bob.address(), usd()), Amount::tokens(10));
        assert_eq!(f.state.nonce(&f.alice.address()), 1);
    }

    #[test]
    fn balance_is_per_unit() {
        let mut f = fixture();
        let tx = tag(&f, signed(&f.bob, TxKind::Transfer, Some(f.alice.address()), 0, Amount::ZERO, vec![], 21_000), cny());
        // bob is funded in USD only
        f.state = LedgerState::genesis(&f.config, &[(f.bob.address(), usd(), Amount::tokens(1_000))]);
        let err = apply_transaction(&mut f.state, &tx, &f.rates, &f.config, &mut FeeBucket::default(), 0).unwrap_err();
        assert!(matches!(err, ExecError::InsufficientBalance { unit, .. } if unit == cny()));
    }

    #[test]
    fn zero_amount_zero_tip_fee_is_base_times_gas() {
        let mut f = fixture();
        let tx = tag(&f, signed(&f.alice, TxKind::Transfer, Some(f.bob.address()), 0, Amount::ZERO, vec![], 21_000), cny());
        let r = apply_transaction(&mut f.state, &tx, &f.rates, &f.config, &mut FeeBucket::default(), 0).unwrap();
        assert_eq!(r.fee_charged, Amount::from_u64(7_200_000_000 * 21_000));
    }

    #[test]
    fn replay_fails_with_bad_nonce() {
        let mut f = fixture();
        let tx = tag(&f, signed(&f.alice, TxKind::Transfer, Some(f.bob.address()), 0, Amount::tokens(1), vec![], 21_000), usd());
        let mut fees = FeeBucket::default();
        apply_transaction(&mut f.state, &tx, &f.rates, &f.config, &mut fees, 0).unwrap();
        let err = apply_transaction(&mut f.state, &tx, &f.rates, &f.config, &mut fees, 1).unwrap_err();
        assert_eq!(err, ExecError::BadNonce { expected: 1, found: 0 });
    }

    #[test]
    fn block_with_one_transfer_changes_root_and_pays_proposer() {
        let f = fixture();
        let tx = tag(&f, signed(&f.alice, TxKind::Transfer, Some(f.bob.address()), 0, Amount::tokens(1), vec![], 21_000), usd());
        let applied = apply_block(&f.state, &block(&f, vec![tx]), &f.rates, &f.config).unwrap();
        assert_ne!(applied.state_root, f.state.state_root());
        assert_eq!(applied.receipts[0].status, ReceiptStatus::Success);
        assert_eq!(applied.state.balance(&validator_address(ValidatorId(2)), usd()), Amount::giga(21_000));
        assert_eq!(applied.state.total_supply(usd()), f.state.total_supply(usd()));
    }

    #[test]
    fn tampered_unit_invalidates_block_at_index() {
        let f = fixture();
        let good = tag(&f, signed(&f.alice, TxKind::Transfer, Some(f.bob.address()), 0, Amount::tokens(1), vec![], 21_000), usd());
        let mut bad = tag(&f, signed(&f.alice, TxKind::Transfer, Some(f.bob.address()), 1, Amount::tokens(1), vec![], 21_000), usd());
        bad.unit = cny();
        let err = apply_block(&f.state, &block(&f, vec![good, bad]), &f.rates, &f.config).unwrap_err();
        assert_eq!(err.offending_index(), Some(1));
        assert!(matches!(
            err,
            BlockError::InvalidTransaction { reason: ExecError::Fee(FeeError::BaseFeeMismatch { .. }), .. }
        ));
    }

    #[test]
    fn empty_block_keeps_balances() {
        let f = fixture();
        let applied = apply_block(&f.state, &block(&f, vec![]), &f.rates, &f.config).unwrap();
        assert_eq!(applied.state.accounts, f.state.accounts);
        assert_eq!(applied.state.height, 1);
        assert!(applied.receipts.is_empty());
    }

    #[test]
    fn fees_in_two_units_conserve_supply() {
        let f = fixture();
        let a = tag(&f, signed(&f.alice, TxKind::Transfer, Some(f.bob.address()), 0, Amount::tokens(1), vec![], 21_000), usd());
        let b = tag(&f, signed(&f.alice, TxKind::Transfer, Some(f.bob.address()), 1, Amount::tokens(1), vec![], 21_000), cny());
        let applied = apply_block(&f.state, &block(&f, vec![a, b]), &f.rates, &f.config).unwrap();
        let proposer = validator_address(ValidatorId(2));
        assert_eq!(applied.state.balance(&proposer, usd()), Amount::giga(21_000));
        assert_eq!(applied.state.balance(&proposer, cny()), Amount::from_u64(7_200_000_000 * 21_000));
        for unit in [usd(), cny()] {
            assert_eq!(applied.state.total_supply(unit), f.state.total_supply(unit));
            assert_eq!(applied.state.total_supply(unit), applied.state.expected_supply(unit));
        }
    }

    #[test]
    fn zero_fees_leave_state_unchanged() {
        let mut f = fixture();
        let before = f.state.clone();
        distribute_fees(&mut f.state, &FeeBucket::default(), ValidatorId(0));
        assert_eq!(f.state, before);
    }

    #[test]
    fn governance_mint_through_transactions() {
        let f = fixture();
        let body = GovernanceBody::Propose {
            action: ProposalAction::Mint { to: f.bob.address(), amount: Amount::tokens(5) },
            evidence: vec![],
        };
        let tx = tag(&f, signed(&f.alice, TxKind::Proposal, None, 0, Amount::ZERO, body.encode(), 50_000), cny());
        let applied = apply_block(&f.state, &block(&f, vec![tx]), &f.rates, &f.config).unwrap();
        assert_eq!(applied.receipts[0].gas_used, 50_000);
        assert_eq!(applied.state.balance(&f.bob.address(), cny()), Amount::tokens(5));
        assert_eq!(applied.state.total_supply(cny()), applied.state.expected_supply(cny()));
        // USD side untouched
        assert_eq!(applied.state.governance[&usd()], f.state.governance[&usd()]);
        assert_eq!(applied.state.total_supply(usd()), f.state.total_supply(usd()));
    }

    #[test]
    fn governance_failure_reverts_but_charges_fee() {
        let f = fixture();
        let body = GovernanceBody::Vote { proposal: Digest([5; 32]) };
        let tx = tag(&f, signed(&f.alice, TxKind::Vote, None, 0, Amount::ZERO, body.encode(), 50_000), cny());
        let applied = apply_block(&f.state, &block(&f, vec![tx]), &f.rates, &f.config).unwrap();
        assert_eq!(applied.receipts[0].status, ReceiptStatus::Reverted);
        assert_eq!(applied.receipts[0].fee_charged, Amount::from_u64(7_200_000_000 * 50_000));
    }

    #[test]
    fn feed_contract_call_updates_rates() {
        let mut f = fixture();
        let feeder = SecretKey::from_name("oracle");
        f.config.feeder = feeder.address();
        f.state = LedgerState::genesis(&f.config, &[(feeder.address(), usd(), Amount::tokens(1))]);
        let call = FeedCall { rate: crate::types::Rate { from: usd(), to: cny(), value: 7_110_000_000 } }.encode();
        let gas = gas_used_for(&tag(&f, signed(&feeder, TxKind::Payload, Some(FEED_CONTRACT), 0, Amount::ZERO, call.clone(), 1_000_000), usd()));
        let tx = tag(&f, signed(&feeder, TxKind::Payload, Some(FEED_CONTRACT), 0, Amount::ZERO, call.clone(), gas), usd());
        let applied = apply_block(&f.state, &block(&f, vec![tx]), &f.rates, &f.config).unwrap();
        assert_eq!(applied.receipts[0].status, ReceiptStatus::Success);
        assert_eq!(applied.state.feed.read(usd(), cny()).unwrap().value, 7_110_000_000);

        // anyone else reverts
        let mut g = fixture();
        g.state = LedgerState::genesis(&g.config, &[(g.bob.address(), usd(), Amount::tokens(1))]);
        let tx = tag(&g, signed(&g.bob, TxKind::Payload, Some(FEED_CONTRACT), 0, Amount::ZERO, call, gas), usd());
        let applied = apply_block(&g.state, &block(&g, vec![tx]), &g.rates, &g.config).unwrap();
        assert_eq!(applied.receipts[0].status, ReceiptStatus::Reverted);
    }

    #[test]
    fn state_root_is_deterministic() {
        let f = fixture();
        let g = fixture();
        assert_eq!(f.state.state_root(), g.state.state_root());
        let mut h = fixture();
        credit(&mut h.state.accounts, &Address([3; 20]), usd(), Amount::from_u64(1)).unwrap();
        assert_ne!(h.state.state_root(), f.state.state_root());
    }
}
