//! Pending-transaction pool ordered by fee value in the reference unit.

use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use crate::crypto::CanonicalDigest;
use crate::fees::{check_base_fee_matches_unit, ordering_key, FeeError, OrderingKey};
use crate::ledger::{apply_transaction, gas_used_for, max_cost, FeeBucket, LedgerState};
use crate::oracle::ExchangeRateTable;
use crate::types::{Address, Amount, ChainConfig, CurrencyUnit, Digest, TaggedTransaction};
use crate::validation::{validate_stateless, StatelessError};

pub const DEFAULT_CAPACITY: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddOutcome {
    Accepted,
    Replaced,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RejectReason {
    #[error("unknown currency unit {0}")]
    UnknownUnit(CurrencyUnit),
    #[error(transparent)]
    Invalid(StatelessError),
    #[error(transparent)]
    Fee(FeeError),
    #[error("nonce {found} below account nonce {expected}")]
    NonceTooLow { expected: u64, found: u64 },
    #[error("balance {available} does not cover worst-case cost {needed}")]
    Underfunded { needed: Amount, available: Amount },
    #[error("replacement must pay a strictly higher fee value")]
    FeeTooLowToReplace,
    #[error("sender is blacklisted for {0}")]
    Blacklisted(CurrencyUnit),
    #[error("pool is full")]
    PoolFull,
}

#[derive(Debug, Clone)]
struct Entry {
    tx: TaggedTransaction,
    key: OrderingKey,
}

#[derive(Debug, Clone)]
pub struct Mempool {
    by_sender: BTreeMap<Address, BTreeMap<u64, Entry>>,
    len: usize,
    capacity: usize,
}

impl Default for Mempool {
    fn default() -> Self {
        Mempool::new(DEFAULT_CAPACITY)
    }
}

impl Mempool {
    pub fn new(capacity: usize) -> Self {
        Mempool { by_sender: BTreeMap::new(), len: 0, capacity }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, digest: &Digest) -> bool {
        self.iter().any(|tx| tx.digest() == *digest)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TaggedTransaction> {
        self.by_sender.values().flat_map(|q| q.values().map(|e| &e.tx))
    }

    /// Next nonce a wallet should use: the account nonce extended by any
    /// contiguous run of pooled transactions.
    pub fn pending_nonce(&self, sender: &Address, account_nonce: u64) -> u64 {
        let mut n = account_nonce;
        if let Some(q) = self.by_sender.get(sender) {
            while q.contains_key(&n) {
                n += 1;
            }
        }
        n
    }

    pub fn add(
        &mut self,
        tx: TaggedTransaction,
        rates: &ExchangeRateTable,
        state: &LedgerState,
        config: &ChainConfig,
    ) -> Result<AddOutcome, RejectReason> {
        validate_stateless(&tx, config).map_err(|e| match e {
            StatelessError::UnknownUnit(u) => RejectReason::UnknownUnit(u),
            other => RejectReason::Invalid(other),
        })?;
        check_base_fee_matches_unit(&tx, rates, config).map_err(RejectReason::Fee)?;
        if let Some(gov) = state.governance.get(&tx.unit) {
            gov.enforce_blacklist(&tx).map_err(|_| RejectReason::Blacklisted(tx.unit))?;
        }
        let expected = state.nonce(&tx.sender);
        if tx.nonce < expected {
            return Err(RejectReason::NonceTooLow { expected, found: tx.nonce });
        }
        let needed = max_cost(&tx).map_err(|_| RejectReason::Fee(FeeError::Overflow))?;
        let available = state.balance(&tx.sender, tx.unit);
        if available < needed {
            return Err(RejectReason::Underfunded { needed, available });
        }
        let key = ordering_key(&tx, gas_used_for(&tx), rates).map_err(RejectReason::Fee)?;

        let existing = self.by_sender.get(&tx.sender).and_then(|q| q.get(&tx.nonce));
        match existing {
            Some(old) if key.fee_value_in_reference <= old.key.fee_value_in_reference => {
                Err(RejectReason::FeeTooLowToReplace)
            }
            Some(_) => {
                self.by_sender.entry(tx.sender).or_default().insert(tx.nonce, Entry { tx, key });
                Ok(AddOutcome::Replaced)
            }
            None if self.len >= self.capacity => Err(RejectReason::PoolFull),
            None => {
                self.by_sender.entry(tx.sender).or_default().insert(tx.nonce, Entry { tx, key });
                self.len += 1;
                Ok(AddOutcome::Accepted)
            }
        }
    }

    /// Highest fee value first, never out of per-sender nonce order, with
    /// cumulative gas limit capped at `block_gas_limit`. A sender whose next
    /// transaction does not fit is skipped for the rest of the block.
    pub fn select(&self, state: &LedgerState, block_gas_limit: u64) -> Vec<TaggedTransaction> {
        let mut heap: BinaryHeap<(OrderingKey, Address, u64)> = BinaryHeap::new();
        for (sender, q) in &self.by_sender {
            let n = state.nonce(sender);
            if let Some(e) = q.get(&n) {
                heap.push((e.key, *sender, n));
            }
        }
        let mut out = Vec::new();
        let mut gas = 0u64;
        while let Some((_, sender, nonce)) = heap.pop() {
            let q = &self.by_sender[&sender];
            let e = &q[&nonce];
            let Some(next_gas) = gas.checked_add(e.tx.gas_limit).filter(|g| *g <= block_gas_limit) else {
                continue;
            };
            gas = next_gas;
            out.push(e.tx.clone());
            if let Some(next) = q.get(&(nonce + 1)) {
                heap.push((next.key, sender, nonce + 1));
            }
        }
        out
    }

    /// `select`, then a dry run against `state` keeping only transactions
    /// that apply; a failing transaction also drops the sender's later ones.
    pub fn select_applicable(
        &self,
        state: &LedgerState,
        rates: &ExchangeRateTable,
        config: &ChainConfig,
    ) -> Vec<TaggedTransaction> {
        let mut scratch = state.clone();
        scratch.ensure_units(config);
        let mut fees = FeeBucket::default();
        let mut failed: Vec<Address> = Vec::new();
        let mut out = Vec::new();
        for tx in self.select(state, config.block_gas_limit) {
            if failed.contains(&tx.sender) {
                continue;
            }
            match apply_transaction(&mut scratch, &tx, rates, config, &mut fees, out.len() as u32) {
                Ok(_) => out.push(tx),
                Err(_) => failed.push(tx.sender),
            }
        }
        out
    }

    /// Drops transactions that can no longer be included: nonces already
    /// used, units no longer active, or base fees stale after a rate sync.
    pub fn prune(&mut self, state: &LedgerState, rates: &ExchangeRateTable, config: &ChainConfig) {
        let mut len = 0;
        self.by_sender.retain(|sender, q| {
            let n = state.nonce(sender);
            q.retain(|nonce, e| {
                *nonce >= n && config.has_unit(e.tx.unit) && check_base_fee_matches_unit(&e.tx, rates, config).is_ok()
            });
            len += q.len();
            !q.is_empty()
        });
        self.len = len;
    }
}
