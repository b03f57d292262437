//! Per-unit base fees, the gas-fee formula, fee value in the reference unit,
//! value-based transaction ordering and the unit/base-fee consistency check.
//!
//! All arithmetic is integer. Rates are reference->unit at scale 10^9, so a
//! unit's base fee is `reference_base_fee * rate / 10^9` (rounded half up)
//! and a fee converts back to reference terms as `fee * 10^9 / rate`.

use std::cmp::Ordering;

use primitive_types::U256;
use serde::Serialize;
use thiserror::Error;

use crate::crypto::CanonicalDigest;
use crate::oracle::ExchangeRateTable;
use crate::types::{Amount, ChainConfig, CurrencyUnit, Digest, TaggedTransaction, RATE_SCALE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeeError {
    #[error("no exchange rate for {0}")]
    MissingRate(CurrencyUnit),
    #[error("fee arithmetic overflow")]
    Overflow,
    #[error("base fee {found} does not match {expected} quoted for {unit}")]
    BaseFeeMismatch { unit: CurrencyUnit, expected: Amount, found: Amount },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeeQuote {
    pub unit: CurrencyUnit,
    pub base_fee_per_gas: Amount,
    pub as_of_height: u64,
}

pub fn base_fee_for_unit(
    unit: CurrencyUnit,
    rates: &ExchangeRateTable,
    config: &ChainConfig,
) -> Result<FeeQuote, FeeError> {
    let base_fee_per_gas = if unit == config.reference_unit {
        config.reference_base_fee
    } else {
        let rate = rates.rate(unit).ok_or(FeeError::MissingRate(unit))?;
        let scaled = config.reference_base_fee.0.checked_mul(U256::from(rate)).ok_or(FeeError::Overflow)?;
        let half = U256::from(RATE_SCALE / 2);
        Amount((scaled.checked_add(half).ok_or(FeeError::Overflow)?) / U256::from(RATE_SCALE))
    };
    Ok(FeeQuote { unit, base_fee_per_gas, as_of_height: rates.snapshot_height })
}

/// `(base + tip) * gas_used`, in the transaction unit's subunits.
pub fn gas_fee(base_fee_per_gas: Amount, tip_per_gas: Amount, gas_used: u64) -> Result<Amount, FeeError> {
    base_fee_per_gas
        .checked_add(tip_per_gas)
        .and_then(|price| price.checked_mul_u64(gas_used))
        .ok_or(FeeError::Overflow)
}

/// Converts an amount of `unit` into reference-unit subunits (floor).
pub fn value_in_reference(amount: Amount, unit: CurrencyUnit, rates: &ExchangeRateTable) -> Result<U256, FeeError> {
    let rate = rates.rate(unit).ok_or(FeeError::MissingRate(unit))?;
    let scaled = amount.0.checked_mul(U256::from(RATE_SCALE)).ok_or(FeeError::Overflow)?;
    Ok(scaled / U256::from(rate))
}

pub fn fee_value_in_reference(
    tx: &TaggedTransaction,
    gas_used: u64,
    rates: &ExchangeRateTable,
) -> Result<U256, FeeError> {
    let fee = gas_fee(tx.base_fee, tx.tip, gas_used)?;
    value_in_reference(fee, tx.unit, rates)
}

/// Mempool priority. The greater key is served first: higher fee value,
/// then lower nonce, then lower digest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderingKey {
    pub fee_value_in_reference: U256,
    pub nonce: u64,
    pub digest: Digest,
}

impl Ord for OrderingKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.fee_value_in_reference
            .cmp(&other.fee_value_in_reference)
            .then_with(|| other.nonce.cmp(&self.nonce))
            .then_with(|| other.digest.cmp(&self.digest))
    }
}

impl PartialOrd for OrderingKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn ordering_key(tx: &TaggedTransaction, gas_estimate: u64, rates: &ExchangeRateTable) -> Result<OrderingKey, FeeError> {
    Ok(OrderingKey {
        fee_value_in_reference: fee_value_in_reference(tx, gas_estimate, rates)?,
        nonce: tx.nonce,
        digest: tx.digest(),
    })
}

/// Exact-equality check of the carried base fee against this node's own quote
/// at the block's rate snapshot. Any difference means the unit or base fee was altered.
pub fn check_base_fee_matches_unit(
    tx: &TaggedTransaction,
    rates: &ExchangeRateTable,
    config: &ChainConfig,
) -> Result<(), FeeError> {
    let quote = base_fee_for_unit(tx.unit, rates, config)?;
    if quote.base_fee_per_gas != tx.base_fee {
        return Err(FeeError::BaseFeeMismatch { unit: tx.unit, expected: quote.base_fee_per_gas, found: tx.base_fee });
    }
    Ok(())
}
