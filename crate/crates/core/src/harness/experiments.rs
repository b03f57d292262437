//! Fee-ratio and fee-stability experiments.

use std::collections::BTreeMap;

use primitive_types::U256;
use serde::Serialize;
use thiserror::Error;

use crate::crypto::{CanonicalDigest, SecretKey};
use crate::fees::{gas_fee, FeeError};
use crate::ledger::{gas_used_for, Receipt};
use crate::types::{format_fixed, Address, Amount, ChainConfig, ConfigError, Rate, Signature, TaggedTransaction, TxEnvelope, TxKind, ValidatorId, RATE_SCALE};
use crate::world::{SubmitError, World, WorldConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("submission failed: {0}")]
    Submit(#[from] SubmitError),
    #[error(transparent)]
    Fee(#[from] FeeError),
    #[error("rate pair must name two different units")]
    SameUnit,
    #[error("rate must be positive")]
    ZeroRate,
    #[error("transactions did not commit within {0} simulated ms")]
    Timeout(u64),
    #[error("fee in {0} is zero")]
    ZeroFee(String),
    #[error("price series is empty")]
    EmptySeries,
    #[error("series lengths differ: stable {stable}, volatile {volatile}")]
    LengthMismatch { stable: usize, volatile: usize },
    #[error("safety violation during experiment: {0}")]
    Diverged(String),
}

/// The user-controlled part of a transaction used in experiments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TxTemplate {
    pub tip: Amount,
    pub transfer_amount: Amount,
    pub payload: Vec<u8>,
    pub gas_limit: u64,
}

impl Default for TxTemplate {
    /// Zero-amount, zero-tip plain transfer.
    fn default() -> Self {
        TxTemplate { tip: Amount::ZERO, transfer_amount: Amount::ZERO, payload: vec![], gas_limit: crate::ledger::TRANSFER_GAS }
    }
}

impl TxTemplate {
    pub fn envelope(&self, key: &SecretKey, to: Address, nonce: u64) -> TxEnvelope {
        TxEnvelope {
            sender: key.address(),
            recipient: Some(to),
            nonce,
            tip: self.tip,
            gas_limit: self.gas_limit,
            transfer_amount: self.transfer_amount,
            payload: self.payload.clone(),
            kind: if self.payload.is_empty() { TxKind::Transfer } else { TxKind::Payload },
            signature: Signature([0; 64]),
        }
        .sign(key)
    }

    fn gas_used(&self) -> u64 {
        let env = self.envelope(&SecretKey::from_name("template"), Address::zero(), 0);
        gas_used_for(&TaggedTransaction::from_envelope(env, crate::types::CurrencyUnit::new("USD").unwrap(), Amount::ZERO))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeeRatioResult {
    pub rate: Rate,
    pub reference_receipt: Receipt,
    pub unit_receipt: Receipt,
    /// fee in `rate.to` over fee in `rate.from`, 10^9 fixed-point.
    pub ratio: u64,
}

impl FeeRatioResult {
    pub fn ratio_decimal(&self) -> String {
        format_fixed(self.ratio, 9)
    }
}

const EXPERIMENT_DEADLINE_MS: u64 = 600_000;

/// Sends the same template through the `rate.from` and `rate.to` endpoints of
/// a four-validator world and compares the committed fees.
pub fn fee_ratio_experiment(rate: Rate, template: &TxTemplate) -> Result<FeeRatioResult, ExperimentError> {
    if rate.from == rate.to {
        return Err(ExperimentError::SameUnit);
    }
    if rate.value == 0 {
        return Err(ExperimentError::ZeroRate);
    }
    let mut chain = ChainConfig::example(4);
    chain.units = vec![rate.from, rate.to];
    chain.reference_unit = rate.from;
    chain.genesis_rates = BTreeMap::from([(rate.to, rate.value)]);
    let user = SecretKey::from_name("experiment:user");
    let mut cfg = WorldConfig::new(chain, 0);
    cfg.timeouts.block_interval_ms = 1_000;
    for unit in [rate.from, rate.to] {
        cfg.allocations.push((user.address(), unit, Amount::tokens(1_000_000)));
    }
    let mut world = World::new(cfg)?;
    let to = SecretKey::from_name("experiment:recipient").address();
    let gateway = ValidatorId(0);
    let a = world.submit_envelope(gateway, rate.from, template.envelope(&user, to, 0))?;
    let b = world.submit_envelope(gateway, rate.to, template.envelope(&user, to, 1))?;
    let receipts = |w: &World| {
        let app = &w.nodes[0].app;
        Some((app.receipts.get(&a.digest())?.clone(), app.receipts.get(&b.digest())?.clone()))
    };
    while receipts(&world).is_none() {
        if !world.step(EXPERIMENT_DEADLINE_MS) {
            return Err(ExperimentError::Timeout(EXPERIMENT_DEADLINE_MS));
        }
    }
    if let Some(v) = world.violations.first() {
        return Err(ExperimentError::Diverged(v.to_string()));
    }
    let (reference_receipt, unit_receipt) = receipts(&world).expect("both committed");
    if reference_receipt.fee_charged.is_zero() {
        return Err(ExperimentError::ZeroFee(rate.from.to_string()));
    }
    let ratio = unit_receipt.fee_charged.0 * U256::from(RATE_SCALE) / reference_receipt.fee_charged.0;
    Ok(FeeRatioResult { rate, reference_receipt, unit_receipt, ratio: ratio.low_u64() })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModeStats {
    pub min_fee_value: Amount,
    pub max_fee_value: Amount,
    /// max / min, 10^9 fixed-point.
    pub ratio: u64,
}

impl ModeStats {
    pub fn ratio_decimal(&self) -> String {
        format_fixed(self.ratio, 9)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilityResult {
    pub days: usize,
    /// Fee per transaction in token subunits, the same every day.
    pub token_fee: Amount,
    pub stable: ModeStats,
    pub volatile: ModeStats,
}

fn mode_stats(fee: Amount, prices: &[u64]) -> Result<ModeStats, ExperimentError> {
    let values: Vec<U256> = prices.iter().map(|p| fee.0 * U256::from(*p) / U256::from(RATE_SCALE)).collect();
    let min = *values.iter().min().ok_or(ExperimentError::EmptySeries)?;
    let max = *values.iter().max().ok_or(ExperimentError::EmptySeries)?;
    if min.is_zero() {
        return Err(ExperimentError::ZeroFee("reference currency".into()));
    }
    Ok(ModeStats { min_fee_value: Amount(min), max_fee_value: Amount(max), ratio: (max * U256::from(RATE_SCALE) / min).low_u64() })
}

/// Prices the template's fee, paid in a token at `gas_price`, at each day's
/// token price in the reference currency, for a stablecoin and a volatile token.
pub fn fee_stability_experiment(
    stable_prices: &[u64],
    volatile_prices: &[u64],
    template: &TxTemplate,
    gas_price: Amount,
) -> Result<StabilityResult, ExperimentError> {
    if stable_prices.is_empty() || volatile_prices.is_empty() {
        return Err(ExperimentError::EmptySeries);
    }
    if stable_prices.len() != volatile_prices.len() {
        return Err(ExperimentError::LengthMismatch { stable: stable_prices.len(), volatile: volatile_prices.len() });
    }
    let token_fee = gas_fee(gas_price, template.tip, template.gas_used())?;
    Ok(StabilityResult {
        days: stable_prices.len(),
        token_fee,
        stable: mode_stats(token_fee, stable_prices)?,
        volatile: mode_stats(token_fee, volatile_prices)?,
    })
}
