//! Rate-feed contract emulation and the nodes' periodic synchronization
//! of exchange rates into their local table.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::encoding::{put_u64, Decode, DecodeError, Encode, Reader};
use crate::types::{format_fixed, parse_fixed, Address, CurrencyUnit, Rate, RATE_SCALE};

/// Well-known address of the rate-feed contract. Payload transactions sent here
/// carry an encoded [`FeedCall`].
pub const FEED_CONTRACT: Address = Address([
    0x0f, 0xee, 0xd0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0x01,
]);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("caller {0} is not the authorized feeder")]
    Unauthorized(Address),
    #[error("rate must be positive")]
    ZeroRate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StoredRate {
    pub value: u64,
    pub updated_at: u64,
}

/// On-chain store written by the oracle and read by nodes at sync heights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedContractState {
    pub rates: BTreeMap<(CurrencyUnit, CurrencyUnit), StoredRate>,
    pub authorized_feeder: Address,
}

impl FeedContractState {
    pub fn new(authorized_feeder: Address) -> Self {
        FeedContractState { rates: BTreeMap::new(), authorized_feeder }
    }

    pub fn feed_update(&mut self, caller: Address, rate: Rate, height: u64) -> Result<(), OracleError> {
        if caller != self.authorized_feeder {
            return Err(OracleError::Unauthorized(caller));
        }
        if rate.value == 0 {
            return Err(OracleError::ZeroRate);
        }
        self.rates.insert((rate.from, rate.to), StoredRate { value: rate.value, updated_at: height });
        Ok(())
    }

    pub fn read(&self, from: CurrencyUnit, to: CurrencyUnit) -> Option<&StoredRate> {
        self.rates.get(&(from, to))
    }
}

/// Call data for the feed contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedCall {
    pub rate: Rate,
}

impl Encode for FeedCall {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.rate.from.encode_to(out);
        self.rate.to.encode_to(out);
        put_u64(out, self.rate.value);
    }
}

impl Decode for FeedCall {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(FeedCall {
            rate: Rate { from: Decode::decode_from(r)?, to: Decode::decode_from(r)?, value: r.u64()? },
        })
    }
}

impl Encode for FeedContractState {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.authorized_feeder.encode_to(out);
        crate::encoding::put_u32(out, self.rates.len() as u32);
        for ((from, to), stored) in &self.rates {
            from.encode_to(out);
            to.encode_to(out);
            put_u64(out, stored.value);
            put_u64(out, stored.updated_at);
        }
    }
}

/// A node's view of reference->unit rates, refreshed every K blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExchangeRateTable {
    pub reference: CurrencyUnit,
    pub rates: BTreeMap<CurrencyUnit, u64>,
    pub snapshot_height: u64,
}

impl ExchangeRateTable {
    pub fn genesis(reference: CurrencyUnit, rates: &BTreeMap<CurrencyUnit, u64>) -> Self {
        let mut rates = rates.clone();
        rates.insert(reference, RATE_SCALE);
        ExchangeRateTable { reference, rates, snapshot_height: 0 }
    }

    /// Rate reference->unit; the reference unit always maps to identity.
    pub fn rate(&self, unit: CurrencyUnit) -> Option<u64> {
        if unit == self.reference {
            return Some(RATE_SCALE);
        }
        self.rates.get(&unit).copied().filter(|r| *r > 0)
    }
}

/// At heights divisible by `k` the table is replaced with the contract's
/// reference->unit pairs; at every other height it is returned unchanged.
pub fn sync_rates(table: &ExchangeRateTable, contract: &FeedContractState, height: u64, k: u64) -> ExchangeRateTable {
    debug_assert!(k >= 1);
    if k == 0 || !height.is_multiple_of(k) {
        return table.clone();
    }
    let mut rates: BTreeMap<CurrencyUnit, u64> = contract
        .rates
        .iter()
        .filter(|((from, _), _)| *from == table.reference)
        .map(|((_, to), stored)| (*to, stored.value))
        .collect();
    rates.insert(table.reference, RATE_SCALE);
    ExchangeRateTable { reference: table.reference, rates, snapshot_height: height }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("reading {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RateSample {
    /// Block height, or day index for price series.
    pub at: u64,
    pub unit: CurrencyUnit,
    /// 10^9 fixed-point.
    pub rate: u64,
}

impl RateSample {
    pub fn to_line(&self) -> String {
        format!("{},{},{}", self.at, self.unit, format_fixed(self.rate, 9))
    }
}

/// Parses header-less `height,unit,rate_decimal` lines. Blank lines are skipped.
pub fn parse_rate_series(text: &str) -> Result<Vec<RateSample>, SeriesError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        let err = |reason: String| SeriesError::Parse { line, reason };
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", fields.len())));
        }
        let at = fields[0].parse::<u64>().map_err(|e| err(format!("height `{}`: {e}", fields[0])))?;
        let unit = CurrencyUnit::new(fields[1]).map_err(|e| err(e.to_string()))?;
        let rate = parse_fixed(fields[2], 9).map_err(|e| err(e.to_string()))?;
        if rate == 0 {
            return Err(err("rate must be positive".into()));
        }
        out.push(RateSample { at, unit, rate });
    }
    Ok(out)
}

pub fn load_rate_series(path: impl AsRef<Path>) -> Result<Vec<RateSample>, SeriesError> {
    let p = path.as_ref();
    let text = std::fs::read_to_string(p)
        .map_err(|e| SeriesError::Io { path: p.display().to_string(), reason: e.to_string() })?;
    parse_rate_series(&text)
}
