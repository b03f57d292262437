//! Shared domain values: currency units, amounts, fixed-point rates,
//! transactions, blocks and the chain configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use primitive_types::U256;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fixed-point scale shared by every exchange rate (rate 7.2 is stored as 7_200_000_000).
pub const RATE_SCALE: u64 = 1_000_000_000;
/// Smallest subunits per whole token.
pub const SUBUNITS_PER_TOKEN: u64 = 1_000_000_000_000_000_000;
/// Subunits per "gigasubunit", the denomination base fees are quoted in.
pub const SUBUNITS_PER_GIGA: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("invalid currency unit `{0}`: expected 3-8 uppercase ASCII letters")]
    CurrencyUnit(String),
    #[error("invalid decimal `{0}`")]
    Decimal(String),
    #[error("decimal `{0}` has more than {1} fractional digits")]
    Precision(String, u32),
    #[error("value `{0}` out of range")]
    Range(String),
    #[error("invalid hex `{0}`")]
    Hex(String),
}

/// Identifier of one native stablecoin. Stored inline so it is `Copy`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CurrencyUnit {
    len: u8,
    bytes: [u8; 8],
}

impl CurrencyUnit {
    pub fn new(code: &str) -> Result<Self, ParseError> {
        let raw = code.as_bytes();
        if !(3..=8).contains(&raw.len()) || !raw.iter().all(|b| b.is_ascii_uppercase()) {
            return Err(ParseError::CurrencyUnit(code.to_string()));
        }
        let mut bytes = [0u8; 8];
        bytes[..raw.len()].copy_from_slice(raw);
        Ok(Self { len: raw.len() as u8, bytes })
    }

    pub fn as_str(&self) -> &str {
        // constructor guarantees ASCII
        std::str::from_utf8(&self.bytes[..self.len as usize]).unwrap()
    }
}

impl fmt::Display for CurrencyUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for CurrencyUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CurrencyUnit({})", self.as_str())
    }
}

impl FromStr for CurrencyUnit {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl Serialize for CurrencyUnit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CurrencyUnit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CurrencyUnit::new(&s).map_err(serde::de::Error::custom)
    }
}

/// Unsigned 256-bit amount in subunits. Arithmetic is checked.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Amount(pub U256);

impl Amount {
    pub const ZERO: Amount = Amount(U256::zero());

    pub fn from_u64(v: u64) -> Self {
        Amount(U256::from(v))
    }

    pub fn from_u128(v: u128) -> Self {
        Amount(U256::from(v))
    }

    pub fn tokens(whole: u64) -> Self {
        Amount(U256::from(whole) * U256::from(SUBUNITS_PER_TOKEN))
    }

    pub fn giga(v: u64) -> Self {
        Amount(U256::from(v) * U256::from(SUBUNITS_PER_GIGA))
    }

    /// Parses a decimal number of tokens ("100", "0.5") into subunits.
    pub fn parse_tokens(s: &str) -> Result<Self, ParseError> {
        parse_scaled_u256(s, 18).map(Amount)
    }

    /// Parses a decimal number of gigasubunits ("7.2") into subunits.
    pub fn parse_giga(s: &str) -> Result<Self, ParseError> {
        parse_scaled_u256(s, 9).map(Amount)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn checked_add(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_add(rhs.0).map(Amount)
    }

    pub fn checked_sub(self, rhs: Amount) -> Option<Amount> {
        self.0.checked_sub(rhs.0).map(Amount)
    }

    pub fn checked_mul_u64(self, rhs: u64) -> Option<Amount> {
        self.0.checked_mul(U256::from(rhs)).map(Amount)
    }

    /// Renders the amount as whole tokens with all 18 fractional digits trimmed of trailing zeros.
    pub fn to_token_string(&self) -> String {
        format_scaled_u256(self.0, 18)
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        self.0.to_big_endian()
    }

    pub fn from_be_bytes(b: &[u8; 32]) -> Self {
        Amount(U256::from_big_endian(b))
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Amount({})", self.0)
    }
}

impl From<u64> for Amount {
    fn from(v: u64) -> Self {
        Amount::from_u64(v)
    }
}

impl Serialize for Amount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        U256::from_dec_str(&s)
            .map(Amount)
            .map_err(|_| serde::de::Error::custom(format!("invalid amount `{s}`")))
    }
}

/// Parses a non-negative decimal into an integer scaled by `10^digits`.
/// Extra fractional digits beyond the scale are an error rather than silently truncated.
pub fn parse_fixed(s: &str, digits: u32) -> Result<u64, ParseError> {
    let v = parse_scaled_u256(s, digits)?;
    if v > U256::from(u64::MAX) {
        return Err(ParseError::Range(s.to_string()));
    }
    Ok(v.as_u64())
}

fn parse_scaled_u256(s: &str, digits: u32) -> Result<U256, ParseError> {
    let t = s.trim();
    let (int, frac) = match t.split_once('.') {
        Some((i, f)) => (i, f),
        None => (t, ""),
    };
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if int.is_empty() && frac.is_empty() || !all_digits(int) || !all_digits(frac) {
        return Err(ParseError::Decimal(s.to_string()));
    }
    if t.ends_with('.') && frac.is_empty() {
        return Err(ParseError::Decimal(s.to_string()));
    }
    if frac.len() > digits as usize {
        return Err(ParseError::Precision(s.to_string(), digits));
    }
    let mut padded = String::with_capacity(int.len() + digits as usize);
    padded.push_str(if int.is_empty() { "0" } else { int });
    padded.push_str(frac);
    padded.extend(std::iter::repeat_n('0', digits as usize - frac.len()));
    U256::from_dec_str(&padded).map_err(|_| ParseError::Range(s.to_string()))
}

/// Formats a fixed-point integer with `digits` fractional digits, trimming trailing zeros.
pub fn format_fixed(v: u64, digits: u32) -> String {
    format_scaled_u256(U256::from(v), digits)
}

fn format_scaled_u256(v: U256, digits: u32) -> String {
    let scale = U256::exp10(digits as usize);
    let int = v / scale;
    let frac = v % scale;
    if frac.is_zero() {
        return int.to_string();
    }
    let mut f = format!("{:0>width$}", frac.to_string(), width = digits as usize);
    while f.ends_with('0') {
        f.pop();
    }
    format!("{int}.{f}")
}

/// Fixed-point exchange rate: one unit of `from` buys `value / 10^9` units of `to`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Rate {
    pub from: CurrencyUnit,
    pub to: CurrencyUnit,
    pub value: u64,
}

impl Rate {
    pub fn identity(unit: CurrencyUnit) -> Self {
        Rate { from: unit, to: unit, value: RATE_SCALE }
    }

    pub fn parse(from: CurrencyUnit, to: CurrencyUnit, decimal: &str) -> Result<Self, ParseError> {
        let value = parse_fixed(decimal, 9)?;
        Ok(Rate { from, to, value })
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}={}", self.from, self.to, format_fixed(self.value, 9))
    }
}

macro_rules! hex_bytes {
    ($name:ident, $len:expr) => {
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;

            pub fn zero() -> Self {
                Self([0u8; $len])
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                format!("0x{}", hex::encode(self.0))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl FromStr for $name {
            type Err = ParseError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let body = s.strip_prefix("0x").ok_or_else(|| ParseError::Hex(s.to_string()))?;
                let mut out = [0u8; $len];
                hex::decode_to_slice(body, &mut out).map_err(|_| ParseError::Hex(s.to_string()))?;
                Ok(Self(out))
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_bytes!(Address, 20);
hex_bytes!(Digest, 32);
hex_bytes!(Signature, 64);

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct ValidatorId(pub u32);

impl fmt::Display for ValidatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TxKind {
    Transfer,
    Payload,
    Proposal,
    Vote,
}

/// What a wallet signs and sends to an RPC endpoint: no currency unit and no base fee.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TxEnvelope {
    pub sender: Address,
    pub recipient: Option<Address>,
    pub nonce: u64,
    pub tip: Amount,
    pub gas_limit: u64,
    pub transfer_amount: Amount,
    pub payload: Vec<u8>,
    pub kind: TxKind,
    pub signature: Signature,
}

/// A transaction after an endpoint has tagged it with its currency unit and base fee.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TaggedTransaction {
    pub sender: Address,
    pub recipient: Option<Address>,
    pub nonce: u64,
    pub unit: CurrencyUnit,
    pub base_fee: Amount,
    pub tip: Amount,
    pub gas_limit: u64,
    pub transfer_amount: Amount,
    pub payload: Vec<u8>,
    pub kind: TxKind,
    pub signature: Signature,
}

impl TaggedTransaction {
    pub fn from_envelope(env: TxEnvelope, unit: CurrencyUnit, base_fee: Amount) -> Self {
        TaggedTransaction {
            sender: env.sender,
            recipient: env.recipient,
            nonce: env.nonce,
            unit,
            base_fee,
            tip: env.tip,
            gas_limit: env.gas_limit,
            transfer_amount: env.transfer_amount,
            payload: env.payload,
            kind: env.kind,
            signature: env.signature,
        }
    }

    pub fn envelope(&self) -> TxEnvelope {
        TxEnvelope {
            sender: self.sender,
            recipient: self.recipient,
            nonce: self.nonce,
            tip: self.tip,
            gas_limit: self.gas_limit,
            transfer_amount: self.transfer_amount,
            payload: self.payload.clone(),
            kind: self.kind,
            signature: self.signature,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Block {
    pub height: u64,
    pub proposer: ValidatorId,
    pub parent_hash: Digest,
    pub transactions: Vec<TaggedTransaction>,
    pub rate_snapshot_height: u64,
    pub state_root: Digest,
}

/// Genesis committee for one stablecoin.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CommitteeSeed {
    pub members: Vec<Address>,
    pub committee_size: u32,
    pub quorum_size: u32,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum UpgradeAction {
    AddUnit { unit: CurrencyUnit, committee: CommitteeSeed },
    RemoveUnit { unit: CurrencyUnit, #[serde(default)] force: bool },
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ScheduledUpgrade {
    pub height: u64,
    pub action: UpgradeAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("reference unit {0} is not in the unit list")]
    ReferenceNotListed(CurrencyUnit),
    #[error("duplicate currency unit {0}")]
    DuplicateUnit(CurrencyUnit),
    #[error("oracle sync interval must be at least 1")]
    ZeroSyncInterval,
    #[error("validator set is empty")]
    NoValidators,
    #[error("duplicate validator {0}")]
    DuplicateValidator(ValidatorId),
    #[error("committee for {0} violates 1 <= quorum <= committee_size and |members| <= committee_size")]
    BadCommittee(CurrencyUnit),
    #[error("genesis rate for {0} must be positive")]
    ZeroRate(CurrencyUnit),
    #[error("block gas limit below one transfer")]
    BlockGasTooLow,
}

/// Chain-wide parameters. `units` is the set active at the current height;
/// scheduled upgrades are consumed as heights are reached.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ChainConfig {
    pub chain_id: u64,
    pub units: Vec<CurrencyUnit>,
    pub reference_unit: CurrencyUnit,
    pub reference_base_fee: Amount,
    pub oracle_sync_interval: u64,
    pub validators: Vec<ValidatorId>,
    pub block_gas_limit: u64,
    #[serde(default)]
    pub scheduled_upgrades: Vec<ScheduledUpgrade>,
    /// Rates reference->unit (10^9 scale) in force until the first oracle sync.
    #[serde(default)]
    pub genesis_rates: BTreeMap<CurrencyUnit, u64>,
    #[serde(default)]
    pub committees: BTreeMap<CurrencyUnit, CommitteeSeed>,
    pub feeder: Address,
    pub proposal_ttl: u64,
}

pub const DEFAULT_PROPOSAL_TTL: u64 = 10_000;

impl ChainConfig {
    /// Two-unit USD/CNY configuration used throughout tests and experiments.
    pub fn example(validators: u32) -> Self {
        let usd = CurrencyUnit::new("USD").unwrap();
        let cny = CurrencyUnit::new("CNY").unwrap();
        ChainConfig {
            chain_id: 1337,
            units: vec![usd, cny],
            reference_unit: usd,
            reference_base_fee: Amount::giga(1),
            oracle_sync_interval: 10,
            validators: (0..validators).map(ValidatorId).collect(),
            block_gas_limit: 30_000_000,
            scheduled_upgrades: Vec::new(),
            genesis_rates: BTreeMap::from([(cny, 7_200_000_000)]),
            committees: BTreeMap::new(),
            feeder: Address::zero(),
            proposal_ttl: DEFAULT_PROPOSAL_TTL,
        }
    }

    pub fn has_unit(&self, unit: CurrencyUnit) -> bool {
        self.units.contains(&unit)
    }

    pub fn fault_tolerance(&self) -> usize {
        self.validators.len().saturating_sub(1) / 3
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut seen = std::collections::BTreeSet::new();
        for u in &self.units {
            if !seen.insert(*u) {
                return Err(ConfigError::DuplicateUnit(*u));
            }
        }
        if !self.has_unit(self.reference_unit) {
            return Err(ConfigError::ReferenceNotListed(self.reference_unit));
        }
        if self.oracle_sync_interval == 0 {
            return Err(ConfigError::ZeroSyncInterval);
        }
        if self.validators.is_empty() {
            return Err(ConfigError::NoValidators);
        }
        let mut vs = std::collections::BTreeSet::new();
        for v in &self.validators {
            if !vs.insert(*v) {
                return Err(ConfigError::DuplicateValidator(*v));
            }
        }
        if self.block_gas_limit < crate::ledger::TRANSFER_GAS {
            return Err(ConfigError::BlockGasTooLow);
        }
        for (unit, rate) in &self.genesis_rates {
            if *rate == 0 {
                return Err(ConfigError::ZeroRate(*unit));
            }
        }
        let seeds = self.committees.iter().map(|(u, s)| (*u, s)).chain(
            self.scheduled_upgrades.iter().filter_map(|up| match &up.action {
                UpgradeAction::AddUnit { unit, committee } => Some((*unit, committee)),
                UpgradeAction::RemoveUnit { .. } => None,
            }),
        );
        for (unit, seed) in seeds {
            let members: std::collections::BTreeSet<_> = seed.members.iter().collect();
            if seed.quorum_size == 0
                || seed.quorum_size > seed.committee_size
                || members.len() as u32 > seed.committee_size
            {
                return Err(ConfigError::BadCommittee(unit));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn currency_unit_rules() {
        assert!(CurrencyUnit::new("USD").is_ok());
        assert!(CurrencyUnit::new("ABCDEFGH").is_ok());
        assert!(CurrencyUnit::new("US").is_err());
        assert!(CurrencyUnit::new("usd").is_err());
        assert!(CurrencyUnit::new("ABCDEFGHI").is_err());
        assert!(CurrencyUnit::new("U5D").is_err());
        assert_eq!(CurrencyUnit::new("CNY").unwrap().to_string(), "CNY");
    }

    #[test]
    fn fixed_point_parsing() {
        assert_eq!(parse_fixed("7.2", 9).unwrap(), 7_200_000_000);
        assert_eq!(parse_fixed("7.11", 9).unwrap(), 7_110_000_000);
        assert_eq!(parse_fixed("1", 9).unwrap(), 1_000_000_000);
        assert_eq!(parse_fixed(".5", 9).unwrap(), 500_000_000);
        assert!(parse_fixed("abc", 9).is_err());
        assert!(parse_fixed("1.", 9).is_err());
        assert!(parse_fixed("-1", 9).is_err());
        assert!(matches!(parse_fixed("0.0000000001", 9), Err(ParseError::Precision(..))));
        assert_eq!(format_fixed(7_110_000_000, 9), "7.11");
        assert_eq!(format_fixed(3_000_000_000, 9), "3");
    }

    #[test]
    fn amount_units() {
        assert_eq!(Amount::tokens(10).0, U256::from(10u128 * 10u128.pow(18)));
        assert_eq!(Amount::parse_giga("7.2").unwrap(), Amount::from_u64(7_200_000_000));
        assert_eq!(Amount::parse_tokens("0.22315").unwrap().to_token_string(), "0.22315");
        assert!(Amount::ZERO.checked_sub(Amount::from_u64(1)).is_none());
        let max = Amount(U256::MAX);
        assert!(max.checked_add(Amount::from_u64(1)).is_none());
        assert!(max.checked_mul_u64(2).is_none());
    }

    #[test]
    fn hex_forms_are_lowercase_prefixed() {
        let a = Address([0xAB; 20]);
        assert_eq!(a.to_hex(), format!("0x{}", "ab".repeat(20)));
        assert_eq!(a.to_hex().parse::<Address>().unwrap(), a);
        assert!("abab".parse::<Address>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = ChainConfig::example(4);
        assert!(c.validate().is_ok());
        c.oracle_sync_interval = 0;
        assert_eq!(c.validate(), Err(ConfigError::ZeroSyncInterval));
        let mut c = ChainConfig::example(4);
        c.reference_unit = CurrencyUnit::new("EUR").unwrap();
        assert!(matches!(c.validate(), Err(ConfigError::ReferenceNotListed(_))));
        assert_eq!(ChainConfig::example(4).fault_tolerance(), 1);
        assert_eq!(ChainConfig::example(7).fault_tolerance(), 2);
    }
}
