//! Python bindings: fee math, experiments, scenarios and a steppable simulation.
//!
//! Amounts cross the boundary as decimal strings of subunits (1 token = 10^18)
//! so nothing is lost to floats. Fixed-point rates and ratios are returned as
//! decimal strings too.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use stablefee_core::crypto::{CanonicalDigest, SecretKey};
use stablefee_core::fees::{base_fee_for_unit, gas_fee};
use stablefee_core::harness::experiments::{fee_ratio_experiment, fee_stability_experiment, TxTemplate};
use stablefee_core::harness::scenario::{run_scenario as run_scenario_core, ScenarioConfig, ScenarioError};
use stablefee_core::harness::series::{format_price_series, parse_price_series, stable_series, volatile_series};
use stablefee_core::ledger::gas_used_for;
use stablefee_core::oracle::ExchangeRateTable;
use stablefee_core::types::{
    format_fixed, parse_fixed, Address, Amount, ChainConfig, CurrencyUnit, Digest, Rate, Signature, TaggedTransaction,
    TxEnvelope, TxKind, ValidatorId,
};
use stablefee_core::world::{World, WorldConfig};
use stablefee_core::U256;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn unit(code: &str) -> PyResult<CurrencyUnit> {
    CurrencyUnit::new(code).map_err(value_err)
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &serde_json::to_string(v).map_err(value_err)?)
}

/// Parses a decimal rate such as "7.11" into 10^9 fixed point.
#[pyfunction]
fn parse_rate(decimal: &str) -> PyResult<u64> {
    parse_fixed(decimal, 9).map_err(value_err)
}

/// Formats a 10^9 fixed-point value as a trimmed decimal string.
#[pyfunction]
fn format_rate(value: u64) -> String {
    format_fixed(value, 9)
}

/// Base fee per gas for `unit`, in subunits, given rates against the reference unit.
#[pyfunction]
#[pyo3(signature = (unit_code, rates, reference="USD", reference_base_fee_giga="1"))]
fn base_fee(unit_code: &str, rates: BTreeMap<String, String>, reference: &str, reference_base_fee_giga: &str) -> PyResult<String> {
    let reference = unit(reference)?;
    let mut table = BTreeMap::new();
    for (u, r) in &rates {
        table.insert(unit(u)?, parse_fixed(r, 9).map_err(value_err)?);
    }
    let mut config = ChainConfig::example(1);
    config.reference_unit = reference;
    config.units = std::iter::once(reference).chain(table.keys().copied().filter(|u| *u != reference)).collect();
    config.genesis_rates = table.clone();
    config.reference_base_fee = Amount::parse_giga(reference_base_fee_giga).map_err(value_err)?;
    let rates = ExchangeRateTable::genesis(reference, &table);
    let q = base_fee_for_unit(unit(unit_code)?, &rates, &config).map_err(value_err)?;
    Ok(q.base_fee_per_gas.to_string())
}

/// (base + tip) * gas, all in subunits.
#[pyfunction]
fn fee(base_fee_per_gas: &str, tip_per_gas: &str, gas_used: u64) -> PyResult<String> {
    let parse = |s: &str| U256::from_dec_str(s).map(Amount).map_err(|_| value_err(format!("bad amount `{s}`")));
    let (base, tip) = (parse(base_fee_per_gas)?, parse(tip_per_gas)?);
    Ok(gas_fee(base, tip, gas_used).map_err(value_err)?.to_string())
}

/// Gas charged for a transaction of `kind` ("transfer", "payload", "proposal", "vote").
#[pyfunction]
#[pyo3(signature = (kind, payload_len=0))]
fn gas_used(kind: &str, payload_len: usize) -> PyResult<u64> {
    let kind = match kind {
        "transfer" => TxKind::Transfer,
        "payload" => TxKind::Payload,
        "proposal" => TxKind::Proposal,
        "vote" => TxKind::Vote,
        other => return Err(value_err(format!("unknown kind `{other}`"))),
    };
    let tx = TaggedTransaction {
        sender: Address::zero(),
        recipient: None,
        nonce: 0,
        unit: unit("USD")?,
        base_fee: Amount::ZERO,
        tip: Amount::ZERO,
        gas_limit: 0,
        transfer_amount: Amount::ZERO,
        payload: vec![0; payload_len],
        kind,
        signature: Signature([0; 64]),
    };
    Ok(gas_used_for(&tx))
}

/// Commits the same zero-value transfer through two endpoints; returns both receipts and the fee ratio.
#[pyfunction]
#[pyo3(signature = (rate, from_unit="USD", to_unit="CNY"))]
fn fee_ratio<'py>(py: Python<'py>, rate: &str, from_unit: &str, to_unit: &str) -> PyResult<Bound<'py, PyAny>> {
    let rate = Rate::parse(unit(from_unit)?, unit(to_unit)?, rate).map_err(value_err)?;
    let r = py.detach(|| fee_ratio_experiment(rate, &TxTemplate::default())).map_err(value_err)?;
    let d = to_py(py, &r)?;
    d.set_item("ratio_decimal", r.ratio_decimal())?;
    Ok(d)
}

/// Max/min reference fee per mode for two daily price lists (decimal strings).
#[pyfunction]
#[pyo3(signature = (stable, volatile, gas_price_giga="30"))]
fn fee_stability<'py>(py: Python<'py>, stable: Vec<String>, volatile: Vec<String>, gas_price_giga: &str) -> PyResult<Bound<'py, PyAny>> {
    let parse = |v: &[String]| v.iter().map(|p| parse_fixed(p, 9).map_err(value_err)).collect::<PyResult<Vec<u64>>>();
    let price = Amount::parse_giga(gas_price_giga).map_err(value_err)?;
    let r = fee_stability_experiment(&parse(&stable)?, &parse(&volatile)?, &TxTemplate::default(), price).map_err(value_err)?;
    let d = to_py(py, &r)?;
    d.set_item("stable_ratio", r.stable.ratio_decimal())?;
    d.set_item("volatile_ratio", r.volatile.ratio_decimal())?;
    Ok(d)
}

/// Seeded synthetic series as decimal strings. `kind` is "stable" or "volatile".
#[pyfunction]
#[pyo3(signature = (kind, days=182, seed=1, min_price="2000", max_price="3680", deviation_ppm=1800))]
fn gen_series(kind: &str, days: usize, seed: u64, min_price: &str, max_price: &str, deviation_ppm: u64) -> PyResult<Vec<String>> {
    if days < 2 {
        return Err(value_err("need at least 2 days"));
    }
    let prices = match kind {
        "volatile" => {
            let lo = parse_fixed(min_price, 9).map_err(value_err)?;
            let hi = parse_fixed(max_price, 9).map_err(value_err)?;
            if lo == 0 || hi < lo {
                return Err(value_err("need 0 < min_price <= max_price"));
            }
            volatile_series(seed, days, lo, hi)
        }
        "stable" if deviation_ppm < 1_000_000 => stable_series(seed, days, deviation_ppm),
        "stable" => return Err(value_err("deviation must be below 1,000,000 ppm")),
        other => return Err(value_err(format!("unknown series kind `{other}`"))),
    };
    Ok(prices.iter().map(|p| format_fixed(*p, 9)).collect())
}

/// Parses `day,price` CSV text into decimal strings.
#[pyfunction]
fn parse_series(text: &str) -> PyResult<Vec<String>> {
    Ok(parse_price_series(text).map_err(value_err)?.iter().map(|p| format_fixed(*p, 9)).collect())
}

/// Renders decimal prices as `day,price` CSV.
#[pyfunction]
fn format_series(prices: Vec<String>) -> PyResult<String> {
    let v = prices.iter().map(|p| parse_fixed(p, 9).map_err(value_err)).collect::<PyResult<Vec<u64>>>()?;
    Ok(format_price_series(&v))
}

/// Runs a TOML scenario (text) and returns the metrics report as a dict.
/// A safety violation raises RuntimeError.
#[pyfunction]
fn run_scenario<'py>(py: Python<'py>, toml_text: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ScenarioConfig::from_toml(toml_text).map_err(value_err)?;
    match py.detach(|| run_scenario_core(&cfg)) {
        Ok(r) => json_to_py(py, &r.to_json()),
        Err(e @ ScenarioError::Diverged { .. }) => Err(PyRuntimeError::new_err(e.to_string())),
        Err(e) => Err(value_err(e)),
    }
}

/// A four-or-more validator network in simulated time. Accounts are named;
/// each name maps to a deterministic key.
#[pyclass]
struct Simulation {
    world: World,
    gateway: ValidatorId,
}

#[pymethods]
impl Simulation {
    #[new]
    #[pyo3(signature = (balances, seed=0, validators=4, cny_rate="7.2", block_interval_ms=1000))]
    fn new(balances: BTreeMap<String, BTreeMap<String, String>>, seed: u64, validators: u32, cny_rate: &str, block_interval_ms: u64) -> PyResult<Self> {
        let mut chain = ChainConfig::example(validators);
        let cny = unit("CNY")?;
        chain.genesis_rates.insert(cny, parse_fixed(cny_rate, 9).map_err(value_err)?);
        let mut cfg = WorldConfig::new(chain, seed);
        cfg.timeouts.block_interval_ms = block_interval_ms;
        for (name, per_unit) in &balances {
            for (u, amount) in per_unit {
                cfg.allocations.push((SecretKey::from_name(name).address(), unit(u)?, Amount::parse_tokens(amount).map_err(value_err)?));
            }
        }
        let world = World::new(cfg).map_err(value_err)?;
        Ok(Simulation { world, gateway: ValidatorId(0) })
    }

    /// Lowest height committed by every honest validator.
    #[getter]
    fn height(&self) -> u64 {
        self.world.min_honest_height()
    }

    #[getter]
    fn now_ms(&self) -> u64 {
        self.world.now
    }

    #[getter]
    fn violations(&self) -> Vec<String> {
        self.world.violations.iter().map(|v| v.to_string()).collect()
    }

    #[staticmethod]
    fn address(name: &str) -> String {
        SecretKey::from_name(name).address().to_hex()
    }

    /// Base fee per gas the gateway quotes for `unit`, in subunits.
    fn quote(&self, unit_code: &str) -> PyResult<String> {
        Ok(self.world.quote(self.gateway, unit(unit_code)?).map_err(value_err)?.to_string())
    }

    fn balance(&self, name: &str, unit_code: &str) -> PyResult<String> {
        let who = SecretKey::from_name(name).address();
        Ok(self.world.node(self.gateway).expect("gateway").app.balance(&who, unit(unit_code)?).to_string())
    }

    /// Submits a transfer via the `unit_code` endpoint; returns the transaction digest.
    #[pyo3(signature = (sender, recipient, amount, unit_code, tip_giga="0"))]
    fn transfer(&mut self, sender: &str, recipient: &str, amount: &str, unit_code: &str, tip_giga: &str) -> PyResult<String> {
        let key = SecretKey::from_name(sender);
        let app = &self.world.node(self.gateway).expect("gateway").app;
        let nonce = app.mempool.pending_nonce(&key.address(), app.state.nonce(&key.address()));
        let env = TxEnvelope {
            sender: key.address(),
            recipient: Some(SecretKey::from_name(recipient).address()),
            nonce,
            tip: Amount::parse_giga(tip_giga).map_err(value_err)?,
            gas_limit: 21_000,
            transfer_amount: Amount::parse_tokens(amount).map_err(value_err)?,
            payload: vec![],
            kind: TxKind::Transfer,
            signature: Signature([0; 64]),
        }
        .sign(&key);
        let tx = self.world.submit_envelope(self.gateway, unit(unit_code)?, env).map_err(value_err)?;
        Ok(tx.digest().to_hex())
    }

    /// Runs until every honest validator has committed `height`; False on deadline.
    #[pyo3(signature = (height, deadline_ms=600_000))]
    fn run_until_height(&mut self, py: Python<'_>, height: u64, deadline_ms: u64) -> bool {
        let world = &mut self.world;
        py.detach(|| world.run_until_height(height, deadline_ms))
    }

    /// Receipt by digest as a dict, or None if not committed.
    fn receipt<'py>(&self, py: Python<'py>, digest: &str) -> PyResult<Option<Bound<'py, PyAny>>> {
        let d: Digest = digest.parse().map_err(|_| value_err("bad digest"))?;
        match self.world.node(self.gateway).expect("gateway").app.receipts.get(&d) {
            Some(r) => Ok(Some(to_py(py, r)?)),
            None => Ok(None),
        }
    }

    /// Transaction digests of a committed block, in order.
    fn block_transactions(&self, height: u64) -> PyResult<Vec<String>> {
        let chain = &self.world.node(self.gateway).expect("gateway").app.chain;
        let b = height.checked_sub(1).and_then(|i| chain.get(i as usize)).ok_or_else(|| value_err("no such block"))?;
        Ok(b.transactions.iter().map(|t| t.digest().to_hex()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Simulation(height={}, now_ms={})", self.world.min_honest_height(), self.world.now)
    }
}

/// Multi-stablecoin fee chain simulator.
#[pymodule]
mod stablefee {
    #[pymodule_export]
    use super::{
        base_fee, fee, fee_ratio, fee_stability, format_rate, format_series, gas_used, gen_series, parse_rate, parse_series,
        run_scenario, Simulation,
    };
}
