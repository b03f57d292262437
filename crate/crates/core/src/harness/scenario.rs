//! TOML scenario files and the deterministic scenario runner.

use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::byzantine::ByzantineStrategy;
use crate::consensus::TimeoutConfig;
use crate::crypto::{CanonicalDigest, SecretKey};
use crate::encoding::Encode;
use crate::governance::{GovernanceBody, ProposalAction};
use crate::harness::report::{MetricsReport, RejectedTx};
use crate::ledger::gas_used_for;
use crate::network::NetworkParams;
use crate::oracle::{load_rate_series, FeedCall, RateSample, FEED_CONTRACT};
use crate::types::{
    parse_fixed, Address, Amount, ChainConfig, CommitteeSeed, CurrencyUnit, Digest, Rate, ScheduledUpgrade, Signature,
    TaggedTransaction, TxEnvelope, TxKind, UpgradeAction, ValidatorId, DEFAULT_PROPOSAL_TTL,
};
use crate::world::{SafetyViolation, World, WorldConfig};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}", diverged_message(.violations))]
    Diverged { violations: Vec<SafetyViolation>, report: Box<MetricsReport> },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn diverged_message(v: &[SafetyViolation]) -> String {
    let first = v.first().map(|x| x.to_string()).unwrap_or_default();
    format!("scenario diverged: {} safety violation(s), first: {first}", v.len())
}

fn cfg_err(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Config(msg.into())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub target_height: u64,
    /// Simulated-time budget; the run stops here even if the target is not reached.
    #[serde(default = "default_max_time")]
    pub max_time_ms: u64,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub timeouts: TimeoutSection,
    #[serde(default)]
    pub accounts: Vec<AccountSpec>,
    #[serde(default)]
    pub byzantine: Vec<ByzantineSpec>,
    #[serde(default)]
    pub upgrades: Vec<UpgradeSpec>,
    #[serde(default)]
    pub workload: Vec<WorkloadItem>,
    /// `height,unit,rate` lines the feeder pushes to the feed contract.
    /// Relative paths here and in `report` are taken from the scenario file's directory.
    pub rate_series: Option<PathBuf>,
    /// Output path prefix; `.txt` and `.json` are appended.
    pub report: Option<PathBuf>,
    /// Validator whose endpoints the workload uses; defaults to the first honest one.
    pub gateway_node: Option<u32>,
}

fn default_max_time() -> u64 {
    24 * 3_600_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub chain_id: u64,
    pub units: Vec<String>,
    pub reference_unit: String,
    /// Reference-unit base fee in gigasubunits per gas.
    pub reference_base_fee: String,
    pub oracle_sync_interval: u64,
    pub validators: u32,
    pub block_gas_limit: u64,
    pub proposal_ttl: u64,
    /// Account name of the oracle feeder.
    pub feeder: String,
    pub genesis_rates: BTreeMap<String, String>,
    pub committees: BTreeMap<String, CommitteeSpec>,
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection {
            chain_id: 1337,
            units: vec!["USD".into(), "CNY".into()],
            reference_unit: "USD".into(),
            reference_base_fee: "1".into(),
            oracle_sync_interval: 10,
            validators: 4,
            block_gas_limit: 30_000_000,
            proposal_ttl: DEFAULT_PROPOSAL_TTL,
            feeder: "oracle".into(),
            genesis_rates: BTreeMap::from([("CNY".into(), "7.2".into())]),
            committees: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitteeSpec {
    pub members: Vec<String>,
    pub committee_size: u32,
    pub quorum_size: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    /// Omit for a network that never stabilizes.
    pub gst_ms: Option<u64>,
    pub delta_ms: u64,
    pub min_delay_ms: u64,
    pub pre_gst_max_delay_ms: u64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let p = NetworkParams::default();
        NetworkSection { gst_ms: p.gst_ms, delta_ms: p.delta_ms, min_delay_ms: p.min_delay_ms, pre_gst_max_delay_ms: p.pre_gst_max_delay_ms }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeoutSection {
    pub propose_ms: u64,
    pub prevote_ms: u64,
    pub precommit_ms: u64,
    pub block_interval_ms: u64,
}

impl Default for TimeoutSection {
    fn default() -> Self {
        let t = TimeoutConfig::default();
        TimeoutSection { propose_ms: t.propose_ms, prevote_ms: t.prevote_ms, precommit_ms: t.precommit_ms, block_interval_ms: t.block_interval_ms }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountSpec {
    pub name: String,
    /// Whole-token balances per unit, decimal strings.
    #[serde(default)]
    pub balances: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ByzantineSpec {
    pub validator: u32,
    pub strategy: ByzantineStrategy,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpgradeSpec {
    pub height: u64,
    /// `add_unit` or `remove_unit`.
    pub op: String,
    pub unit: String,
    #[serde(default)]
    pub force: bool,
    pub committee: Option<CommitteeSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadKind {
    #[default]
    Transfer,
    Payload,
    Propose,
    Vote,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    /// mint, burn, whitelist_add, whitelist_remove, blacklist_add,
    /// blacklist_remove, set_committee_size, set_quorum_size
    pub op: String,
    pub account: Option<String>,
    pub amount: Option<String>,
    pub size: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadItem {
    #[serde(default)]
    pub at_ms: u64,
    /// Unit of the endpoint used.
    pub endpoint: String,
    pub from: String,
    #[serde(default)]
    pub kind: WorkloadKind,
    pub to: Option<String>,
    /// Whole tokens.
    #[serde(default = "zero")]
    pub amount: String,
    /// Gigasubunits per gas.
    #[serde(default = "zero")]
    pub tip: String,
    pub gas_limit: Option<u64>,
    #[serde(default)]
    pub payload_bytes: usize,
    #[serde(default = "one")]
    pub count: u32,
    #[serde(default)]
    pub interval_ms: u64,
    pub action: Option<ActionSpec>,
    /// Label of the propose item being voted on.
    pub proposal: Option<String>,
    pub label: Option<String>,
}

fn zero() -> String {
    "0".into()
}

fn one() -> u32 {
    1
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("reading {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        cfg.rate_series = cfg.rate_series.map(resolve);
        cfg.report = cfg.report.map(resolve);
        Ok(cfg)
    }
}

/// Account names map to deterministic keys; `0x` strings are taken as addresses.
pub fn address_of(name: &str) -> Result<Address, ScenarioError> {
    if name.starts_with("0x") {
        return name.parse().map_err(|_| cfg_err(format!("bad address `{name}`")));
    }
    Ok(SecretKey::from_name(name).address())
}

fn unit(code: &str) -> Result<CurrencyUnit, ScenarioError> {
    CurrencyUnit::new(code).map_err(|e| cfg_err(format!("unit `{code}`: {e}")))
}

fn tokens(s: &str) -> Result<Amount, ScenarioError> {
    Amount::parse_tokens(s).map_err(|e| cfg_err(format!("amount `{s}`: {e}")))
}

fn committee(spec: &CommitteeSpec) -> Result<CommitteeSeed, ScenarioError> {
    Ok(CommitteeSeed {
        members: spec.members.iter().map(|m| address_of(m)).collect::<Result<_, _>>()?,
        committee_size: spec.committee_size,
        quorum_size: spec.quorum_size,
    })
}

fn action(spec: &ActionSpec) -> Result<ProposalAction, ScenarioError> {
    let account = || spec.account.as_deref().ok_or_else(|| cfg_err(format!("{} needs `account`", spec.op))).and_then(address_of);
    let amount = || spec.amount.as_deref().ok_or_else(|| cfg_err(format!("{} needs `amount`", spec.op))).and_then(tokens);
    let size = || spec.size.ok_or_else(|| cfg_err(format!("{} needs `size`", spec.op)));
    Ok(match spec.op.as_str() {
        "mint" => ProposalAction::Mint { to: account()?, amount: amount()? },
        "burn" => ProposalAction::Burn { from: account()?, amount: amount()? },
        "whitelist_add" => ProposalAction::WhitelistAdd { member: account()? },
        "whitelist_remove" => ProposalAction::WhitelistRemove { member: account()? },
        "blacklist_add" => ProposalAction::BlacklistAdd { account: account()? },
        "blacklist_remove" => ProposalAction::BlacklistRemove { account: account()? },
        "set_committee_size" => ProposalAction::SetCommitteeSize(size()?),
        "set_quorum_size" => ProposalAction::SetQuorumSize(size()?),
        other => return Err(cfg_err(format!("unknown governance op `{other}`"))),
    })
}

/// Builds the chain config, validating every cross-reference in the scenario.
pub fn chain_config(s: &ScenarioConfig) -> Result<ChainConfig, ScenarioError> {
    let c = &s.chain;
    let units = c.units.iter().map(|u| unit(u)).collect::<Result<Vec<_>, _>>()?;
    let mut genesis_rates = BTreeMap::new();
    for (u, r) in &c.genesis_rates {
        let value = parse_fixed(r, 9).map_err(|e| cfg_err(format!("rate for {u}: {e}")))?;
        genesis_rates.insert(unit(u)?, value);
    }
    let mut committees = BTreeMap::new();
    for (u, spec) in &c.committees {
        committees.insert(unit(u)?, committee(spec)?);
    }
    let mut scheduled_upgrades = Vec::new();
    for up in &s.upgrades {
        let u = unit(&up.unit)?;
        let action = match up.op.as_str() {
            "add_unit" => UpgradeAction::AddUnit {
                unit: u,
                committee: match &up.committee {
                    Some(spec) => committee(spec)?,
                    None => CommitteeSeed { members: vec![], committee_size: 1, quorum_size: 1 },
                },
            },
            "remove_unit" => UpgradeAction::RemoveUnit { unit: u, force: up.force },
            other => return Err(cfg_err(format!("unknown upgrade op `{other}`"))),
        };
        scheduled_upgrades.push(ScheduledUpgrade { height: up.height, action });
    }
    let config = ChainConfig {
        chain_id: c.chain_id,
        units,
        reference_unit: unit(&c.reference_unit)?,
        reference_base_fee: Amount::parse_giga(&c.reference_base_fee).map_err(|e| cfg_err(format!("reference_base_fee: {e}")))?,
        oracle_sync_interval: c.oracle_sync_interval,
        validators: (0..c.validators).map(ValidatorId).collect(),
        block_gas_limit: c.block_gas_limit,
        scheduled_upgrades,
        genesis_rates,
        committees,
        feeder: address_of(&c.feeder)?,
        proposal_ttl: c.proposal_ttl,
    };
    config.validate().map_err(|e| cfg_err(e.to_string()))?;
    for u in config.units.iter().filter(|u| **u != config.reference_unit) {
        if !config.genesis_rates.contains_key(u) {
            return Err(cfg_err(format!("no genesis rate for {u}")));
        }
    }
    Ok(config)
}

/// World construction shared by `run_scenario` and live serving.
pub fn build_world(s: &ScenarioConfig) -> Result<(World, ValidatorId), ScenarioError> {
    let chain = chain_config(s)?;
    let known: Vec<CurrencyUnit> = chain
        .units
        .iter()
        .copied()
        .chain(chain.scheduled_upgrades.iter().filter_map(|u| match &u.action {
            UpgradeAction::AddUnit { unit, .. } => Some(*unit),
            UpgradeAction::RemoveUnit { .. } => None,
        }))
        .collect();
    let mut cfg = WorldConfig::new(chain.clone(), s.seed);
    cfg.network = NetworkParams {
        gst_ms: s.network.gst_ms,
        delta_ms: s.network.delta_ms,
        min_delay_ms: s.network.min_delay_ms,
        pre_gst_max_delay_ms: s.network.pre_gst_max_delay_ms,
    };
    if cfg.network.delta_ms == 0 || cfg.network.pre_gst_max_delay_ms < cfg.network.min_delay_ms {
        return Err(cfg_err("network delays must satisfy delta > 0 and pre_gst_max >= min"));
    }
    cfg.timeouts = TimeoutConfig {
        propose_ms: s.timeouts.propose_ms,
        prevote_ms: s.timeouts.prevote_ms,
        precommit_ms: s.timeouts.precommit_ms,
        block_interval_ms: s.timeouts.block_interval_ms,
    };
    for b in &s.byzantine {
        let id = ValidatorId(b.validator);
        if !chain.validators.contains(&id) {
            return Err(cfg_err(format!("byzantine validator {id} is not in the validator set")));
        }
        cfg.byzantine.insert(id, b.strategy);
    }
    for a in &s.accounts {
        let who = address_of(&a.name)?;
        for (u, amount) in &a.balances {
            let u = unit(u)?;
            if !known.contains(&u) {
                return Err(cfg_err(format!("account {} holds unknown unit {u}", a.name)));
            }
            cfg.allocations.push((who, u, tokens(amount)?));
        }
    }
    if s.rate_series.is_some() && !s.accounts.iter().any(|a| address_of(&a.name).ok() == Some(chain.feeder)) {
        cfg.allocations.push((chain.feeder, chain.reference_unit, Amount::tokens(1_000)));
    }
    for w in &s.workload {
        let u = unit(&w.endpoint)?;
        if !known.contains(&u) {
            return Err(cfg_err(format!("workload endpoint {u} is not a configured unit")));
        }
    }
    let gateway = match s.gateway_node {
        Some(g) => ValidatorId(g),
        None => chain.validators.iter().copied().find(|v| !cfg.byzantine.contains_key(v)).ok_or_else(|| cfg_err("no honest validator"))?,
    };
    if !chain.validators.contains(&gateway) {
        return Err(cfg_err(format!("gateway node {gateway} is not a validator")));
    }
    let world = World::new(cfg).map_err(|e| cfg_err(e.to_string()))?;
    Ok((world, gateway))
}

struct Pending {
    at_ms: u64,
    item: usize,
    repeat: u32,
}

/// A submitted transaction the report follows.
#[derive(Debug, Clone)]
pub struct Tracked {
    pub label: String,
    pub tx: TaggedTransaction,
}

pub struct ScenarioRun {
    pub world: World,
    pub gateway: ValidatorId,
    pub tracked: Vec<Tracked>,
    pub rejected: Vec<RejectedTx>,
    pub reached_target: bool,
}

/// Runs the scenario to its target height (or time budget).
pub fn run_world(s: &ScenarioConfig) -> Result<ScenarioRun, ScenarioError> {
    let (mut world, gateway) = build_world(s)?;
    let series: Vec<RateSample> = match &s.rate_series {
        Some(p) => load_rate_series(p).map_err(|e| cfg_err(e.to_string()))?,
        None => Vec::new(),
    };
    let chain = chain_config(s)?;
    let mut rates: VecDeque<RateSample> = {
        let mut v = series;
        v.sort_by_key(|r| r.at);
        v.into()
    };
    let mut queue: Vec<Pending> = s
        .workload
        .iter()
        .enumerate()
        .flat_map(|(i, w)| (0..w.count).map(move |k| Pending { at_ms: w.at_ms + k as u64 * w.interval_ms, item: i, repeat: k }))
        .collect();
    queue.sort_by_key(|p| (p.at_ms, p.item, p.repeat));
    let mut queue: VecDeque<Pending> = queue.into();

    let mut tracked = Vec::new();
    let mut rejected = Vec::new();
    let mut labels: BTreeMap<String, Digest> = BTreeMap::new();
    let feeder = SecretKey::from_name(&s.chain.feeder);

    loop {
        while queue.front().is_some_and(|p| p.at_ms <= world.now) {
            let p = queue.pop_front().expect("front exists");
            submit_item(&mut world, gateway, s, &p, &mut labels, &mut tracked, &mut rejected)?;
        }
        let gw_height = world.node(gateway).map(|n| n.app.height()).unwrap_or(0);
        while rates.front().is_some_and(|r| r.at <= gw_height + 1) {
            let r = rates.pop_front().expect("front exists");
            let label = format!("feed@{}:{}", r.at, r.unit);
            let call = FeedCall { rate: Rate { from: chain.reference_unit, to: r.unit, value: r.rate } }.encode();
            let nonce = pending_nonce(&world, gateway, &feeder.address());
            let env = envelope(&feeder, Some(FEED_CONTRACT), nonce, Amount::ZERO, Amount::ZERO, call, TxKind::Payload, None);
            match world.submit_envelope(gateway, chain.reference_unit, env) {
                Ok(tx) => tracked.push(Tracked { label, tx }),
                Err(e) => rejected.push(RejectedTx { label, at_ms: world.now, reason: e.to_string() }),
            }
        }
        if world.min_honest_height() >= s.target_height {
            break;
        }
        let limit = queue.front().map(|p| p.at_ms.min(s.max_time_ms)).unwrap_or(s.max_time_ms);
        if !world.step(limit) {
            if limit >= s.max_time_ms {
                break;
            }
            world.now = limit;
        }
    }
    let reached_target = world.min_honest_height() >= s.target_height;
    Ok(ScenarioRun { world, gateway, tracked, rejected, reached_target })
}

fn pending_nonce(world: &World, at: ValidatorId, who: &Address) -> u64 {
    let app = &world.node(at).expect("gateway exists").app;
    app.mempool.pending_nonce(who, app.state.nonce(who))
}

#[allow(clippy::too_many_arguments)]
fn envelope(
    key: &SecretKey,
    to: Option<Address>,
    nonce: u64,
    amount: Amount,
    tip: Amount,
    payload: Vec<u8>,
    kind: TxKind,
    gas_limit: Option<u64>,
) -> TxEnvelope {
    let mut env = TxEnvelope {
        sender: key.address(),
        recipient: to,
        nonce,
        tip,
        gas_limit: 0,
        transfer_amount: amount,
        payload,
        kind,
        signature: Signature([0; 64]),
    };
    env.gas_limit = gas_limit.unwrap_or_else(|| {
        gas_used_for(&TaggedTransaction::from_envelope(env.clone(), CurrencyUnit::new("USD").expect("valid"), Amount::ZERO))
    });
    env.sign(key)
}

fn submit_item(
    world: &mut World,
    gateway: ValidatorId,
    s: &ScenarioConfig,
    p: &Pending,
    labels: &mut BTreeMap<String, Digest>,
    tracked: &mut Vec<Tracked>,
    rejected: &mut Vec<RejectedTx>,
) -> Result<(), ScenarioError> {
    let w = &s.workload[p.item];
    let base_label = w.label.clone().unwrap_or_else(|| format!("w{}", p.item));
    let label = if w.count > 1 { format!("{base_label}#{}", p.repeat) } else { base_label.clone() };
    let key = SecretKey::from_name(&w.from);
    let to = w.to.as_deref().map(address_of).transpose()?;
    let tip = Amount::parse_giga(&w.tip).map_err(|e| cfg_err(format!("tip `{}`: {e}", w.tip)))?;
    let (kind, payload, to, amount) = match w.kind {
        WorkloadKind::Transfer => {
            (TxKind::Transfer, vec![], Some(to.ok_or_else(|| cfg_err(format!("{label}: transfer needs `to`")))?), tokens(&w.amount)?)
        }
        WorkloadKind::Payload => (TxKind::Payload, vec![0xab; w.payload_bytes], to, tokens(&w.amount)?),
        WorkloadKind::Propose => {
            let a = action(w.action.as_ref().ok_or_else(|| cfg_err(format!("{label}: propose needs `action`")))?)?;
            (TxKind::Proposal, GovernanceBody::Propose { action: a, evidence: vec![] }.encode(), None, Amount::ZERO)
        }
        WorkloadKind::Vote => {
            let target = w.proposal.as_ref().ok_or_else(|| cfg_err(format!("{label}: vote needs `proposal`")))?;
            let Some(id) = labels.get(target) else {
                rejected.push(RejectedTx { label, at_ms: world.now, reason: format!("proposal `{target}` was never submitted") });
                return Ok(());
            };
            (TxKind::Vote, GovernanceBody::Vote { proposal: *id }.encode(), None, Amount::ZERO)
        }
    };
    let nonce = pending_nonce(world, gateway, &key.address());
    let env = envelope(&key, to, nonce, amount, tip, payload, kind, w.gas_limit);
    match world.submit_envelope(gateway, unit(&w.endpoint)?, env) {
        Ok(tx) => {
            labels.insert(base_label, tx.digest());
            tracked.push(Tracked { label, tx });
        }
        Err(e) => rejected.push(RejectedTx { label, at_ms: world.now, reason: e.to_string() }),
    }
    Ok(())
}

/// Runs a scenario and builds its report; any safety violation is an error.
pub fn run_scenario(s: &ScenarioConfig) -> Result<MetricsReport, ScenarioError> {
    let run = run_world(s)?;
    let report = MetricsReport::build(s, &run);
    if let Some(path) = &s.report {
        report.write(path)?;
    }
    if !run.world.violations.is_empty() {
        return Err(ScenarioError::Diverged { violations: run.world.violations.clone(), report: Box::new(report) });
    }
    Ok(report)
}
