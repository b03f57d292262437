//! Scenario metrics. Reports contain no floats and only ordered maps, so the
//! same scenario and seed always render byte-identical output.

use std::collections::BTreeMap;
use std::path::Path;

use primitive_types::U256;
use serde::Serialize;

use crate::crypto::CanonicalDigest;
use crate::fees::value_in_reference;
use crate::harness::scenario::{address_of, ScenarioConfig, ScenarioRun};
use crate::ledger::ReceiptStatus;
use crate::types::{format_fixed, TxKind, RATE_SCALE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedTx {
    pub label: String,
    pub at_ms: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TxMetric {
    pub label: String,
    pub digest: String,
    pub unit: String,
    pub kind: String,
    /// `success`, `reverted`, or `pending` if never committed.
    pub status: String,
    pub gas_used: Option<u64>,
    /// Subunits of `unit`.
    pub fee: Option<String>,
    /// Fee converted at the block's rate snapshot, reference subunits.
    pub fee_value_ref: Option<String>,
    pub commit_height: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub target_height: u64,
    pub reached_target: bool,
    pub gateway: u32,
    pub gateway_height: u64,
    pub min_honest_height: u64,
    pub sim_time_ms: u64,
    pub blocks_committed: u64,
    /// Blocks the gateway committed in a round above zero.
    pub late_round_blocks: u64,
    pub messages_delivered: u64,
    pub evidence: usize,
    pub tamper_attempts: usize,
    pub violations: Vec<String>,
    pub final_state_root: String,
    /// Max over min reference-unit fee value per gas among committed workload txs.
    pub fee_value_spread: Option<String>,
    pub upgrade_events: Vec<String>,
    pub balances: BTreeMap<String, BTreeMap<String, String>>,
    pub transactions: Vec<TxMetric>,
    pub rejected: Vec<RejectedTx>,
}

fn kind_name(k: TxKind) -> &'static str {
    match k {
        TxKind::Transfer => "transfer",
        TxKind::Payload => "payload",
        TxKind::Proposal => "proposal",
        TxKind::Vote => "vote",
    }
}

impl MetricsReport {
    pub fn build(s: &ScenarioConfig, run: &ScenarioRun) -> MetricsReport {
        let world = &run.world;
        let app = &world.node(run.gateway).expect("gateway exists").app;
        let mut per_gas: Vec<U256> = Vec::new();
        let transactions = run
            .tracked
            .iter()
            .map(|t| {
                let digest = t.tx.digest();
                let receipt = app.receipts.get(&digest);
                let fee_value = receipt.and_then(|r| {
                    let block = app.chain.get(r.block_height.checked_sub(1)? as usize)?;
                    let rates = app.rate_history.get(&block.rate_snapshot_height)?;
                    value_in_reference(r.fee_charged, r.unit, rates).ok()
                });
                if let (Some(r), Some(v)) = (receipt, fee_value) {
                    if !t.label.starts_with("feed@") && r.gas_used > 0 {
                        per_gas.push(v * U256::from(RATE_SCALE) / U256::from(r.gas_used));
                    }
                }
                TxMetric {
                    label: t.label.clone(),
                    digest: digest.to_hex(),
                    unit: t.tx.unit.to_string(),
                    kind: kind_name(t.tx.kind).into(),
                    status: match receipt.map(|r| r.status) {
                        Some(ReceiptStatus::Success) => "success",
                        Some(ReceiptStatus::Reverted) => "reverted",
                        Some(ReceiptStatus::Invalid) => "invalid",
                        None => "pending",
                    }
                    .into(),
                    gas_used: receipt.map(|r| r.gas_used),
                    fee: receipt.map(|r| r.fee_charged.to_string()),
                    fee_value_ref: fee_value.map(|v| v.to_string()),
                    commit_height: receipt.map(|r| r.block_height),
                }
            })
            .collect();
        let fee_value_spread = match (per_gas.iter().min(), per_gas.iter().max()) {
            (Some(lo), Some(hi)) if !lo.is_zero() => Some(format_fixed((*hi * U256::from(RATE_SCALE) / *lo).low_u64(), 9)),
            _ => None,
        };
        let mut balances = BTreeMap::new();
        let mut names: Vec<&str> = s.accounts.iter().map(|a| a.name.as_str()).collect();
        for w in &s.workload {
            names.push(&w.from);
            names.extend(w.to.as_deref());
            names.extend(w.action.as_ref().and_then(|a| a.account.as_deref()));
        }
        for name in names {
            let Ok(who) = address_of(name) else { continue };
            let per_unit = app
                .state
                .accounts
                .get(&who)
                .map(|acc| acc.balances.iter().map(|(u, v)| (u.to_string(), v.to_string())).collect())
                .unwrap_or_default();
            balances.insert(name.to_string(), per_unit);
        }
        MetricsReport {
            seed: s.seed,
            target_height: s.target_height,
            reached_target: run.reached_target,
            gateway: run.gateway.0,
            gateway_height: app.height(),
            min_honest_height: world.min_honest_height(),
            sim_time_ms: world.now,
            blocks_committed: app.chain.len() as u64,
            late_round_blocks: world.commits.iter().filter(|c| c.node == run.gateway && c.round > 0).count() as u64,
            messages_delivered: world.network.delivered,
            evidence: world.evidence_count(),
            tamper_attempts: world.tampered().len(),
            violations: world.violations.iter().map(|v| v.to_string()).collect(),
            final_state_root: app.state.state_root().to_hex(),
            fee_value_spread,
            upgrade_events: app
                .upgrade_log
                .iter()
                .map(|e| {
                    let what = match &e.action {
                        crate::types::UpgradeAction::AddUnit { unit, .. } => format!("add {unit}"),
                        crate::types::UpgradeAction::RemoveUnit { unit, force } => {
                            format!("remove {unit}{}", if *force { " (forced)" } else { "" })
                        }
                    };
                    match &e.outcome {
                        Ok(()) => format!("height {}: {what}: applied", e.height),
                        Err(err) => format!("height {}: {what}: refused: {err}", e.height),
                    }
                })
                .collect(),
            balances,
            transactions,
            rejected: run.rejected.clone(),
        }
    }

    pub fn is_safe(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        out.push(format!("seed                {}", self.seed));
        out.push(format!("target height       {} ({})", self.target_height, if self.reached_target { "reached" } else { "NOT reached" }));
        out.push(format!("gateway             v{} at height {}", self.gateway, self.gateway_height));
        out.push(format!("min honest height   {}", self.min_honest_height));
        out.push(format!("simulated time      {} ms", self.sim_time_ms));
        out.push(format!("blocks committed    {}", self.blocks_committed));
        out.push(format!("late-round blocks   {}", self.late_round_blocks));
        out.push(format!("messages delivered  {}", self.messages_delivered));
        out.push(format!("evidence            {}", self.evidence));
        out.push(format!("tamper attempts     {}", self.tamper_attempts));
        out.push(format!("state root          {}", self.final_state_root));
        if let Some(s) = &self.fee_value_spread {
            out.push(format!("fee value spread    {s}"));
        }
        out.push(format!("safety violations   {}", self.violations.len()));
        for v in &self.violations {
            out.push(format!("  ! {v}"));
        }
        if !self.upgrade_events.is_empty() {
            out.push("upgrades".into());
            out.extend(self.upgrade_events.iter().map(|e| format!("  {e}")));
        }
        if !self.balances.is_empty() {
            out.push("balances".into());
            for (name, units) in &self.balances {
                let b: Vec<String> = units.iter().map(|(u, v)| format!("{u}={v}")).collect();
                out.push(format!("  {name}: {}", b.join(" ")));
            }
        }
        out.push(format!("transactions        {}", self.transactions.len()));
        for t in &self.transactions {
            out.push(format!(
                "  {} {} {} {} gas={} fee={} ref={} h={}",
                t.label,
                t.unit,
                t.kind,
                t.status,
                t.gas_used.map(|g| g.to_string()).unwrap_or_else(|| "-".into()),
                t.fee.as_deref().unwrap_or("-"),
                t.fee_value_ref.as_deref().unwrap_or("-"),
                t.commit_height.map(|h| h.to_string()).unwrap_or_else(|| "-".into()),
            ));
        }
        if !self.rejected.is_empty() {
            out.push(format!("rejected            {}", self.rejected.len()));
            for r in &self.rejected {
                out.push(format!("  {} @{}ms: {}", r.label, r.at_ms, r.reason));
            }
        }
        out.join("\n") + "\n"
    }

    /// Writes `<prefix>.txt` and `<prefix>.json`.
    pub fn write(&self, prefix: &Path) -> std::io::Result<()> {
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(prefix.with_extension("txt"), self.to_text())?;
        std::fs::write(prefix.with_extension("json"), self.to_json())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProposalView {
    pub id: String,
    pub action: String,
    pub status: String,
    pub yes_votes: usize,
    pub created_height: u64,
    pub expiry_height: u64,
}

/// One unit's governance state as seen by the gateway node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GovernanceStatus {
    pub unit: String,
    pub height: u64,
    pub committee: Vec<String>,
    pub committee_size: u32,
    pub quorum_size: u32,
    pub blacklist: Vec<String>,
    pub minted: String,
    pub burned: String,
    pub total_supply: String,
    pub proposals: Vec<ProposalView>,
}

impl GovernanceStatus {
    pub fn of(run: &ScenarioRun, unit: crate::types::CurrencyUnit) -> Option<GovernanceStatus> {
        let app = &run.world.node(run.gateway)?.app;
        let gov = app.state.governance.get(&unit)?;
        let mut proposals: Vec<&crate::governance::Proposal> = gov.proposals.values().collect();
        proposals.sort_by_key(|p| (p.created_height, p.id));
        Some(GovernanceStatus {
            unit: unit.to_string(),
            height: app.height(),
            committee: gov.committee.iter().map(|a| a.to_hex()).collect(),
            committee_size: gov.committee_size,
            quorum_size: gov.quorum_size,
            blacklist: gov.blacklist.iter().map(|a| a.to_hex()).collect(),
            minted: gov.minted.to_string(),
            burned: gov.burned.to_string(),
            total_supply: app.state.total_supply(unit).to_string(),
            proposals: proposals
                .into_iter()
                .map(|p| ProposalView {
                    id: p.id.to_hex(),
                    action: p.action.name().to_string(),
                    status: format!("{:?}", p.status).to_lowercase(),
                    yes_votes: gov.effective_votes(&p.id),
                    created_height: p.created_height,
                    expiry_height: p.expiry_height,
                })
                .collect(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = vec![
            format!("unit            {} at height {}", self.unit, self.height),
            format!("committee       {} members, size {}, quorum {}", self.committee.len(), self.committee_size, self.quorum_size),
        ];
        out.extend(self.committee.iter().map(|m| format!("  {m}")));
        out.push(format!("blacklist       {}", self.blacklist.len()));
        out.extend(self.blacklist.iter().map(|m| format!("  {m}")));
        out.push(format!("minted          {}", self.minted));
        out.push(format!("burned          {}", self.burned));
        out.push(format!("total supply    {}", self.total_supply));
        out.push(format!("proposals       {}", self.proposals.len()));
        for p in &self.proposals {
            out.push(format!(
                "  {} {} {} votes={} h={}..{}",
                &p.id[..18],
                p.action,
                p.status,
                p.yes_votes,
                p.created_height,
                p.expiry_height
            ));
        }
        out.join("\n") + "\n"
    }
}
