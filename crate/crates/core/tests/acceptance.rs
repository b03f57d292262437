//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each, and
//! exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use stablefee_core::byzantine::ByzantineStrategy;
use stablefee_core::crypto::{CanonicalDigest, SecretKey};
use stablefee_core::encoding::Encode;
use stablefee_core::fees::base_fee_for_unit;
use stablefee_core::governance::{GovernanceBody, ProposalAction, ProposalStatus};
use stablefee_core::harness::experiments::{fee_ratio_experiment, fee_stability_experiment, TxTemplate};
use stablefee_core::harness::scenario::{run_scenario, ScenarioConfig};
use stablefee_core::harness::series::{stable_series, volatile_series};
use stablefee_core::ledger::{apply_block, apply_transaction, FeeBucket, LedgerState, ReceiptStatus};
use stablefee_core::oracle::ExchangeRateTable;
use stablefee_core::rpc::{serve, spawn_driver, ChainBackend, Gateway, WorldNode};
use stablefee_core::types::{
    Address, Amount, Block, ChainConfig, CommitteeSeed, CurrencyUnit, Digest, Rate, Signature, TaggedTransaction,
    TxEnvelope, TxKind, ValidatorId, RATE_SCALE,
};
use stablefee_core::world::{World, WorldConfig};
use stablefee_core::U256;

// Tolerances and budgets.
const FEE_RATIO_TOLERANCE: u64 = 0;
const VOLATILE_TARGET: u64 = 1_840_000_000;
const VOLATILE_TOLERANCE: u64 = 1_000; // 1e-6 in 1e9 fixed point
const STABLE_MAX: u64 = 1_004_000_000;
const EXPERIMENT_BUDGET: Duration = Duration::from_secs(5);
const CAMPAIGN_BUDGET: Duration = Duration::from_secs(120);
const CAMPAIGN_SEEDS: u64 = 100;
const CAMPAIGN_HEIGHT: u64 = 20;
const GOVERNANCE_CASES: u32 = 1_000;
const CONSERVATION_RUNS: u64 = 10;
const CONSERVATION_BLOCKS: u64 = 50;

type Outcome = Result<String, String>;

fn usd() -> CurrencyUnit {
    CurrencyUnit::new("USD").unwrap()
}

fn cny() -> CurrencyUnit {
    CurrencyUnit::new("CNY").unwrap()
}

fn envelope(key: &SecretKey, kind: TxKind, to: Option<Address>, nonce: u64, amount: Amount, tip: Amount, payload: Vec<u8>, gas: u64) -> TxEnvelope {
    TxEnvelope {
        sender: key.address(),
        recipient: to,
        nonce,
        tip,
        gas_limit: gas,
        transfer_amount: amount,
        payload,
        kind,
        signature: Signature([0; 64]),
    }
    .sign(key)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fee_ratio() -> Outcome {
    let start = Instant::now();
    let rate = Rate::parse(usd(), cny(), "7.11").unwrap();
    let r = fee_ratio_experiment(rate, &TxTemplate::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    // independent oracle: 21000 gas at 1 giga vs round(7.11 giga) per gas
    let fee_usd = U256::from(21_000u64) * U256::from(1_000_000_000u64);
    let fee_cny = U256::from(21_000u64) * U256::from(7_110_000_000u64);
    ensure(r.reference_receipt.fee_charged.0 == fee_usd, || format!("USD fee {}", r.reference_receipt.fee_charged))?;
    ensure(r.unit_receipt.fee_charged.0 == fee_cny, || format!("CNY fee {}", r.unit_receipt.fee_charged))?;
    ensure(r.ratio.abs_diff(7_110_000_000) <= FEE_RATIO_TOLERANCE, || format!("ratio {}", r.ratio_decimal()))?;
    ensure(elapsed < EXPERIMENT_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("ratio {} in {:?}", r.ratio_decimal(), elapsed))
}

fn transfer_gas() -> Outcome {
    let text = r#"
seed = 1
target_height = 4
[timeouts]
block_interval_ms = 1000
[[accounts]]
name = "sender"
balances = { USD = "1000", CNY = "1000" }
[[workload]]
endpoint = "USD"
from = "sender"
to = "receiver"
amount = "3"
count = 5
[[workload]]
endpoint = "CNY"
from = "sender"
to = "receiver"
amount = "0"
count = 5
"#;
    let report = run_scenario(&ScenarioConfig::from_toml(text).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(report.transactions.len() == 10, || format!("{} txs tracked", report.transactions.len()))?;
    for t in &report.transactions {
        ensure(t.status == "success" && t.gas_used == Some(21_000), || format!("{t:?}"))?;
    }
    Ok("10/10 transfers used 21000 gas".into())
}

fn ordering() -> Outcome {
    let a = SecretKey::from_name("user-a");
    let b = SecretKey::from_name("user-b");
    let mut cfg = WorldConfig::new(ChainConfig::example(4), 2);
    cfg.timeouts.block_interval_ms = 1_000;
    cfg.allocations.push((a.address(), usd(), Amount::tokens(10)));
    cfg.allocations.push((b.address(), cny(), Amount::tokens(10)));
    let mut world = World::new(cfg).map_err(|e| e.to_string())?;
    let to = Some(Address([7; 20]));
    // B is submitted first so arrival order cannot explain the result.
    let tb = world
        .submit_envelope(ValidatorId(1), cny(), envelope(&b, TxKind::Transfer, to, 0, Amount::ZERO, Amount::ZERO, vec![], 21_000))
        .map_err(|e| e.to_string())?;
    let ta = world
        .submit_envelope(ValidatorId(1), usd(), envelope(&a, TxKind::Transfer, to, 0, Amount::ZERO, Amount::giga(1), vec![], 21_000))
        .map_err(|e| e.to_string())?;
    ensure(tb.base_fee == Amount::from_u64(7_200_000_000), || format!("B base fee {}", tb.base_fee))?;
    ensure(world.run_until_height(3, 600_000), || "chain stalled".into())?;
    let app = &world.nodes[0].app;
    let ra = app.receipts.get(&ta.digest()).ok_or("A not committed")?;
    let rb = app.receipts.get(&tb.digest()).ok_or("B not committed")?;
    ensure(ra.block_height == rb.block_height, || format!("A at {}, B at {}", ra.block_height, rb.block_height))?;
    ensure(ra.index < rb.index, || format!("A index {}, B index {}", ra.index, rb.index))?;
    Ok(format!("block {}: A index {}, B index {}", ra.block_height, ra.index, rb.index))
}

fn stability() -> Outcome {
    let start = Instant::now();
    let days = 182;
    let volatile = volatile_series(2024, days, 2_000 * RATE_SCALE, 3_680 * RATE_SCALE);
    let stable = stable_series(2024, days, 1_800);
    // independent check on the inputs themselves
    let vmax = *volatile.iter().max().unwrap() as u128;
    let vmin = *volatile.iter().min().unwrap() as u128;
    ensure(vmax * 1_000 == vmin * 1_840, || "volatile series extremes are not 1.840 apart".into())?;
    ensure(stable.iter().all(|p| p.abs_diff(RATE_SCALE) <= 2_000_000), || "stable series leaves the 0.2% band".into())?;
    let r = fee_stability_experiment(&stable, &volatile, &TxTemplate::default(), Amount::giga(30)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(r.volatile.ratio.abs_diff(VOLATILE_TARGET) <= VOLATILE_TOLERANCE, || format!("volatile {}", r.volatile.ratio_decimal()))?;
    ensure(r.stable.ratio <= STABLE_MAX, || format!("stable {}", r.stable.ratio_decimal()))?;
    ensure(elapsed < EXPERIMENT_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("volatile {}, stable {} in {:?}", r.volatile.ratio_decimal(), r.stable.ratio_decimal(), elapsed))
}

struct CampaignRun {
    tamper_attempts: usize,
}

fn campaign_run(strategy: ByzantineStrategy, seed: u64) -> Result<CampaignRun, String> {
    let users: Vec<SecretKey> = (0..4).map(|i| SecretKey::from_name(&format!("load-{i}"))).collect();
    let mut cfg = WorldConfig::new(ChainConfig::example(4), seed);
    cfg.timeouts.block_interval_ms = 1_000;
    let gst = (seed % 4) * 1_000;
    cfg.network.gst_ms = Some(gst);
    cfg.network.pre_gst_max_delay_ms = 3_000;
    let byz = ValidatorId((seed % 4) as u32);
    cfg.byzantine.insert(byz, strategy);
    for u in &users {
        cfg.allocations.push((u.address(), usd(), Amount::tokens(1_000)));
        cfg.allocations.push((u.address(), cny(), Amount::tokens(1_000)));
    }
    let mut world = World::new(cfg).map_err(|e| e.to_string())?;
    let deadline = gst + 300_000;
    let mut nonces = [0u64; 4];
    let mut next_submit = 0u64;
    let mut k = 0usize;
    while world.min_honest_height() < CAMPAIGN_HEIGHT {
        if world.now >= next_submit {
            let u = k % users.len();
            let unit = if k % 2 == 0 { usd() } else { cny() };
            let at = ValidatorId((k % 4) as u32);
            let env = envelope(&users[u], TxKind::Transfer, Some(Address([1; 20])), nonces[u], Amount::from_u64(1), Amount::ZERO, vec![], 21_000);
            if world.submit_envelope(at, unit, env).is_ok() {
                nonces[u] += 1;
            }
            k += 1;
            next_submit = world.now + 400;
        }
        if !world.step(next_submit.min(deadline)) {
            if world.now >= deadline || next_submit > deadline {
                break;
            }
            world.now = next_submit;
        }
    }
    if let Some(v) = world.violations.first() {
        return Err(format!("{strategy} seed {seed}: {v}"));
    }
    if world.min_honest_height() < CAMPAIGN_HEIGHT {
        return Err(format!("{strategy} seed {seed}: honest height {} by {} ms", world.min_honest_height(), world.now));
    }
    let tampered = world.tampered();
    for i in world.honest_indices() {
        let app = &world.nodes[i].app;
        if let Some(f) = &app.fault {
            return Err(format!("{strategy} seed {seed}: {f}"));
        }
        for block in &app.chain {
            if block.transactions.iter().any(|t| tampered.contains(&t.digest())) {
                return Err(format!("{strategy} seed {seed}: tampered tx in block {}", block.height));
            }
        }
    }
    Ok(CampaignRun { tamper_attempts: tampered.len() })
}

fn bft_campaign() -> Outcome {
    let start = Instant::now();
    let jobs: Vec<(ByzantineStrategy, u64)> =
        ByzantineStrategy::ALL.iter().flat_map(|s| (0..CAMPAIGN_SEEDS).map(move |seed| (*s, seed))).collect();
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8);
    let results: Vec<Result<(ByzantineStrategy, CampaignRun), String>> = std::thread::scope(|scope| {
        let chunks: Vec<_> = jobs.chunks(jobs.len().div_ceil(workers)).collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| scope.spawn(move || chunk.iter().map(|(s, seed)| campaign_run(*s, *seed).map(|r| (*s, r))).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("campaign worker")).collect()
    });
    let elapsed = start.elapsed();
    let mut attempts: BTreeMap<ByzantineStrategy, usize> = BTreeMap::new();
    for r in results {
        let (s, run) = r?;
        *attempts.entry(s).or_default() += run.tamper_attempts;
    }
    let tamper = attempts.get(&ByzantineStrategy::UnitTamper).copied().unwrap_or(0);
    ensure(tamper > 0, || "UnitTamper never got to tamper with a transaction".into())?;
    ensure(elapsed < CAMPAIGN_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{} runs, {tamper} tampered txs all refused, {:?}", jobs.len(), elapsed))
}

fn gov_fixture(members: &[SecretKey], committee_size: u32, quorum: u32, target: CurrencyUnit) -> (ChainConfig, ExchangeRateTable, LedgerState) {
    let mut config = ChainConfig::example(4);
    let seed = CommitteeSeed { members: members.iter().map(|m| m.address()).collect(), committee_size, quorum_size: quorum };
    config.committees.insert(target, seed);
    let rates = ExchangeRateTable::genesis(config.reference_unit, &config.genesis_rates);
    let mut alloc = Vec::new();
    for m in members {
        alloc.push((m.address(), usd(), Amount::tokens(100)));
        alloc.push((m.address(), cny(), Amount::tokens(100)));
    }
    let state = LedgerState::genesis(&config, &alloc);
    (config, rates, state)
}

fn tagged(env: TxEnvelope, unit: CurrencyUnit, rates: &ExchangeRateTable, config: &ChainConfig) -> TaggedTransaction {
    let base = base_fee_for_unit(unit, rates, config).unwrap().base_fee_per_gas;
    TaggedTransaction::from_envelope(env, unit, base)
}

/// Everything in `state` that belongs to `unit`, in canonical bytes.
fn unit_slice(state: &LedgerState, unit: CurrencyUnit) -> Vec<u8> {
    let mut out = state.governance.get(&unit).map(|g| g.encode()).unwrap_or_default();
    for (who, acc) in &state.accounts {
        let b = acc.balance(unit);
        if !b.is_zero() {
            out.extend_from_slice(&who.0);
            out.extend_from_slice(&b.to_be_bytes());
        }
    }
    out
}

fn governance_quorum() -> Outcome {
    let mut runner = TestRunner::new(PropConfig { cases: GOVERNANCE_CASES, failure_persistence: None, ..PropConfig::default() });
    let strategy = (1u32..=7)
        .prop_flat_map(|c| (Just(c), 1u32..=c, proptest::collection::vec(0usize..9, 0..12), any::<bool>()));
    runner
        .run(&strategy, |(c, q, voters, use_cny)| {
            let (target, other) = if use_cny { (cny(), usd()) } else { (usd(), cny()) };
            // indices >= c are outsiders
            let keys: Vec<SecretKey> = (0..9).map(|i| SecretKey::from_name(&format!("gov-{i}"))).collect();
            let (config, rates, mut state) = gov_fixture(&keys[..c as usize], c, q, target);
            for k in &keys[c as usize..] {
                state.accounts.entry(k.address()).or_default().balances.insert(target, Amount::tokens(100));
            }
            let other_before = unit_slice(&state, other);
            let beneficiary = Address([0xbe; 20]);
            let action = ProposalAction::Mint { to: beneficiary, amount: Amount::tokens(5) };
            let body = GovernanceBody::Propose { action, evidence: vec![] }.encode();
            let mut fees = FeeBucket::default();
            let mut nonces: BTreeMap<Address, u64> = BTreeMap::new();
            let mut next_nonce = |who: Address| {
                let n = nonces.entry(who).or_default();
                *n += 1;
                *n - 1
            };
            let proposer = &keys[0];
            let ptx = tagged(envelope(proposer, TxKind::Proposal, None, next_nonce(proposer.address()), Amount::ZERO, Amount::ZERO, body, 50_000), target, &rates, &config);
            let id = ptx.digest();
            apply_transaction(&mut state, &ptx, &rates, &config, &mut fees, 0).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let mut yes: BTreeSet<usize> = BTreeSet::from([0]);
            for (i, v) in voters.iter().enumerate() {
                let key = &keys[*v];
                let body = GovernanceBody::Vote { proposal: id }.encode();
                let tx = tagged(envelope(key, TxKind::Vote, None, next_nonce(key.address()), Amount::ZERO, Amount::ZERO, body, 50_000), target, &rates, &config);
                apply_transaction(&mut state, &tx, &rates, &config, &mut fees, i as u32 + 1).map_err(|e| TestCaseError::fail(e.to_string()))?;
                if (*v as u32) < c {
                    yes.insert(*v);
                }
            }
            let expected = yes.len() as u32 >= q;
            let status = state.governance[&target].proposals[&id].status;
            prop_assert_eq!(status == ProposalStatus::Executed, expected, "c={} q={} yes={:?}", c, q, yes);
            let minted = state.balance(&beneficiary, target);
            prop_assert_eq!(minted, if expected { Amount::tokens(5) } else { Amount::ZERO });
            prop_assert_eq!(unit_slice(&state, other), other_before, "unit {} changed", other);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{GOVERNANCE_CASES} cases"))
}

fn conservation_run(seed: u64) -> Result<(usize, usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users: Vec<SecretKey> = (0..6).map(|i| SecretKey::from_name(&format!("cons-{seed}-{i}"))).collect();
    let committee = &users[..3];
    let mut config = ChainConfig::example(4);
    for unit in [usd(), cny()] {
        config.committees.insert(unit, CommitteeSeed { members: committee.iter().map(|m| m.address()).collect(), committee_size: 3, quorum_size: 2 });
    }
    let rates = ExchangeRateTable::genesis(config.reference_unit, &config.genesis_rates);
    let mut alloc = Vec::new();
    for u in &users {
        alloc.push((u.address(), usd(), Amount::tokens(rng.gen_range(10..1_000))));
        alloc.push((u.address(), cny(), Amount::tokens(rng.gen_range(10..1_000))));
    }
    let mut state = LedgerState::genesis(&config, &alloc);
    let genesis: BTreeMap<CurrencyUnit, U256> =
        [usd(), cny()].into_iter().map(|u| (u, alloc.iter().filter(|a| a.1 == u).fold(U256::zero(), |s, a| s + a.2 .0))).collect();
    let mut minted: BTreeMap<CurrencyUnit, U256> = BTreeMap::new();
    let mut burned: BTreeMap<CurrencyUnit, U256> = BTreeMap::new();
    let mut open: Vec<(CurrencyUnit, Digest, ProposalAction)> = Vec::new();
    let (mut n_tx, mut n_mint, mut n_burn) = (0, 0, 0);
    for height in 1..=CONSERVATION_BLOCKS {
        let mut nonces: BTreeMap<Address, u64> = BTreeMap::new();
        let mut txs = Vec::new();
        for _ in 0..rng.gen_range(0..8) {
            let unit = if rng.gen_bool(0.5) { usd() } else { cny() };
            let choice = rng.gen_range(0..10);
            let (key, kind, to, amount, payload) = if choice < 6 {
                let from = &users[rng.gen_range(0..users.len())];
                let to = users[rng.gen_range(0..users.len())].address();
                let max = state.balance(&from.address(), unit).0 / U256::from(4u64);
                let amount = if max.is_zero() { U256::zero() } else { U256::from(rng.gen::<u64>()) % max };
                (from, TxKind::Transfer, Some(to), Amount(amount), vec![])
            } else if choice < 8 || open.is_empty() {
                let who = users[rng.gen_range(0..users.len())].address();
                let amount = Amount::giga(rng.gen_range(1..50_000_000_000));
                let action = if rng.gen_bool(0.5) { ProposalAction::Mint { to: who, amount } } else { ProposalAction::Burn { from: who, amount } };
                let key = &committee[rng.gen_range(0..3)];
                (key, TxKind::Proposal, None, Amount::ZERO, GovernanceBody::Propose { action, evidence: rng.gen::<[u8; 4]>().to_vec() }.encode())
            } else {
                let (u, id, _) = open[rng.gen_range(0..open.len())].clone();
                let key = &committee[rng.gen_range(0..3)];
                let body = GovernanceBody::Vote { proposal: id }.encode();
                let tx = tagged(envelope(key, TxKind::Vote, None, 0, Amount::ZERO, Amount::ZERO, body, 50_000), u, &rates, &config);
                txs.push(tx);
                continue;
            };
            let gas = if kind == TxKind::Transfer { 21_000 } else { 50_000 };
            let tip = Amount::giga(rng.gen_range(0..3));
            let env = envelope(key, kind, to, 0, amount, tip, payload, gas);
            txs.push(tagged(env, unit, &rates, &config));
        }
        // assign nonces in block order and re-sign
        let txs: Vec<TaggedTransaction> = txs
            .into_iter()
            .map(|t| {
                let key = users.iter().find(|u| u.address() == t.sender).unwrap();
                let n = nonces.entry(t.sender).or_insert_with(|| state.nonce(&t.sender));
                let mut env = t.envelope();
                env.nonce = *n;
                *n += 1;
                TaggedTransaction::from_envelope(env.sign(key), t.unit, t.base_fee)
            })
            .collect();
        // a block that fails statefully is invalid as a whole; drop the
        // offender and everything after it from the same sender
        let mut txs = txs;
        let applied = loop {
            let block = Block {
                height,
                proposer: ValidatorId(rng.gen_range(0..4)),
                parent_hash: Digest::zero(),
                transactions: txs.clone(),
                rate_snapshot_height: 0,
                state_root: Digest::zero(),
            };
            match apply_block(&state, &block, &rates, &config) {
                Ok(a) => break a,
                Err(e) => {
                    let i = e.offending_index().ok_or_else(|| e.to_string())?;
                    let bad = txs[i].sender;
                    let mut kept: Vec<TaggedTransaction> = txs[..i].to_vec();
                    kept.extend(txs[i + 1..].iter().filter(|t| t.sender != bad).cloned());
                    txs = kept;
                }
            }
        };
        for (tx, r) in txs.iter().zip(&applied.receipts) {
            n_tx += 1;
            if tx.kind == TxKind::Proposal && r.status == ReceiptStatus::Success {
                if let Ok(GovernanceBody::Propose { action, .. }) = <GovernanceBody as stablefee_core::encoding::Decode>::decode(&tx.payload) {
                    open.push((tx.unit, tx.digest(), action));
                }
            }
        }
        // count executions as they happen
        let before = state.clone();
        state = applied.state;
        open.retain(|(u, id, action)| {
            let was = before.governance[u].proposals.get(id).map(|p| p.status);
            let now = state.governance[u].proposals.get(id).map(|p| p.status);
            if now == Some(ProposalStatus::Executed) && was != Some(ProposalStatus::Executed) {
                match action {
                    ProposalAction::Mint { amount, .. } => {
                        *minted.entry(*u).or_default() += amount.0;
                        n_mint += 1;
                    }
                    ProposalAction::Burn { amount, .. } => {
                        *burned.entry(*u).or_default() += amount.0;
                        n_burn += 1;
                    }
                    _ => {}
                }
            }
            now == Some(ProposalStatus::Open)
        });
        for unit in [usd(), cny()] {
            let sum = state.accounts.values().fold(U256::zero(), |s, a| s + a.balance(unit).0);
            let expected = genesis[&unit] + minted.get(&unit).copied().unwrap_or_default() - burned.get(&unit).copied().unwrap_or_default();
            ensure(sum == expected, || format!("seed {seed} height {height} {unit}: sum {sum} expected {expected}"))?;
        }
    }
    Ok((n_tx, n_mint, n_burn))
}

fn conservation() -> Outcome {
    let (mut txs, mut mints, mut burns) = (0, 0, 0);
    for seed in 0..CONSERVATION_RUNS {
        let (t, m, b) = conservation_run(seed)?;
        txs += t;
        mints += m;
        burns += b;
    }
    ensure(mints > 0 && burns > 0, || format!("workload too thin: {mints} mints, {burns} burns"))?;
    Ok(format!("{CONSERVATION_RUNS}x{CONSERVATION_BLOCKS} blocks, {txs} txs, {mints} mints, {burns} burns"))
}

fn rpc(url: &str, method: &str, params: Value) -> Result<Value, String> {
    let body = json!({ "jsonrpc": "2.0", "id": 1, "method": method, "params": params });
    let mut resp = ureq::post(url).send_json(&body).map_err(|e| format!("{method}: {e}"))?;
    let v: Value = resp.body_mut().read_json().map_err(|e| format!("{method}: {e}"))?;
    if let Some(err) = v.get("error") {
        return Err(format!("{method}: {err}"));
    }
    Ok(v["result"].clone())
}

fn hex_u256(v: &Value) -> Result<U256, String> {
    let s = v.as_str().ok_or_else(|| format!("not a quantity: {v}"))?;
    U256::from_str_radix(s.trim_start_matches("0x"), 16).map_err(|e| e.to_string())
}

fn endpoints() -> Outcome {
    let wallet = SecretKey::from_name("wallet");
    let mut cfg = WorldConfig::new(ChainConfig::example(4), 17);
    cfg.timeouts.block_interval_ms = 1_000;
    cfg.allocations.push((wallet.address(), usd(), Amount::tokens(100_000)));
    cfg.allocations.push((wallet.address(), cny(), Amount::tokens(200_000)));
    let world = Arc::new(Mutex::new(World::new(cfg).map_err(|e| e.to_string())?));
    let backend: Arc<dyn ChainBackend> = Arc::new(WorldNode { world: world.clone(), node: ValidatorId(0) });
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let (usd_url, cny_url) = rt.block_on(async {
        let (a, _) = serve("127.0.0.1:0".parse().unwrap(), Arc::new(Gateway::new(usd(), backend.clone()))).await?;
        let (b, _) = serve("127.0.0.1:0".parse().unwrap(), Arc::new(Gateway::new(cny(), backend))).await?;
        spawn_driver(world.clone(), 250, Duration::from_millis(5));
        Ok::<_, std::io::Error>((format!("http://{a}"), format!("http://{b}")))
    })
    .map_err(|e| e.to_string())?;
    let me = wallet.address().to_hex();
    let fixtures = [(&usd_url, usd(), 100_000u64), (&cny_url, cny(), 200_000u64)];
    let mut summary = Vec::new();
    for (url, unit, tokens) in fixtures {
        let chain_id = rpc(url, "eth_chainId", json!([]))?;
        ensure(chain_id == json!("0x539"), || format!("{unit} chain id {chain_id}"))?;
        let before = hex_u256(&rpc(url, "eth_getBalance", json!([me, "latest"]))?)?;
        ensure(before == Amount::tokens(tokens).0, || format!("{unit} balance {before}"))?;
        let price = hex_u256(&rpc(url, "eth_gasPrice", json!([]))?)?;
        let nonce = hex_u256(&rpc(url, "eth_getTransactionCount", json!([me, "pending"]))?)?.low_u64();
        let env = envelope(&wallet, TxKind::Transfer, Some(Address([5; 20])), nonce, Amount::tokens(1), Amount::ZERO, vec![], 21_000);
        let hash = rpc(url, "eth_sendRawTransaction", json!([format!("0x{}", hex::encode(env.encode()))]))?;
        let deadline = Instant::now() + Duration::from_secs(30);
        let receipt = loop {
            let r = rpc(url, "eth_getTransactionReceipt", json!([hash]))?;
            if !r.is_null() {
                break r;
            }
            ensure(Instant::now() < deadline, || format!("{unit} receipt never arrived"))?;
            std::thread::sleep(Duration::from_millis(20));
        };
        ensure(receipt["status"] == json!("0x1") && receipt["gasUsed"] == json!("0x5208"), || format!("{unit} receipt {receipt}"))?;
        ensure(receipt["currencyUnit"] == json!(unit.as_str()), || format!("{unit} receipt {receipt}"))?;
        let fee = hex_u256(&receipt["feeCharged"])?;
        ensure(fee == price * U256::from(21_000u64), || format!("{unit} fee {fee} at price {price}"))?;
        let after = hex_u256(&rpc(url, "eth_getBalance", json!([me, "latest"]))?)?;
        ensure(after == before - Amount::tokens(1).0 - fee, || format!("{unit} balance after {after}"))?;
        let other = if url == &usd_url { &cny_url } else { &usd_url };
        ensure(rpc(other, "eth_getTransactionReceipt", json!([hash]))?.is_null(), || format!("{unit} receipt visible on the other endpoint"))?;
        summary.push(format!("{unit} ok"));
    }
    // the USD spend did not touch CNY, and vice versa
    let usd_now = hex_u256(&rpc(&usd_url, "eth_getBalance", json!([me, "latest"]))?)?;
    let cny_now = hex_u256(&rpc(&cny_url, "eth_getBalance", json!([me, "latest"]))?)?;
    ensure(usd_now < Amount::tokens(100_000).0 && cny_now < Amount::tokens(200_000).0, || "balances did not move".into())?;
    ensure(usd_now > Amount::tokens(99_998).0 && cny_now > Amount::tokens(199_998).0, || "cross-unit debit".into())?;
    drop(rt);
    Ok(summary.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 fee ratio 7.11", fee_ratio),
        ("2 transfer gas 21000", transfer_gas),
        ("3 ordering A before B", ordering),
        ("4 fee stability", stability),
        ("5 BFT safety and liveness", bft_campaign),
        ("6 governance quorum", governance_quorum),
        ("7 conservation", conservation),
        ("8 endpoint isolation over HTTP", endpoints),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        match f() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
