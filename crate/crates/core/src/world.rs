//! Single-threaded event loop driving every validator over the simulated
//! network, with safety monitoring of what honest nodes commit.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::Serialize;
use thiserror::Error;

use crate::byzantine::{conflicting_vote, equivocation_targets, ByzantineStrategy};
use crate::consensus::{Consensus, ConsensusMsg, Output, Proposal, Timeout, TimeoutConfig};
use crate::crypto::CanonicalDigest;
use crate::encoding::Encode;
use crate::fees::{base_fee_for_unit, FeeError};
use crate::ledger::LedgerState;
use crate::mempool::{AddOutcome, RejectReason, DEFAULT_CAPACITY};
use crate::network::{NetworkParams, SimNetwork};
use crate::node::NodeApp;
use crate::types::{Address, Amount, ChainConfig, ConfigError, CurrencyUnit, Digest, TaggedTransaction, TxEnvelope, ValidatorId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetMsg {
    Consensus(ConsensusMsg),
    Tx(TaggedTransaction),
}

impl NetMsg {
    fn tag(&self) -> Vec<u8> {
        match self {
            NetMsg::Consensus(ConsensusMsg::Proposal(p)) => {
                let mut t = vec![0];
                t.extend_from_slice(&p.block.digest().0);
                t.extend_from_slice(&p.round.to_be_bytes());
                t
            }
            NetMsg::Consensus(ConsensusMsg::Vote(v)) => {
                let mut t = vec![1, v.kind as u8];
                t.extend_from_slice(&v.height.to_be_bytes());
                t.extend_from_slice(&v.round.to_be_bytes());
                t.extend_from_slice(&v.block.encode());
                t
            }
            NetMsg::Tx(tx) => {
                let mut t = vec![2];
                t.extend_from_slice(&tx.digest().0);
                t
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub chain: ChainConfig,
    pub network: NetworkParams,
    pub timeouts: TimeoutConfig,
    pub seed: u64,
    pub byzantine: BTreeMap<ValidatorId, ByzantineStrategy>,
    pub allocations: Vec<(Address, CurrencyUnit, Amount)>,
    pub mempool_capacity: usize,
}

impl WorldConfig {
    pub fn new(chain: ChainConfig, seed: u64) -> Self {
        WorldConfig {
            chain,
            network: NetworkParams::default(),
            timeouts: TimeoutConfig::default(),
            seed,
            byzantine: BTreeMap::new(),
            allocations: Vec::new(),
            mempool_capacity: DEFAULT_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum SafetyViolation {
    #[error("height {height}: {a} committed {da}, {b} committed {db}")]
    ConflictingCommit { height: u64, a: ValidatorId, da: Digest, b: ValidatorId, db: Digest },
    #[error("height {height}: state roots differ between {a} and {b}")]
    StateRootMismatch { height: u64, a: ValidatorId, b: ValidatorId },
    #[error("height {height}: tampered transaction {tx} was committed")]
    TamperedCommitted { height: u64, tx: Digest },
    #[error("{node}: {reason}")]
    ApplyFailed { node: ValidatorId, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubmitError {
    #[error(transparent)]
    Fee(FeeError),
    #[error(transparent)]
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommitRecord {
    pub height: u64,
    pub node: ValidatorId,
    pub round: u32,
    pub block: Digest,
    pub time_ms: u64,
    pub txs: usize,
}

pub struct Node {
    pub consensus: Consensus,
    pub app: NodeApp,
}

impl Node {
    pub fn id(&self) -> ValidatorId {
        self.app.id
    }
}

pub struct World {
    pub now: u64,
    pub nodes: Vec<Node>,
    pub network: SimNetwork<NetMsg>,
    timers: BinaryHeap<Reverse<(u64, u64, usize, Timeout)>>,
    timer_seq: u64,
    byzantine: BTreeMap<ValidatorId, ByzantineStrategy>,
    pub commits: Vec<CommitRecord>,
    /// First digest committed at each height by any honest node.
    canonical: BTreeMap<u64, (ValidatorId, Digest, Digest)>,
    pub violations: Vec<SafetyViolation>,
    started: bool,
}

impl World {
    pub fn new(cfg: WorldConfig) -> Result<World, ConfigError> {
        cfg.chain.validate()?;
        let genesis = LedgerState::genesis(&cfg.chain, &cfg.allocations);
        let nodes = cfg
            .chain
            .validators
            .iter()
            .map(|id| Node {
                consensus: Consensus::new(*id, cfg.chain.validators.clone(), cfg.timeouts, 1),
                app: NodeApp::new(*id, cfg.chain.clone(), genesis.clone(), cfg.byzantine.get(id).copied(), cfg.mempool_capacity),
            })
            .collect();
        Ok(World {
            now: 0,
            nodes,
            network: SimNetwork::new(cfg.network, cfg.seed),
            timers: BinaryHeap::new(),
            timer_seq: 0,
            byzantine: cfg.byzantine,
            commits: Vec::new(),
            canonical: BTreeMap::new(),
            violations: Vec::new(),
            started: false,
        })
    }

    pub fn is_honest(&self, id: ValidatorId) -> bool {
        !self.byzantine.contains_key(&id)
    }

    pub fn honest_indices(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|i| self.is_honest(self.nodes[*i].id())).collect()
    }

    pub fn node(&self, id: ValidatorId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id() == id)
    }

    fn index_of(&self, id: ValidatorId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id() == id)
    }

    /// Lowest committed height among honest nodes.
    pub fn min_honest_height(&self) -> u64 {
        self.honest_indices().into_iter().map(|i| self.nodes[i].app.height()).min().unwrap_or(0)
    }

    pub fn tampered(&self) -> BTreeSet<Digest> {
        self.nodes.iter().flat_map(|n| n.app.tampered.iter().copied()).collect()
    }

    fn start(&mut self) {
        if self.started {
            return;
        }
        self.started = true;
        for i in 0..self.nodes.len() {
            let node = &mut self.nodes[i];
            let out = node.consensus.start(&mut node.app);
            self.handle_outputs(i, out);
        }
    }

    /// Adds a transaction to node `at`'s pool and gossips it to the others.
    pub fn submit(&mut self, at: ValidatorId, tx: TaggedTransaction) -> Result<AddOutcome, RejectReason> {
        let i = self.index_of(at).expect("known validator");
        let outcome = self.nodes[i].app.submit(tx.clone())?;
        self.send_all(i, NetMsg::Tx(tx));
        Ok(outcome)
    }

    /// Base fee node `at` currently quotes for `unit`.
    pub fn quote(&self, at: ValidatorId, unit: CurrencyUnit) -> Result<Amount, FeeError> {
        let app = &self.node(at).expect("known validator").app;
        if !app.config.has_unit(unit) {
            return Err(FeeError::MissingRate(unit));
        }
        base_fee_for_unit(unit, &app.rates, &app.config).map(|q| q.base_fee_per_gas)
    }

    /// What an endpoint for `unit` does with a wallet envelope: tag it with the
    /// unit and node `at`'s quote, then submit.
    pub fn submit_envelope(&mut self, at: ValidatorId, unit: CurrencyUnit, env: TxEnvelope) -> Result<TaggedTransaction, SubmitError> {
        let base = self.quote(at, unit).map_err(SubmitError::Fee)?;
        let tx = TaggedTransaction::from_envelope(env, unit, base);
        self.submit(at, tx.clone()).map_err(SubmitError::Rejected)?;
        Ok(tx)
    }

    fn send_all(&mut self, from: usize, msg: NetMsg) {
        let from_id = self.nodes[from].id();
        if self.byzantine.get(&from_id) == Some(&ByzantineStrategy::Silence) {
            return;
        }
        let tag = msg.tag();
        let peers: Vec<ValidatorId> = self.nodes.iter().map(|n| n.id()).filter(|p| *p != from_id).collect();
        for p in &peers {
            self.network.send(from_id, *p, msg.clone(), &tag, self.now);
        }
        if self.byzantine.get(&from_id) == Some(&ByzantineStrategy::Equivocate) {
            let twin = match &msg {
                NetMsg::Consensus(ConsensusMsg::Proposal(p)) => {
                    let app = &self.nodes[from].app;
                    let n = app.config.validators.len();
                    let other = app.config.validators[(app.config.validators.iter().position(|v| *v == from_id).unwrap_or(0) + 1) % n];
                    let block = app.build_block(p.block.transactions.clone(), other);
                    Some(NetMsg::Consensus(ConsensusMsg::Proposal(Proposal { block, ..p.clone() })))
                }
                NetMsg::Consensus(ConsensusMsg::Vote(v)) => Some(NetMsg::Consensus(ConsensusMsg::Vote(conflicting_vote(v)))),
                NetMsg::Tx(_) => None,
            };
            if let Some(twin) = twin {
                let tag = twin.tag();
                for p in equivocation_targets(&peers) {
                    self.network.send(from_id, p, twin.clone(), &tag, self.now);
                }
            }
        }
    }

    /// Plain forwarding; Byzantine nodes do not help lagging peers.
    fn relay(&mut self, from: usize, msg: NetMsg) {
        let from_id = self.nodes[from].id();
        if !self.is_honest(from_id) {
            return;
        }
        let tag = msg.tag();
        for p in self.nodes.iter().map(|n| n.id()).filter(|p| *p != from_id).collect::<Vec<_>>() {
            self.network.send(from_id, p, msg.clone(), &tag, self.now);
        }
    }

    fn handle_outputs(&mut self, i: usize, outputs: Vec<Output>) {
        for o in outputs {
            match o {
                Output::Broadcast(m) => self.send_all(i, NetMsg::Consensus(m)),
                Output::Relay(m) => self.relay(i, NetMsg::Consensus(m)),
                Output::Schedule { timeout, after_ms } => {
                    self.timer_seq += 1;
                    self.timers.push(Reverse((self.now + after_ms, self.timer_seq, i, timeout)));
                }
                Output::Committed { height, round, block } => self.on_commit(i, height, round, block.digest(), block.transactions.len()),
            }
        }
    }

    fn on_commit(&mut self, i: usize, height: u64, round: u32, digest: Digest, txs: usize) {
        let id = self.nodes[i].id();
        self.commits.push(CommitRecord { height, node: id, round, block: digest, time_ms: self.now, txs });
        if !self.is_honest(id) {
            return;
        }
        let app = &self.nodes[i].app;
        if let Some(reason) = &app.fault {
            self.violations.push(SafetyViolation::ApplyFailed { node: id, reason: reason.clone() });
            return;
        }
        let root = app.state.state_root();
        let tampered = self.tampered();
        if let Some(block) = app.chain.last() {
            for tx in &block.transactions {
                if tampered.contains(&tx.digest()) {
                    self.violations.push(SafetyViolation::TamperedCommitted { height, tx: tx.digest() });
                }
            }
        }
        match self.canonical.get(&height) {
            None => {
                self.canonical.insert(height, (id, digest, root));
            }
            Some((a, da, ra)) => {
                if *da != digest {
                    self.violations.push(SafetyViolation::ConflictingCommit { height, a: *a, da: *da, b: id, db: digest });
                } else if *ra != root {
                    self.violations.push(SafetyViolation::StateRootMismatch { height, a: *a, b: id });
                }
            }
        }
    }

    fn next_event_time(&self) -> Option<u64> {
        let m = self.network.next_delivery_time();
        let t = self.timers.peek().map(|Reverse((at, ..))| *at);
        match (m, t) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Processes one event (messages before timers on ties). Returns false if
    /// nothing is pending or the next event is after `until`.
    pub fn step(&mut self, until: u64) -> bool {
        self.start();
        let Some(at) = self.next_event_time() else {
            return false;
        };
        if at > until {
            return false;
        }
        self.now = at;
        if self.network.next_delivery_time() == Some(at) {
            let env = self.network.pop_due(at).expect("due message");
            let i = self.index_of(env.to).expect("known recipient");
            match env.msg {
                NetMsg::Tx(tx) => {
                    let _ = self.nodes[i].app.submit(tx);
                }
                NetMsg::Consensus(m) => {
                    let node = &mut self.nodes[i];
                    let out = node.consensus.on_message(m, &mut node.app);
                    self.handle_outputs(i, out);
                }
            }
        } else {
            let Reverse((_, _, i, timeout)) = self.timers.pop().expect("due timer");
            let node = &mut self.nodes[i];
            let out = node.consensus.on_timeout(timeout, &mut node.app);
            self.handle_outputs(i, out);
        }
        true
    }

    /// Runs every event up to and including simulated time `until`.
    pub fn run_until(&mut self, until: u64) {
        while self.step(until) {}
        self.now = self.now.max(until);
    }

    /// Runs until every honest node has committed `height` or `deadline` passes.
    pub fn run_until_height(&mut self, height: u64, deadline: u64) -> bool {
        while self.min_honest_height() < height {
            if !self.step(deadline) {
                self.now = self.now.max(deadline);
                return false;
            }
        }
        true
    }

    /// Committed block digest per height as seen by node `id`.
    pub fn history(&self, id: ValidatorId) -> Vec<Digest> {
        self.node(id).map(|n| n.app.chain.iter().map(|b| b.digest()).collect()).unwrap_or_default()
    }

    pub fn evidence_count(&self) -> usize {
        self.honest_indices().iter().map(|i| self.nodes[*i].consensus.evidence.len()).sum()
    }
}
