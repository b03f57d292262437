//! Tendermint-style BFT agreement over equal-weight validators.
//!
//! The state machine follows the published three-step algorithm: propose,
//! prevote, precommit, with locking on polka and round skipping on f+1
//! messages from a higher round. It is driven by messages and timeouts and
//! talks to the application only through [`ConsensusApp`].

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::crypto::CanonicalDigest;
use crate::types::{Block, Digest, ValidatorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Step {
    /// Waiting out the block interval before round 0 of a new height.
    NewHeight,
    Propose,
    Prevote,
    Precommit,
    Commit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum VoteKind {
    Prevote,
    Precommit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vote {
    pub kind: VoteKind,
    pub height: u64,
    pub round: u32,
    /// `None` is a vote for nil.
    pub block: Option<Digest>,
    pub voter: ValidatorId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub height: u64,
    pub round: u32,
    pub block: Block,
    /// Round in which the block gathered a polka, if re-proposed.
    pub valid_round: Option<u32>,
    pub proposer: ValidatorId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConsensusMsg {
    Proposal(Proposal),
    Vote(Vote),
}

impl ConsensusMsg {
    pub fn height(&self) -> u64 {
        match self {
            ConsensusMsg::Proposal(p) => p.height,
            ConsensusMsg::Vote(v) => v.height,
        }
    }

    pub fn round(&self) -> u32 {
        match self {
            ConsensusMsg::Proposal(p) => p.round,
            ConsensusMsg::Vote(v) => v.round,
        }
    }

    pub fn sender(&self) -> ValidatorId {
        match self {
            ConsensusMsg::Proposal(p) => p.proposer,
            ConsensusMsg::Vote(v) => v.voter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimeoutKind {
    NewHeight,
    Propose,
    Prevote,
    Precommit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timeout {
    pub kind: TimeoutKind,
    pub height: u64,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Output {
    Broadcast(ConsensusMsg),
    /// Someone else's message passed on unchanged so lagging peers can decide.
    Relay(ConsensusMsg),
    Schedule { timeout: Timeout, after_ms: u64 },
    Committed { height: u64, round: u32, block: Block },
}

/// Two conflicting signed messages from one validator for the same slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Evidence {
    pub offender: ValidatorId,
    pub height: u64,
    pub round: u32,
    pub what: &'static str,
    pub first: Option<Digest>,
    pub second: Option<Digest>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TimeoutConfig {
    pub propose_ms: u64,
    pub prevote_ms: u64,
    pub precommit_ms: u64,
    /// Pause between a commit and round 0 of the next height.
    pub block_interval_ms: u64,
}

impl Default for TimeoutConfig {
    fn default() -> Self {
        TimeoutConfig { propose_ms: 3_000, prevote_ms: 1_000, precommit_ms: 1_000, block_interval_ms: 12_000 }
    }
}

impl TimeoutConfig {
    fn backoff(base: u64, round: u32) -> u64 {
        base.saturating_mul(1u64 << round.min(20))
    }
}

/// What consensus needs from the node.
pub trait ConsensusApp {
    /// Builds a block for `height`; called when this validator proposes.
    fn propose(&mut self, height: u64, round: u32) -> Block;
    /// Full validity check of a proposed block at the current height.
    fn validate(&mut self, block: &Block) -> bool;
    /// Called exactly once per height with the decided block.
    fn commit(&mut self, block: &Block);
}

/// Proposer for a (height, round): round-robin over the validator list.
pub fn proposer_for(validators: &[ValidatorId], height: u64, round: u32) -> ValidatorId {
    let n = validators.len() as u64;
    validators[((height + round as u64) % n) as usize]
}

/// `count` votes exceed two thirds of `n`.
pub fn is_quorum(count: usize, n: usize) -> bool {
    count * 3 > 2 * n
}

/// `count` votes exceed one third of `n` (at least one honest).
pub fn is_skip_threshold(count: usize, n: usize) -> bool {
    count * 3 > n
}

#[derive(Debug, Default, Clone)]
struct RoundState {
    /// First proposal received from the round's proposer.
    proposal: Option<(Digest, Option<u32>)>,
    /// Every distinct block the round's proposer sent, by digest.
    blocks: BTreeMap<Digest, Block>,
    /// Every distinct vote per voter; an equivocator counts toward each value it voted for.
    prevotes: BTreeMap<ValidatorId, Vec<Option<Digest>>>,
    precommits: BTreeMap<ValidatorId, Vec<Option<Digest>>>,
    prevote_timeout_armed: bool,
    precommit_timeout_armed: bool,
    polka_handled: bool,
}

impl RoundState {
    fn count(votes: &BTreeMap<ValidatorId, Vec<Option<Digest>>>, target: Option<Digest>) -> usize {
        votes.values().filter(|v| v.contains(&target)).count()
    }

    fn senders(&self) -> BTreeSet<ValidatorId> {
        self.prevotes.keys().chain(self.precommits.keys()).copied().collect()
    }
}

#[derive(Debug, Clone)]
pub struct Consensus {
    pub id: ValidatorId,
    validators: Vec<ValidatorId>,
    timeouts: TimeoutConfig,
    pub height: u64,
    pub round: u32,
    pub step: Step,
    locked: Option<(Digest, u32)>,
    valid: Option<(Digest, u32)>,
    /// Messages for the current and future heights.
    rounds: BTreeMap<(u64, u32), RoundState>,
    validity: BTreeMap<Digest, bool>,
    pub evidence: Vec<Evidence>,
    pub decisions: BTreeMap<u64, Digest>,
}

impl Consensus {
    pub fn new(id: ValidatorId, validators: Vec<ValidatorId>, timeouts: TimeoutConfig, start_height: u64) -> Self {
        assert!(!validators.is_empty(), "validator set must not be empty");
        Consensus {
            id,
            validators,
            timeouts,
            height: start_height,
            round: 0,
            step: Step::NewHeight,
            locked: None,
            valid: None,
            rounds: BTreeMap::new(),
            validity: BTreeMap::new(),
            evidence: Vec::new(),
            decisions: BTreeMap::new(),
        }
    }

    pub fn validators(&self) -> &[ValidatorId] {
        &self.validators
    }

    fn n(&self) -> usize {
        self.validators.len()
    }

    fn is_validator(&self, v: ValidatorId) -> bool {
        self.validators.contains(&v)
    }

    /// Starts round 0 of the current height immediately.
    pub fn start(&mut self, app: &mut dyn ConsensusApp) -> Vec<Output> {
        let mut out = Vec::new();
        self.start_round(0, app, &mut out);
        self.run_rules(app, &mut out);
        out
    }

    pub fn on_message(&mut self, msg: ConsensusMsg, app: &mut dyn ConsensusApp) -> Vec<Output> {
        let mut out = Vec::new();
        if msg.height() < self.height || !self.is_validator(msg.sender()) {
            return out;
        }
        self.record(msg);
        if self.step != Step::NewHeight {
            self.run_rules(app, &mut out);
        }
        out
    }

    pub fn on_timeout(&mut self, t: Timeout, app: &mut dyn ConsensusApp) -> Vec<Output> {
        let mut out = Vec::new();
        if t.height != self.height {
            return out;
        }
        match t.kind {
            TimeoutKind::NewHeight if self.step == Step::NewHeight => self.start_round(0, app, &mut out),
            TimeoutKind::Propose if t.round == self.round && self.step == Step::Propose => {
                self.cast(VoteKind::Prevote, None, &mut out);
                self.step = Step::Prevote;
            }
            TimeoutKind::Prevote if t.round == self.round && self.step == Step::Prevote => {
                self.cast(VoteKind::Precommit, None, &mut out);
                self.step = Step::Precommit;
            }
            TimeoutKind::Precommit if t.round == self.round && self.step != Step::NewHeight => {
                self.start_round(self.round + 1, app, &mut out);
            }
            _ => return out,
        }
        self.run_rules(app, &mut out);
        out
    }

    fn record(&mut self, msg: ConsensusMsg) {
        match msg {
            ConsensusMsg::Proposal(p) => {
                if p.proposer != proposer_for(&self.validators, p.height, p.round) || p.block.height != p.height {
                    return;
                }
                let digest = p.block.digest();
                let rs = self.rounds.entry((p.height, p.round)).or_default();
                match rs.proposal {
                    None => rs.proposal = Some((digest, p.valid_round)),
                    Some((first, _)) if first != digest => {
                        if !rs.blocks.contains_key(&digest) {
                            self.evidence.push(Evidence {
                                offender: p.proposer,
                                height: p.height,
                                round: p.round,
                                what: "proposal",
                                first: Some(first),
                                second: Some(digest),
                            });
                        }
                    }
                    Some(_) => {}
                }
                self.rounds.entry((p.height, p.round)).or_default().blocks.entry(digest).or_insert(p.block);
            }
            ConsensusMsg::Vote(v) => {
                let rs = self.rounds.entry((v.height, v.round)).or_default();
                let (table, what) = match v.kind {
                    VoteKind::Prevote => (&mut rs.prevotes, "prevote"),
                    VoteKind::Precommit => (&mut rs.precommits, "precommit"),
                };
                match table.get_mut(&v.voter) {
                    None => {
                        table.insert(v.voter, vec![v.block]);
                    }
                    Some(seen) if !seen.contains(&v.block) => {
                        let first = seen[0];
                        seen.push(v.block);
                        self.evidence.push(Evidence {
                            offender: v.voter,
                            height: v.height,
                            round: v.round,
                            what,
                            first,
                            second: v.block,
                        });
                    }
                    Some(_) => {}
                }
            }
        }
    }

    fn broadcast(&mut self, msg: ConsensusMsg, out: &mut Vec<Output>) {
        self.record(msg.clone());
        out.push(Output::Broadcast(msg));
    }

    fn cast(&mut self, kind: VoteKind, block: Option<Digest>, out: &mut Vec<Output>) {
        let vote = Vote { kind, height: self.height, round: self.round, block, voter: self.id };
        self.broadcast(ConsensusMsg::Vote(vote), out);
    }

    fn schedule(&self, kind: TimeoutKind, base: u64, out: &mut Vec<Output>) {
        let timeout = Timeout { kind, height: self.height, round: self.round };
        out.push(Output::Schedule { timeout, after_ms: TimeoutConfig::backoff(base, self.round) });
    }

    fn start_round(&mut self, round: u32, app: &mut dyn ConsensusApp, out: &mut Vec<Output>) {
        self.round = round;
        self.step = Step::Propose;
        if proposer_for(&self.validators, self.height, round) == self.id {
            let (block, valid_round) = match self.valid {
                Some((d, vr)) => match self.block_by_digest(d) {
                    Some(b) => (b, Some(vr)),
                    None => (app.propose(self.height, round), None),
                },
                None => (app.propose(self.height, round), None),
            };
            let p = Proposal { height: self.height, round, block, valid_round, proposer: self.id };
            self.broadcast(ConsensusMsg::Proposal(p), out);
        } else {
            self.schedule(TimeoutKind::Propose, self.timeouts.propose_ms, out);
        }
    }

    fn block_by_digest(&self, d: Digest) -> Option<Block> {
        self.rounds
            .range((self.height, 0)..=(self.height, u32::MAX))
            .find_map(|(_, rs)| rs.blocks.get(&d).cloned())
    }

    fn is_valid(&mut self, d: Digest, app: &mut dyn ConsensusApp) -> bool {
        if let Some(v) = self.validity.get(&d) {
            return *v;
        }
        let Some(block) = self.block_by_digest(d) else {
            return false;
        };
        let ok = app.validate(&block);
        self.validity.insert(d, ok);
        ok
    }

    fn run_rules(&mut self, app: &mut dyn ConsensusApp, out: &mut Vec<Output>) {
        while self.step != Step::NewHeight && self.fire_one(app, out) {}
    }

    /// Evaluates the upon-rules in order and fires the first that applies.
    fn fire_one(&mut self, app: &mut dyn ConsensusApp, out: &mut Vec<Output>) -> bool {
        let (h, r, n) = (self.height, self.round, self.n());

        // Decision: any round with a proposal and a precommit quorum for it.
        let decided = self
            .rounds
            .range((h, 0)..=(h, u32::MAX))
            .flat_map(|((_, round), rs)| {
                rs.blocks.keys().filter(|d| is_quorum(RoundState::count(&rs.precommits, Some(**d)), n)).map(move |d| (*round, *d))
            })
            .next();
        if let Some((round, d)) = decided {
            if self.is_valid(d, app) {
                let block = self.block_by_digest(d).expect("decided block is known");
                self.decide(round, block, app, out);
                return true;
            }
        }

        // Round skip on f+1 messages from a higher round.
        let skip_to = self
            .rounds
            .range((h, r + 1)..=(h, u32::MAX))
            .find(|(_, rs)| is_skip_threshold(rs.senders().len(), n))
            .map(|((_, round), _)| *round);
        if let Some(round) = skip_to {
            self.start_round(round, app, out);
            return true;
        }

        let rs = self.rounds.get(&(h, r)).cloned().unwrap_or_default();

        if self.step == Step::Propose {
            if let Some((d, vr)) = rs.proposal {
                match vr {
                    None => {
                        let unlocked = self.locked.is_none_or(|(ld, _)| ld == d);
                        let vote = if unlocked && self.is_valid(d, app) { Some(d) } else { None };
                        self.cast(VoteKind::Prevote, vote, out);
                        self.step = Step::Prevote;
                        return true;
                    }
                    Some(vr) if vr < r => {
                        let polka = self
                            .rounds
                            .get(&(h, vr))
                            .map(|old| is_quorum(RoundState::count(&old.prevotes, Some(d)), n))
                            .unwrap_or(false);
                        if polka {
                            let unlocked = match self.locked {
                                None => true,
                                Some((ld, lr)) => lr <= vr || ld == d,
                            };
                            let vote = if unlocked && self.is_valid(d, app) { Some(d) } else { None };
                            self.cast(VoteKind::Prevote, vote, out);
                            self.step = Step::Prevote;
                            return true;
                        }
                    }
                    Some(_) => {}
                }
            }
        }

        if self.step == Step::Prevote && !rs.prevote_timeout_armed && is_quorum(rs.prevotes.len(), n) {
            self.rounds.entry((h, r)).or_default().prevote_timeout_armed = true;
            self.schedule(TimeoutKind::Prevote, self.timeouts.prevote_ms, out);
            return true;
        }

        if self.step >= Step::Prevote && !rs.polka_handled {
            let polka = rs.blocks.keys().copied().find(|d| is_quorum(RoundState::count(&rs.prevotes, Some(*d)), n));
            if let Some(d) = polka {
                if self.is_valid(d, app) {
                    self.rounds.entry((h, r)).or_default().polka_handled = true;
                    if self.step == Step::Prevote {
                        self.locked = Some((d, r));
                        self.cast(VoteKind::Precommit, Some(d), out);
                        self.step = Step::Precommit;
                    }
                    self.valid = Some((d, r));
                    return true;
                }
            }
        }

        if self.step == Step::Prevote && is_quorum(RoundState::count(&rs.prevotes, None), n) {
            self.cast(VoteKind::Precommit, None, out);
            self.step = Step::Precommit;
            return true;
        }

        if !rs.precommit_timeout_armed && is_quorum(rs.precommits.len(), n) {
            self.rounds.entry((h, r)).or_default().precommit_timeout_armed = true;
            self.schedule(TimeoutKind::Precommit, self.timeouts.precommit_ms, out);
            return true;
        }

        false
    }

    fn decide(&mut self, round: u32, block: Block, app: &mut dyn ConsensusApp, out: &mut Vec<Output>) {
        let h = self.height;
        self.step = Step::Commit;
        let d = block.digest();
        if let Some(rs) = self.rounds.get(&(h, round)) {
            let valid_round = rs.proposal.filter(|(pd, _)| *pd == d).and_then(|(_, vr)| vr);
            let proposer = proposer_for(&self.validators, h, round);
            out.push(Output::Relay(ConsensusMsg::Proposal(Proposal { height: h, round, block: block.clone(), valid_round, proposer })));
            for (voter, _) in rs.precommits.iter().filter(|(_, v)| v.contains(&Some(d))) {
                let vote = Vote { kind: VoteKind::Precommit, height: h, round, block: Some(d), voter: *voter };
                out.push(Output::Relay(ConsensusMsg::Vote(vote)));
            }
        }
        app.commit(&block);
        self.decisions.insert(h, d);
        out.push(Output::Committed { height: h, round, block });

        self.height = h + 1;
        self.round = 0;
        self.step = Step::NewHeight;
        self.locked = None;
        self.valid = None;
        self.validity.clear();
        self.rounds = self.rounds.split_off(&(h + 1, 0));
        out.push(Output::Schedule {
            timeout: Timeout { kind: TimeoutKind::NewHeight, height: h + 1, round: 0 },
            after_ms: self.timeouts.block_interval_ms,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// App whose blocks differ only by height and proposer.
    struct Toy {
        committed: Vec<Block>,
        reject: bool,
    }

    impl ConsensusApp for Toy {
        fn propose(&mut self, height: u64, round: u32) -> Block {
            Block {
                height,
                proposer: ValidatorId(round),
                parent_hash: Digest::zero(),
                transactions: vec![],
                rate_snapshot_height: 0,
                state_root: Digest::zero(),
            }
        }
        fn validate(&mut self, _: &Block) -> bool {
            !self.reject
        }
        fn commit(&mut self, block: &Block) {
            self.committed.push(block.clone());
        }
    }

    fn vals(n: u32) -> Vec<ValidatorId> {
        (0..n).map(ValidatorId).collect()
    }

    /// Synchronous, zero-delay flooding among all nodes; timeouts ignored.
    fn flood(nodes: &mut [Consensus], apps: &mut [Toy], mut queue: Vec<(usize, Output)>) {
        while let Some((from, o)) = queue.pop() {
            if let Output::Broadcast(m) = o {
                for i in 0..nodes.len() {
                    if i != from {
                        for o in nodes[i].on_message(m.clone(), &mut apps[i]) {
                            queue.push((i, o));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn thresholds() {
        assert!(is_quorum(3, 4));
        assert!(!is_quorum(2, 4));
        assert!(is_skip_threshold(2, 4));
        assert!(!is_skip_threshold(1, 4));
        assert!(is_quorum(5, 7));
        assert!(!is_quorum(4, 7));
    }

    #[test]
    fn round_robin_proposer() {
        let v = vals(4);
        assert_eq!(proposer_for(&v, 1, 0), ValidatorId(1));
        assert_eq!(proposer_for(&v, 1, 3), ValidatorId(0));
    }

    #[test]
    fn four_honest_commit_in_round_zero() {
        let mut nodes: Vec<_> = (0..4).map(|i| Consensus::new(ValidatorId(i), vals(4), TimeoutConfig::default(), 1)).collect();
        let mut apps: Vec<_> = (0..4).map(|_| Toy { committed: vec![], reject: false }).collect();
        let mut queue = Vec::new();
        for i in 0..4 {
            for o in nodes[i].start(&mut apps[i]) {
                queue.push((i, o));
            }
        }
        flood(&mut nodes, &mut apps, queue);
        for (n, a) in nodes.iter().zip(&apps) {
            assert_eq!(a.committed.len(), 1);
            assert_eq!(n.height, 2);
        }
        let d = apps[0].committed[0].digest();
        assert!(apps.iter().all(|a| a.committed[0].digest() == d));
    }

    #[test]
    fn invalid_block_gets_nil_and_no_commit() {
        let mut nodes: Vec<_> = (0..4).map(|i| Consensus::new(ValidatorId(i), vals(4), TimeoutConfig::default(), 1)).collect();
        let mut apps: Vec<_> = (0..4).map(|_| Toy { committed: vec![], reject: true }).collect();
        let mut queue = Vec::new();
        for i in 0..4 {
            for o in nodes[i].start(&mut apps[i]) {
                queue.push((i, o));
            }
        }
        flood(&mut nodes, &mut apps, queue);
        assert!(apps.iter().all(|a| a.committed.is_empty()));
        assert!(nodes.iter().all(|n| n.step == Step::Precommit));
    }

    #[test]
    fn propose_timeout_leads_to_nil_prevote() {
        let mut c = Consensus::new(ValidatorId(0), vals(4), TimeoutConfig::default(), 1);
        let mut app = Toy { committed: vec![], reject: false };
        let out = c.start(&mut app);
        assert!(out.iter().any(|o| matches!(o, Output::Schedule { timeout: Timeout { kind: TimeoutKind::Propose, .. }, after_ms: 3_000 })));
        let out = c.on_timeout(Timeout { kind: TimeoutKind::Propose, height: 1, round: 0 }, &mut app);
        assert!(matches!(&out[0], Output::Broadcast(ConsensusMsg::Vote(Vote { kind: VoteKind::Prevote, block: None, .. }))));
    }

    #[test]
    fn backoff_doubles_per_round() {
        let mut c = Consensus::new(ValidatorId(3), vals(4), TimeoutConfig::default(), 1);
        let mut app = Toy { committed: vec![], reject: false };
        c.start(&mut app);
        let out = c.on_timeout(Timeout { kind: TimeoutKind::Precommit, height: 1, round: 0 }, &mut app);
        assert_eq!(c.round, 1);
        assert!(out.iter().any(|o| matches!(o, Output::Schedule { timeout: Timeout { kind: TimeoutKind::Propose, round: 1, .. }, after_ms: 6_000 })));
    }

    #[test]
    fn conflicting_votes_recorded_as_evidence() {
        let mut c = Consensus::new(ValidatorId(0), vals(4), TimeoutConfig::default(), 1);
        let mut app = Toy { committed: vec![], reject: false };
        let v = |b| ConsensusMsg::Vote(Vote { kind: VoteKind::Prevote, height: 1, round: 0, block: b, voter: ValidatorId(2) });
        c.on_message(v(Some(Digest([1; 32]))), &mut app);
        c.on_message(v(Some(Digest([2; 32]))), &mut app);
        c.on_message(v(Some(Digest([2; 32]))), &mut app);
        c.on_message(v(None), &mut app);
        assert_eq!(c.evidence.len(), 2);
        assert_eq!(c.evidence[0].offender, ValidatorId(2));
    }

    #[test]
    fn relayed_certificate_lets_lagging_node_decide() {
        let mut nodes: Vec<Consensus> = (0..4).map(|i| Consensus::new(ValidatorId(i), vals(4), TimeoutConfig::default(), 1)).collect();
        let mut apps: Vec<Toy> = (0..4).map(|_| Toy { committed: vec![], reject: false }).collect();
        let mut relays = Vec::new();
        let mut queue = Vec::new();
        for i in 0..3 {
            for o in nodes[i].start(&mut apps[i]) {
                queue.push((i, o));
            }
        }
        // node 3 hears nothing while the others decide
        while let Some((from, o)) = queue.pop() {
            match o {
                Output::Broadcast(m) => {
                    for i in (0..3).filter(|i| *i != from) {
                        for o in nodes[i].on_message(m.clone(), &mut apps[i]) {
                            queue.push((i, o));
                        }
                    }
                }
                Output::Relay(m) if from == 0 => relays.push(m),
                _ => {}
            }
        }
        assert_eq!(apps[0].committed.len(), 1);
        nodes[3].start(&mut apps[3]);
        for m in relays {
            nodes[3].on_message(m, &mut apps[3]);
        }
        assert_eq!(apps[3].committed, apps[0].committed);
        assert_eq!(nodes[3].height, 2);
    }

    #[test]
    fn skip_to_higher_round_on_f_plus_one() {
        let mut c = Consensus::new(ValidatorId(0), vals(4), TimeoutConfig::default(), 1);
        let mut app = Toy { committed: vec![], reject: false };
        c.start(&mut app);
        for voter in [1, 2] {
            let m = ConsensusMsg::Vote(Vote { kind: VoteKind::Prevote, height: 1, round: 5, block: None, voter: ValidatorId(voter) });
            c.on_message(m, &mut app);
        }
        assert_eq!(c.round, 5);
    }
}
