//! Per-stablecoin proposal/vote governance: mint, burn, whitelist (committee),
//! blacklist, committee size and quorum size.
//!
//! Each unit's governance only touches balances through a [`UnitBalances`]
//! handle scoped to that unit, so management of one stablecoin cannot read or
//! write another's state.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::encoding::{get_bytes, put_bytes, put_u32, put_u64, put_u8, Decode, DecodeError, Encode, Reader};
use crate::types::{Address, Amount, CommitteeSeed, CurrencyUnit, Digest, TaggedTransaction};

pub type ProposalId = Digest;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GovError {
    #[error("{0} is not a committee member")]
    NotCommitteeMember(Address),
    #[error("invalid action: {0}")]
    InvalidAction(&'static str),
    #[error("duplicate proposal {0}")]
    DuplicateProposal(ProposalId),
    #[error("proposal {0} is closed")]
    ProposalClosed(ProposalId),
    #[error("{0} already voted")]
    AlreadyVoted(Address),
    #[error("unknown proposal {0}")]
    UnknownProposal(ProposalId),
    #[error("{holder} holds less than the {amount} to burn")]
    InsufficientBalanceForBurn { holder: Address, amount: Amount },
    #[error("invariant violation: {0}")]
    InvariantViolation(&'static str),
    #[error("{0} is blacklisted for {1}")]
    Blacklisted(Address, CurrencyUnit),
    #[error("balance overflow")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProposalAction {
    Mint { to: Address, amount: Amount },
    Burn { from: Address, amount: Amount },
    WhitelistAdd { member: Address },
    WhitelistRemove { member: Address },
    BlacklistAdd { account: Address },
    BlacklistRemove { account: Address },
    SetCommitteeSize(u32),
    SetQuorumSize(u32),
}

impl ProposalAction {
    pub fn name(&self) -> &'static str {
        match self {
            ProposalAction::Mint { .. } => "mint",
            ProposalAction::Burn { .. } => "burn",
            ProposalAction::WhitelistAdd { .. } => "whitelist_add",
            ProposalAction::WhitelistRemove { .. } => "whitelist_remove",
            ProposalAction::BlacklistAdd { .. } => "blacklist_add",
            ProposalAction::BlacklistRemove { .. } => "blacklist_remove",
            ProposalAction::SetCommitteeSize(_) => "set_committee_size",
            ProposalAction::SetQuorumSize(_) => "set_quorum_size",
        }
    }
}

/// Payload of Proposal and Vote transactions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GovernanceBody {
    Propose { action: ProposalAction, evidence: Vec<u8> },
    Vote { proposal: ProposalId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalStatus {
    Open,
    Executed,
    /// Execution would break a governance invariant; the proposal can no longer run.
    Rejected,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Proposal {
    pub id: ProposalId,
    pub unit: CurrencyUnit,
    pub action: ProposalAction,
    pub proposer: Address,
    pub yes_votes: BTreeSet<Address>,
    pub status: ProposalStatus,
    pub created_height: u64,
    pub expiry_height: u64,
    pub evidence: Vec<u8>,
}

/// Outcome of a successful submit or vote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VoteOutcome {
    Pending,
    Executed,
    /// Quorum reached but execution failed; the vote still counts.
    ExecutionFailed(GovError),
}

/// Balance access restricted to a single currency unit.
pub trait UnitBalances {
    fn unit(&self) -> CurrencyUnit;
    fn balance_of(&self, who: &Address) -> Amount;
    fn credit(&mut self, who: &Address, amount: Amount) -> Result<(), GovError>;
    fn debit(&mut self, who: &Address, amount: Amount) -> Result<(), GovError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StablecoinGovernance {
    pub unit: CurrencyUnit,
    pub committee: BTreeSet<Address>,
    pub blacklist: BTreeSet<Address>,
    pub committee_size: u32,
    pub quorum_size: u32,
    pub proposals: BTreeMap<ProposalId, Proposal>,
    pub minted: Amount,
    pub burned: Amount,
    pub proposal_ttl: u64,
}

impl StablecoinGovernance {
    pub fn from_seed(unit: CurrencyUnit, seed: &CommitteeSeed, proposal_ttl: u64) -> Self {
        StablecoinGovernance {
            unit,
            committee: seed.members.iter().copied().collect(),
            blacklist: BTreeSet::new(),
            committee_size: seed.committee_size,
            quorum_size: seed.quorum_size,
            proposals: BTreeMap::new(),
            minted: Amount::ZERO,
            burned: Amount::ZERO,
            proposal_ttl,
        }
    }

    /// A unit nobody manages yet: empty committee, quorum 1.
    pub fn unmanaged(unit: CurrencyUnit, proposal_ttl: u64) -> Self {
        Self::from_seed(unit, &CommitteeSeed { members: vec![], committee_size: 1, quorum_size: 1 }, proposal_ttl)
    }

    pub fn is_member(&self, who: &Address) -> bool {
        self.committee.contains(who)
    }

    fn check_action(&self, action: &ProposalAction) -> Result<(), GovError> {
        match action {
            ProposalAction::Mint { amount, .. } | ProposalAction::Burn { amount, .. } if amount.is_zero() => {
                Err(GovError::InvalidAction("amount must be positive"))
            }
            ProposalAction::SetCommitteeSize(0) => Err(GovError::InvalidAction("committee size must be positive")),
            ProposalAction::SetQuorumSize(0) => Err(GovError::InvalidAction("quorum size must be positive")),
            _ => Ok(()),
        }
    }

    /// Opens a proposal. The proposer's submission counts as its first yes vote,
    /// so a quorum of one executes immediately.
    pub fn submit_proposal(
        &mut self,
        id: ProposalId,
        proposer: Address,
        action: ProposalAction,
        evidence: Vec<u8>,
        height: u64,
        balances: &mut dyn UnitBalances,
    ) -> Result<VoteOutcome, GovError> {
        if !self.is_member(&proposer) {
            return Err(GovError::NotCommitteeMember(proposer));
        }
        self.check_action(&action)?;
        if self.proposals.contains_key(&id) {
            return Err(GovError::DuplicateProposal(id));
        }
        self.proposals.insert(
            id,
            Proposal {
                id,
                unit: self.unit,
                action,
                proposer,
                yes_votes: BTreeSet::from([proposer]),
                status: ProposalStatus::Open,
                created_height: height,
                expiry_height: height.saturating_add(self.proposal_ttl),
                evidence,
            },
        );
        Ok(self.execute_if_quorum(id, balances))
    }

    pub fn cast_vote(
        &mut self,
        voter: Address,
        id: ProposalId,
        height: u64,
        balances: &mut dyn UnitBalances,
    ) -> Result<VoteOutcome, GovError> {
        if !self.is_member(&voter) {
            return Err(GovError::NotCommitteeMember(voter));
        }
        let p = self.proposals.get_mut(&id).ok_or(GovError::UnknownProposal(id))?;
        if p.status != ProposalStatus::Open || height > p.expiry_height {
            return Err(GovError::ProposalClosed(id));
        }
        if !p.yes_votes.insert(voter) {
            return Err(GovError::AlreadyVoted(voter));
        }
        Ok(self.execute_if_quorum(id, balances))
    }

    /// Number of yes votes from current committee members.
    pub fn effective_votes(&self, id: &ProposalId) -> usize {
        self.proposals
            .get(id)
            .map(|p| p.yes_votes.intersection(&self.committee).count())
            .unwrap_or(0)
    }

    fn execute_if_quorum(&mut self, id: ProposalId, balances: &mut dyn UnitBalances) -> VoteOutcome {
        if self.effective_votes(&id) < self.quorum_size as usize {
            return VoteOutcome::Pending;
        }
        match self.try_execute(id, balances) {
            Ok(()) => VoteOutcome::Executed,
            Err(e) => VoteOutcome::ExecutionFailed(e),
        }
    }

    /// Applies an Open proposal that has reached quorum. On a failed burn the
    /// proposal stays Open; on an invariant violation it becomes Rejected.
    pub fn try_execute(&mut self, id: ProposalId, balances: &mut dyn UnitBalances) -> Result<(), GovError> {
        let p = self.proposals.get(&id).ok_or(GovError::UnknownProposal(id))?;
        if p.status != ProposalStatus::Open {
            return Err(GovError::ProposalClosed(id));
        }
        if self.effective_votes(&id) < self.quorum_size as usize {
            return Err(GovError::InvariantViolation("quorum not reached"));
        }
        let action = p.action.clone();
        let result = self.apply_action(&action, balances);
        let p = self.proposals.get_mut(&id).expect("checked above");
        match &result {
            Ok(()) => p.status = ProposalStatus::Executed,
            Err(GovError::InvariantViolation(_)) => p.status = ProposalStatus::Rejected,
            Err(_) => {}
        }
        result
    }

    fn apply_action(&mut self, action: &ProposalAction, balances: &mut dyn UnitBalances) -> Result<(), GovError> {
        debug_assert_eq!(balances.unit(), self.unit);
        match action {
            ProposalAction::Mint { to, amount } => {
                let minted = self.minted.checked_add(*amount).ok_or(GovError::Overflow)?;
                balances.credit(to, *amount)?;
                self.minted = minted;
            }
            ProposalAction::Burn { from, amount } => {
                if balances.balance_of(from) < *amount {
                    return Err(GovError::InsufficientBalanceForBurn { holder: *from, amount: *amount });
                }
                let burned = self.burned.checked_add(*amount).ok_or(GovError::Overflow)?;
                balances.debit(from, *amount)?;
                self.burned = burned;
            }
            ProposalAction::WhitelistAdd { member } => {
                if !self.committee.contains(member) && self.committee.len() as u32 >= self.committee_size {
                    return Err(GovError::InvariantViolation("committee is full"));
                }
                self.committee.insert(*member);
            }
            ProposalAction::WhitelistRemove { member } => {
                // keep enough members to ever reach quorum again
                let remaining = self.committee.len() - self.committee.contains(member) as usize;
                if (remaining as u32) < self.quorum_size {
                    return Err(GovError::InvariantViolation("committee would fall below quorum"));
                }
                self.committee.remove(member);
            }
            ProposalAction::BlacklistAdd { account } => {
                self.blacklist.insert(*account);
            }
            ProposalAction::BlacklistRemove { account } => {
                self.blacklist.remove(account);
            }
            ProposalAction::SetCommitteeSize(n) => {
                if *n < self.quorum_size || (*n as usize) < self.committee.len() {
                    return Err(GovError::InvariantViolation("committee size below quorum or membership"));
                }
                self.committee_size = *n;
            }
            ProposalAction::SetQuorumSize(n) => {
                if *n == 0 || *n > self.committee_size || (*n as usize) > self.committee.len() {
                    return Err(GovError::InvariantViolation("quorum exceeds committee"));
                }
                self.quorum_size = *n;
            }
        }
        Ok(())
    }

    /// Marks Open proposals past their expiry height as Expired.
    pub fn expire(&mut self, height: u64) {
        for p in self.proposals.values_mut() {
            if p.status == ProposalStatus::Open && height > p.expiry_height {
                p.status = ProposalStatus::Expired;
            }
        }
    }

    pub fn enforce_blacklist(&self, tx: &TaggedTransaction) -> Result<(), GovError> {
        if tx.unit == self.unit && self.blacklist.contains(&tx.sender) {
            return Err(GovError::Blacklisted(tx.sender, tx.unit));
        }
        Ok(())
    }
}

impl Encode for ProposalAction {
    fn encode_to(&self, out: &mut Vec<u8>) {
        match self {
            ProposalAction::Mint { to, amount } => {
                put_u8(out, 0);
                to.encode_to(out);
                amount.encode_to(out);
            }
            ProposalAction::Burn { from, amount } => {
                put_u8(out, 1);
                from.encode_to(out);
                amount.encode_to(out);
            }
            ProposalAction::WhitelistAdd { member } => {
                put_u8(out, 2);
                member.encode_to(out);
            }
            ProposalAction::WhitelistRemove { member } => {
                put_u8(out, 3);
                member.encode_to(out);
            }
            ProposalAction::BlacklistAdd { account } => {
                put_u8(out, 4);
                account.encode_to(out);
            }
            ProposalAction::BlacklistRemove { account } => {
                put_u8(out, 5);
                account.encode_to(out);
            }
            ProposalAction::SetCommitteeSize(n) => {
                put_u8(out, 6);
                put_u32(out, *n);
            }
            ProposalAction::SetQuorumSize(n) => {
                put_u8(out, 7);
                put_u32(out, *n);
            }
        }
    }
}

impl Decode for ProposalAction {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.u8()? {
            0 => ProposalAction::Mint { to: Decode::decode_from(r)?, amount: Decode::decode_from(r)? },
            1 => ProposalAction::Burn { from: Decode::decode_from(r)?, amount: Decode::decode_from(r)? },
            2 => ProposalAction::WhitelistAdd { member: Decode::decode_from(r)? },
            3 => ProposalAction::WhitelistRemove { member: Decode::decode_from(r)? },
            4 => ProposalAction::BlacklistAdd { account: Decode::decode_from(r)? },
            5 => ProposalAction::BlacklistRemove { account: Decode::decode_from(r)? },
            6 => ProposalAction::SetCommitteeSize(r.u32()?),
            7 => ProposalAction::SetQuorumSize(r.u32()?),
            tag => return Err(DecodeError::InvalidTag { what: "proposal action", tag }),
        })
    }
}

impl Encode for GovernanceBody {
    fn encode_to(&self, out: &mut Vec<u8>) {
        match self {
            GovernanceBody::Propose { action, evidence } => {
                put_u8(out, 0);
                action.encode_to(out);
                put_bytes(out, evidence);
            }
            GovernanceBody::Vote { proposal } => {
                put_u8(out, 1);
                proposal.encode_to(out);
            }
        }
    }
}

impl Decode for GovernanceBody {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.u8()? {
            0 => GovernanceBody::Propose { action: Decode::decode_from(r)?, evidence: get_bytes(r)? },
            1 => GovernanceBody::Vote { proposal: Decode::decode_from(r)? },
            tag => return Err(DecodeError::InvalidTag { what: "governance body", tag }),
        })
    }
}

impl Encode for ProposalStatus {
    fn encode_to(&self, out: &mut Vec<u8>) {
        put_u8(
            out,
            match self {
                ProposalStatus::Open => 0,
                ProposalStatus::Executed => 1,
                ProposalStatus::Rejected => 2,
                ProposalStatus::Expired => 3,
            },
        )
    }
}

impl Encode for Proposal {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.id.encode_to(out);
        self.unit.encode_to(out);
        self.action.encode_to(out);
        self.proposer.encode_to(out);
        self.yes_votes.encode_to(out);
        self.status.encode_to(out);
        put_u64(out, self.created_height);
        put_u64(out, self.expiry_height);
        put_bytes(out, &self.evidence);
    }
}

impl Encode for StablecoinGovernance {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.unit.encode_to(out);
        self.committee.encode_to(out);
        self.blacklist.encode_to(out);
        put_u32(out, self.committee_size);
        put_u32(out, self.quorum_size);
        self.proposals.encode_to(out);
        self.minted.encode_to(out);
        self.burned.encode_to(out);
        put_u64(out, self.proposal_ttl);
    }
}
