//! One validator's application state: ledger, rates, mempool and chain.

use std::collections::BTreeMap;

use crate::byzantine::{pack_invalid, tamper_unit, ByzantineStrategy};
use crate::consensus::ConsensusApp;
use crate::crypto::{sha256, CanonicalDigest};
use crate::ledger::{apply_block, AppliedBlock, LedgerState, Receipt};
use crate::mempool::{AddOutcome, Mempool, RejectReason};
use crate::oracle::{sync_rates, ExchangeRateTable};
use crate::types::{Address, Amount, Block, ChainConfig, CurrencyUnit, Digest, TaggedTransaction, ValidatorId};
use crate::upgrade::{apply_scheduled_upgrade, UpgradeEvent};

/// Parent hash of block 1.
pub fn genesis_hash(genesis: &LedgerState) -> Digest {
    sha256(&[b"stablefee/genesis", &genesis.state_root().0])
}

#[derive(Debug, Clone)]
pub struct NodeApp {
    pub id: ValidatorId,
    /// Config in force for the next block.
    pub config: ChainConfig,
    /// State after the last committed block.
    pub state: LedgerState,
    /// Rate snapshot used for the next block.
    pub rates: ExchangeRateTable,
    /// Every snapshot this node has used, by snapshot height.
    pub rate_history: BTreeMap<u64, ExchangeRateTable>,
    pub mempool: Mempool,
    pub chain: Vec<Block>,
    pub receipts: BTreeMap<Digest, Receipt>,
    pub upgrade_log: Vec<UpgradeEvent>,
    pub strategy: Option<ByzantineStrategy>,
    /// Digests of transactions this node altered while proposing.
    pub tampered: Vec<Digest>,
    /// Set if a decided block failed to apply locally.
    pub fault: Option<String>,
    genesis_hash: Digest,
    applied: BTreeMap<Digest, AppliedBlock>,
}

impl NodeApp {
    pub fn new(
        id: ValidatorId,
        config: ChainConfig,
        genesis: LedgerState,
        strategy: Option<ByzantineStrategy>,
        mempool_capacity: usize,
    ) -> Self {
        let rates = ExchangeRateTable::genesis(config.reference_unit, &config.genesis_rates);
        let mut node = NodeApp {
            id,
            config,
            genesis_hash: genesis_hash(&genesis),
            state: genesis,
            rate_history: BTreeMap::from([(0, rates.clone())]),
            rates,
            mempool: Mempool::new(mempool_capacity),
            chain: Vec::new(),
            receipts: BTreeMap::new(),
            upgrade_log: Vec::new(),
            strategy,
            tampered: Vec::new(),
            fault: None,
            applied: BTreeMap::new(),
        };
        node.begin_height(1);
        node
    }

    pub fn height(&self) -> u64 {
        self.state.height
    }

    pub fn last_hash(&self) -> Digest {
        self.chain.last().map(|b| b.digest()).unwrap_or(self.genesis_hash)
    }

    /// Upgrades and oracle sync that take effect when `height` begins.
    fn begin_height(&mut self, height: u64) {
        let (config, events) = apply_scheduled_upgrade(&self.config, height, &self.state);
        self.config = config;
        self.upgrade_log.extend(events);
        self.state.ensure_units(&self.config);
        self.rates = sync_rates(&self.rates, &self.state.feed, height, self.config.oracle_sync_interval);
        self.rate_history.entry(self.rates.snapshot_height).or_insert_with(|| self.rates.clone());
        self.mempool.prune(&self.state, &self.rates, &self.config);
    }

    pub fn submit(&mut self, tx: TaggedTransaction) -> Result<AddOutcome, RejectReason> {
        self.mempool.add(tx, &self.rates, &self.state, &self.config)
    }

    pub fn balance(&self, who: &Address, unit: CurrencyUnit) -> Amount {
        self.state.balance(who, unit)
    }

    /// Honest block over `txs`, paying fees to `proposer`.
    pub fn build_block(&self, txs: Vec<TaggedTransaction>, proposer: ValidatorId) -> Block {
        let mut block = Block {
            height: self.state.height + 1,
            proposer,
            parent_hash: self.last_hash(),
            transactions: txs,
            rate_snapshot_height: self.rates.snapshot_height,
            state_root: Digest::zero(),
        };
        if let Ok(applied) = apply_block(&self.state, &block, &self.rates, &self.config) {
            block.state_root = applied.state_root;
        }
        block
    }

    fn check(&self, block: &Block) -> Result<AppliedBlock, String> {
        if block.parent_hash != self.last_hash() {
            return Err("parent hash mismatch".into());
        }
        if !self.config.validators.contains(&block.proposer) {
            return Err(format!("unknown proposer {}", block.proposer));
        }
        let applied = apply_block(&self.state, block, &self.rates, &self.config).map_err(|e| e.to_string())?;
        if applied.state_root != block.state_root {
            return Err("state root mismatch".into());
        }
        Ok(applied)
    }
}

impl ConsensusApp for NodeApp {
    fn propose(&mut self, _height: u64, _round: u32) -> Block {
        let txs = self.mempool.select_applicable(&self.state, &self.rates, &self.config);
        let mut block = self.build_block(txs, self.id);
        match self.strategy {
            Some(ByzantineStrategy::PackInvalid) => pack_invalid(&mut block, &self.config, &self.rates),
            Some(ByzantineStrategy::UnitTamper) => {
                if let Some(d) = tamper_unit(&mut block, &self.config) {
                    self.tampered.push(d);
                }
            }
            _ => {}
        }
        block
    }

    fn validate(&mut self, block: &Block) -> bool {
        let digest = block.digest();
        if self.applied.contains_key(&digest) {
            return true;
        }
        match self.check(block) {
            Ok(applied) => {
                self.applied.insert(digest, applied);
                true
            }
            Err(_) => false,
        }
    }

    fn commit(&mut self, block: &Block) {
        let digest = block.digest();
        let applied = match self.applied.remove(&digest) {
            Some(a) => a,
            None => match self.check(block) {
                Ok(a) => a,
                Err(e) => {
                    self.fault.get_or_insert(format!("height {}: decided block does not apply: {e}", block.height));
                    return;
                }
            },
        };
        self.applied.clear();
        self.state = applied.state;
        for r in applied.receipts {
            self.receipts.insert(r.tx_digest, r);
        }
        self.chain.push(block.clone());
        self.begin_height(block.height + 1);
    }
}
