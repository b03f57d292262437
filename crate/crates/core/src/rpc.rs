//! Ethereum-style JSON-RPC endpoints, one per currency unit.
//!
//! Wallets sign a unit-less [`TxEnvelope`]; the endpoint tags it with its own
//! unit and current base fee before handing it to the node. Every amount an
//! endpoint returns is in that endpoint's unit.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::routing::post;
use axum::{Json, Router};
use primitive_types::U256;
use serde_json::{json, Value};
use thiserror::Error;

use crate::crypto::{validator_address, CanonicalDigest};
use crate::encoding::Decode;
use crate::fees::{base_fee_for_unit, FeeError};
use crate::ledger::{gas_used_for, Receipt, ReceiptStatus};
use crate::mempool::RejectReason;
use crate::types::{Address, Amount, Block, CurrencyUnit, Digest, TaggedTransaction, TxEnvelope};
use crate::world::World;

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const SERVER_ERROR: i64 = -32000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RpcError {
    #[error("malformed address: {0}")]
    MalformedAddress(String),
    #[error("invalid params: {0}")]
    InvalidParams(String),
    #[error("method {0} not found")]
    MethodNotFound(String),
    #[error("invalid request")]
    InvalidRequest,
    #[error("mempool rejected transaction: {0}")]
    MempoolRejected(RejectReason),
    #[error(transparent)]
    Fee(#[from] FeeError),
}

impl RpcError {
    pub fn code(&self) -> i64 {
        match self {
            RpcError::MalformedAddress(_) | RpcError::InvalidParams(_) => INVALID_PARAMS,
            RpcError::MethodNotFound(_) => METHOD_NOT_FOUND,
            RpcError::InvalidRequest => INVALID_REQUEST,
            RpcError::MempoolRejected(_) | RpcError::Fee(_) => SERVER_ERROR,
        }
    }
}

/// Committed-state view and submission path of one node.
pub trait ChainBackend: Send + Sync {
    fn chain_id(&self) -> u64;
    fn block_number(&self) -> u64;
    fn balance(&self, who: &Address, unit: CurrencyUnit) -> Amount;
    /// Account nonce; with `pending`, extended by the node's pooled transactions.
    fn nonce(&self, who: &Address, pending: bool) -> u64;
    fn base_fee(&self, unit: CurrencyUnit) -> Result<Amount, FeeError>;
    fn submit(&self, tx: TaggedTransaction) -> Result<Digest, RejectReason>;
    fn receipt(&self, digest: &Digest) -> Option<Receipt>;
    fn block(&self, height: u64) -> Option<Block>;
}

/// A validator inside a shared simulated world.
#[derive(Clone)]
pub struct WorldNode {
    pub world: Arc<Mutex<World>>,
    pub node: crate::types::ValidatorId,
}

impl WorldNode {
    fn with<R>(&self, f: impl FnOnce(&World, &crate::node::NodeApp) -> R) -> R {
        let w = self.world.lock().expect("world lock");
        let n = w.node(self.node).expect("backing node exists");
        f(&w, &n.app)
    }
}

impl ChainBackend for WorldNode {
    fn chain_id(&self) -> u64 {
        self.with(|_, a| a.config.chain_id)
    }

    fn block_number(&self) -> u64 {
        self.with(|_, a| a.height())
    }

    fn balance(&self, who: &Address, unit: CurrencyUnit) -> Amount {
        self.with(|_, a| a.balance(who, unit))
    }

    fn nonce(&self, who: &Address, pending: bool) -> u64 {
        self.with(|_, a| {
            let n = a.state.nonce(who);
            if pending {
                a.mempool.pending_nonce(who, n)
            } else {
                n
            }
        })
    }

    fn base_fee(&self, unit: CurrencyUnit) -> Result<Amount, FeeError> {
        self.with(|_, a| {
            if !a.config.has_unit(unit) {
                return Err(FeeError::MissingRate(unit));
            }
            base_fee_for_unit(unit, &a.rates, &a.config).map(|q| q.base_fee_per_gas)
        })
    }

    fn submit(&self, tx: TaggedTransaction) -> Result<Digest, RejectReason> {
        let digest = tx.digest();
        self.world.lock().expect("world lock").submit(self.node, tx)?;
        Ok(digest)
    }

    fn receipt(&self, digest: &Digest) -> Option<Receipt> {
        self.with(|_, a| a.receipts.get(digest).cloned())
    }

    fn block(&self, height: u64) -> Option<Block> {
        self.with(|_, a| height.checked_sub(1).and_then(|i| a.chain.get(i as usize)).cloned())
    }
}

/// `0x`-prefixed lowercase hex without leading zeros; zero is `0x0`.
pub fn quantity(v: impl Into<U256>) -> String {
    format!("{:#x}", v.into())
}

pub fn parse_quantity(s: &str) -> Result<U256, RpcError> {
    let digits = s
        .strip_prefix("0x")
        .filter(|d| !d.is_empty() && d.len() <= 64 && (d.len() == 1 || !d.starts_with('0')))
        .ok_or_else(|| RpcError::InvalidParams(format!("bad quantity `{s}`")))?;
    U256::from_str_radix(digits, 16).map_err(|_| RpcError::InvalidParams(format!("bad quantity `{s}`")))
}

fn parse_address(v: Option<&Value>) -> Result<Address, RpcError> {
    let s = v.and_then(Value::as_str).ok_or_else(|| RpcError::MalformedAddress("missing".into()))?;
    s.parse().map_err(|_| RpcError::MalformedAddress(s.to_string()))
}

fn parse_digest(v: Option<&Value>) -> Result<Digest, RpcError> {
    let s = v.and_then(Value::as_str).ok_or_else(|| RpcError::InvalidParams("missing hash".into()))?;
    s.parse().map_err(|_| RpcError::InvalidParams(format!("bad hash `{s}`")))
}

pub struct Gateway {
    pub unit: CurrencyUnit,
    pub backend: Arc<dyn ChainBackend>,
}

impl Gateway {
    pub fn new(unit: CurrencyUnit, backend: Arc<dyn ChainBackend>) -> Self {
        Gateway { unit, backend }
    }

    /// Handles one decoded JSON-RPC request body, single or batch.
    pub fn handle_value(&self, body: Value) -> Value {
        match body {
            Value::Array(reqs) if !reqs.is_empty() => Value::Array(reqs.into_iter().map(|r| self.handle_one(r)).collect()),
            other => self.handle_one(other),
        }
    }

    pub fn handle_text(&self, text: &str) -> Value {
        match serde_json::from_str::<Value>(text) {
            Ok(v) => self.handle_value(v),
            Err(e) => error_response(Value::Null, PARSE_ERROR, &format!("parse error: {e}")),
        }
    }

    fn handle_one(&self, req: Value) -> Value {
        let id = req.get("id").cloned().unwrap_or(Value::Null);
        let method = match (req.get("jsonrpc").and_then(Value::as_str), req.get("method").and_then(Value::as_str)) {
            (Some("2.0"), Some(m)) => m.to_string(),
            _ => return error_response(id, INVALID_REQUEST, &RpcError::InvalidRequest.to_string()),
        };
        let params = match req.get("params") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(a)) => a.clone(),
            Some(_) => return error_response(id, INVALID_PARAMS, "params must be an array"),
        };
        match self.dispatch(&method, &params) {
            Ok(result) => json!({ "jsonrpc": "2.0", "id": id, "result": result }),
            Err(e) => error_response(id, e.code(), &e.to_string()),
        }
    }

    fn dispatch(&self, method: &str, params: &[Value]) -> Result<Value, RpcError> {
        let b = &self.backend;
        match method {
            "eth_chainId" => Ok(json!(quantity(b.chain_id()))),
            "net_version" => Ok(json!(b.chain_id().to_string())),
            "eth_blockNumber" => Ok(json!(quantity(b.block_number()))),
            "eth_getBalance" => {
                let who = parse_address(params.first())?;
                Ok(json!(quantity(b.balance(&who, self.unit).0)))
            }
            "eth_getTransactionCount" => {
                let who = parse_address(params.first())?;
                let pending = params.get(1).and_then(Value::as_str) == Some("pending");
                Ok(json!(quantity(b.nonce(&who, pending))))
            }
            "eth_gasPrice" => Ok(json!(quantity(b.base_fee(self.unit)?.0))),
            "eth_maxPriorityFeePerGas" => Ok(json!("0x0")),
            "eth_estimateGas" => Ok(json!(quantity(self.estimate_gas(params.first())?))),
            "eth_sendRawTransaction" => {
                let raw = params.first().and_then(Value::as_str).ok_or_else(|| RpcError::InvalidParams("missing raw tx".into()))?;
                let bytes = raw
                    .strip_prefix("0x")
                    .and_then(|h| hex::decode(h).ok())
                    .ok_or_else(|| RpcError::InvalidParams("raw tx must be 0x hex".into()))?;
                let env = TxEnvelope::decode(&bytes).map_err(|e| RpcError::InvalidParams(format!("undecodable envelope: {e}")))?;
                let base = b.base_fee(self.unit)?;
                let tx = TaggedTransaction::from_envelope(env, self.unit, base);
                let digest = b.submit(tx).map_err(RpcError::MempoolRejected)?;
                Ok(json!(digest.to_hex()))
            }
            "eth_getTransactionReceipt" => {
                let d = parse_digest(params.first())?;
                Ok(match b.receipt(&d) {
                    Some(r) if r.unit == self.unit => receipt_json(&r, b.block(r.block_height).map(|blk| blk.digest())),
                    _ => Value::Null,
                })
            }
            "eth_getBlockByNumber" => {
                let height = match params.first().and_then(Value::as_str) {
                    Some("latest") | Some("pending") | Some("safe") | Some("finalized") | None => b.block_number(),
                    Some("earliest") => 0,
                    Some(q) => parse_quantity(q)?.low_u64(),
                };
                Ok(b.block(height).map(|blk| block_json(&blk)).unwrap_or(Value::Null))
            }
            other => Err(RpcError::MethodNotFound(other.to_string())),
        }
    }

    fn estimate_gas(&self, call: Option<&Value>) -> Result<u64, RpcError> {
        let data = call.and_then(|c| c.get("data").or_else(|| c.get("input"))).and_then(Value::as_str).unwrap_or("0x");
        let bytes = data
            .strip_prefix("0x")
            .and_then(|h| hex::decode(h).ok())
            .ok_or_else(|| RpcError::InvalidParams("data must be 0x hex".into()))?;
        let probe = TaggedTransaction {
            sender: Address::zero(),
            recipient: None,
            nonce: 0,
            unit: self.unit,
            base_fee: Amount::ZERO,
            tip: Amount::ZERO,
            gas_limit: 0,
            transfer_amount: Amount::ZERO,
            kind: if bytes.is_empty() { crate::types::TxKind::Transfer } else { crate::types::TxKind::Payload },
            payload: bytes,
            signature: crate::types::Signature([0; 64]),
        };
        Ok(gas_used_for(&probe))
    }
}

fn error_response(id: Value, code: i64, message: &str) -> Value {
    json!({ "jsonrpc": "2.0", "id": id, "error": { "code": code, "message": message } })
}

fn receipt_json(r: &Receipt, block_hash: Option<Digest>) -> Value {
    json!({
        "transactionHash": r.tx_digest.to_hex(),
        "transactionIndex": quantity(r.index),
        "blockNumber": quantity(r.block_height),
        "blockHash": block_hash.map(|d| d.to_hex()),
        "from": r.sender.to_hex(),
        "to": r.recipient.map(|a| a.to_hex()),
        "gasUsed": quantity(r.gas_used),
        "cumulativeGasUsed": quantity(r.gas_used),
        "effectiveGasPrice": quantity(r.effective_gas_price.0),
        "feeCharged": quantity(r.fee_charged.0),
        "currencyUnit": r.unit.as_str(),
        "status": if r.status == ReceiptStatus::Success { "0x1" } else { "0x0" },
        "logs": [],
        "type": "0x2",
    })
}

fn block_json(b: &Block) -> Value {
    let gas: u64 = b.transactions.iter().map(gas_used_for).sum();
    json!({
        "number": quantity(b.height),
        "hash": b.digest().to_hex(),
        "parentHash": b.parent_hash.to_hex(),
        "stateRoot": b.state_root.to_hex(),
        "miner": validator_address(b.proposer).to_hex(),
        "gasUsed": quantity(gas),
        "rateSnapshotHeight": quantity(b.rate_snapshot_height),
        "transactions": b.transactions.iter().map(|t| t.digest().to_hex()).collect::<Vec<_>>(),
    })
}

async fn rpc_handler(State(gw): State<Arc<Gateway>>, body: String) -> Json<Value> {
    Json(gw.handle_text(&body))
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new().route("/", post(rpc_handler)).with_state(gateway)
}

/// Binds `addr` and serves the gateway until the task is dropped.
pub async fn serve(addr: SocketAddr, gateway: Arc<Gateway>) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(gateway);
    let handle = tokio::spawn(async move {
        let _ = axum::serve(listener, app).await;
    });
    Ok((local, handle))
}

/// Advances the shared world by `sim_ms` simulated milliseconds every `tick`.
pub fn spawn_driver(world: Arc<Mutex<World>>, sim_ms: u64, tick: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(tick);
        loop {
            interval.tick().await;
            let mut w = world.lock().expect("world lock");
            let until = w.now + sim_ms;
            w.run_until(until);
        }
    })
}
