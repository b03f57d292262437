//! Seeded partially synchronous message delivery.
//!
//! Before GST a message takes a uniform delay in `[min_delay, pre_gst_max_delay]`.
//! From GST on, every message in flight is delivered by `max(sent, gst) + delta`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crypto::sha256;
use crate::types::{Digest, ValidatorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Simulated milliseconds; `None` means the network never stabilizes.
    pub gst_ms: Option<u64>,
    pub delta_ms: u64,
    #[serde(default = "default_min_delay")]
    pub min_delay_ms: u64,
    #[serde(default = "default_pre_gst_max")]
    pub pre_gst_max_delay_ms: u64,
}

fn default_min_delay() -> u64 {
    1
}

fn default_pre_gst_max() -> u64 {
    20_000
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams { gst_ms: Some(0), delta_ms: 200, min_delay_ms: 1, pre_gst_max_delay_ms: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope<M> {
    pub from: ValidatorId,
    pub to: ValidatorId,
    pub sent_at: u64,
    pub deliver_at: u64,
    pub msg: M,
}

#[derive(Debug)]
struct Pending<M> {
    key: (u64, Digest, u64),
    env: Envelope<M>,
}

impl<M> PartialEq for Pending<M> {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key
    }
}
impl<M> Eq for Pending<M> {}
impl<M> PartialOrd for Pending<M> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<M> Ord for Pending<M> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.key.cmp(&o.key)
    }
}

/// In-flight messages ordered by (delivery time, tiebreak digest, send sequence).
#[derive(Debug)]
pub struct SimNetwork<M> {
    params: NetworkParams,
    rng: ChaCha8Rng,
    pending: BinaryHeap<Reverse<Pending<M>>>,
    seq: u64,
    pub delivered: u64,
}

impl<M> SimNetwork<M> {
    pub fn new(params: NetworkParams, seed: u64) -> Self {
        SimNetwork { params, rng: ChaCha8Rng::seed_from_u64(seed), pending: BinaryHeap::new(), seq: 0, delivered: 0 }
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    fn delay(&mut self, now: u64) -> u64 {
        let p = self.params;
        let stable = p.gst_ms.is_some_and(|g| now >= g);
        let hi = if stable { p.delta_ms } else { p.pre_gst_max_delay_ms };
        let lo = p.min_delay_ms.min(hi);
        let mut at = now + self.rng.gen_range(lo..=hi);
        if let Some(g) = p.gst_ms {
            at = at.min(now.max(g) + p.delta_ms);
        }
        at
    }

    /// Queues `msg`; `tag` feeds the deterministic tiebreak between equal times.
    pub fn send(&mut self, from: ValidatorId, to: ValidatorId, msg: M, tag: &[u8], now: u64) {
        let deliver_at = self.delay(now);
        let seq = self.seq;
        self.seq += 1;
        let tiebreak = sha256(&[tag, &from.0.to_be_bytes(), &to.0.to_be_bytes()]);
        self.pending.push(Reverse(Pending {
            key: (deliver_at, tiebreak, seq),
            env: Envelope { from, to, sent_at: now, deliver_at, msg },
        }));
    }

    pub fn next_delivery_time(&self) -> Option<u64> {
        self.pending.peek().map(|Reverse(p)| p.key.0)
    }

    /// Removes the next message due at or before `now`.
    pub fn pop_due(&mut self, now: u64) -> Option<Envelope<M>> {
        if self.next_delivery_time()? > now {
            return None;
        }
        self.delivered += 1;
        self.pending.pop().map(|Reverse(p)| p.env)
    }

    pub fn in_flight(&self) -> usize {
        self.pending.len()
    }
}
