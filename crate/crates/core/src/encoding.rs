//! Canonical binary encoding. Fields are written in declaration order;
//! integers are big-endian; variable-length data carries a length prefix.
//! The byte layout is documented in `docs/encoding.md`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::types::{
    Address, Amount, Block, CurrencyUnit, Digest, Signature, TaggedTransaction, TxEnvelope, TxKind,
    ValidatorId,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("unexpected end of input")]
    UnexpectedEof,
    #[error("invalid tag {tag} for {what}")]
    InvalidTag { what: &'static str, tag: u8 },
    #[error("invalid currency unit")]
    InvalidUnit,
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("length {0} exceeds remaining input")]
    BadLength(usize),
    #[error("non-canonical encoding: {0}")]
    NonCanonical(&'static str),
}

pub trait Encode {
    fn encode_to(&self, out: &mut Vec<u8>);

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_to(&mut out);
        out
    }
}

pub trait Decode: Sized {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError>;

    /// Decodes a complete value; leftover bytes are an error.
    fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let v = Self::decode_from(&mut r)?;
        if r.remaining() != 0 {
            return Err(DecodeError::TrailingBytes(r.remaining()));
        }
        Ok(v)
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.remaining() < n {
            return Err(DecodeError::UnexpectedEof);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    /// Reads a u32 element count and checks it against the remaining input,
    /// assuming each element occupies at least `min_elem` bytes.
    pub fn count(&mut self, min_elem: usize) -> Result<usize, DecodeError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_elem.max(1)) > self.remaining() {
            return Err(DecodeError::BadLength(n));
        }
        Ok(n)
    }
}

pub fn put_u8(out: &mut Vec<u8>, v: u8) {
    out.push(v);
}

pub fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(b);
}

pub fn get_bytes(r: &mut Reader<'_>) -> Result<Vec<u8>, DecodeError> {
    let n = r.count(1)?;
    Ok(r.take(n)?.to_vec())
}

impl Encode for u8 {
    fn encode_to(&self, out: &mut Vec<u8>) {
        put_u8(out, *self)
    }
}

impl Decode for u8 {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.u8()
    }
}

impl Encode for u32 {
    fn encode_to(&self, out: &mut Vec<u8>) {
        put_u32(out, *self)
    }
}

impl Decode for u32 {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.u32()
    }
}

impl Encode for u64 {
    fn encode_to(&self, out: &mut Vec<u8>) {
        put_u64(out, *self)
    }
}

impl Decode for u64 {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.u64()
    }
}

impl Encode for bool {
    fn encode_to(&self, out: &mut Vec<u8>) {
        put_u8(out, *self as u8)
    }
}

impl Decode for bool {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            tag => Err(DecodeError::InvalidTag { what: "bool", tag }),
        }
    }
}

impl Encode for Vec<u8> {
    fn encode_to(&self, out: &mut Vec<u8>) {
        put_bytes(out, self)
    }
}

impl Decode for Vec<u8> {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        get_bytes(r)
    }
}

impl<T: Encode> Encode for Option<T> {
    fn encode_to(&self, out: &mut Vec<u8>) {
        match self {
            None => put_u8(out, 0),
            Some(v) => {
                put_u8(out, 1);
                v.encode_to(out);
            }
        }
    }
}

impl<T: Decode> Decode for Option<T> {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(None),
            1 => Ok(Some(T::decode_from(r)?)),
            tag => Err(DecodeError::InvalidTag { what: "option", tag }),
        }
    }
}

/// Encodes a sequence as a u32 count followed by the items.
pub fn put_seq<'a, T: Encode + 'a>(out: &mut Vec<u8>, items: impl ExactSizeIterator<Item = &'a T>) {
    put_u32(out, items.len() as u32);
    for it in items {
        it.encode_to(out);
    }
}

pub fn get_seq<T: Decode>(r: &mut Reader<'_>) -> Result<Vec<T>, DecodeError> {
    let n = r.count(1)?;
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        v.push(T::decode_from(r)?);
    }
    Ok(v)
}

impl<T: Encode + Ord> Encode for BTreeSet<T> {
    fn encode_to(&self, out: &mut Vec<u8>) {
        put_seq(out, self.iter())
    }
}

impl<T: Decode + Ord> Decode for BTreeSet<T> {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let items: Vec<T> = get_seq(r)?;
        // canonical form is strictly ascending
        if items.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DecodeError::NonCanonical("set not strictly ascending"));
        }
        Ok(items.into_iter().collect())
    }
}

impl<K: Encode + Ord, V: Encode> Encode for BTreeMap<K, V> {
    fn encode_to(&self, out: &mut Vec<u8>) {
        put_u32(out, self.len() as u32);
        for (k, v) in self {
            k.encode_to(out);
            v.encode_to(out);
        }
    }
}

impl<K: Decode + Ord, V: Decode> Decode for BTreeMap<K, V> {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let n = r.count(2)?;
        let mut m = BTreeMap::new();
        for _ in 0..n {
            let k = K::decode_from(r)?;
            let v = V::decode_from(r)?;
            if let Some((last, _)) = m.last_key_value() {
                if *last >= k {
                    return Err(DecodeError::NonCanonical("map keys not strictly ascending"));
                }
            }
            m.insert(k, v);
        }
        Ok(m)
    }
}

impl Encode for CurrencyUnit {
    fn encode_to(&self, out: &mut Vec<u8>) {
        let s = self.as_str().as_bytes();
        put_u8(out, s.len() as u8);
        out.extend_from_slice(s);
    }
}

impl Decode for CurrencyUnit {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let n = r.u8()? as usize;
        let raw = r.take(n)?;
        let s = std::str::from_utf8(raw).map_err(|_| DecodeError::InvalidUnit)?;
        CurrencyUnit::new(s).map_err(|_| DecodeError::InvalidUnit)
    }
}

impl Encode for Amount {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_be_bytes());
    }
}

impl Decode for Amount {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Amount::from_be_bytes(&r.array()?))
    }
}

macro_rules! raw_codec {
    ($($t:ty),*) => {$(
        impl Encode for $t {
            fn encode_to(&self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.0);
            }
        }

        impl Decode for $t {
            fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
                Ok(Self(r.array()?))
            }
        }
    )*};
}

raw_codec!(Address, Digest, Signature);

impl Encode for ValidatorId {
    fn encode_to(&self, out: &mut Vec<u8>) {
        put_u32(out, self.0)
    }
}

impl Decode for ValidatorId {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(ValidatorId(r.u32()?))
    }
}

impl Encode for TxKind {
    fn encode_to(&self, out: &mut Vec<u8>) {
        put_u8(
            out,
            match self {
                TxKind::Transfer => 0,
                TxKind::Payload => 1,
                TxKind::Proposal => 2,
                TxKind::Vote => 3,
            },
        )
    }
}

impl Decode for TxKind {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(TxKind::Transfer),
            1 => Ok(TxKind::Payload),
            2 => Ok(TxKind::Proposal),
            3 => Ok(TxKind::Vote),
            tag => Err(DecodeError::InvalidTag { what: "tx kind", tag }),
        }
    }
}

/// Bytes a wallet signs: every envelope field except the signature.
pub fn envelope_signing_bytes(env: &TxEnvelope) -> Vec<u8> {
    let mut out = Vec::new();
    env.sender.encode_to(&mut out);
    env.recipient.encode_to(&mut out);
    put_u64(&mut out, env.nonce);
    env.tip.encode_to(&mut out);
    put_u64(&mut out, env.gas_limit);
    env.transfer_amount.encode_to(&mut out);
    put_bytes(&mut out, &env.payload);
    env.kind.encode_to(&mut out);
    out
}

impl Encode for TxEnvelope {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&envelope_signing_bytes(self));
        self.signature.encode_to(out);
    }
}

impl Decode for TxEnvelope {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(TxEnvelope {
            sender: Decode::decode_from(r)?,
            recipient: Decode::decode_from(r)?,
            nonce: r.u64()?,
            tip: Decode::decode_from(r)?,
            gas_limit: r.u64()?,
            transfer_amount: Decode::decode_from(r)?,
            payload: get_bytes(r)?,
            kind: Decode::decode_from(r)?,
            signature: Decode::decode_from(r)?,
        })
    }
}

impl Encode for TaggedTransaction {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.sender.encode_to(out);
        self.recipient.encode_to(out);
        put_u64(out, self.nonce);
        self.unit.encode_to(out);
        self.base_fee.encode_to(out);
        self.tip.encode_to(out);
        put_u64(out, self.gas_limit);
        self.transfer_amount.encode_to(out);
        put_bytes(out, &self.payload);
        self.kind.encode_to(out);
        self.signature.encode_to(out);
    }
}

impl Decode for TaggedTransaction {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(TaggedTransaction {
            sender: Decode::decode_from(r)?,
            recipient: Decode::decode_from(r)?,
            nonce: r.u64()?,
            unit: Decode::decode_from(r)?,
            base_fee: Decode::decode_from(r)?,
            tip: Decode::decode_from(r)?,
            gas_limit: r.u64()?,
            transfer_amount: Decode::decode_from(r)?,
            payload: get_bytes(r)?,
            kind: Decode::decode_from(r)?,
            signature: Decode::decode_from(r)?,
        })
    }
}

impl Encode for Block {
    fn encode_to(&self, out: &mut Vec<u8>) {
        put_u64(out, self.height);
        self.proposer.encode_to(out);
        self.parent_hash.encode_to(out);
        put_seq(out, self.transactions.iter());
        put_u64(out, self.rate_snapshot_height);
        self.state_root.encode_to(out);
    }
}

impl Decode for Block {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Block {
            height: r.u64()?,
            proposer: Decode::decode_from(r)?,
            parent_hash: Decode::decode_from(r)?,
            transactions: get_seq(r)?,
            rate_snapshot_height: r.u64()?,
            state_root: Decode::decode_from(r)?,
        })
    }
}
