//! Digests and the modeled signature scheme.
//!
//! Signatures are keyed digests, not elliptic-curve signatures. A 64-byte
//! authenticator is `auth || tag` where `auth = H("auth" || secret || msg)`
//! and `tag = H("tag" || signer || msg || auth)`. Anyone can check that the
//! tag binds the authenticator to the signer and message ("well-formed");
//! only the holder of the secret can produce `auth`.

use sha2::{Digest as _, Sha256};

use crate::encoding::{envelope_signing_bytes, Encode};
use crate::types::{Address, Block, Digest, Signature, TaggedTransaction, TxEnvelope, ValidatorId};

pub fn sha256(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// Values with a canonical digest: SHA-256 of their canonical encoding.
pub trait CanonicalDigest: Encode {
    fn digest(&self) -> Digest {
        sha256(&[&self.encode()])
    }
}

impl CanonicalDigest for TaggedTransaction {}
impl CanonicalDigest for Block {}
impl CanonicalDigest for TxEnvelope {}

#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey([u8; 32]);

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SecretKey({})", self.address())
    }
}

impl SecretKey {
    pub fn from_bytes(b: [u8; 32]) -> Self {
        SecretKey(b)
    }

    /// Deterministic key for a human-readable account name.
    pub fn from_name(name: &str) -> Self {
        SecretKey(sha256(&[b"account:", name.as_bytes()]).0)
    }

    pub fn for_validator(id: ValidatorId) -> Self {
        SecretKey(sha256(&[b"validator:", &id.0.to_be_bytes()]).0)
    }

    pub fn address(&self) -> Address {
        let d = sha256(&[b"addr", &self.0]);
        let mut a = [0u8; 20];
        a.copy_from_slice(&d.0[12..]);
        Address(a)
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        let auth = sha256(&[b"auth", &self.0, msg]);
        let tag = sha256(&[b"tag", &self.address().0, msg, &auth.0]);
        let mut sig = [0u8; 64];
        sig[..32].copy_from_slice(&auth.0);
        sig[32..].copy_from_slice(&tag.0);
        Signature(sig)
    }
}

pub fn validator_address(id: ValidatorId) -> Address {
    SecretKey::for_validator(id).address()
}

pub fn signature_well_formed(sig: &Signature, signer: &Address, msg: &[u8]) -> bool {
    let tag = sha256(&[b"tag", &signer.0, msg, &sig.0[..32]]);
    tag.0[..] == sig.0[32..]
}

impl TxEnvelope {
    pub fn sign(mut self, key: &SecretKey) -> Self {
        self.sender = key.address();
        self.signature = key.sign(&envelope_signing_bytes(&self));
        self
    }

    pub fn signature_well_formed(&self) -> bool {
        signature_well_formed(&self.signature, &self.sender, &envelope_signing_bytes(self))
    }
}

impl TaggedTransaction {
    /// The authenticator covers the envelope only; unit and base fee are added by the endpoint.
    pub fn signature_well_formed(&self) -> bool {
        self.envelope().signature_well_formed()
    }
}
