//! Domain-separated SHA-256 helpers shared by the signature, encryption and
//! beacon code.

use sha2::{Digest, Sha256};

pub const DOMAIN: &[u8] = b"SLS-v1";

/// `SHA-256(DOMAIN || tag || len(part) || part || ...)` with 8-byte
/// big-endian lengths. An empty tag is the message hash `H` itself.
pub fn tagged_hash(tag: &str, parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    if !tag.is_empty() {
        h.update(b"/");
        h.update(tag.as_bytes());
    }
    for part in parts {
        h.update((part.len() as u64).to_be_bytes());
        h.update(part);
    }
    h.finalize().into()
}

/// `H(m || r)`: the digest that gets signed.
pub fn message_digest(message: &[u8], beacon_value: &[u8; 32]) -> [u8; 32] {
    tagged_hash("", &[message, beacon_value])
}
