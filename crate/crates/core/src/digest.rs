//! Stable content digests used by replay checks.

use sha2::{Digest, Sha256};

use crate::stereo::StereoPair;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let out = Sha256::digest(bytes);
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest over dimensions and raw pixels of each pair, in order.
pub fn pairs_digest<'a>(pairs: impl IntoIterator<Item = &'a StereoPair>) -> String {
    let mut h = Sha256::new();
    for p in pairs {
        let (w, ht) = p.dimensions();
        h.update(w.to_le_bytes());
        h.update(ht.to_le_bytes());
        h.update(p.left().as_raw());
        h.update(p.right().as_raw());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
