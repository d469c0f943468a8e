//! Content digests shared by article ids, template ids, bundle ids and cache keys.
//!
//! Every id in the system is SHA-256 over a canonical string, truncated to the
//! first 16 bytes and rendered as 32 lowercase hex characters.

use sha2::{Digest, Sha256};

/// Number of hex characters in every id produced by [`digest128`].
pub const ID_HEX_LEN: usize = 32;

/// SHA-256 truncated to 128 bits, lowercase hex.
pub fn digest128(bytes: impl AsRef<[u8]>) -> String {
    let full = Sha256::digest(bytes.as_ref());
    hex::encode(&full[..16])
}

/// Digest over a list of fields joined by `\n`.
pub fn digest_fields<S: AsRef<str>>(fields: &[S]) -> String {
    let joined = fields
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join("\n");
    digest128(joined.as_bytes())
}
