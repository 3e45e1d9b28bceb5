//! Canonical configuration hashing for artifact headers and reports.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// First 8 bytes (big-endian) of the SHA-256 digest of the value's JSON
/// serialization. Struct fields serialize in declaration order, so the
/// result is stable across runs and platforms for the same configuration.
pub fn canonical_hash<T: Serialize>(value: &T) -> u64 {
    let json = serde_json::to_string(value).expect("config types serialize infallibly");
    let digest = Sha256::digest(json.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_and_discriminating() {
        #[derive(Serialize)]
        struct Demo {
            a: u32,
            b: &'static str,
        }
        let h1 = canonical_hash(&Demo { a: 1, b: "x" });
        let h2 = canonical_hash(&Demo { a: 1, b: "x" });
        let h3 = canonical_hash(&Demo { a: 2, b: "x" });
        assert_eq!(h1, h2);
        assert_ne!(h1, h3);
        // Pin against silent serialization changes (SHA-256 of `{"k":7}`).
        assert_eq!(canonical_hash(&serde_json::json!({"k": 7})), 0x6b7e_01aa_413c_b45e);
    }
}
