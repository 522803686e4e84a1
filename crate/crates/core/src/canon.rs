//! Canonical JSON encoding: lexicographically sorted keys, no whitespace,
//! shortest round-trip float formatting. Canonical bytes are diffable and
//! hashable, so identical values always produce identical files.

use serde::Serialize;

/// Serialize to canonical JSON. Routing through `serde_json::Value` sorts
/// object keys (the default `Map` is ordered); floats use the shortest
/// representation that round-trips.
pub fn to_canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    serde_json::to_string(&v)
}

/// FNV-1a 64-bit hash; stable across platforms and builds.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn keys_are_sorted() {
        let mut map = HashMap::new();
        map.insert("zeta", 1.5);
        map.insert("alpha", 2.0);
        assert_eq!(
            to_canonical_json(&map).unwrap(),
            r#"{"alpha":2.0,"zeta":1.5}"#
        );
    }

    #[test]
    fn floats_round_trip() {
        // The 17-digit value needs the full f64 precision to re-parse
        // exactly (serde_json's float_roundtrip feature).
        let values: Vec<f64> = vec![0.1, -7.25, 1e-12, 123456789.12345679, -0.0];
        let json = to_canonical_json(&values).unwrap();
        let back: Vec<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(to_canonical_json(&back).unwrap(), json);
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn fnv_reference_values() {
        // Reference vectors for the FNV-1a 64-bit parameters.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }
}
