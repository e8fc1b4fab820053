//! Dense-mode digest lookup: precomputed hashes of every length-`xi`
//! pattern, sorted ascending, resolved by counted binary search.
//!
//! A pattern is a string over {0x00, 0x01}, one byte per position. The same
//! table shape serves both directions: byte values mean X/Z when the tag
//! covers bases, and arrived/missing when it covers an arrival bitmap. The
//! table depends only on the hash key, so it is built once per initial
//! secret and reused across rounds until a rekey replaces that secret.

use crate::channel::Basis;
use crate::crypto::{InitialSecret, TagLength};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableEntry {
    pub digest: u128,
    pub pattern: u32,
}

#[derive(Debug, Clone)]
pub struct LookupTable {
    entries: Vec<TableEntry>,
    xi: u8,
    tag: TagLength,
}

/// Hash all 2^xi patterns under `secret`'s hash key and sort ascending by
/// digest (as unsigned integers).
pub fn build_lookup_table(secret: &InitialSecret, xi: u8) -> LookupTable {
    assert!((2..=20).contains(&xi), "group size must be in 2..=20");
    let count = 1u32 << xi;
    let mut entries: Vec<TableEntry> = (0..count)
        .map(|pattern| TableEntry {
            digest: secret.digest(&pattern_bytes(pattern, xi)),
            pattern,
        })
        .collect();
    entries.sort_by_key(|e| e.digest);
    LookupTable {
        entries,
        xi,
        tag: secret.tag_length(),
    }
}

impl LookupTable {
    pub fn xi(&self) -> u8 {
        self.xi
    }

    pub fn tag_length(&self) -> TagLength {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    /// Digest payload footprint: 2^xi entries of tag_bits/8 bytes each.
    pub fn payload_bytes(&self) -> u64 {
        (1u64 << self.xi) * self.tag.bytes() as u64
    }

    pub fn search(&self, digest: u128) -> (Option<usize>, u32) {
        binary_search(&self.entries, digest)
    }

    pub fn bases_at(&self, index: usize) -> Vec<Basis> {
        pattern_bases(self.entries[index].pattern, self.xi)
    }

    /// Arrival flags for a response-bitmap table: byte 0x00 means arrived.
    pub fn flags_at(&self, index: usize) -> Vec<bool> {
        let pattern = self.entries[index].pattern;
        (0..self.xi)
            .map(|j| (pattern >> (self.xi - 1 - j)) & 1 == 0)
            .collect()
    }
}

/// Halving search over a digest-sorted slice, counting three-way
/// comparisons. For 2^xi entries the count never exceeds xi + 1, with the
/// bound attained when an extremal entry is the target.
pub fn binary_search(entries: &[TableEntry], digest: u128) -> (Option<usize>, u32) {
    let mut comparisons = 0u32;
    let mut lo = 0isize;
    let mut hi = entries.len() as isize - 1;
    while lo <= hi {
        let mid = lo + (hi - lo) / 2;
        comparisons += 1;
        match entries[mid as usize].digest.cmp(&digest) {
            std::cmp::Ordering::Equal => return (Some(mid as usize), comparisons),
            std::cmp::Ordering::Less => lo = mid + 1,
            std::cmp::Ordering::Greater => hi = mid - 1,
        }
    }
    (None, comparisons)
}

/// Frozen pattern encoding: position `j` carries byte `(pattern >> (xi-1-j)) & 1`,
/// i.e. the pattern's bits read most-significant-first.
pub fn pattern_bytes(pattern: u32, xi: u8) -> Vec<u8> {
    (0..xi)
        .map(|j| ((pattern >> (xi - 1 - j)) & 1) as u8)
        .collect()
}

pub fn pattern_bases(pattern: u32, xi: u8) -> Vec<Basis> {
    (0..xi)
        .map(|j| {
            if (pattern >> (xi - 1 - j)) & 1 == 0 {
                Basis::X
            } else {
                Basis::Z
            }
        })
        .collect()
}

pub fn bases_pattern(bases: &[Basis]) -> u32 {
    bases
        .iter()
        .fold(0u32, |acc, b| (acc << 1) | b.encoded_byte() as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{split_secret, Direction};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn secret(tag: TagLength, seed: u64) -> InitialSecret {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut raw = vec![0u8; 32 + tag.bytes()];
        loop {
            rng.fill(&mut raw[..]);
            if let Ok(s) = split_secret(&raw, tag, Direction::AliceToBob) {
                return s;
            }
        }
    }

    #[test]
    fn payload_bytes_follow_closed_form() {
        let s = secret(TagLength::Bits64, 1);
        assert_eq!(build_lookup_table(&s, 8).payload_bytes(), 2048);
        assert_eq!(build_lookup_table(&s, 2).payload_bytes(), 32);
        assert_eq!(build_lookup_table(&s, 12).payload_bytes(), 32768);
        assert_eq!(build_lookup_table(&s, 3).payload_bytes(), 64);
    }

    #[test]
    fn table_is_sorted_and_complete() {
        let s = secret(TagLength::Bits64, 2);
        let table = build_lookup_table(&s, 6);
        assert_eq!(table.len(), 64);
        for w in table.entries().windows(2) {
            assert!(w[0].digest <= w[1].digest);
        }
        let mut patterns: Vec<u32> = table.entries().iter().map(|e| e.pattern).collect();
        patterns.sort_unstable();
        assert_eq!(patterns, (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn every_entry_found_within_comparison_bound() {
        let s = secret(TagLength::Bits64, 3);
        let xi = 8u8;
        let table = build_lookup_table(&s, xi);
        let mut max_comps = 0;
        for (i, e) in table.entries().iter().enumerate() {
            let (hit, comps) = table.search(e.digest);
            assert_eq!(hit, Some(i));
            assert!(comps <= xi as u32 + 1, "entry {i} took {comps} comparisons");
            max_comps = max_comps.max(comps);
        }
        // The extremal entries push the search to its exact worst case.
        assert_eq!(max_comps, xi as u32 + 1);
    }

    #[test]
    fn missing_digest_is_a_miss() {
        let s = secret(TagLength::Bits64, 4);
        let table = build_lookup_table(&s, 4);
        let mut probe = 0u128;
        while table.entries().iter().any(|e| e.digest == probe) {
            probe += 1;
        }
        let (hit, comps) = table.search(probe);
        assert_eq!(hit, None);
        assert!(comps <= 5);
    }

    #[test]
    fn single_entry_slice_takes_one_comparison() {
        let entries = [TableEntry {
            digest: 42,
            pattern: 0,
        }];
        assert_eq!(binary_search(&entries, 42), (Some(0), 1));
        assert_eq!(binary_search(&entries, 7).1, 1);
    }

    #[test]
    fn pattern_round_trip() {
        for pattern in 0..16u32 {
            let bases = pattern_bases(pattern, 4);
            assert_eq!(bases_pattern(&bases), pattern);
            let bytes = pattern_bytes(pattern, 4);
            assert_eq!(
                bytes,
                bases.iter().map(|b| b.encoded_byte()).collect::<Vec<_>>()
            );
        }
    }
}
