//! Post-processing: QBER estimation, idealized reconciliation accounting,
//! Toeplitz privacy amplification, and the rekey ledger.
//!
//! Reconciliation is simulator-omniscient: Bob's key is set equal to
//! Alice's while the books record Shannon-limit leakage times an
//! inefficiency factor. The novelty under test lives upstream of error
//! correction; what matters here is that the key-length ledger balances
//! exactly: raw = final + disclosed + leakage + security margin.

use crate::adversary::Eve;
use crate::crypto::{split_secret, CryptoError, Direction, TagLength};
use crate::protocol::{
    build_dense_tables, run_round, DenseTables, LinkKeys, ProtocolError, ProtocolVariant,
    RoundConfig, RoundOutcome,
};
use crate::rng::RoundStreams;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PostProcError {
    #[error("key material is empty")]
    EmptyKey,
    #[error("argument {value} outside domain {domain}")]
    DomainError { value: f64, domain: &'static str },
    #[error("final key too short to refresh secrets: need {needed} bits, have {have}")]
    InsufficientKey { needed: usize, have: usize },
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Binary entropy h2(q) in bits, with h2(0) = h2(1) = 0.
pub fn binary_entropy(q: f64) -> Result<f64, PostProcError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(PostProcError::DomainError {
            value: q,
            domain: "[0, 1]",
        });
    }
    if q == 0.0 || q == 1.0 {
        return Ok(0.0);
    }
    Ok(-q * q.log2() - (1.0 - q) * (1.0 - q).log2())
}

#[derive(Debug, Clone)]
pub struct QberEstimate {
    pub q_hat: f64,
    pub disclosed_indices: Vec<usize>,
    pub sample_fraction: f64,
}

/// Disclose a uniform random sample of the aligned keys and estimate the
/// error rate from it. Disclosed positions must not reach the final key;
/// [`remove_disclosed`] strips them.
pub fn estimate_qber<R: Rng>(
    alice_key: &[bool],
    bob_key: &[bool],
    sample_fraction: f64,
    rng: &mut R,
) -> Result<QberEstimate, PostProcError> {
    if alice_key.is_empty() || alice_key.len() != bob_key.len() {
        return Err(PostProcError::EmptyKey);
    }
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(PostProcError::DomainError {
            value: sample_fraction,
            domain: "(0, 1]",
        });
    }
    let n = alice_key.len();
    let k = ((sample_fraction * n as f64).floor() as usize).clamp(1, n);
    let mut disclosed = rand::seq::index::sample(rng, n, k).into_vec();
    disclosed.sort_unstable();
    let mismatches = disclosed
        .iter()
        .filter(|&&i| alice_key[i] != bob_key[i])
        .count();
    Ok(QberEstimate {
        q_hat: mismatches as f64 / k as f64,
        disclosed_indices: disclosed,
        sample_fraction,
    })
}

/// Drop the disclosed positions from a key. `disclosed` must be sorted.
pub fn remove_disclosed(key: &[bool], disclosed: &[usize]) -> Vec<bool> {
    let mut out = Vec::with_capacity(key.len() - disclosed.len());
    let mut d = disclosed.iter().peekable();
    for (i, &bit) in key.iter().enumerate() {
        if d.peek() == Some(&&i) {
            d.next();
        } else {
            out.push(bit);
        }
    }
    out
}

/// Omniscient reconciliation: Bob's key becomes Alice's, and the cost that a
/// real error-correction pass would leak is charged to the ledger as
/// `ceil(f * n * h2(q_hat))` bits.
pub fn reconcile(
    alice_key: &[bool],
    bob_key: &[bool],
    q_hat: f64,
    f: f64,
) -> Result<(Vec<bool>, u64), PostProcError> {
    if alice_key.len() != bob_key.len() {
        return Err(PostProcError::EmptyKey);
    }
    debug_assert!(f >= 1.0, "reconciliation inefficiency is at least 1");
    let leakage = (f * alice_key.len() as f64 * binary_entropy(q_hat)?).ceil() as u64;
    Ok((alice_key.to_vec(), leakage))
}

/// Compress `key` with a seeded binary Toeplitz matrix.
///
/// Output length is `max(0, n - leakage_bits - 2 * epsilon_exponent)`; the
/// matrix's diagonal parameter vector (m + n - 1 bits) is drawn from the
/// public seed, making the map deterministic and linear over GF(2).
pub fn privacy_amplify(
    key: &[bool],
    leakage_bits: u64,
    epsilon_exponent: u32,
    seed: u64,
) -> Vec<bool> {
    let n = key.len();
    let m = n
        .saturating_sub(leakage_bits as usize)
        .saturating_sub(2 * epsilon_exponent as usize);
    if m == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let diag: Vec<bool> = (0..m + n - 1).map(|_| rng.random::<bool>()).collect();
    toeplitz_hash(&diag, key, m)
}

/// Multiply `key` by the m-by-n Toeplitz matrix `T[i][j] = diag[n - 1 + i - j]`.
///
/// `diag` holds the first row right-to-left followed by the first column
/// (total m + n - 1 bits). Words are packed so each output bit costs one
/// sliding AND-XOR pass over the key.
pub fn toeplitz_hash(diag: &[bool], key: &[bool], m: usize) -> Vec<bool> {
    let n = key.len();
    assert_eq!(
        diag.len(),
        m + n - 1,
        "diagonal vector must hold m + n - 1 bits"
    );
    if n == 0 || m == 0 {
        return Vec::new();
    }
    // out[i] = XOR_j diag[n - 1 + i - j] & key[j]
    //        = XOR_j rev[(m - 1 - i) + j] & key[j], with rev the reversed diag;
    // each output bit reads a contiguous window of rev.
    let rev: Vec<bool> = diag.iter().rev().copied().collect();
    let key_words = pack_words(key);
    let rev_words = pack_words(&rev);
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let offset = m - 1 - i;
        let mut acc = 0u64;
        for (w, &kw) in key_words.iter().enumerate() {
            acc ^= kw & window(&rev_words, rev.len(), offset + 64 * w);
        }
        out.push(acc.count_ones() % 2 == 1);
    }
    out
}

fn pack_words(bits: &[bool]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            words[i / 64] |= 1u64 << (i % 64);
        }
    }
    words
}

/// 64-bit window of a packed bit vector starting at bit `start` (bits past
/// the end read as zero).
fn window(words: &[u64], len: usize, start: usize) -> u64 {
    if start >= len {
        return 0;
    }
    let w = start / 64;
    let r = start % 64;
    let lo = words[w] >> r;
    if r == 0 || w + 1 >= words.len() {
        lo
    } else {
        lo | (words[w + 1] << (64 - r))
    }
}

/// Both directions' working keys plus the bookkeeping that survives between
/// rounds: dense tables are cached per secret, budgets and counters persist
/// until a rekey replaces everything.
pub struct KeyLedger {
    pub alice_to_bob: LinkKeys,
    pub bob_to_alice: LinkKeys,
    pub tag: TagLength,
    pub l_v: u8,
    pub iv: u64,
    pub rounds_completed: u64,
    dense_tables: Option<(u8, DenseTables)>,
    pub tables_built: u32,
    budget_limit: Option<u128>,
}

impl KeyLedger {
    pub fn new(
        a2b_raw: &[u8],
        b2a_raw: &[u8],
        tag: TagLength,
        iv: u64,
        l_v: u8,
    ) -> Result<Self, PostProcError> {
        let a2b = split_secret(a2b_raw, tag, Direction::AliceToBob)?;
        let b2a = split_secret(b2a_raw, tag, Direction::BobToAlice)?;
        Ok(KeyLedger {
            alice_to_bob: LinkKeys::new(a2b, iv, l_v),
            bob_to_alice: LinkKeys::new(b2a, iv.wrapping_add(1), l_v),
            tag,
            l_v,
            iv,
            rounds_completed: 0,
            dense_tables: None,
            tables_built: 0,
            budget_limit: None,
        })
    }

    /// Cap both budgets (testing knob for exhaustion scenarios).
    pub fn set_budget_limit(&mut self, limit: u128) {
        self.budget_limit = Some(limit);
        self.alice_to_bob.budget = crate::crypto::TagBudget::with_limit(limit);
        self.bob_to_alice.budget = crate::crypto::TagBudget::with_limit(limit);
    }

    /// Dense lookup tables for the current secrets, built on first use and
    /// then reused until the secrets change.
    pub fn dense_tables(&mut self, xi: u8) -> &DenseTables {
        self.ensure_dense_tables(xi);
        &self.dense_tables.as_ref().unwrap().1
    }

    fn ensure_dense_tables(&mut self, xi: u8) {
        let stale = match &self.dense_tables {
            Some((cached_xi, _)) => *cached_xi != xi,
            None => true,
        };
        if stale {
            let tables =
                build_dense_tables(&self.alice_to_bob.secret, &self.bob_to_alice.secret, xi);
            self.dense_tables = Some((xi, tables));
            self.tables_built += 1;
        }
    }

    /// Bits a rekey consumes: one l_k secret per direction.
    pub fn rekey_cost_bits(&self) -> usize {
        2 * (256 + self.tag.bits() as usize)
    }
}

/// Run one round against the ledger's current secrets, building or reusing
/// the dense lookup tables as the variant requires.
pub fn run_ledger_round(
    ledger: &mut KeyLedger,
    cfg: &RoundConfig,
    variant: &ProtocolVariant,
    eve: Option<&mut Eve>,
    streams: &mut RoundStreams,
) -> Result<RoundOutcome, ProtocolError> {
    if let ProtocolVariant::Dense { xi, .. } = variant {
        ledger.ensure_dense_tables(*xi);
    }
    let KeyLedger {
        alice_to_bob,
        bob_to_alice,
        dense_tables,
        ..
    } = ledger;
    let tables = dense_tables.as_ref().map(|(_, t)| t);
    run_round(
        cfg,
        variant,
        Some((alice_to_bob, bob_to_alice)),
        tables,
        eve,
        streams,
    )
}

/// Install fresh secrets from the front of `final_key`, reset budgets and
/// nonce streams under the publicly agreed `iv_next`, and hand the remainder
/// to the consumer.
pub fn rekey(
    ledger: &mut KeyLedger,
    final_key: &[bool],
    iv_next: u64,
) -> Result<Vec<bool>, PostProcError> {
    let l_k_bytes = 32 + ledger.tag.bytes();
    let needed = ledger.rekey_cost_bits();
    if final_key.len() < needed {
        return Err(PostProcError::InsufficientKey {
            needed,
            have: final_key.len(),
        });
    }
    let a2b_raw = pack_bits(&final_key[..l_k_bytes * 8]);
    let b2a_raw = pack_bits(&final_key[l_k_bytes * 8..needed]);
    let a2b = split_secret(&a2b_raw, ledger.tag, Direction::AliceToBob)?;
    let b2a = split_secret(&b2a_raw, ledger.tag, Direction::BobToAlice)?;
    ledger.alice_to_bob = LinkKeys::new(a2b, iv_next, ledger.l_v);
    ledger.bob_to_alice = LinkKeys::new(b2a, iv_next.wrapping_add(1), ledger.l_v);
    if let Some(limit) = ledger.budget_limit {
        ledger.alice_to_bob.budget = crate::crypto::TagBudget::with_limit(limit);
        ledger.bob_to_alice.budget = crate::crypto::TagBudget::with_limit(limit);
    }
    ledger.iv = iv_next;
    ledger.dense_tables = None;
    ledger.rounds_completed += 1;
    Ok(final_key[needed..].to_vec())
}

/// Pack bits into bytes, first bit into the most significant position.
pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (7 - i % 8);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn entropy_endpoints_and_midpoint() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn entropy_near_half_reference_value() {
        // Independently evaluated at 50-digit precision: h2(0.11) = 0.4999159582.
        assert!((binary_entropy(0.11).unwrap() - 0.4999159582).abs() < 1e-5);
    }

    #[test]
    fn identical_keys_estimate_zero() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let key = vec![true; 1000];
        let est = estimate_qber(&key, &key, 0.1, &mut rng).unwrap();
        assert_eq!(est.q_hat, 0.0);
        assert_eq!(est.disclosed_indices.len(), 100);
    }

    #[test]
    fn injected_error_rate_is_recovered() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let n = 100_000;
        let alice: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let bob: Vec<bool> = alice
            .iter()
            .map(|&b| b ^ (rng.random::<f64>() < 0.05))
            .collect();
        let est = estimate_qber(&alice, &bob, 0.1, &mut rng).unwrap();
        assert!((est.q_hat - 0.05).abs() < 0.007, "q_hat = {}", est.q_hat);
    }

    #[test]
    fn full_sample_empties_downstream_key() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let key = vec![false; 64];
        let est = estimate_qber(&key, &key, 1.0, &mut rng).unwrap();
        assert_eq!(est.disclosed_indices.len(), 64);
        assert!(remove_disclosed(&key, &est.disclosed_indices).is_empty());
    }

    #[test]
    fn empty_key_is_an_error() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        assert!(matches!(
            estimate_qber(&[], &[], 0.5, &mut rng),
            Err(PostProcError::EmptyKey)
        ));
    }

    #[test]
    fn reconcile_zero_error_leaks_nothing() {
        let key = vec![true, false, true];
        let (shared, leak) = reconcile(&key, &key, 0.0, 1.2).unwrap();
        assert_eq!(shared, key);
        assert_eq!(leak, 0);
    }

    #[test]
    fn reconcile_leakage_matches_entropy_accounting() {
        // ceil(1.2 * 1e5 * h2(0.05)) with h2(0.05) = 0.2863969571
        // (independently evaluated at high precision) is 34368.
        let alice = vec![false; 100_000];
        let bob = vec![false; 100_000];
        let (_, leak) = reconcile(&alice, &bob, 0.05, 1.2).unwrap();
        assert_eq!(leak, 34368);
    }

    #[test]
    fn reconcile_at_half_consumes_everything() {
        let key = vec![true; 1000];
        let (_, leak) = reconcile(&key, &key, 0.5, 1.2).unwrap();
        assert_eq!(leak, 1200);
        let amplified = privacy_amplify(&key, leak, 0, 7);
        assert!(amplified.is_empty());
    }

    #[test]
    fn amplify_leakage_at_or_past_length_empties_key() {
        let key = vec![true; 100];
        assert!(privacy_amplify(&key, 100, 0, 1).is_empty());
        assert!(privacy_amplify(&key, 250, 0, 1).is_empty());
        assert!(privacy_amplify(&key, 40, 30, 1).is_empty());
    }

    #[test]
    fn amplify_is_deterministic() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let key: Vec<bool> = (0..512).map(|_| rng.random()).collect();
        let a = privacy_amplify(&key, 100, 40, 99);
        let b = privacy_amplify(&key, 100, 40, 99);
        assert_eq!(a, b);
        assert_eq!(a.len(), 512 - 100 - 80);
    }

    #[test]
    fn toeplitz_identity_diagonal_reproduces_key() {
        // diag[n - 1 + i - j] = 1 iff i == j: only the main-diagonal slot set.
        let n = 40;
        let key: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        let mut diag = vec![false; 2 * n - 1];
        diag[n - 1] = true;
        assert_eq!(toeplitz_hash(&diag, &key, n), key);
    }

    #[test]
    fn toeplitz_matches_schoolbook_matvec() {
        // Oracle: materialize T and multiply row by row.
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for &(m, n) in &[(1usize, 1usize), (3, 7), (64, 64), (33, 130), (100, 65)] {
            let key: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let diag: Vec<bool> = (0..m + n - 1).map(|_| rng.random()).collect();
            let fast = toeplitz_hash(&diag, &key, m);
            let mut slow = Vec::with_capacity(m);
            for i in 0..m {
                let mut bit = false;
                for j in 0..n {
                    bit ^= diag[n - 1 + i - j] & key[j];
                }
                slow.push(bit);
            }
            assert_eq!(fast, slow, "m={m} n={n}");
        }
    }

    #[test]
    fn toeplitz_is_linear() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..20 {
            let k1: Vec<bool> = (0..256).map(|_| rng.random()).collect();
            let k2: Vec<bool> = (0..256).map(|_| rng.random()).collect();
            let sum: Vec<bool> = k1.iter().zip(&k2).map(|(a, b)| a ^ b).collect();
            let f1 = privacy_amplify(&k1, 50, 20, 11);
            let f2 = privacy_amplify(&k2, 50, 20, 11);
            let fs = privacy_amplify(&sum, 50, 20, 11);
            let xored: Vec<bool> = f1.iter().zip(&f2).map(|(a, b)| a ^ b).collect();
            assert_eq!(fs, xored);
        }
    }

    fn ledger_for_test(tag: TagLength) -> KeyLedger {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let bytes = 32 + tag.bytes();
        loop {
            let a: Vec<u8> = (0..bytes).map(|_| rng.random()).collect();
            let b: Vec<u8> = (0..bytes).map(|_| rng.random()).collect();
            if let Ok(l) = KeyLedger::new(&a, &b, tag, 77, 64) {
                return l;
            }
        }
    }

    #[test]
    fn rekey_with_exactly_two_secrets_leaves_no_consumer_key() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let mut ledger = ledger_for_test(TagLength::Bits64);
        let old_kc = *ledger.alice_to_bob.secret.k_c();
        let final_key: Vec<bool> = (0..ledger.rekey_cost_bits())
            .map(|_| rng.random())
            .collect();
        let consumer = rekey(&mut ledger, &final_key, 123).unwrap();
        assert!(consumer.is_empty());
        assert_ne!(*ledger.alice_to_bob.secret.k_c(), old_kc);
        assert_eq!(ledger.rounds_completed, 1);
        assert_eq!(ledger.alice_to_bob.budget.consumed(), 0);
        assert_eq!(ledger.alice_to_bob.nonces.counter(), 0);
        assert_eq!(ledger.iv, 123);
    }

    #[test]
    fn rekey_rejects_short_key() {
        let mut ledger = ledger_for_test(TagLength::Bits64);
        let short = vec![true; ledger.rekey_cost_bits() - 1];
        assert!(matches!(
            rekey(&mut ledger, &short, 1),
            Err(PostProcError::InsufficientKey { .. })
        ));
    }

    #[test]
    fn old_secret_tags_fail_after_rekey() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let mut ledger = ledger_for_test(TagLength::Bits64);
        let old_secret = ledger.alice_to_bob.secret.clone();
        let tag = crate::crypto::make_tag(
            &ledger.alice_to_bob.secret,
            &mut ledger.alice_to_bob.nonces,
            &mut ledger.alice_to_bob.budget,
            &[0x00],
        )
        .unwrap();
        assert!(crate::crypto::verify_tag(
            &old_secret,
            tag.nonce,
            &[0x00],
            tag.value
        ));
        let final_key: Vec<bool> = (0..ledger.rekey_cost_bits() + 64)
            .map(|_| rng.random())
            .collect();
        rekey(&mut ledger, &final_key, 9).unwrap();
        assert!(!crate::crypto::verify_tag(
            &ledger.alice_to_bob.secret,
            tag.nonce,
            &[0x00],
            tag.value
        ));
    }

    #[test]
    fn pack_bits_is_big_endian_per_byte() {
        let bits = [true, false, false, false, false, false, false, true, true];
        assert_eq!(pack_bits(&bits), vec![0x81, 0x80]);
    }
}
