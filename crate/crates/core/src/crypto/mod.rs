//! Authentication-tag construction and the key material behind it.
//!
//! A tag over message `m` at nonce `s` is
//!
//! ```text
//! tag = h(k_H, m) XOR truncate(AES-256(k_C, s), tag_bits)
//! ```
//!
//! where `h` is a polynomial-evaluation hash over GF(2^tag_bits) and the
//! truncation keeps the most significant `tag_bits` of the cipher block.
//! Because the mask is exactly a counter-mode keystream block, producing a
//! tag and counter-mode-encrypting the hash digest at the same nonce are the
//! same computation; that duality is pinned by tests.
//!
//! Frozen wire layouts: nonce = IV (big-endian, `l_v` bits) followed by a
//! big-endian counter in the remaining low bits; field elements serialize
//! big-endian; hash-input padding appends a single 1 bit then zeros up to a
//! block boundary.

pub mod aes;
pub mod field;

pub use aes::{block_encrypt, Aes256};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("wrong secret length: expected {expected} bits, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("hash key is zero; a zero key hashes every message to the same digest")]
    ZeroHashKey,
    #[error("tag budget exhausted ({limit} tags issued); rekey before issuing more")]
    BudgetExhausted { limit: u128 },
    #[error("nonce counter exhausted; rekey before issuing more")]
    CounterExhausted,
    #[error("plaintext length {got} is not a multiple of the {block} -byte block")]
    BlockMisaligned { got: usize, block: usize },
}

/// Which party's transmissions a secret protects. The two directions never
/// share key material or a nonce stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    AliceToBob,
    BobToAlice,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::AliceToBob => "alice_to_bob",
            Direction::BobToAlice => "bob_to_alice",
        }
    }
}

/// Tag width. 128-bit is the baseline, 64-bit halves the classical channel
/// load, and 16-bit exists purely so tag-guessing statistics can be observed
/// at desk scale in tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TagLength {
    Bits128,
    Bits64,
    Bits16,
}

impl TagLength {
    pub fn bits(self) -> u32 {
        match self {
            TagLength::Bits128 => 128,
            TagLength::Bits64 => 64,
            TagLength::Bits16 => 16,
        }
    }

    pub fn bytes(self) -> usize {
        self.bits() as usize / 8
    }

    /// Low terms of the field's reduction polynomial.
    pub fn poly(self) -> u128 {
        match self {
            TagLength::Bits128 => field::POLY_128,
            TagLength::Bits64 => field::POLY_64,
            TagLength::Bits16 => field::POLY_16,
        }
    }

    pub fn mask(self) -> u128 {
        field::width_mask(self.bits())
    }

    /// Messages safely taggable under one secret: 2^64 at 128-bit tags,
    /// 2^32 at 64-bit. The 16-bit test width gets 2^16 in the same spirit.
    pub fn default_budget(self) -> u128 {
        match self {
            TagLength::Bits128 => 1 << 64,
            TagLength::Bits64 => 1 << 32,
            TagLength::Bits16 => 1 << 16,
        }
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            128 => Some(TagLength::Bits128),
            64 => Some(TagLength::Bits64),
            16 => Some(TagLength::Bits16),
            _ => None,
        }
    }
}

/// The pre-shared secret for one direction, split into a 256-bit cipher key
/// and a single hash-key field element.
#[derive(Clone)]
pub struct InitialSecret {
    direction: Direction,
    tag: TagLength,
    k_c: [u8; 32],
    k_h: u128,
    cipher: Aes256,
}

impl InitialSecret {
    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn tag_length(&self) -> TagLength {
        self.tag
    }

    pub fn k_c(&self) -> &[u8; 32] {
        &self.k_c
    }

    pub fn k_h(&self) -> u128 {
        self.k_h
    }

    /// Total secret length in bits: 256 for the cipher key plus one hash-key
    /// field element.
    pub fn l_k(&self) -> usize {
        256 + self.tag.bits() as usize
    }

    /// Hash digest of `message` under this secret's hash key.
    pub fn digest(&self, message: &[u8]) -> u128 {
        universal_hash(self.k_h, message, self.tag).expect("secret holds a nonzero hash key")
    }

    /// Truncated keystream block for `nonce`: the most significant
    /// `tag_bits` of AES-256(k_C, nonce).
    pub fn keystream(&self, nonce: u128) -> u128 {
        let block = self.cipher.encrypt_block(nonce.to_be_bytes());
        u128::from_be_bytes(block) >> (128 - self.tag.bits())
    }
}

/// Split raw pre-shared bits into cipher key and hash key.
///
/// Layout is frozen: the first 256 bits are `k_C`, the remaining one field
/// element (big-endian) is `k_H`. A zero hash key is rejected so the caller
/// can draw fresh bits.
pub fn split_secret(
    raw: &[u8],
    tag: TagLength,
    direction: Direction,
) -> Result<InitialSecret, CryptoError> {
    let expected = 32 + tag.bytes();
    if raw.len() != expected {
        return Err(CryptoError::WrongLength {
            expected: expected * 8,
            got: raw.len() * 8,
        });
    }
    let mut k_c = [0u8; 32];
    k_c.copy_from_slice(&raw[..32]);
    let mut k_h = 0u128;
    for &b in &raw[32..] {
        k_h = (k_h << 8) | b as u128;
    }
    if k_h == 0 {
        return Err(CryptoError::ZeroHashKey);
    }
    let cipher = Aes256::new(&k_c);
    Ok(InitialSecret {
        direction,
        tag,
        k_c,
        k_h,
        cipher,
    })
}

/// Nonce source: an `l_v`-bit public IV in the high bits of a 128-bit block,
/// a strictly increasing counter in the low bits. The counter persists across
/// rounds that reuse the same initial secret and is never reset without a
/// rekey.
#[derive(Debug, Clone)]
pub struct NonceGenerator {
    iv: u64,
    l_v: u8,
    counter_width: u8,
    counter: u128,
    exhausted: bool,
}

impl NonceGenerator {
    /// `l_v` must be in 1..=64; the counter gets the remaining 128 - l_v bits.
    pub fn new(iv: u64, l_v: u8) -> Self {
        Self::with_counter_width(iv, l_v, 128 - l_v)
    }

    /// Narrow counter for exhaustion tests; width must not exceed 128 - l_v.
    pub fn with_counter_width(iv: u64, l_v: u8, counter_width: u8) -> Self {
        assert!((1..=64).contains(&l_v), "IV width must be 1..=64 bits");
        assert!(
            counter_width >= 1 && counter_width <= 128 - l_v,
            "counter width must fit below the IV"
        );
        let iv = if l_v == 64 {
            iv
        } else {
            iv & ((1u64 << l_v) - 1)
        };
        NonceGenerator {
            iv,
            l_v,
            counter_width,
            counter: 0,
            exhausted: false,
        }
    }

    pub fn iv(&self) -> u64 {
        self.iv
    }

    pub fn counter(&self) -> u128 {
        self.counter
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    /// Emit the next nonce, or fail permanently once the counter would wrap.
    pub fn next_nonce(&mut self) -> Result<u128, CryptoError> {
        if self.exhausted || self.counter >> self.counter_width != 0 {
            self.exhausted = true;
            return Err(CryptoError::CounterExhausted);
        }
        let nonce = ((self.iv as u128) << (128 - self.l_v)) | self.counter;
        self.counter += 1;
        Ok(nonce)
    }
}

/// Per-secret cap on issued tags. Exhaustion is permanent until rekey.
#[derive(Debug, Clone)]
pub struct TagBudget {
    limit: u128,
    consumed: u128,
}

impl TagBudget {
    pub fn new(tag: TagLength) -> Self {
        TagBudget {
            limit: tag.default_budget(),
            consumed: 0,
        }
    }

    pub fn with_limit(limit: u128) -> Self {
        TagBudget { limit, consumed: 0 }
    }

    pub fn limit(&self) -> u128 {
        self.limit
    }

    pub fn consumed(&self) -> u128 {
        self.consumed
    }

    pub fn remaining(&self) -> u128 {
        self.limit - self.consumed
    }

    pub fn is_exhausted(&self) -> bool {
        self.consumed >= self.limit
    }

    fn try_consume(&mut self) -> Result<(), CryptoError> {
        if self.is_exhausted() {
            return Err(CryptoError::BudgetExhausted { limit: self.limit });
        }
        self.consumed += 1;
        Ok(())
    }
}

/// An issued authentication tag and the nonce it consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tag {
    pub value: u128,
    pub tag: TagLength,
    pub nonce: u128,
    /// Counter value of the nonce, kept for transcript auditing.
    pub nonce_index: u128,
}

impl Tag {
    pub fn to_be_bytes(&self) -> Vec<u8> {
        let full = self.value.to_be_bytes();
        full[16 - self.tag.bytes()..].to_vec()
    }
}

/// Polynomial-evaluation hash over GF(2^tag_bits).
///
/// The message is padded with a single 1 bit then zeros to a block boundary,
/// split into big-endian field elements `m_1..m_n`, and evaluated as
/// `sum m_i * k^(n-i+1)` via Horner's rule.
pub fn universal_hash(k_h: u128, message: &[u8], tag: TagLength) -> Result<u128, CryptoError> {
    if k_h == 0 {
        return Err(CryptoError::ZeroHashKey);
    }
    debug_assert!(!message.is_empty(), "hash input must be nonempty");
    let block = tag.bytes();
    let width = tag.bits();
    let poly = tag.poly();
    let mut acc = 0u128;
    let mut feed = |chunk: &[u8]| {
        let mut m = 0u128;
        for &b in chunk {
            m = (m << 8) | b as u128;
        }
        acc = field::gf_mul(acc ^ m, k_h, width, poly);
    };
    let mut iter = message.chunks_exact(block);
    for chunk in iter.by_ref() {
        feed(chunk);
    }
    // Padding: 0x80 marker byte then zeros, always appended (a full final
    // chunk still gets a fresh padding block).
    let mut last = [0u8; 16];
    let rem = iter.remainder();
    last[..rem.len()].copy_from_slice(rem);
    last[rem.len()] = 0x80;
    feed(&last[..block]);
    Ok(acc)
}

/// Issue a tag over `message`, consuming one nonce and one budget unit.
///
/// Both exhaustion errors mean the same thing operationally: rekeying is
/// mandatory before any further authenticated traffic.
pub fn make_tag(
    secret: &InitialSecret,
    gen: &mut NonceGenerator,
    budget: &mut TagBudget,
    message: &[u8],
) -> Result<Tag, CryptoError> {
    if budget.is_exhausted() {
        return Err(CryptoError::BudgetExhausted {
            limit: budget.limit,
        });
    }
    let nonce_index = gen.counter();
    let nonce = gen.next_nonce()?;
    budget.try_consume()?;
    let value = secret.digest(message) ^ secret.keystream(nonce);
    Ok(Tag {
        value,
        tag: secret.tag,
        nonce,
        nonce_index,
    })
}

/// Recompute the expected tag for `(nonce, message)` and compare.
///
/// The comparison covers every bit unconditionally (single wide XOR, no
/// byte-by-byte early exit), so accept/reject timing does not depend on
/// where a forgery first differs. Rejection is a value, not an error.
pub fn verify_tag(secret: &InitialSecret, nonce: u128, message: &[u8], tag_value: u128) -> bool {
    let expected = secret.digest(message) ^ secret.keystream(nonce);
    (expected ^ tag_value) == 0
}

/// Counter-mode encryption in `tag_bits`-wide blocks, one fresh nonce per
/// block. Feeding it a hash digest reproduces `make_tag` bit for bit.
pub fn ctr_encrypt(
    secret: &InitialSecret,
    gen: &mut NonceGenerator,
    plaintext: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    let block = secret.tag.bytes();
    if plaintext.is_empty() || !plaintext.len().is_multiple_of(block) {
        return Err(CryptoError::BlockMisaligned {
            got: plaintext.len(),
            block,
        });
    }
    let mut out = Vec::with_capacity(plaintext.len());
    for chunk in plaintext.chunks_exact(block) {
        let nonce = gen.next_nonce()?;
        let ks = secret.keystream(nonce).to_be_bytes();
        let ks_tail = &ks[16 - block..];
        out.extend(chunk.iter().zip(ks_tail).map(|(p, k)| p ^ k));
    }
    Ok(out)
}
