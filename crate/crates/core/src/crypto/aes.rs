//! AES-256 block encryption (FIPS-197 forward cipher).
//!
//! Only the forward transformation is needed here: tags and the counter-mode
//! keystream both consume `AES_k(nonce)` blocks and never invert the cipher.
//! The S-box and round constants are derived at compile time from GF(2^8)
//! arithmetic instead of being pasted in as opaque tables.

/// Multiply in GF(2^8) modulo x^8 + x^4 + x^3 + x + 1.
const fn gf8_mul(mut a: u8, mut b: u8) -> u8 {
    let mut p = 0u8;
    let mut i = 0;
    while i < 8 {
        if b & 1 != 0 {
            p ^= a;
        }
        let carry = a & 0x80;
        a <<= 1;
        if carry != 0 {
            a ^= 0x1b;
        }
        b >>= 1;
        i += 1;
    }
    p
}

/// Multiplicative inverse in GF(2^8), with inv(0) = 0 as FIPS-197 defines.
const fn gf8_inv(a: u8) -> u8 {
    if a == 0 {
        return 0;
    }
    let mut x = 1u8;
    while gf8_mul(a, x) != 1 {
        x = x.wrapping_add(1);
    }
    x
}

const fn make_sbox() -> [u8; 256] {
    let mut sbox = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let inv = gf8_inv(i as u8);
        // Affine transform: s = inv ^ rotl1 ^ rotl2 ^ rotl3 ^ rotl4 ^ 0x63
        let mut s = inv;
        let mut r = 1;
        while r <= 4 {
            s ^= inv.rotate_left(r);
            r += 1;
        }
        sbox[i] = s ^ 0x63;
        i += 1;
    }
    sbox
}

pub(crate) const SBOX: [u8; 256] = make_sbox();

const fn make_rcon() -> [u8; 15] {
    let mut rcon = [0u8; 15];
    let mut x = 1u8;
    let mut i = 1;
    while i < 15 {
        rcon[i] = x;
        x = gf8_mul(x, 2);
        i += 1;
    }
    rcon
}

const RCON: [u8; 15] = make_rcon();

const ROUNDS: usize = 14;

/// AES-256 with an expanded key schedule, reusable across many blocks.
#[derive(Clone)]
pub struct Aes256 {
    round_keys: [[u8; 16]; ROUNDS + 1],
}

impl Aes256 {
    pub fn new(key: &[u8; 32]) -> Self {
        let mut w = [0u32; 4 * (ROUNDS + 1)];
        for (i, chunk) in key.chunks_exact(4).enumerate() {
            w[i] = u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
        for i in 8..w.len() {
            let mut temp = w[i - 1];
            if i % 8 == 0 {
                temp = sub_word(temp.rotate_left(8)) ^ ((RCON[i / 8] as u32) << 24);
            } else if i % 8 == 4 {
                temp = sub_word(temp);
            }
            w[i] = w[i - 8] ^ temp;
        }
        let mut round_keys = [[0u8; 16]; ROUNDS + 1];
        for (round, rk) in round_keys.iter_mut().enumerate() {
            for c in 0..4 {
                rk[4 * c..4 * c + 4].copy_from_slice(&w[4 * round + c].to_be_bytes());
            }
        }
        Aes256 { round_keys }
    }

    /// Forward cipher of FIPS-197 section 5.1 on one 16-byte block.
    pub fn encrypt_block(&self, block: [u8; 16]) -> [u8; 16] {
        let mut state = block;
        add_round_key(&mut state, &self.round_keys[0]);
        for round in 1..ROUNDS {
            sub_bytes(&mut state);
            shift_rows(&mut state);
            mix_columns(&mut state);
            add_round_key(&mut state, &self.round_keys[round]);
        }
        sub_bytes(&mut state);
        shift_rows(&mut state);
        add_round_key(&mut state, &self.round_keys[ROUNDS]);
        state
    }
}

fn sub_word(w: u32) -> u32 {
    let b = w.to_be_bytes();
    u32::from_be_bytes([
        SBOX[b[0] as usize],
        SBOX[b[1] as usize],
        SBOX[b[2] as usize],
        SBOX[b[3] as usize],
    ])
}

fn add_round_key(state: &mut [u8; 16], rk: &[u8; 16]) {
    for (s, k) in state.iter_mut().zip(rk) {
        *s ^= k;
    }
}

fn sub_bytes(state: &mut [u8; 16]) {
    for s in state.iter_mut() {
        *s = SBOX[*s as usize];
    }
}

// State byte layout follows FIPS-197: s[r][c] = state[r + 4c].
fn shift_rows(state: &mut [u8; 16]) {
    let old = *state;
    for r in 1..4 {
        for c in 0..4 {
            state[r + 4 * c] = old[r + 4 * ((c + r) % 4)];
        }
    }
}

fn xtime(a: u8) -> u8 {
    let shifted = a << 1;
    if a & 0x80 != 0 {
        shifted ^ 0x1b
    } else {
        shifted
    }
}

fn mix_columns(state: &mut [u8; 16]) {
    for c in 0..4 {
        let col = [
            state[4 * c],
            state[4 * c + 1],
            state[4 * c + 2],
            state[4 * c + 3],
        ];
        let xored = col[0] ^ col[1] ^ col[2] ^ col[3];
        for r in 0..4 {
            state[4 * c + r] = col[r] ^ xored ^ xtime(col[r] ^ col[(r + 1) % 4]);
        }
    }
}

/// One-shot AES-256 encryption of a single block.
///
/// Hot paths should build an [`Aes256`] once and reuse it; this exists as the
/// plain function form of the primitive.
pub fn block_encrypt(k_c: &[u8; 32], block: [u8; 16]) -> [u8; 16] {
    Aes256::new(k_c).encrypt_block(block)
}
