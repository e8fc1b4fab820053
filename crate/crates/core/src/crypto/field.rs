//! Binary-field arithmetic for the polynomial-evaluation hash.
//!
//! Field elements are unsigned integers whose bit `i` is the coefficient of
//! `x^i`; serialized form is the big-endian byte string of that integer.
//! One field per tag width, each reduced by a fixed low-weight irreducible
//! pentanomial/heptanomial:
//!
//! - 128-bit tags: `x^128 + x^7 + x^2 + x + 1`
//! - 64-bit tags:  `x^64 + x^4 + x^3 + x + 1`
//! - 16-bit tags (test scale): `x^16 + x^5 + x^3 + x + 1`

/// Low coefficients of the reduction polynomial, i.e. the polynomial minus
/// its leading `x^width` term.
pub const POLY_128: u128 = 0x87;
pub const POLY_64: u128 = 0x1b;
pub const POLY_16: u128 = 0x2b;

/// Carry-less multiply of `a` and `b` reduced into the `width`-bit field
/// with low-term polynomial `poly`.
///
/// Left-to-right double-and-add: the accumulator is multiplied by `x`
/// (shift plus conditional reduction) once per key bit.
pub fn gf_mul(a: u128, b: u128, width: u32, poly: u128) -> u128 {
    debug_assert!(width == 128 || (a < (1 << width) && b < (1 << width)));
    let hi_bit = 1u128 << (width - 1);
    let mask = width_mask(width);
    let mut acc = 0u128;
    let mut i = width;
    while i > 0 {
        i -= 1;
        acc = if acc & hi_bit != 0 {
            ((acc << 1) ^ poly) & mask
        } else {
            (acc << 1) & mask
        };
        if (b >> i) & 1 == 1 {
            acc ^= a;
        }
    }
    acc
}

/// All-ones mask for a `width`-bit field element.
pub fn width_mask(width: u32) -> u128 {
    if width == 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}
