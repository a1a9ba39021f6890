//! CRC-64 error verification.
//!
//! Fixed variant: the ECMA-182 generator polynomial in reflected form
//! (0xC96C5795D7870F42), initial value and final XOR all-ones — the common
//! "CRC-64/XZ" parameterization with check value 0x995DC9BBDF1939FA over
//! "123456789". Bit blocks digest as an 8-byte little-endian length prefix
//! followed by the packed little-endian payload, so blocks of different
//! lengths never compare equal.

use crate::bits::Bits;

/// ECMA-182 polynomial, reflected.
pub const POLY: u64 = 0xC96C5795D7870F42;

const fn build_table() -> [u64; 256] {
    let mut table = [0u64; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u64;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 1 == 1 { (crc >> 1) ^ POLY } else { crc >> 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

static TABLE: [u64; 256] = build_table();

/// CRC-64 of a byte slice.
pub fn crc64(data: &[u8]) -> u64 {
    let mut crc = !0u64;
    for &byte in data {
        crc = TABLE[((crc ^ byte as u64) & 0xFF) as usize] ^ (crc >> 8);
    }
    !crc
}

/// CRC-64 of a bit block (length-prefixed).
pub fn crc64_bits(bits: &Bits) -> u64 {
    let mut crc = !0u64;
    for &byte in (bits.len() as u64).to_le_bytes().iter() {
        crc = TABLE[((crc ^ byte as u64) & 0xFF) as usize] ^ (crc >> 8);
    }
    for byte in bits.to_bytes() {
        crc = TABLE[((crc ^ byte as u64) & 0xFF) as usize] ^ (crc >> 8);
    }
    !crc
}

/// Error verification: equal digests pass. A mismatch is a valid result
/// (the block is discarded upstream), not an error.
pub fn crc64_verify(alice: &Bits, bob: &Bits) -> bool {
    crc64_bits(alice) == crc64_bits(bob)
}
