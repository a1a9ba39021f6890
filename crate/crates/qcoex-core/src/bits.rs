//! Packed bit vector used for key material and GF(2) operations.
//!
//! Layout: bit `i` lives in word `i / 64` at bit position `i % 64`
//! (LSB-first). Packed byte export is little-endian per word, which makes the
//! byte layout "bit i = byte i/8, bit i%8" — the layout documented for the
//! block dump format.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0u64; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bools(bools: &[bool]) -> Self {
        let mut b = Self::zeros(bools.len());
        for (i, &v) in bools.iter().enumerate() {
            if v {
                b.set(i, true);
            }
        }
        b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[allow(dead_code)]
    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.len);
        let w = &mut self.words[i / 64];
        if v {
            *w |= 1u64 << (i % 64);
        } else {
            *w &= !(1u64 << (i % 64));
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn push(&mut self, v: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        let i = self.len - 1;
        if v {
            self.words[i / 64] |= 1u64 << (i % 64);
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// XOR parity of bits [start, end).
    pub fn parity_range(&self, start: usize, end: usize) -> bool {
        debug_assert!(start <= end && end <= self.len);
        let mut acc = 0u64;
        let (ws, we) = (start / 64, (end + 63) / 64);
        for w in ws..we {
            let mut word = self.words[w];
            let lo = w * 64;
            if start > lo {
                word &= !0u64 << (start - lo);
            }
            if end < lo + 64 {
                word &= (1u64 << (end - lo)) - 1;
            }
            acc ^= word;
        }
        acc.count_ones() & 1 == 1
    }

    /// Number of positions where `self` and `other` differ (equal lengths).
    pub fn hamming_distance(&self, other: &Bits) -> u64 {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(other.words.iter())
            .map(|(a, b)| (a ^ b).count_ones() as u64)
            .sum()
    }

    pub fn xor_with(&mut self, other: &Bits) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a ^= *b;
        }
    }

    /// New vector holding `self[index[0]], self[index[1]], ...`.
    pub fn gather(&self, index: &[u32]) -> Bits {
        let mut out = Bits::zeros(index.len());
        for (i, &src) in index.iter().enumerate() {
            if self.get(src as usize) {
                out.set(i, true);
            }
        }
        out
    }

    /// Keep positions whose index is absent from the sorted `drop` list.
    pub fn drop_sorted(&self, drop: &[u32]) -> Bits {
        let mut out = Bits::zeros(self.len - drop.len());
        let mut d = 0usize;
        let mut o = 0usize;
        for i in 0..self.len {
            if d < drop.len() && drop[d] as usize == i {
                d += 1;
                continue;
            }
            if self.get(i) {
                out.set(o, true);
            }
            o += 1;
        }
        out
    }

    pub fn extend_from(&mut self, other: &Bits) {
        for i in 0..other.len {
            self.push(other.get(i));
        }
    }

    /// Packed little-endian bytes, zero-padded in the final byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(nbytes);
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(nbytes);
        out
    }

    pub fn from_bytes(bytes: &[u8], len: usize) -> Self {
        debug_assert!(len <= bytes.len() * 8);
        let mut words = vec![0u64; len.div_ceil(64)];
        for (i, &b) in bytes.iter().enumerate() {
            if i / 8 < words.len() {
                words[i / 8] |= (b as u64) << ((i % 8) * 8);
            }
        }
        let mut bits = Self { words, len };
        bits.mask_tail();
        bits
    }

    fn mask_tail(&mut self) {
        if self.len % 64 != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (self.len % 64)) - 1;
            }
        }
    }

    /// Parity of AND between `self` and the `n`-bit window of `other`
    /// starting at bit `offset`. Used by the word-sliding Toeplitz product.
    pub fn window_and_parity(&self, other: &Bits, offset: usize, n: usize) -> bool {
        debug_assert!(n <= self.len);
        debug_assert!(offset + n <= other.len);
        let shift = offset % 64;
        let base = offset / 64;
        let mut acc = 0u64;
        let nwords = n.div_ceil(64);
        for w in 0..nwords {
            let lo = other.words.get(base + w).copied().unwrap_or(0);
            let hi = other.words.get(base + w + 1).copied().unwrap_or(0);
            let window = if shift == 0 {
                lo
            } else {
                (lo >> shift) | (hi << (64 - shift))
            };
            let mut x = self.words[w];
            if w == nwords - 1 && n % 64 != 0 {
                x &= (1u64 << (n % 64)) - 1;
            }
            acc ^= x & window;
        }
        acc.count_ones() & 1 == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_bytes() {
        let src: Vec<bool> = (0..77).map(|i| i % 3 == 0 || i % 7 == 2).collect();
        let b = Bits::from_bools(&src);
        let back = Bits::from_bytes(&b.to_bytes(), b.len());
        assert_eq!(b, back);
    }

    #[test]
    fn parity_matches_naive() {
        let src: Vec<bool> = (0..200).map(|i| (i * 37 + 11) % 5 < 2).collect();
        let b = Bits::from_bools(&src);
        for (s, e) in [(0, 200), (3, 64), (64, 128), (13, 190), (70, 71)] {
            let naive = src[s..e].iter().filter(|&&x| x).count() % 2 == 1;
            assert_eq!(b.parity_range(s, e), naive, "range {s}..{e}");
        }
    }

    #[test]
    fn drop_and_gather() {
        let src: Vec<bool> = (0..20).map(|i| i % 2 == 0).collect();
        let b = Bits::from_bools(&src);
        let dropped = b.drop_sorted(&[0, 5, 19]);
        assert_eq!(dropped.len(), 17);
        assert!(!dropped.get(0)); // old index 1
        let idx: Vec<u32> = (0..20).rev().collect();
        let rev = b.gather(&idx);
        assert_eq!(rev.get(0), b.get(19));
    }

    #[test]
    fn window_parity_matches_naive() {
        let x: Vec<bool> = (0..130).map(|i| (i * 7 + 3) % 11 < 4).collect();
        let d: Vec<bool> = (0..400).map(|i| (i * 13 + 5) % 17 < 8).collect();
        let xb = Bits::from_bools(&x);
        let db = Bits::from_bools(&d);
        for offset in [0usize, 1, 63, 64, 65, 200, 269] {
            let naive = (0..130).filter(|&j| x[j] && d[offset + j]).count() % 2 == 1;
            assert_eq!(xb.window_and_parity(&db, offset, 130), naive, "off {offset}");
        }
    }
}
