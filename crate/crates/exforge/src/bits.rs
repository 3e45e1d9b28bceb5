//! Fixed-length bit strings with MSB-first indexing.
//!
//! Index 0 is the first bit of the string and the most significant bit of
//! the serialized form. All inputs and outputs of the extractors in this
//! crate are [`BitString`]s, so slicing, concatenation and xor are kept
//! cheap: storage is packed 64-bit words with inline capacity for 128 bits.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

/// Errors raised by bit-string operations and (de)serialization.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitError {
    /// A slice or bit access fell outside `0..len`.
    #[error("range {start}..{} out of bounds for bit string of length {len}", start + want)]
    Range { start: usize, want: usize, len: usize },
    /// Two operands were required to have equal length but did not.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    /// Serialized form ended before the declared payload.
    #[error("truncated input: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    /// Serialized form carried extra bytes or nonzero padding bits.
    #[error("non-canonical serialization: {0}")]
    NonCanonical(&'static str),
}

/// A bit string of fixed length `len`.
///
/// Bit `i` lives in word `i / 64` at position `63 - i % 64`, i.e. words are
/// filled MSB-first. Unused bits of the last word are always zero, which
/// makes `Eq`, `Ord` and `Hash` structural.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BitString {
    len: usize,
    words: SmallVec<[u64; 2]>,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitString {
    /// The empty bit string.
    pub fn empty() -> Self {
        Self::default()
    }

    /// All-zero string of the given length.
    pub fn zeros(len: usize) -> Self {
        BitString { len, words: smallvec::smallvec![0u64; words_for(len)] }
    }

    /// All-ones string of the given length.
    pub fn ones(len: usize) -> Self {
        let mut s = BitString { len, words: smallvec::smallvec![!0u64; words_for(len)] };
        s.mask_tail();
        s
    }

    /// Builds a string from explicit bits, index 0 first.
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    /// Builds a string of length `len` where bit `i` is `f(i)`.
    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut s = Self::zeros(len);
        for i in 0..len {
            s.set(i, f(i));
        }
        s
    }

    /// Parses a string of `0`/`1` characters, first character = bit 0.
    ///
    /// Intended for tests and fixtures; panics on other characters.
    pub fn parse(s: &str) -> Self {
        Self::from_bits(&s.chars().map(|c| match c {
            '0' => false,
            '1' => true,
            other => panic!("invalid bit character {other:?}"),
        }).collect::<Vec<_>>())
    }

    /// Interprets the low `len` bits of `value` as a big-endian bit string:
    /// bit 0 of the result is the most significant of the `len` bits.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "from_u64 supports at most 64 bits");
        if len == 0 {
            return Self::empty();
        }
        let masked = if len == 64 { value } else { value & ((1u64 << len) - 1) };
        BitString { len, words: smallvec::smallvec![masked << (64 - len)] }
    }

    /// Draws `len` uniform bits from `rng`.
    pub fn random(len: usize, rng: &mut impl rand::Rng) -> Self {
        let mut s = BitString {
            len,
            words: (0..words_for(len)).map(|_| rng.gen::<u64>()).collect(),
        };
        s.mask_tail();
        s
    }

    /// Number of bits.
    pub fn len(&self) -> usize {
        self.len
    }

    /// True when the string has no bits.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// True when every bit is zero (vacuously true for the empty string).
    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Bit at index `i`; panics when out of range.
    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / 64] >> (63 - (i % 64))) & 1 == 1
    }

    /// Sets bit `i`; panics when out of range.
    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (63 - (i % 64));
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    fn mask_tail(&mut self) {
        let used = self.len % 64;
        if used != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= !0u64 << (64 - used);
            }
        }
        if self.len == 0 {
            self.words.clear();
        }
    }

    /// Reads up to 64 bits starting at `start` as a big-endian integer.
    #[inline]
    pub fn u64_window(&self, start: usize, len: usize) -> u64 {
        assert!(len <= 64 && start + len <= self.len, "window out of range");
        if len == 0 {
            return 0;
        }
        let w = start / 64;
        let off = start % 64;
        let hi = self.words[w] << off;
        let lo = if off == 0 || w + 1 >= self.words.len() {
            0
        } else {
            self.words[w + 1] >> (64 - off)
        };
        (hi | lo) >> (64 - len)
    }

    /// The whole string as a big-endian integer; requires `len <= 64`.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64, "to_u64 requires length <= 64");
        if self.len == 0 { 0 } else { self.u64_window(0, self.len) }
    }

    /// The whole string as a big-endian integer; requires `len <= 128`.
    /// Useful as a compact map key for enumeration histograms.
    pub fn to_u128(&self) -> u128 {
        assert!(self.len <= 128, "to_u128 requires length <= 128");
        if self.len <= 64 {
            self.to_u64() as u128
        } else {
            let hi = self.u64_window(0, 64) as u128;
            let lo = self.u64_window(64, self.len - 64) as u128;
            (hi << (self.len - 64)) | lo
        }
    }

    /// Copies `len` bits starting at `start` into a new string.
    pub fn slice(&self, start: usize, len: usize) -> Result<BitString, BitError> {
        if start.checked_add(len).is_none_or(|end| end > self.len) {
            return Err(BitError::Range { start, want: len, len: self.len });
        }
        let mut out = Self::zeros(len);
        let mut i = 0;
        while i < len {
            let take = (len - i).min(64);
            let chunk = self.u64_window(start + i, take);
            out.write_window(i, take, chunk);
            i += take;
        }
        Ok(out)
    }

    #[inline]
    fn write_window(&mut self, start: usize, len: usize, value: u64) {
        debug_assert!(len <= 64 && start + len <= self.len);
        if len == 0 {
            return;
        }
        let value = value << (64 - len);
        let w = start / 64;
        let off = start % 64;
        self.words[w] |= value >> off;
        if off != 0 && off + len > 64 {
            self.words[w + 1] |= value << (64 - off);
        }
    }

    /// Concatenation `self || other`.
    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = Self::zeros(self.len + other.len);
        out.words[..self.words.len()].copy_from_slice(&self.words);
        let mut i = 0;
        while i < other.len {
            let take = (other.len - i).min(64);
            out.write_window(self.len + i, take, other.u64_window(i, take));
            i += take;
        }
        out
    }

    /// Concatenates many strings in order.
    pub fn concat_all<'a>(parts: impl IntoIterator<Item = &'a BitString>) -> BitString {
        let mut out = BitString::empty();
        for p in parts {
            out = out.concat(p);
        }
        out
    }

    /// Bitwise xor of equal-length strings.
    pub fn xor(&self, other: &BitString) -> Result<BitString, BitError> {
        if self.len != other.len {
            return Err(BitError::LengthMismatch { left: self.len, right: other.len });
        }
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w ^= o;
        }
        Ok(out)
    }

    /// Flips bit `i`, returning the modified copy.
    pub fn with_flipped(&self, i: usize) -> BitString {
        let mut out = self.clone();
        out.set(i, !out.get(i));
        out
    }

    /// The bits in reverse order.
    pub fn reversed(&self) -> BitString {
        BitString::from_fn(self.len, |i| self.get(self.len - 1 - i))
    }

    /// Iterator over bits, index 0 first.
    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Enumerates all strings of length `n` in ascending integer order.
    pub fn enumerate_all(n: usize) -> impl Iterator<Item = BitString> {
        assert!(n <= 40, "refusing to enumerate 2^{n} strings");
        (0..1u64 << n).map(move |v| BitString::from_u64(v, n))
    }

    /// Serializes as a 4-byte big-endian bit length followed by the packed
    /// bits, MSB-first within each byte, last byte zero-padded on the low
    /// side.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(4 + nbytes);
        out.extend_from_slice(&(self.len as u32).to_be_bytes());
        for j in 0..nbytes {
            let byte = (self.words[j / 8] >> (56 - 8 * (j % 8))) & 0xff;
            out.push(byte as u8);
        }
        out
    }

    /// Inverse of [`BitString::to_bytes`]; rejects trailing garbage and
    /// nonzero padding so the encoding stays canonical.
    pub fn from_bytes(bytes: &[u8]) -> Result<BitString, BitError> {
        let (s, rest) = Self::read_from(bytes)?;
        if !rest.is_empty() {
            return Err(BitError::NonCanonical("trailing bytes after payload"));
        }
        Ok(s)
    }

    /// Reads one serialized bit string from the front of `bytes`, returning
    /// it together with the remaining suffix.
    pub fn read_from(bytes: &[u8]) -> Result<(BitString, &[u8]), BitError> {
        if bytes.len() < 4 {
            return Err(BitError::Truncated { need: 4, have: bytes.len() });
        }
        let len = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
        let nbytes = len.div_ceil(8);
        if bytes.len() < 4 + nbytes {
            return Err(BitError::Truncated { need: 4 + nbytes, have: bytes.len() });
        }
        let payload = &bytes[4..4 + nbytes];
        let mut s = Self::zeros(len);
        for (j, &b) in payload.iter().enumerate() {
            s.words[j / 8] |= (b as u64) << (56 - 8 * (j % 8));
        }
        if !len.is_multiple_of(8) {
            let last = payload[nbytes - 1];
            let pad = 8 - len % 8;
            if last & ((1 << pad) - 1) != 0 {
                return Err(BitError::NonCanonical("nonzero padding bits"));
            }
        }
        let mut check = s.clone();
        check.mask_tail();
        if check.words != s.words {
            return Err(BitError::NonCanonical("nonzero padding bits"));
        }
        Ok((s, &bytes[4 + nbytes..]))
    }
}

impl std::fmt::Debug for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitString({})", self)
    }
}

impl std::fmt::Display for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.iter() {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        if s.chars().any(|c| c != '0' && c != '1') {
            return Err(serde::de::Error::custom("bit string must be 0/1 characters"));
        }
        Ok(BitString::parse(&s))
    }
}
