//! Reed–Solomon encoding over small binary fields, plus seeded sampling of
//! distinct codeword symbols.
//!
//! Two distinct codewords of an `[n, n0]` Reed–Solomon code agree in at
//! most `n0 - 1` positions, so a handful of positions chosen by a short
//! seed exposes a difference with high probability. That is exactly how
//! the advice generators downstream fingerprint a string: encode it,
//! sample a few symbols, and concatenate them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::gf::{FieldCtx, FieldError};

/// Errors from code construction, encoding, and sampling.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RsError {
    /// A named configuration rule was violated.
    #[error("configuration violates: {0}")]
    Cfg(&'static str),
    /// An input's length does not match the code.
    #[error("{which} has length {got}, code wants {want}")]
    LengthMismatch { which: &'static str, want: usize, got: usize },
    /// The sampling seed ran out before enough distinct positions were
    /// found. `want_bits` is a lower bound on the seed length that could
    /// have succeeded.
    #[error("sampling seed too short: have {got_bits} bits, need at least {want_bits}")]
    InsufficientSeed { want_bits: usize, got_bits: usize },
    /// Field arithmetic rejected the width.
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A Reed–Solomon code: messages are `n0` coefficients over `GF(2^w)`,
/// codewords are evaluations at the first `n` field elements in canonical
/// value order (`0, 1, 2, …`). Minimum distance `n - n0 + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsCode {
    ctx: FieldCtx,
    /// Message length in field symbols.
    pub n0: usize,
    /// Codeword length in field symbols.
    pub n: usize,
}

impl RsCode {
    /// A code with symbols in `GF(2^w)`; needs `1 <= n0 <= n <= 2^w` so
    /// the `n` evaluation points are distinct field elements.
    pub fn new(w: u32, n0: usize, n: usize) -> Result<RsCode, RsError> {
        let ctx = FieldCtx::new(w)?;
        if n0 == 0 {
            return Err(RsError::Cfg("n0 >= 1"));
        }
        if n0 > n {
            return Err(RsError::Cfg("n0 <= n"));
        }
        if (n as u128) > ctx.order() {
            return Err(RsError::Cfg("n <= 2^w (distinct evaluation points)"));
        }
        Ok(RsCode { ctx, n0, n })
    }

    /// Symbol width in bits.
    pub fn w(&self) -> usize {
        self.ctx.width() as usize
    }

    /// The field the symbols live in.
    pub fn ctx(&self) -> FieldCtx {
        self.ctx
    }

    /// Evaluates the degree-`(n0-1)` polynomial with coefficient vector
    /// `msg` (index `i` = coefficient of `X^i`) at the `n` canonical
    /// points, by Horner's rule.
    pub fn encode(&self, msg: &[u64]) -> Result<Vec<u64>, RsError> {
        if msg.len() != self.n0 {
            return Err(RsError::LengthMismatch { which: "msg", want: self.n0, got: msg.len() });
        }
        for &sym in msg {
            if u128::from(sym) >= self.ctx.order() {
                return Err(RsError::Cfg("message symbol outside the field"));
            }
        }
        let mut out = Vec::with_capacity(self.n);
        for point in 0..self.n as u64 {
            let mut acc = 0u64;
            for &coeff in msg.iter().rev() {
                acc = self.ctx.mul(acc, point) ^ coeff;
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Packs a bit string into message symbols, consuming `w` bits per
    /// symbol MSB-first and zero-padding the tail; the bit string must fit
    /// (`ceil(bits.len / w) <= n0`), shorter messages are zero-extended.
    pub fn message_from_bits(&self, bits: &BitString) -> Result<Vec<u64>, RsError> {
        let w = self.w();
        if bits.len().div_ceil(w) > self.n0 {
            return Err(RsError::LengthMismatch {
                which: "bits",
                want: self.n0 * w,
                got: bits.len(),
            });
        }
        let mut msg = vec![0u64; self.n0];
        for (j, sym) in msg.iter_mut().enumerate() {
            let start = j * w;
            if start >= bits.len() {
                break;
            }
            let take = w.min(bits.len() - start);
            // Partial tail symbol keeps its bits in the high positions.
            *sym = bits.u64_window(start, take) << (w - take);
        }
        Ok(msg)
    }

    /// `count` pairwise-distinct positions in `[0, n)`, chosen by
    /// consuming successive `w`-bit chunks of `z` (each reduced mod `n`)
    /// and skipping duplicates. Fails with [`RsError::InsufficientSeed`]
    /// if `z` has fewer than `count * w` bits up front, or if duplicates
    /// exhaust it. `count = n` returns every position (trivially the whole
    /// codeword) without consuming the seed.
    pub fn sample_positions(&self, z: &BitString, count: usize) -> Result<Vec<usize>, RsError> {
        if count > self.n {
            return Err(RsError::Cfg("count <= n"));
        }
        if count == self.n {
            return Ok((0..self.n).collect());
        }
        let w = self.w();
        if z.len() < count * w {
            return Err(RsError::InsufficientSeed { want_bits: count * w, got_bits: z.len() });
        }
        let mut picked = Vec::with_capacity(count);
        let mut start = 0;
        while picked.len() < count {
            if start + w > z.len() {
                return Err(RsError::InsufficientSeed {
                    want_bits: z.len() + w,
                    got_bits: z.len(),
                });
            }
            let pos = (z.u64_window(start, w) % self.n as u64) as usize;
            start += w;
            if !picked.contains(&pos) {
                picked.push(pos);
            }
        }
        Ok(picked)
    }

    /// Total variant of [`RsCode::sample_positions`] for callers that must
    /// never fail (advice generators): seed-driven while chunks last, then
    /// deterministically completed with the smallest positions not yet
    /// chosen. Identical to the strict variant whenever that one succeeds.
    pub fn sample_positions_total(&self, z: &BitString, count: usize) -> Vec<usize> {
        assert!(count <= self.n, "count <= n");
        if count == self.n {
            return (0..self.n).collect();
        }
        let w = self.w();
        let mut picked = Vec::with_capacity(count);
        let mut start = 0;
        while picked.len() < count && start + w <= z.len() {
            let pos = (z.u64_window(start, w) % self.n as u64) as usize;
            start += w;
            if !picked.contains(&pos) {
                picked.push(pos);
            }
        }
        let mut next = 0;
        while picked.len() < count {
            if !picked.contains(&next) {
                picked.push(next);
            }
            next += 1;
        }
        picked
    }

    /// The seed-selected distinct symbols of `codeword`, concatenated as a
    /// bit string (`w` bits per symbol, selection order).
    pub fn sample_symbols(
        &self,
        z: &BitString,
        codeword: &[u64],
        count: usize,
    ) -> Result<BitString, RsError> {
        if codeword.len() != self.n {
            return Err(RsError::LengthMismatch {
                which: "codeword",
                want: self.n,
                got: codeword.len(),
            });
        }
        let positions = self.sample_positions(z, count)?;
        let mut out = BitString::zeros(0);
        for pos in positions {
            out = out.concat(&BitString::from_u64(codeword[pos], self.w()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vandermonde;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn hamming(a: &[u64], b: &[u64]) -> usize {
        a.iter().zip(b).filter(|(x, y)| x != y).count()
    }

    #[test]
    fn zero_and_constant_messages() {
        let code = RsCode::new(3, 2, 4).unwrap();
        assert_eq!(code.encode(&[0, 0]).unwrap(), vec![0, 0, 0, 0]);
        // Degree-0 polynomial: constant codeword.
        assert_eq!(code.encode(&[5, 0]).unwrap(), vec![5, 5, 5, 5]);
    }

    #[test]
    fn cfg_rules() {
        assert!(matches!(RsCode::new(3, 0, 4), Err(RsError::Cfg("n0 >= 1"))));
        assert!(matches!(RsCode::new(3, 5, 4), Err(RsError::Cfg("n0 <= n"))));
        assert!(matches!(
            RsCode::new(3, 2, 9),
            Err(RsError::Cfg("n <= 2^w (distinct evaluation points)"))
        ));
        let code = RsCode::new(3, 2, 4).unwrap();
        assert!(matches!(code.encode(&[1]), Err(RsError::LengthMismatch { .. })));
        assert!(matches!(
            code.encode(&[8, 0]),
            Err(RsError::Cfg("message symbol outside the field"))
        ));
    }

    /// Every distinct codeword pair of an `[n, n0]` code is at Hamming
    /// distance at least `n - n0 + 1`, exhaustively for all message pairs
    /// with `n0 <= 3`, `n <= 7` over `GF(2^3)`.
    #[test]
    fn pairwise_distance_exhaustive() {
        for n0 in 1..=3usize {
            for n in n0..=7usize {
                let code = RsCode::new(3, n0, n).unwrap();
                let msgs: Vec<Vec<u64>> = (0..8u64.pow(n0 as u32))
                    .map(|i| (0..n0).map(|j| (i >> (3 * j)) & 7).collect())
                    .collect();
                let words: Vec<Vec<u64>> =
                    msgs.iter().map(|m| code.encode(m).unwrap()).collect();
                for i in 0..words.len() {
                    for j in i + 1..words.len() {
                        let dist = hamming(&words[i], &words[j]);
                        assert!(
                            dist > n - n0,
                            "n0={n0} n={n}: distance {dist} between messages {i} and {j}"
                        );
                    }
                }
            }
        }
    }

    /// Any set of distinct evaluation points gives a full-rank Vandermonde
    /// matrix: all 255 nonempty point subsets of `GF(2^3)`.
    #[test]
    fn vandermonde_rank_all_point_subsets() {
        let ctx = FieldCtx::new(3).unwrap();
        for mask in 1u32..256 {
            let points: Vec<u64> =
                (0..8u64).filter(|p| mask >> p & 1 == 1).collect();
            let m = vandermonde(ctx, &points, points.len()).unwrap();
            assert_eq!(m.rank(), points.len(), "points {points:?}");
        }
    }

    #[test]
    fn message_from_bits_layout() {
        let code = RsCode::new(4, 3, 12).unwrap();
        // 12 bits -> three 4-bit symbols, MSB-first.
        let msg = code.message_from_bits(&BitString::parse("000100100011")).unwrap();
        assert_eq!(msg, vec![0b0001, 0b0010, 0b0011]);
        // Partial tail symbol is high-aligned; missing symbols are zero.
        let msg = code.message_from_bits(&BitString::parse("111101")).unwrap();
        assert_eq!(msg, vec![0b1111, 0b0100, 0]);
        assert!(code.message_from_bits(&BitString::zeros(13)).is_err());
    }

    #[test]
    fn sampling_contract() {
        let code = RsCode::new(3, 2, 5).unwrap();
        // count = n: whole codeword, any seed, even an empty one.
        assert_eq!(
            code.sample_positions(&BitString::zeros(0), 5).unwrap(),
            vec![0, 1, 2, 3, 4]
        );
        // Deterministic, distinct, chunk order: chunks 001, 100, 000.
        let z = BitString::parse("001100000");
        let pos = code.sample_positions(&z, 3).unwrap();
        assert_eq!(pos, vec![1, 4, 0]);
        assert_eq!(code.sample_positions(&z, 3).unwrap(), pos);
        // Duplicates are skipped while the seed lasts: 110 = 6 mod 5 = 1.
        assert_eq!(
            code.sample_positions(&BitString::parse("001110100"), 2).unwrap(),
            vec![1, 4]
        );
        // Upfront shortage.
        assert!(matches!(
            code.sample_positions(&BitString::zeros(5), 2),
            Err(RsError::InsufficientSeed { want_bits: 6, got_bits: 5 })
        ));
        // Duplicate exhaustion: every chunk hits the same position.
        assert!(matches!(
            code.sample_positions(&BitString::zeros(9), 2),
            Err(RsError::InsufficientSeed { .. })
        ));
        // The total variant completes with the smallest unused positions
        // instead, and matches the strict variant when that one succeeds.
        assert_eq!(code.sample_positions_total(&BitString::zeros(9), 3), vec![0, 1, 2]);
        assert_eq!(code.sample_positions_total(&z, 3), pos);
        // Symbol assembly in selection order.
        let word = code.encode(&[3, 1]).unwrap();
        let sampled = code.sample_symbols(&z, &word, 2).unwrap();
        let want = BitString::from_u64(word[1], 3).concat(&BitString::from_u64(word[4], 3));
        assert_eq!(sampled, want);
    }

    /// Fingerprinting power: for far-apart codeword pairs, the fraction of
    /// seeds selecting identical symbol sets is at most `2^-count` with
    /// room to spare (the pairs agree in at most `n0 - 1` positions).
    #[test]
    fn collision_detection_power() {
        let code = RsCode::new(4, 3, 16).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let count = 2usize;
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let a: Vec<u64> = (0..3).map(|_| rng.gen_range(0..16)).collect();
            let mut b = a.clone();
            while b == a {
                b = (0..3).map(|_| rng.gen_range(0..16)).collect();
            }
            let (wa, wb) = (code.encode(&a).unwrap(), code.encode(&b).unwrap());
            assert!(hamming(&wa, &wb) >= 14, "distance 16 - 3 + 1");
            let (mut same, mut total) = (0u32, 0u32);
            for zv in 0..1u64 << (count * 4) {
                let z = BitString::from_u64(zv, count * 4);
                // Duplicate-exhausted seeds are skipped by both runs
                // identically (the positions do not depend on the word).
                if let (Ok(sa), Ok(sb)) =
                    (code.sample_symbols(&z, &wa, count), code.sample_symbols(&z, &wb, count))
                {
                    total += 1;
                    if sa == sb {
                        same += 1;
                    }
                }
            }
            worst = worst.max(f64::from(same) / f64::from(total));
        }
        eprintln!("rs sampling: worst identical-sample fraction = {worst}");
        assert!(worst <= 0.25, "2^-count with count = 2");
    }
}
