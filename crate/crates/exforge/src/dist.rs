//! Exact distributions, flat sources, tamperers, and the exhaustive
//! enumeration harness used to measure statistical distance.
//!
//! Probabilities are exact rationals: a [`JointDist`] stores integer outcome
//! counts over a common denominator, and statistical distances come out as
//! [`num::BigRational`] values, so every bound checked downstream is checked
//! exactly, never through floating point.

use std::collections::HashMap;
use std::sync::Arc;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bits::BitString;

/// Exact statistical distance (or any exact probability value).
pub type Sd = BigRational;

/// `num/den` as an exact rational.
pub fn rat(num: u128, den: u128) -> Sd {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `2^e` as an exact rational (negative exponents allowed).
pub fn two_pow(e: i64) -> Sd {
    if e >= 0 {
        BigRational::from_integer(BigInt::one() << e as usize)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

/// Exact test of `value <= 2^(e_half / 2)` for a nonnegative rational,
/// covering half-integer power-of-two bounds like `2^(-5/2)`.
pub fn le_two_pow_half(value: &Sd, e_half: i64) -> bool {
    if e_half % 2 == 0 {
        *value <= two_pow(e_half / 2)
    } else {
        value * value <= two_pow(e_half)
    }
}

/// Decimal string pair `(numerator, denominator)` for reports.
pub fn fraction_strings(value: &Sd) -> (String, String) {
    (value.numer().to_string(), value.denom().to_string())
}

/// Nearest f64, for human-readable report fields only.
pub fn to_f64(value: &Sd) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Serde adapter for exact rationals, serialized as a `"num/den"` string
/// (for `#[serde(with = "crate::dist::sd_serde")]` fields).
pub mod sd_serde {
    use super::Sd;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(value: &Sd, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&format!("{}/{}", value.numer(), value.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Sd, D::Error> {
        let s = String::deserialize(de)?;
        let (num, den) = s
            .split_once('/')
            .ok_or_else(|| serde::de::Error::custom("expected \"num/den\""))?;
        let num = num::BigInt::from_str(num).map_err(serde::de::Error::custom)?;
        let den = num::BigInt::from_str(den).map_err(serde::de::Error::custom)?;
        if den == num::BigInt::from(0) {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Sd::new(num, den))
    }
}

/// Errors raised by sources, tamperers, and distribution operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistError {
    /// Support entries must all have the source's length.
    #[error("support entry has length {got}, source has length {want}")]
    SupportLength { want: usize, got: usize },
    /// A flat source needs at least one support element.
    #[error("empty support")]
    EmptySupport,
    /// Two distributions live on different outcome spaces.
    #[error("outcome space mismatch: widths {left:?} vs {right:?}")]
    SpaceMismatch { left: Vec<u16>, right: Vec<u16> },
    /// Enumeration would exceed the configured budget.
    #[error("enumeration needs {needed} outcomes, budget is {budget}")]
    ExplosionGuard { needed: u128, budget: u128 },
    /// Packed outcome tuples must fit 127 bits.
    #[error("outcome tuple needs {0} bits, limit is 127")]
    OutcomeTooWide(usize),
    /// Exhaustive fixed-point checks are limited to n <= 20.
    #[error("cannot exhaustively check fixed points at n={0} (limit 20)")]
    TooWideToCheck(usize),
    /// A constructor that promises fixed-point freeness found a fixed point.
    #[error("tamperer {id} has a fixed point at {point}")]
    FixedPoint { id: String, point: String },
    /// Tamperer length does not match the source it is applied to.
    #[error("tamperer acts on {tamperer} bits, value has {value}")]
    TampererLength { tamperer: usize, value: usize },
}

/// A flat source: the uniform distribution over an explicit support of
/// `n`-bit strings. Its min-entropy is exactly `log2(support size)`.
#[derive(Debug, Clone)]
pub struct FlatSource {
    n: usize,
    support: Support,
}

#[derive(Debug, Clone)]
enum Support {
    /// All `2^n` strings, enumerated on demand.
    Full,
    /// An explicit sorted, deduplicated support.
    Explicit(Arc<Vec<BitString>>),
}

impl FlatSource {
    /// The uniform distribution over all of `{0,1}^n`.
    pub fn uniform(n: usize) -> FlatSource {
        assert!(n <= 64, "full support limited to n <= 64");
        FlatSource { n, support: Support::Full }
    }

    /// Uniform over an explicit support (sorted and deduplicated here).
    pub fn from_support(n: usize, mut support: Vec<BitString>) -> Result<FlatSource, DistError> {
        if let Some(bad) = support.iter().find(|s| s.len() != n) {
            return Err(DistError::SupportLength { want: n, got: bad.len() });
        }
        support.sort();
        support.dedup();
        if support.is_empty() {
            return Err(DistError::EmptySupport);
        }
        Ok(FlatSource { n, support: Support::Explicit(Arc::new(support)) })
    }

    /// A seeded random flat source with support size `2^k`.
    pub fn random_subset(n: usize, k: u32, seed: u64) -> FlatSource {
        assert!((k as usize) <= n && n <= 64, "need k <= n <= 64");
        if k as usize == n {
            return FlatSource::uniform(n);
        }
        let want = 1usize << k;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut picked = std::collections::BTreeSet::new();
        if n <= 20 && want * 2 >= 1usize << n {
            // Dense case: partial Fisher-Yates over the whole space.
            let mut all: Vec<u64> = (0..1u64 << n).collect();
            for i in 0..want {
                let j = rng.gen_range(i..all.len());
                all.swap(i, j);
                picked.insert(all[i]);
            }
        } else {
            while picked.len() < want {
                picked.insert(rng.gen::<u64>() & ((1u64 << n) - 1));
            }
        }
        let support = picked.into_iter().map(|v| BitString::from_u64(v, n)).collect();
        FlatSource { n, support: Support::Explicit(Arc::new(support)) }
    }

    /// Bit length of the source's strings.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Support size.
    pub fn support_len(&self) -> u128 {
        match &self.support {
            Support::Full => 1u128 << self.n,
            Support::Explicit(v) => v.len() as u128,
        }
    }

    /// Exact min-entropy in bits (`log2` of the support size), as f64.
    pub fn min_entropy(&self) -> f64 {
        (self.support_len() as f64).log2()
    }

    /// The `i`-th support element in canonical order.
    pub fn get(&self, i: u128) -> BitString {
        match &self.support {
            Support::Full => BitString::from_u64(i as u64, self.n),
            Support::Explicit(v) => v[i as usize].clone(),
        }
    }

    /// Iterates the support in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = BitString> + '_ {
        (0..self.support_len()).map(move |i| self.get(i))
    }

    /// Short description for reports.
    pub fn describe(&self) -> String {
        format!("flat({}, 2^{:.0})", self.n, self.min_entropy())
    }
}

type TamperFn = Arc<dyn Fn(&BitString) -> BitString + Send + Sync>;

/// A tampering function on `n`-bit strings with an identifier and a
/// fixed-point-freeness certificate.
#[derive(Clone)]
pub struct Tamperer {
    n: usize,
    id: String,
    fixed_point_free: bool,
    map: TamperFn,
}

impl std::fmt::Debug for Tamperer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tamperer({}, n={}, fpf={})", self.id, self.n, self.fixed_point_free)
    }
}

impl Tamperer {
    /// Wraps an arbitrary function; `fixed_point_free` is the caller's claim
    /// and is verified exhaustively when `n <= 20`.
    pub fn new(
        n: usize,
        id: impl Into<String>,
        fixed_point_free: bool,
        map: impl Fn(&BitString) -> BitString + Send + Sync + 'static,
    ) -> Result<Tamperer, DistError> {
        let t = Tamperer { n, id: id.into(), fixed_point_free, map: Arc::new(map) };
        if fixed_point_free && n <= 20 {
            t.check_fixed_point_free()?;
        }
        Ok(t)
    }

    /// Identity map (not fixed-point free; used as the untampered side of a
    /// pair).
    pub fn identity(n: usize) -> Tamperer {
        Tamperer { n, id: "id".into(), fixed_point_free: false, map: Arc::new(|s: &BitString| s.clone()) }
    }

    /// Flips bit `i`. Fixed-point free by construction.
    pub fn bit_flip(n: usize, i: usize) -> Tamperer {
        assert!(i < n);
        Tamperer {
            n,
            id: format!("flip-{i}"),
            fixed_point_free: true,
            map: Arc::new(move |s: &BitString| s.with_flipped(i)),
        }
    }

    /// Xors a fixed nonzero mask; `xor(1..1)` is the complement map.
    /// Fixed-point free because the mask is nonzero.
    pub fn xor_mask(mask: BitString) -> Tamperer {
        assert!(!mask.is_zero(), "mask must be nonzero for fixed-point freeness");
        let n = mask.len();
        let id = if mask == BitString::ones(n) { "complement".into() } else { format!("xor-{mask}") };
        Tamperer {
            n,
            id,
            fixed_point_free: true,
            map: Arc::new(move |s: &BitString| s.xor(&mask).expect("length checked")),
        }
    }

    /// Cyclic shift by one position followed by flipping bit 0.
    ///
    /// Fixed-point free for every `n >= 1`: a fixed point would satisfy
    /// `s[i] = s[i-1]` for all `i >= 1` (so `s` is constant) together with
    /// `s[0] = !s[n-1]`, a contradiction. The claim is additionally checked
    /// exhaustively at construction for `n <= 20`.
    pub fn rotate_flip(n: usize) -> Tamperer {
        assert!(n >= 1);
        Tamperer::new(n, "rotflip", true, move |s: &BitString| {
            let mut out = BitString::from_fn(n, |i| s.get((i + n - 1) % n));
            out.set(0, !out.get(0));
            out
        })
        .expect("rotate-flip has no fixed point for n >= 1")
    }

    /// Seeded affine map `s -> A*s xor c` with invertible `A`, certified
    /// fixed-point free: `A xor I` is arranged to be singular and `c` is
    /// chosen outside its column space, so `A*s xor c = s` has no solution.
    pub fn affine(n: usize, seed: u64) -> Tamperer {
        assert!(n <= 64);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        loop {
            let rows: Vec<u64> = (0..n).map(|_| rng.gen::<u64>() & mask).collect();
            if gf2_rank(&rows) != n {
                continue;
            }
            // m = A xor I; need it singular with a certified excluded vector.
            let m: Vec<u64> = rows.iter().enumerate().map(|(i, &r)| r ^ (1u64 << i)).collect();
            let Some(lambda) = gf2_left_null_vector(&m) else {
                continue;
            };
            let j = lambda.trailing_zeros() as usize;
            let c = 1u64 << j; // lambda . c = 1, so c is not in the column space
            let rows_arc = rows.clone();
            return Tamperer {
                n,
                id: format!("affine-{seed}"),
                fixed_point_free: true,
                map: Arc::new(move |s: &BitString| {
                    let v = s.to_u64();
                    let mut out = 0u64;
                    for (i, &row) in rows_arc.iter().enumerate() {
                        out |= (((row & v).count_ones() as u64) & 1) << i;
                    }
                    BitString::from_u64(out ^ c, n)
                }),
            };
        }
    }

    /// Seeded random fixed-point-free permutation of `{0,1}^n` (a
    /// derangement); stores the full table, hence `n <= 20`.
    pub fn derangement(n: usize, seed: u64) -> Result<Tamperer, DistError> {
        if n > 20 {
            return Err(DistError::TooWideToCheck(n));
        }
        let size = 1usize << n;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut perm: Vec<u32> = (0..size as u32).collect();
        for i in (1..size).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        // Repair fixed points: rotate them among themselves, or swap a lone
        // one with its neighbor's image.
        let fixed: Vec<usize> = (0..size).filter(|&i| perm[i] == i as u32).collect();
        if fixed.len() >= 2 {
            let first = perm[fixed[0]];
            for w in 0..fixed.len() - 1 {
                perm[fixed[w]] = perm[fixed[w + 1]];
            }
            perm[*fixed.last().expect("nonempty")] = first;
        } else if fixed.len() == 1 {
            let f = fixed[0];
            let other = (f + 1) % size;
            perm.swap(f, other);
        }
        let perm = Arc::new(perm);
        let t = Tamperer {
            n,
            id: format!("derange-{seed}"),
            fixed_point_free: true,
            map: Arc::new(move |s: &BitString| BitString::from_u64(perm[s.to_u64() as usize] as u64, n)),
        };
        t.check_fixed_point_free()?;
        Ok(t)
    }

    /// Constant map to `value`; not fixed-point free (it fixes `value`), so
    /// harnesses must pair it with a fixed-point-free partner.
    pub fn constant(value: BitString) -> Tamperer {
        let n = value.len();
        Tamperer {
            n,
            id: format!("const-{value}"),
            fixed_point_free: false,
            map: Arc::new(move |_| value.clone()),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Whether this tamperer is certified to have no fixed point.
    pub fn is_fixed_point_free(&self) -> bool {
        self.fixed_point_free
    }

    /// Applies the map; panics on length mismatch (tamperers are wired to
    /// sources of matching length by the harness).
    pub fn apply(&self, value: &BitString) -> BitString {
        assert_eq!(value.len(), self.n, "tamperer length mismatch");
        let out = (self.map)(value);
        assert_eq!(out.len(), self.n, "tamperer must preserve length");
        out
    }

    /// Exhaustive fixed-point check (n <= 20).
    pub fn check_fixed_point_free(&self) -> Result<(), DistError> {
        if self.n > 20 {
            return Err(DistError::TooWideToCheck(self.n));
        }
        for v in 0..1u64 << self.n {
            let s = BitString::from_u64(v, self.n);
            if (self.map)(&s) == s {
                return Err(DistError::FixedPoint { id: self.id.clone(), point: s.to_string() });
            }
        }
        Ok(())
    }
}

/// The standard tamperer set: every single-bit flip, the complement map, a
/// rotate-and-flip, a certified fixed-point-free affine map, and (for
/// `n <= 20`, where the full table fits) a seeded derangement.
pub fn tamperer_library(n: usize, seed: u64) -> Vec<Tamperer> {
    let mut out: Vec<Tamperer> = (0..n).map(|i| Tamperer::bit_flip(n, i)).collect();
    out.push(Tamperer::xor_mask(BitString::ones(n)));
    out.push(Tamperer::rotate_flip(n));
    out.push(Tamperer::affine(n, seed));
    if n <= 20 {
        out.push(Tamperer::derangement(n, seed.wrapping_add(1)).expect("n <= 20 checked"));
    }
    out
}

fn gf2_rank(rows: &[u64]) -> usize {
    let mut basis: Vec<u64> = Vec::new();
    for &row in rows {
        let mut r = row;
        for &b in &basis {
            r = r.min(r ^ b);
        }
        if r != 0 {
            basis.push(r);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len()
}

/// A nonzero `lambda` with `lambda^T * M = 0`, if `M` (given as rows) is
/// singular.
fn gf2_left_null_vector(rows: &[u64]) -> Option<u64> {
    let n = rows.len();
    // Track row combinations: reduce [M | I] by rows; a zero row in M with
    // nonzero tracker is a left null vector.
    let mut m: Vec<u64> = rows.to_vec();
    let mut track: Vec<u64> = (0..n).map(|i| 1u64 << i).collect();
    let mut row = 0usize;
    for col in 0..n {
        let Some(p) = (row..n).find(|&r| m[r] >> col & 1 == 1) else { continue };
        m.swap(row, p);
        track.swap(row, p);
        for r in 0..n {
            if r != row && m[r] >> col & 1 == 1 {
                m[r] ^= m[row];
                track[r] ^= track[row];
            }
        }
        row += 1;
    }
    (row..n).next().map(|r| track[r])
}

/// An exact joint distribution over a tuple of bit-string fields.
///
/// Outcomes are packed into 128-bit keys; each outcome's probability is
/// `count / total`. Field widths are part of the type so distributions on
/// different outcome spaces cannot be compared by accident.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointDist {
    widths: Vec<u16>,
    counts: HashMap<u128, u128>,
    total: u128,
}

impl JointDist {
    /// Creates an empty distribution (no mass) over the given field widths.
    pub fn empty(widths: Vec<u16>) -> Result<JointDist, DistError> {
        let bits: usize = widths.iter().map(|&w| w as usize).sum();
        if bits > 127 || widths.iter().any(|&w| w > 64) {
            return Err(DistError::OutcomeTooWide(bits));
        }
        Ok(JointDist { widths, counts: HashMap::new(), total: 0 })
    }

    /// Packs a tuple (lengths must match the field widths exactly).
    pub fn pack(&self, fields: &[BitString]) -> u128 {
        assert_eq!(fields.len(), self.widths.len(), "field count mismatch");
        let mut key = 0u128;
        for (f, &w) in fields.iter().zip(&self.widths) {
            assert_eq!(f.len(), w as usize, "field width mismatch");
            key = (key << w) | f.to_u128();
        }
        key
    }

    /// Adds `count` mass to an outcome tuple.
    pub fn add(&mut self, fields: &[BitString], count: u128) {
        let key = self.pack(fields);
        *self.counts.entry(key).or_default() += count;
        self.total += count;
    }

    /// Adds mass by pre-packed key (enumeration fast path).
    pub fn add_packed(&mut self, key: u128, count: u128) {
        *self.counts.entry(key).or_default() += count;
        self.total += count;
    }

    /// Field widths of the outcome tuple.
    pub fn widths(&self) -> &[u16] {
        &self.widths
    }

    /// Total mass denominator.
    pub fn total(&self) -> u128 {
        self.total
    }

    /// Number of distinct outcomes with nonzero mass.
    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    /// Exact probability of a packed outcome.
    pub fn prob_packed(&self, key: u128) -> Sd {
        rat(self.counts.get(&key).copied().unwrap_or(0), self.total)
    }

    /// Exact statistical distance `1/2 * sum |p - q|`.
    pub fn sd(&self, other: &JointDist) -> Result<Sd, DistError> {
        if self.widths != other.widths {
            return Err(DistError::SpaceMismatch {
                left: self.widths.clone(),
                right: other.widths.clone(),
            });
        }
        assert!(self.total > 0 && other.total > 0, "distributions must carry mass");
        // |a/Tp - b/Tq| = |a*Tq - b*Tp| / (Tp*Tq); accumulate numerators in
        // BigInt to stay exact for any totals.
        let tp = BigInt::from(self.total);
        let tq = BigInt::from(other.total);
        let mut acc = BigInt::zero();
        for (key, &a) in &self.counts {
            let b = other.counts.get(key).copied().unwrap_or(0);
            acc += (BigInt::from(a) * &tq - BigInt::from(b) * &tp).abs();
        }
        for (key, &b) in &other.counts {
            if !self.counts.contains_key(key) {
                acc += BigInt::from(b) * &tp;
            }
        }
        Ok(BigRational::new(acc, BigInt::from(2u8) * tp * tq))
    }

    /// Marginal over a subset of field indices (in the given order).
    pub fn marginal(&self, keep: &[usize]) -> JointDist {
        let widths: Vec<u16> = keep.iter().map(|&i| self.widths[i]).collect();
        let mut out = JointDist::empty(widths).expect("marginal narrower than source");
        for (&key, &count) in &self.counts {
            let fields = self.unpack(key);
            let kept: Vec<BitString> = keep.iter().map(|&i| fields[i].clone()).collect();
            out.add(&kept, count);
        }
        out
    }

    /// Unpacks a key into its field tuple.
    pub fn unpack(&self, key: u128) -> Vec<BitString> {
        let mut fields = Vec::with_capacity(self.widths.len());
        let mut shift: usize = self.widths.iter().map(|&w| w as usize).sum();
        for &w in &self.widths {
            shift -= w as usize;
            let v = (key >> shift) & ((1u128 << w) - 1);
            fields.push(BitString::from_u64(v as u64, w as usize));
        }
        fields
    }

    /// Applies a deterministic post-processing map to outcomes; used to
    /// check the data-processing inequality.
    pub fn map_outcomes(
        &self,
        widths: Vec<u16>,
        f: impl Fn(&[BitString]) -> Vec<BitString>,
    ) -> Result<JointDist, DistError> {
        let mut out = JointDist::empty(widths)?;
        for (&key, &count) in &self.counts {
            let mapped = f(&self.unpack(key));
            out.add(&mapped, count);
        }
        Ok(out)
    }

    /// The distribution with field 0 replaced by an independent uniform
    /// `m`-bit string (the ideal side of a non-malleability comparison).
    pub fn with_uniform_first(&self) -> JointDist {
        let m = self.widths[0] as usize;
        let mut out = JointDist { widths: self.widths.clone(), counts: HashMap::new(), total: 0 };
        let rest_bits: usize = self.widths[1..].iter().map(|&w| w as usize).sum();
        let rest_mask = if rest_bits == 0 { 0 } else { (1u128 << rest_bits) - 1 };
        let mut rest_counts: HashMap<u128, u128> = HashMap::new();
        for (&key, &count) in &self.counts {
            *rest_counts.entry(key & rest_mask).or_default() += count;
        }
        for (rest, count) in rest_counts {
            for u in 0..1u128 << m {
                out.add_packed((u << rest_bits) | rest, count);
            }
        }
        debug_assert_eq!(out.total, self.total << m);
        out
    }

    /// Uniform distribution over all tuples of the given widths.
    pub fn uniform(widths: Vec<u16>) -> Result<JointDist, DistError> {
        let mut out = JointDist::empty(widths)?;
        let bits: usize = out.widths.iter().map(|&w| w as usize).sum();
        assert!(bits <= 26, "uniform materialization limited to 26 bits");
        for key in 0..1u128 << bits {
            out.add_packed(key, 1);
        }
        Ok(out)
    }
}

/// Exact statistical distance between two distributions on the same space.
pub fn statistical_distance(p: &JointDist, q: &JointDist) -> Result<Sd, DistError> {
    p.sd(q)
}

/// One tampered evaluation round: an optional tamperer per source
/// (`None` = that source is passed through unmodified).
pub type TamperRound<'a> = Vec<Option<&'a Tamperer>>;

/// An exhaustive extractor-distribution experiment.
pub struct Experiment<'a> {
    /// The function under test; receives one value per source.
    pub ext: &'a (dyn Fn(&[BitString]) -> BitString + Sync),
    /// Independent flat sources, outer loop first.
    pub sources: &'a [FlatSource],
    /// Tampered evaluations; each round contributes one extra output field.
    pub rounds: &'a [TamperRound<'a>],
    /// Indices of sources whose values are appended to the outcome tuple
    /// (the conditioned side of a strong-extractor claim).
    pub condition_on: &'a [usize],
    /// Maximum number of enumerated source tuples (default `2^26`).
    pub budget: Option<u128>,
}

/// Default enumeration budget.
pub const DEFAULT_BUDGET: u128 = 1 << 26;

/// Result of an exhaustive experiment: the real joint distribution, the
/// ideal one (first field uniformized), and their exact distance.
pub struct ExperimentDist {
    pub real: JointDist,
    pub ideal: JointDist,
    pub sd: Sd,
}

/// Enumerates the full product of source supports and returns the exact
/// joint distribution of `(output, tampered outputs..., conditioned
/// sources...)` together with its distance from the uniform-output ideal.
///
/// The enumeration is partitioned over the outer source and merged
/// deterministically (counts are summed), so thread count never changes the
/// result.
pub fn eval_extractor_dist(exp: &Experiment<'_>) -> Result<ExperimentDist, DistError> {
    assert!(!exp.sources.is_empty(), "need at least one source");
    let budget = exp.budget.unwrap_or(DEFAULT_BUDGET);
    let sizes: Vec<u128> = exp.sources.iter().map(|s| s.support_len()).collect();
    let needed: u128 = sizes.iter().product();
    if needed > budget {
        return Err(DistError::ExplosionGuard { needed, budget });
    }
    for round in exp.rounds {
        assert_eq!(round.len(), exp.sources.len(), "round arity mismatch");
        for (t, s) in round.iter().zip(exp.sources) {
            if let Some(t) = t {
                if t.n() != s.n() {
                    return Err(DistError::TampererLength { tamperer: t.n(), value: s.n() });
                }
            }
        }
    }

    // Probe one evaluation for the output width.
    let probe: Vec<BitString> = exp.sources.iter().map(|s| s.get(0)).collect();
    let m = (exp.ext)(&probe).len();
    let mut widths: Vec<u16> = vec![m as u16];
    widths.extend(std::iter::repeat_n(m as u16, exp.rounds.len()));
    widths.extend(exp.condition_on.iter().map(|&i| exp.sources[i].n() as u16));
    let template = JointDist::empty(widths.clone())?;

    let outer = sizes.first().copied().unwrap_or(1);
    let inner: u128 = sizes.iter().skip(1).product();
    let merged: HashMap<u128, u128> = (0..outer as u64)
        .into_par_iter()
        .fold(HashMap::new, |mut acc: HashMap<u128, u128>, oi| {
            let mut values: Vec<BitString> = Vec::with_capacity(exp.sources.len());
            for ii in 0..inner {
                values.clear();
                values.push(exp.sources[0].get(oi as u128));
                let mut rem = ii;
                for (s, &size) in exp.sources.iter().zip(&sizes).skip(1) {
                    values.push(s.get(rem % size));
                    rem /= size;
                }
                let mut fields: Vec<BitString> = Vec::with_capacity(widths.len());
                fields.push((exp.ext)(&values));
                for round in exp.rounds {
                    let tampered: Vec<BitString> = values
                        .iter()
                        .zip(round)
                        .map(|(v, t)| match t {
                            Some(t) => t.apply(v),
                            None => v.clone(),
                        })
                        .collect();
                    fields.push((exp.ext)(&tampered));
                }
                for &ci in exp.condition_on {
                    fields.push(values[ci].clone());
                }
                let key = template.pack(&fields);
                *acc.entry(key).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });

    let mut real = JointDist::empty(widths)?;
    for (k, v) in merged {
        real.add_packed(k, v);
    }
    debug_assert_eq!(real.total(), needed);
    let ideal = real.with_uniform_first();
    let sd = real.sd(&ideal)?;
    Ok(ExperimentDist { real, ideal, sd })
}

/// Pearson chi-square statistic of observed counts against the uniform
/// expectation, returned as `(statistic, p_value)`.
///
/// Used for randomized-sampler sanity checks (the uniformity claims
/// themselves are verified exactly elsewhere).
pub fn chi_square_uniform(counts: &[u64]) -> (f64, f64) {
    let cells = counts.len();
    assert!(cells >= 2, "need at least two cells");
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / cells as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dof = (cells - 1) as f64;
    let dist = statrs::distribution::ChiSquared::new(dof).expect("dof >= 1");
    let p = 1.0 - statrs::distribution::ContinuousCDF::cdf(&dist, stat);
    (stat, p)
}

/// Chi-square goodness-of-fit against explicit expected counts (same
/// total as the observations), returning `(statistic, p_value)` with one
/// degree of freedom fewer than the number of positive-expectation cells.
/// Zero-expectation cells must hold zero counts.
pub fn chi_square_expected(counts: &[u64], expected: &[f64]) -> (f64, f64) {
    assert_eq!(counts.len(), expected.len(), "one expectation per cell");
    let mut stat = 0.0;
    let mut live_cells = 0usize;
    for (&c, &e) in counts.iter().zip(expected) {
        if e == 0.0 {
            assert_eq!(c, 0, "observed count in a zero-expectation cell");
            continue;
        }
        live_cells += 1;
        stat += (c as f64 - e).powi(2) / e;
    }
    assert!(live_cells >= 2, "need at least two cells with mass");
    let dist =
        statrs::distribution::ChiSquared::new((live_cells - 1) as f64).expect("dof >= 1");
    let p = 1.0 - statrs::distribution::ContinuousCDF::cdf(&dist, stat);
    (stat, p)
}
