//! The split-state non-malleable code built on the two-source extractor.
//!
//! Decoding a codeword `(left, right)` is just running the extractor on
//! the halves. Encoding a message draws a uniform element of the
//! decoder's pre-image of that message, in two stages: first the six
//! conditioning pieces (catalyst slices, breaker slices, fingerprint
//! targets) are drawn uniformly, then the remaining coordinates are
//! filled by inverting the final extraction and solving the fingerprint
//! constraints as affine systems with uniformly drawn kernel components.
//!
//! Exactness of the sampler: the two stages consume
//! `2*(n1 + n3) + 2r` + `(n4 - out)` + `(n5 - r)` + `(n4 + n5 - r)`
//! = `2n - out` uniform bits' worth of choices, every choice sequence
//! produces a distinct codeword (each draw is recoverable from the
//! output), and every output decodes to the message. Summing over all
//! `2^out` messages accounts for every one of the `2^2n` codewords, so
//! the image of encoding IS the decode fiber, hit uniformly, and every
//! fiber has exactly `2^(2n - out)` elements.

use crate::bits::{BitError, BitString};
use crate::breaker::{adv_cb, adv_cb_ignoring_advice};
use crate::dist::{rat, two_pow, Sd, Tamperer};
use crate::gf::FieldCtx;
use crate::hash::canonical_hash;
use crate::iext::iext_invert;
use crate::ip::ip_extract;
use crate::linalg::{solve_affine_uniform, GfMatrix, LinalgError};
use crate::nm2::{nm2_extract, nm2_extract_ignoring_advice, Nm2Cfg, Nm2Error};
use num::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from codec configuration, coding, and the file format.
#[derive(Debug, Error)]
pub enum CodecError {
    /// A named configuration rule failed.
    #[error("invalid configuration: {0}")]
    Cfg(&'static str),
    /// An input had the wrong width.
    #[error("length mismatch for {which}: want {want}, got {got}")]
    LengthMismatch {
        /// Which input was malformed.
        which: &'static str,
        /// Expected bit length.
        want: usize,
        /// Actual bit length.
        got: usize,
    },
    /// The constraint system cannot reach every fingerprint target; the
    /// parameter planner's variables-versus-equations check prevents this
    /// for planned configurations.
    #[error("plan infeasible: {0}")]
    PlanInfeasible(&'static str),
    /// Extractor pipeline failure.
    #[error(transparent)]
    Nm2(#[from] Nm2Error),
    /// Linear-algebra failure other than unsolvable targets.
    #[error(transparent)]
    Linalg(LinalgError),
    /// Malformed codeword bytes.
    #[error("codeword format: {0}")]
    Format(&'static str),
    /// Malformed bit-string payload inside a codeword file.
    #[error(transparent)]
    Bits(#[from] BitError),
}

/// A split-state codeword: two halves of `n` bits each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codeword {
    /// First half (the extractor's first source).
    pub left: BitString,
    /// Second half (the extractor's second source).
    pub right: BitString,
}

/// Codec configuration: the extractor plan plus a control switch.
///
/// Message length is the extractor's output length; block length is `2n`;
/// rate is their quotient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodecCfg {
    /// The underlying two-source extractor configuration.
    pub nm2: Nm2Cfg,
    /// Diagnostic control: when set, both encode and decode run the
    /// pipeline with the correlation breaker ignoring its advice. The
    /// broken codec still round-trips; tampering experiments use it as
    /// the baseline the real codec must beat.
    pub advice_blind: bool,
}

impl CodecCfg {
    /// The real codec for an extractor plan.
    pub fn new(nm2: Nm2Cfg) -> CodecCfg {
        CodecCfg { nm2, advice_blind: false }
    }

    /// The advice-blind control codec for the same plan.
    pub fn broken(nm2: Nm2Cfg) -> CodecCfg {
        CodecCfg { nm2, advice_blind: true }
    }

    /// Message length in bits.
    pub fn msg_len(&self) -> usize {
        self.nm2.out_len
    }

    /// Codeword length in bits (both halves together).
    pub fn block_len(&self) -> usize {
        2 * self.nm2.n
    }

    /// Exact rate `msg_len / block_len`.
    pub fn rate(&self) -> Sd {
        rat(self.msg_len() as u128, self.block_len() as u128)
    }

    /// The code's non-malleability error implied by a realized extractor
    /// error: `2^(msg_len + 1)` times the extractor's distance.
    pub fn code_error_bound(&self, extractor_error: &Sd) -> Sd {
        two_pow(self.msg_len() as i64 + 1) * extractor_error
    }

    /// 8-byte identifier of the underlying plan, as embedded in codeword
    /// files (the control switch is not part of the plan).
    pub fn plan_hash(&self) -> u64 {
        canonical_hash(&self.nm2)
    }
}

/// Decodes a codeword: runs the extractor on the halves. Total for every
/// well-formed codeword under single-symbol fingerprint plans (the seed
/// always suffices); wider sampling propagates the extractor's loud
/// exhaustion error.
pub fn decode(cfg: &CodecCfg, cw: &Codeword) -> Result<BitString, CodecError> {
    let out = if cfg.advice_blind {
        nm2_extract_ignoring_advice(&cfg.nm2, &cw.left, &cw.right)?
    } else {
        nm2_extract(&cfg.nm2, &cw.left, &cw.right)?
    };
    Ok(out)
}

/// Uniform draw from the solution set of `fingerprint(fixed ∘ u) = target`
/// over the unknown suffix `u`. The fingerprint is affine in the source
/// bits once the selector `z` is fixed, so the system is assembled by
/// probing the basis vectors and solved with uniform kernel components.
fn solve_fingerprint_suffix(
    nm2: &Nm2Cfg,
    fixed: &BitString,
    unknown_len: usize,
    z: &BitString,
    target: &BitString,
    rng: &mut impl Rng,
) -> Result<BitString, CodecError> {
    let probe = |u: &BitString| nm2.fingerprint(&fixed.concat(u), z);
    let base = probe(&BitString::zeros(unknown_len))?;
    let gf2 = FieldCtx::new(1).expect("GF(2) always exists");
    let mut mat = GfMatrix::zeros(gf2, nm2.r, unknown_len);
    for j in 0..unknown_len {
        let col = probe(&BitString::zeros(unknown_len).with_flipped(j))?
            .xor(&base)
            .expect("fingerprints share a width");
        for i in 0..nm2.r {
            mat.set(i, j, u64::from(col.get(i)));
        }
    }
    let rhs: Vec<u64> =
        (0..nm2.r).map(|i| u64::from(target.get(i) != base.get(i))).collect();
    let sol = solve_affine_uniform(&mat, &rhs, rng).map_err(|e| match e {
        LinalgError::Inconsistent { .. } => {
            CodecError::PlanInfeasible("fingerprint target unreachable (rank below r)")
        }
        other => CodecError::Linalg(other),
    })?;
    if sol.kernel_dim != unknown_len - nm2.r {
        // A rank deficit would let some drawn targets fail while others
        // succeed, which breaks the sampler's exact-uniformity accounting.
        return Err(CodecError::PlanInfeasible("fingerprint system rank below r"));
    }
    Ok(BitString::from_fn(unknown_len, |i| sol.solution[i] != 0))
}

/// Encodes a message as a uniformly random element of the decode fiber.
pub fn encode(
    cfg: &CodecCfg,
    msg: &BitString,
    rng: &mut impl Rng,
) -> Result<Codeword, CodecError> {
    let nm2 = &cfg.nm2;
    if msg.len() != nm2.out_len {
        return Err(CodecError::LengthMismatch {
            which: "msg",
            want: nm2.out_len,
            got: msg.len(),
        });
    }
    // Stage one: the conditioning pieces, uniform and independent.
    let x1 = BitString::random(nm2.n1, rng);
    let y1 = BitString::random(nm2.n1, rng);
    let x3 = BitString::random(nm2.n3, rng);
    let y3 = BitString::random(nm2.n3, rng);
    let x_fp = BitString::random(nm2.r, rng);
    let y_fp = BitString::random(nm2.r, rng);
    let z = ip_extract(&nm2.ip, &x1, &y1).map_err(Nm2Error::from)?;
    // Surface seed exhaustion before any solving.
    nm2.code.sample_positions(&z, nm2.count).map_err(Nm2Error::from)?;

    // Stage two: fill the remaining coordinates uniformly subject to the
    // constraints the decoder will recompute.
    let advice = BitString::concat_all([&x1, &y1, &x_fp, &y_fp]);
    let v = if cfg.advice_blind {
        adv_cb_ignoring_advice(&nm2.cb, &x3, &y3, &advice).map_err(Nm2Error::from)?
    } else {
        adv_cb(&nm2.cb, &x3, &y3, &advice).map_err(Nm2Error::from)?
    };
    let y4 = iext_invert(&nm2.iext, msg, &v, rng).map_err(Nm2Error::from)?;
    let y5 = solve_fingerprint_suffix(nm2, &y3.concat(&y4), nm2.n5, &z, &y_fp, rng)?;
    let x45 = solve_fingerprint_suffix(nm2, &x3, nm2.n4 + nm2.n5, &z, &x_fp, rng)?;
    let cw = Codeword {
        left: BitString::concat_all([&x1, &x3, &x45]),
        right: BitString::concat_all([&y1, &y3, &y4, &y5]),
    };
    debug_assert_eq!(decode(cfg, &cw).expect("freshly encoded"), *msg);
    Ok(cw)
}

/// Size cap for [`DecodeTable`]: `2n` must stay enumerable in memory.
const TABLE_MAX_BLOCK: usize = 26;

/// The decoder tabulated over the entire codeword space, for exhaustive
/// experiments: fiber counting, tampering distributions, uniformity
/// audits. One message value per entry, indexed by `left * 2^n + right`.
pub struct DecodeTable {
    n: usize,
    out_len: usize,
    vals: Vec<u8>,
}

impl DecodeTable {
    /// Runs the decoder on all `2^2n` codewords. Needs `2n <= 26` and a
    /// message no wider than a byte; decoding must be total on the plan.
    pub fn build(cfg: &CodecCfg) -> Result<DecodeTable, CodecError> {
        let n = cfg.nm2.n;
        if 2 * n > TABLE_MAX_BLOCK {
            return Err(CodecError::Cfg("decode table needs 2n <= 26"));
        }
        if cfg.msg_len() > 8 {
            return Err(CodecError::Cfg("decode table needs out_len <= 8"));
        }
        let mut vals = vec![0u8; 1usize << (2 * n)];
        for lv in 0..1u64 << n {
            let left = BitString::from_u64(lv, n);
            for rv in 0..1u64 << n {
                let right = BitString::from_u64(rv, n);
                let msg = decode(cfg, &Codeword { left: left.clone(), right })?;
                vals[((lv << n) | rv) as usize] = msg.to_u64() as u8;
            }
        }
        Ok(DecodeTable { n, out_len: cfg.msg_len(), vals })
    }

    /// Decoded message value for half values `(left, right)`.
    pub fn get(&self, left: u64, right: u64) -> u64 {
        u64::from(self.vals[((left << self.n) | right) as usize])
    }

    /// Source length of each half.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Message width in bits.
    pub fn out_len(&self) -> usize {
        self.out_len
    }

    /// Number of codewords decoding to each message value.
    pub fn fiber_sizes(&self) -> Vec<u64> {
        let mut counts = vec![0u64; 1 << self.out_len];
        for &v in &self.vals {
            counts[v as usize] += 1;
        }
        counts
    }
}

const MAGIC: &[u8; 4] = b"NMC1";

/// Serializes a codeword with its plan header: magic `NMC1`, 4-byte
/// big-endian source length `n`, 8-byte plan hash, then both halves in
/// canonical bit-string bytes.
pub fn codeword_to_bytes(cfg: &CodecCfg, cw: &Codeword) -> Result<Vec<u8>, CodecError> {
    for (which, half) in [("left", &cw.left), ("right", &cw.right)] {
        if half.len() != cfg.nm2.n {
            return Err(CodecError::LengthMismatch { which, want: cfg.nm2.n, got: half.len() });
        }
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(cfg.nm2.n as u32).to_be_bytes());
    out.extend_from_slice(&cfg.plan_hash().to_be_bytes());
    out.extend_from_slice(&cw.left.to_bytes());
    out.extend_from_slice(&cw.right.to_bytes());
    Ok(out)
}

/// Parses and validates a codeword file against a configuration: magic,
/// declared source length, plan hash, canonical halves, no trailing bytes.
pub fn codeword_from_bytes(cfg: &CodecCfg, bytes: &[u8]) -> Result<Codeword, CodecError> {
    if bytes.len() < 16 {
        return Err(CodecError::Format("shorter than the fixed header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(CodecError::Format("bad magic"));
    }
    let n = u32::from_be_bytes(bytes[4..8].try_into().expect("sliced")) as usize;
    if n != cfg.nm2.n {
        return Err(CodecError::Format("declared source length does not match the plan"));
    }
    let hash = u64::from_be_bytes(bytes[8..16].try_into().expect("sliced"));
    if hash != cfg.plan_hash() {
        return Err(CodecError::Format("plan hash mismatch"));
    }
    let (left, rest) = BitString::read_from(&bytes[16..])?;
    let (right, rest) = BitString::read_from(rest)?;
    if !rest.is_empty() {
        return Err(CodecError::Format("trailing bytes after the halves"));
    }
    for (which, half) in [("left", &left), ("right", &right)] {
        if half.len() != n {
            return Err(CodecError::LengthMismatch { which, want: n, got: half.len() });
        }
    }
    Ok(Codeword { left, right })
}

/// How a tampering experiment spends its effort.
pub enum TamperBudget<'a> {
    /// Every codeword once, via a prebuilt decode table (exact counts).
    Exhaustive(&'a DecodeTable),
    /// `per_message` fresh encodings per message value, deterministic in
    /// `seed`.
    Sampled {
        /// Encodings per message value.
        per_message: u64,
        /// Stream seed.
        seed: u64,
    },
}

/// Best approximation of tampered decoding by a mixture of trivial
/// manipulations (keep the message, or replace it with a fixed constant).
///
/// For one-bit messages the fit is exact (the optimal mixture has a
/// closed form); for wider messages it is a feasible mixture whose
/// distance upper-bounds the optimum.
#[derive(Debug, Clone)]
pub struct TrivialFit {
    /// Mass on the identity manipulation.
    pub identity_mass: Sd,
    /// Mass on each constant outcome, indexed by message value.
    pub constant_mass: Vec<Sd>,
    /// Distance of each message's tampered-outcome distribution from the
    /// mixture's prediction.
    pub per_message_sd: Vec<Sd>,
    /// Worst case over messages.
    pub max_sd: Sd,
    /// Whether the mixture is provably optimal (one-bit messages).
    pub exact: bool,
}

/// Outcome of a tampering experiment.
pub struct TamperReport {
    /// Tamperer identifier for the left half.
    pub tamper_left: String,
    /// Tamperer identifier for the right half.
    pub tamper_right: String,
    /// `histograms[msg][outcome]`: decoded-outcome counts per encoded
    /// message value.
    pub histograms: Vec<Vec<u64>>,
    /// Best trivial-manipulation mixture for those histograms.
    pub fit: TrivialFit,
}

/// Fits the best trivial-manipulation mixture to per-message outcome
/// histograms. See [`TrivialFit`] for the exactness contract.
pub fn fit_trivial_mixture(histograms: &[Vec<u64>]) -> TrivialFit {
    let msgs = histograms.len();
    assert!(msgs >= 2 && msgs.is_power_of_two(), "one histogram per message value");
    let dists: Vec<Vec<Sd>> = histograms
        .iter()
        .map(|h| {
            assert_eq!(h.len(), msgs, "square outcome space");
            let total: u128 = h.iter().map(|&c| u128::from(c)).sum();
            assert!(total > 0, "empty histogram");
            h.iter().map(|&c| rat(u128::from(c), total)).collect()
        })
        .collect();
    let (identity_mass, constant_mass, exact) = if msgs == 2 {
        // Closed form: with outcome probabilities p = D₀(0), s = D₁(0),
        // identity mass max(0, p - s) fits both histograms exactly when
        // p >= s; otherwise no identity mass helps and the best constants
        // split the difference.
        let p = dists[0][0].clone();
        let s = dists[1][0].clone();
        if p >= s {
            let a = &p - &s;
            (a, vec![s, rat(1, 1) - &p], true)
        } else {
            let mid = (&p + &s) / rat(2, 1);
            (Sd::zero(), vec![mid.clone(), rat(1, 1) - mid], true)
        }
    } else {
        // Feasible mixture: cap the identity mass at the worst diagonal
        // probability, then average the residual histograms.
        let a = (0..msgs).map(|x| dists[x][x].clone()).min().expect("nonempty");
        let q: Vec<Sd> = (0..msgs)
            .map(|c| {
                let sum: Sd = (0..msgs)
                    .map(|x| {
                        let sub = if x == c { a.clone() } else { Sd::zero() };
                        &dists[x][c] - sub
                    })
                    .sum();
                sum / rat(msgs as u128, 1)
            })
            .collect();
        (a, q, false)
    };
    let per_message_sd: Vec<Sd> = (0..msgs)
        .map(|x| {
            let mut l1 = Sd::zero();
            for c in 0..msgs {
                let mut predicted = constant_mass[c].clone();
                if c == x {
                    predicted += identity_mass.clone();
                }
                l1 += (&dists[x][c] - predicted).abs();
            }
            l1 / rat(2, 1)
        })
        .collect();
    let max_sd = per_message_sd.iter().cloned().max().expect("nonempty");
    TrivialFit { identity_mass, constant_mass, per_message_sd, max_sd, exact }
}

/// Runs the split-state tampering experiment: encode each message, tamper
/// the halves independently, decode, and fit the trivial-manipulation
/// mixture to the outcome histograms.
pub fn tamper_experiment(
    cfg: &CodecCfg,
    tamper_left: &Tamperer,
    tamper_right: &Tamperer,
    budget: TamperBudget<'_>,
) -> Result<TamperReport, CodecError> {
    let n = cfg.nm2.n;
    let m = cfg.msg_len();
    assert_eq!(tamper_left.n(), n, "left tamperer acts on a half");
    assert_eq!(tamper_right.n(), n, "right tamperer acts on a half");
    if m > 8 {
        return Err(CodecError::Cfg("experiment histograms need out_len <= 8"));
    }
    let mut histograms = vec![vec![0u64; 1 << m]; 1 << m];
    match budget {
        TamperBudget::Exhaustive(table) => {
            assert_eq!(table.n(), n, "table built for this plan");
            for lv in 0..1u64 << n {
                let fl = tamper_left.apply(&BitString::from_u64(lv, n)).to_u64();
                for rv in 0..1u64 << n {
                    let gr = tamper_right.apply(&BitString::from_u64(rv, n)).to_u64();
                    let msg = table.get(lv, rv);
                    let out = table.get(fl, gr);
                    histograms[msg as usize][out as usize] += 1;
                }
            }
        }
        TamperBudget::Sampled { per_message, seed } => {
            for msg_val in 0..1u64 << m {
                let msg = BitString::from_u64(msg_val, m);
                let mut rng = ChaCha12Rng::seed_from_u64(seed ^ (msg_val << 32));
                for _ in 0..per_message {
                    let cw = encode(cfg, &msg, &mut rng)?;
                    let tampered = Codeword {
                        left: tamper_left.apply(&cw.left),
                        right: tamper_right.apply(&cw.right),
                    };
                    let out = decode(cfg, &tampered)?;
                    histograms[msg_val as usize][out.to_u64() as usize] += 1;
                }
            }
        }
    }
    let fit = fit_trivial_mixture(&histograms);
    Ok(TamperReport {
        tamper_left: tamper_left.id().to_string(),
        tamper_right: tamper_right.id().to_string(),
        histograms,
        fit,
    })
}
