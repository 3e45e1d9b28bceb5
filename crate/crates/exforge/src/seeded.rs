//! Strong seeded extraction by leftover hashing over `GF(2^(d+1))`.
//!
//! All seeded extractors in this crate are instantiated by multiplication in
//! a binary field: fold the source to the seed width, multiply by the seed
//! (padded with a trailing 1 so it is never the zero element), and keep the
//! leading output bits. The hash family `{x -> first m bits of x*(y|1)}` is
//! universal whenever the source is no longer than the seed, so the leftover
//! hash lemma gives the exact, testable strongness bound
//! `SD((out, Y), (U_m, Y)) <= 2^((m-k)/2 - 1)` for any source of
//! min-entropy `k`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::dist::{le_two_pow_half, two_pow, Sd};
use crate::gf::FieldCtx;

/// Errors from seeded-extractor configuration and evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeededError {
    /// A named configuration rule was violated.
    #[error("configuration violates: {0}")]
    Cfg(&'static str),
    /// An input's length does not match the configuration.
    #[error("{which} has length {got}, configuration wants {want}")]
    LengthMismatch { which: &'static str, want: usize, got: usize },
}

/// An exact error bound of the form `2^(half_exp/2) + extra`.
///
/// Leftover hashing produces bounds with half-integer exponents
/// (`2^((m-k)/2 - 1)`); average-case wrapping adds an exact rational. Both
/// parts are kept symbolically so measured distances can be compared against
/// the bound without rounding. Serialized as
/// `{half_exp, extra_num, extra_den}` with decimal-string integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ErrorBoundRepr", into = "ErrorBoundRepr")]
pub struct ErrorBound {
    /// Twice the exponent: the power part is `2^(half_exp/2)`.
    pub half_exp: i64,
    /// Exact rational additive slack (zero unless average-case wrapped).
    pub extra: Sd,
}

#[derive(Serialize, Deserialize)]
struct ErrorBoundRepr {
    half_exp: i64,
    extra_num: String,
    extra_den: String,
}

impl From<ErrorBound> for ErrorBoundRepr {
    fn from(b: ErrorBound) -> ErrorBoundRepr {
        ErrorBoundRepr {
            half_exp: b.half_exp,
            extra_num: b.extra.numer().to_string(),
            extra_den: b.extra.denom().to_string(),
        }
    }
}

impl From<ErrorBoundRepr> for ErrorBound {
    fn from(r: ErrorBoundRepr) -> ErrorBound {
        let num: num::BigInt = r.extra_num.parse().expect("serialized by us");
        let den: num::BigInt = r.extra_den.parse().expect("serialized by us");
        ErrorBound { half_exp: r.half_exp, extra: Sd::new(num, den) }
    }
}

impl ErrorBound {
    /// The pure power bound `2^(e/2)`.
    pub fn from_half_exp(half_exp: i64) -> ErrorBound {
        ErrorBound { half_exp, extra: Sd::from_integer(0.into()) }
    }

    /// This bound plus an exact rational.
    pub fn plus(&self, delta: Sd) -> ErrorBound {
        ErrorBound { half_exp: self.half_exp, extra: self.extra.clone() + delta }
    }

    /// Exact test of `value <= bound`.
    pub fn admits(&self, value: &Sd) -> bool {
        let diff = value - &self.extra;
        if diff <= Sd::from_integer(0.into()) {
            return true;
        }
        le_two_pow_half(&diff, self.half_exp)
    }

    /// Nearest f64, for reports.
    pub fn to_f64(&self) -> f64 {
        let power = 2f64.powf(self.half_exp as f64 / 2.0);
        power + crate::dist::to_f64(&self.extra)
    }

    /// Exact rational value when the exponent is integral, else `None`.
    pub fn exact_rational(&self) -> Option<Sd> {
        (self.half_exp % 2 == 0).then(|| two_pow(self.half_exp / 2) + self.extra.clone())
    }
}

impl std::fmt::Display for ErrorBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.half_exp % 2 == 0 {
            write!(f, "2^({})", self.half_exp / 2)?;
        } else {
            write!(f, "2^({}/2)", self.half_exp)?;
        }
        if !self.extra.eq(&Sd::from_integer(0.into())) {
            write!(f, " + {}", self.extra)?;
        }
        Ok(())
    }
}

/// Configuration of one strong seeded extractor
/// `{0,1}^n x {0,1}^d -> {0,1}^m` designed for min-entropy `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeededExtCfg {
    /// Source length in bits.
    pub n: usize,
    /// Seed length in bits.
    pub d: usize,
    /// Output length in bits.
    pub m: usize,
    /// Design min-entropy of the source.
    pub k: usize,
    /// Strongness bound; `2^((m-k)/2 - 1)` at construction, possibly with
    /// average-case slack added by [`avg_case_wrap`].
    pub eps_bound: ErrorBound,
}

impl SeededExtCfg {
    /// Validates `1 <= m <= min(d, k)`, `k <= n`, and `d <= 31` (the
    /// multiplication runs over `GF(2^(d+1))`, and field widths are capped
    /// at 32), then computes the leftover-hashing bound.
    pub fn new(n: usize, d: usize, m: usize, k: usize) -> Result<SeededExtCfg, SeededError> {
        if m == 0 {
            return Err(SeededError::Cfg("m >= 1"));
        }
        if m > d {
            return Err(SeededError::Cfg("m <= d"));
        }
        if m > k {
            return Err(SeededError::Cfg("m <= k"));
        }
        if k > n {
            return Err(SeededError::Cfg("k <= n"));
        }
        if d > 31 {
            return Err(SeededError::Cfg("d <= 31 (field width cap)"));
        }
        let half_exp = m as i64 - k as i64 - 2;
        Ok(SeededExtCfg { n, d, m, k, eps_bound: ErrorBound::from_half_exp(half_exp) })
    }

    fn ctx(&self) -> FieldCtx {
        FieldCtx::new(self.d as u32 + 1).expect("d+1 <= 32 validated at construction")
    }
}

/// Folds `x` to `d` bits: the xor of its consecutive `d`-bit chunks, with
/// the final partial chunk (or a short `x`) zero-padded at the low end.
pub(crate) fn fold_to_seed_width(x: &BitString, d: usize) -> u64 {
    let mut acc = 0u64;
    let mut start = 0;
    while start < x.len() {
        let take = d.min(x.len() - start);
        acc ^= x.u64_window(start, take) << (d - take);
        start += take;
    }
    acc
}

/// Strong seeded extraction: the first `m` bits of
/// `fold(x) * (y | 1)` over `GF(2^(d+1))`.
///
/// For a fixed seed the map `x -> output` is linear over GF(2), and the
/// all-zero source maps to all-zero output under every seed.
pub fn lhl_extract(cfg: &SeededExtCfg, x: &BitString, y: &BitString) -> Result<BitString, SeededError> {
    if x.len() != cfg.n {
        return Err(SeededError::LengthMismatch { which: "x", want: cfg.n, got: x.len() });
    }
    if y.len() != cfg.d {
        return Err(SeededError::LengthMismatch { which: "y", want: cfg.d, got: y.len() });
    }
    let ctx = cfg.ctx();
    let x_elt = fold_to_seed_width(x, cfg.d);
    let y_elt = (y.to_u64() << 1) | 1; // trailing 1: never the zero element
    let prod = ctx.mul(x_elt, y_elt);
    Ok(BitString::from_u64(prod >> (cfg.d + 1 - cfg.m), cfg.m))
}

/// Converts a worst-case configuration into its average-case form: the same
/// extractor also works when the source only has *average* conditional
/// min-entropy `k + slack`, at error `eps + 2^(-slack)`.
pub fn avg_case_wrap(cfg: &SeededExtCfg, slack: usize) -> Result<SeededExtCfg, SeededError> {
    if slack == 0 {
        return Err(SeededError::Cfg("slack >= 1"));
    }
    let k = cfg.k + slack;
    if k > cfg.n {
        return Err(SeededError::Cfg("k + slack <= n"));
    }
    Ok(SeededExtCfg {
        n: cfg.n,
        d: cfg.d,
        m: cfg.m,
        k,
        eps_bound: cfg.eps_bound.plus(two_pow(-(slack as i64))),
    })
}
