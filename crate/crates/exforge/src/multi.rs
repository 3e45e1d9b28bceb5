//! Non-malleable extraction from several independent sources, and a seeded
//! tampering-resilient extractor built on top of it.
//!
//! The centerpiece is an *iterated advice-correlation breaker*
//! ([`multi_adv_cb`]): given `s` independent sources and a short advice
//! string that differs between an honest run and every tampered run, it
//! repeatedly (1) tags a working slice of each source with the advice,
//! (2) feeds the tagged slices through a pluggable multi-source
//! non-malleable extractor, and (3) refreshes the working slices by seeded
//! extraction from the full sources with the round output as the seed. One
//! round breaks the correlation with one tampered run; `t` rounds survive
//! `t` simultaneous tamperings. The final round's output is the result and
//! the refresh after it is skipped.
//!
//! The inner multi-source extractor is a plug-in ([`SSourceNmExt`]): any
//! arity, any width, supplied as a callable. The crate ships two
//! instantiations — an adapter over the two-source construction in
//! [`crate::nm2`], and a linear field-blend stand-in of any arity for
//! driving toy experiments. Instantiations of higher arity from the
//! literature (ten sources at polylogarithmic entropy, for instance) drop
//! into the same slot via [`SSourceNmExt::custom`] without touching the
//! iteration.
//!
//! On top of the breaker, [`seeded_tnm_extract`] assembles a seeded
//! extractor designed to stay non-malleable when the *seed* is tampered up
//! to `t` times:
//!
//! 1. a first seed slice extracts one intermediate string per source;
//! 2. an advice generator pairs that slice with a second extraction keyed
//!    by a slice of the first intermediate string;
//! 3. an inner product of fresh slices of the seed and the first
//!    intermediate string derives an internal seed `R`;
//! 4. `R` re-extracts short strings from the seed and every intermediate
//!    string;
//! 5. the advice-correlation breaker, at arity `sources + 1`, combines
//!    them into the output.
//!
//! Every length in both configurations is explicit, so toy instances are
//! exhaustively enumerable; the asymptotic couplings between the lengths
//! (iteration budgets, slice-length ratios) are the planner's department
//! and deliberately not enforced here.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{BitError, BitString};
use crate::gf::FieldCtx;
use crate::ip::{ip_extract, IpCfg, IpError};
use crate::nm2::{nm2_extract, Nm2Cfg};
use crate::seeded::{fold_to_seed_width, lhl_extract, ErrorBound, SeededError, SeededExtCfg};

/// Errors from multi-source configuration and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MultiError {
    /// A named configuration rule was violated.
    #[error("configuration violates: {0}")]
    Cfg(&'static str),
    /// An input's length does not match the configuration.
    #[error("{which} has length {got}, configuration wants {want}")]
    LengthMismatch { which: &'static str, want: usize, got: usize },
    /// The plug-in extractor reported a failure.
    #[error("plug-in {id}: {msg}")]
    Plugin { id: String, msg: String },
    /// A seeded-extraction step failed.
    #[error(transparent)]
    Seeded(#[from] SeededError),
    /// The inner-product step failed.
    #[error(transparent)]
    Ip(#[from] IpError),
    /// A bit-string operation failed.
    #[error(transparent)]
    Bits(#[from] BitError),
}

/// A pluggable non-malleable extractor over `s` independent sources.
///
/// The iteration in [`multi_adv_cb`] only needs three facts about its inner
/// extractor — arity, per-source input width, and output width — plus a
/// total, deterministic callable. Implementations therefore plug in as
/// values. The `error` field is a descriptor for reports: the bound the
/// caller vouches for (a proved bound at design scale, a pinned measurement
/// at toy scale); nothing in the pipeline assumes it.
#[derive(Clone)]
pub struct SSourceNmExt {
    /// Identifier used in error messages and reports.
    pub id: String,
    /// Number of independent sources consumed per call.
    pub s: usize,
    /// Length of each source in bits.
    pub n: usize,
    /// Output length in bits.
    pub out_len: usize,
    /// Vouched error bound, for reports only.
    pub error: ErrorBound,
    call: PlugInFn,
}

/// Implementation body of a source-set extractor plug-in.
pub type PlugInFn = Arc<dyn Fn(&[BitString]) -> Result<BitString, MultiError> + Send + Sync>;

impl fmt::Debug for SSourceNmExt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SSourceNmExt")
            .field("id", &self.id)
            .field("s", &self.s)
            .field("n", &self.n)
            .field("out_len", &self.out_len)
            .field("error", &self.error)
            .finish_non_exhaustive()
    }
}

impl SSourceNmExt {
    /// Wraps an arbitrary callable. The callable must be total and
    /// deterministic on `s` sources of `n` bits each and return exactly
    /// `out_len` bits; [`Self::extract`] enforces the lengths on every call.
    pub fn custom(
        id: impl Into<String>,
        s: usize,
        n: usize,
        out_len: usize,
        error: ErrorBound,
        call: impl Fn(&[BitString]) -> Result<BitString, MultiError> + Send + Sync + 'static,
    ) -> Result<SSourceNmExt, MultiError> {
        if s < 2 {
            return Err(MultiError::Cfg("s >= 2 (a single source has no independent partner)"));
        }
        if n == 0 || out_len == 0 {
            return Err(MultiError::Cfg("source and output widths >= 1"));
        }
        Ok(SSourceNmExt { id: id.into(), s, n, out_len, error, call: Arc::new(call) })
    }

    /// The two-source instantiation: an adapter over [`crate::nm2`].
    ///
    /// `error` is the bound the caller vouches for at `cfg`'s scale
    /// (typically a pinned toy measurement).
    pub fn from_two_source(cfg: Nm2Cfg, error: ErrorBound) -> SSourceNmExt {
        let id = format!("two-source/n{}", cfg.n);
        let (n, out_len) = (cfg.n, cfg.out_len);
        let call_id = id.clone();
        SSourceNmExt {
            id,
            s: 2,
            n,
            out_len,
            error,
            call: Arc::new(move |sources: &[BitString]| {
                nm2_extract(&cfg, &sources[0], &sources[1])
                    .map_err(|e| MultiError::Plugin { id: call_id.clone(), msg: e.to_string() })
            }),
        }
    }

    /// A linear field-blend stand-in of any arity: fold each source to
    /// `out_len` bits and sum `c_i * fold(source_i)` over `GF(2^out_len)`
    /// with distinct nonzero constants `c_i = i + 1`.
    ///
    /// If any single source is uniform and independent of the rest, the
    /// output is exactly uniform conditioned on all other sources — a
    /// strong multi-source extractor, but a *linear* one, so it is not
    /// non-malleable by itself. It exists to exercise the iteration and the
    /// plug-in contract at arities the shipped two-source construction
    /// cannot reach; experiments that rely on it pin whatever distance it
    /// actually achieves.
    pub fn field_blend(s: usize, n: usize, out_len: usize) -> Result<SSourceNmExt, MultiError> {
        if out_len > 32 {
            return Err(MultiError::Cfg("out_len <= 32 (field width cap)"));
        }
        if out_len < 64 - (s as u64).leading_zeros() as usize {
            return Err(MultiError::Cfg("s < 2^out_len (distinct nonzero blend constants)"));
        }
        let ctx = FieldCtx::new(out_len as u32).expect("width validated above");
        // Exactly uniform given any one uniform independent source when the
        // fold is balanced, which `n` a multiple of `out_len` guarantees.
        let error = ErrorBound::from_half_exp(if n.is_multiple_of(out_len) { i64::MIN / 2 } else { 0 });
        SSourceNmExt::custom(format!("field-blend/s{s}/n{n}"), s, n, out_len, error, move |sources| {
            let mut acc = 0u64;
            for (i, source) in sources.iter().enumerate() {
                acc ^= ctx.mul(i as u64 + 1, fold_to_seed_width(source, out_len));
            }
            Ok(BitString::from_u64(acc, out_len))
        })
    }

    /// Runs the extractor, enforcing arity and every length.
    pub fn extract(&self, sources: &[BitString]) -> Result<BitString, MultiError> {
        if sources.len() != self.s {
            return Err(MultiError::LengthMismatch {
                which: "plug-in source count",
                want: self.s,
                got: sources.len(),
            });
        }
        for source in sources {
            if source.len() != self.n {
                return Err(MultiError::LengthMismatch {
                    which: "plug-in source",
                    want: self.n,
                    got: source.len(),
                });
            }
        }
        let out = (self.call)(sources)?;
        if out.len() != self.out_len {
            return Err(MultiError::LengthMismatch {
                which: "plug-in output",
                want: self.out_len,
                got: out.len(),
            });
        }
        Ok(out)
    }
}

/// Configuration of the iterated advice-correlation breaker.
///
/// Works on `s` sources of `n` bits; each round tags the current
/// `slice_len`-bit working slices with the `a`-bit advice (so the plug-in's
/// per-source width must be `slice_len + a`) and, before every round but the
/// last, refreshes the slices by seeded extraction from the full sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiCbCfg {
    /// Number of sources = plug-in arity.
    pub s: usize,
    /// Number of rounds = number of simultaneous tamperings survived.
    pub t: usize,
    /// Advice length in bits.
    pub a: usize,
    /// Working-slice length in bits.
    pub slice_len: usize,
    /// Length of each source in bits.
    pub n: usize,
    /// Refreshes a working slice from a full source with the previous round
    /// output as the seed. Unused (and optional) when `t == 1`.
    pub refresh: Option<SeededExtCfg>,
}

impl MultiCbCfg {
    /// Validates the named structural rules.
    pub fn new(
        s: usize,
        t: usize,
        a: usize,
        slice_len: usize,
        n: usize,
        refresh: Option<SeededExtCfg>,
    ) -> Result<MultiCbCfg, MultiError> {
        if s < 2 {
            return Err(MultiError::Cfg("s >= 2 (a single source has no independent partner)"));
        }
        if t < 1 {
            return Err(MultiError::Cfg("t >= 1 (at least one round)"));
        }
        if a < 1 {
            return Err(MultiError::Cfg("a >= 1 (advice must be non-empty)"));
        }
        if slice_len < 1 || slice_len > n {
            return Err(MultiError::Cfg("1 <= slice_len <= n (the working slice fits in a source)"));
        }
        if let Some(rf) = &refresh {
            if rf.n != n {
                return Err(MultiError::Cfg("refresh source width = n"));
            }
            if rf.m != slice_len {
                return Err(MultiError::Cfg("refresh output width = slice_len"));
            }
        } else if t >= 2 {
            return Err(MultiError::Cfg("refresh extractor present when t >= 2"));
        }
        Ok(MultiCbCfg { s, t, a, slice_len, n, refresh })
    }

    /// Per-source input width the plug-in must accept: `slice_len + a`.
    pub fn ext_input_len(&self) -> usize {
        self.slice_len + self.a
    }

    /// Bits of each source committed per round in the budget ledger: the
    /// working slice plus its image under each of the `t` tamperings.
    pub fn consumed_per_round(&self) -> usize {
        (self.t + 1) * self.slice_len
    }

    /// Two sources, two rounds, sized for the two-source plug-in over
    /// [`Nm2Cfg::toy_nm`] (per-source width `1 + 31 = 32`, 1-bit rounds).
    ///
    /// The smaller [`Nm2Cfg::toy_codec`] is unusable here: its final
    /// extraction selects the same position under both of its seeds, and in
    /// this embedding that position falls inside the advice block, so every
    /// round output would be a constant of the advice.
    pub fn toy_iterated() -> MultiCbCfg {
        let refresh = SeededExtCfg::new(12, 1, 1, 6).expect("preset widths are valid");
        MultiCbCfg::new(2, 2, 31, 1, 12, Some(refresh)).expect("preset obeys its own rules")
    }
}

fn check_plug_in(cfg: &MultiCbCfg, ext: &SSourceNmExt) -> Result<(), MultiError> {
    if ext.s != cfg.s {
        return Err(MultiError::LengthMismatch { which: "plug-in arity", want: cfg.s, got: ext.s });
    }
    if ext.n != cfg.ext_input_len() {
        return Err(MultiError::LengthMismatch {
            which: "plug-in source width",
            want: cfg.ext_input_len(),
            got: ext.n,
        });
    }
    if cfg.t >= 2 {
        let rf = cfg.refresh.as_ref().expect("validated at construction");
        if rf.d != ext.out_len {
            return Err(MultiError::LengthMismatch {
                which: "refresh seed width",
                want: ext.out_len,
                got: rf.d,
            });
        }
    }
    Ok(())
}

/// The iterated advice-correlation breaker.
///
/// Round `i`: tag each working slice with the advice, run the plug-in on
/// the tagged slices, and (except after the last round) refresh every
/// working slice from its full source using the round output as the seed.
/// Returns the last round's output. A budget ledger asserts after every
/// round that the bits committed so far equal `rounds * (t+1) * slice_len`:
/// each round pins one working slice per source together with its `t`
/// tampered images.
pub fn multi_adv_cb(
    cfg: &MultiCbCfg,
    ext: &SSourceNmExt,
    sources: &[BitString],
    alpha: &BitString,
) -> Result<BitString, MultiError> {
    check_plug_in(cfg, ext)?;
    if sources.len() != cfg.s {
        return Err(MultiError::LengthMismatch {
            which: "source count",
            want: cfg.s,
            got: sources.len(),
        });
    }
    for source in sources {
        if source.len() != cfg.n {
            return Err(MultiError::LengthMismatch {
                which: "source",
                want: cfg.n,
                got: source.len(),
            });
        }
    }
    if alpha.len() != cfg.a {
        return Err(MultiError::LengthMismatch { which: "alpha", want: cfg.a, got: alpha.len() });
    }
    let mut slices: Vec<BitString> =
        sources.iter().map(|x| x.slice(0, cfg.slice_len)).collect::<Result<_, _>>()?;
    let mut consumed = 0usize;
    let mut out = BitString::zeros(0);
    for round in 1..=cfg.t {
        let tagged: Vec<BitString> = slices.iter().map(|v| v.concat(alpha)).collect();
        out = ext.extract(&tagged)?;
        consumed += cfg.consumed_per_round();
        assert_eq!(
            consumed,
            round * (cfg.t + 1) * cfg.slice_len,
            "budget ledger: rounds * (t+1) * slice_len bits committed"
        );
        if round < cfg.t {
            let refresh = cfg.refresh.as_ref().expect("validated at construction");
            slices = sources
                .iter()
                .map(|x| lhl_extract(refresh, x, &out))
                .collect::<Result<_, _>>()?;
        }
    }
    Ok(out)
}

/// The advice-ignoring control: validates the advice, then runs the
/// breaker with all-zero advice in its place.
pub fn multi_adv_cb_ignoring_advice(
    cfg: &MultiCbCfg,
    ext: &SSourceNmExt,
    sources: &[BitString],
    alpha: &BitString,
) -> Result<BitString, MultiError> {
    if alpha.len() != cfg.a {
        return Err(MultiError::LengthMismatch { which: "alpha", want: cfg.a, got: alpha.len() });
    }
    multi_adv_cb(cfg, ext, sources, &BitString::zeros(cfg.a))
}

/// Configuration of the seeded extractor that resists `t` seed tamperings.
///
/// All lengths are explicit:
///
/// - `d1`, `d3`: the two halves of the advice (first seed slice, and the
///   extraction of the seed keyed by a `d2`-bit slice of the first
///   intermediate string);
/// - `d5`: length of the two slices whose inner product derives the `r`-bit
///   internal seed;
/// - `z_len`: length of the per-source intermediate strings;
/// - `m1`: width of the re-extracted strings the breaker combines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TnmCfg {
    /// Number of independent sources.
    pub sources: usize,
    /// Number of seed tamperings survived.
    pub t: usize,
    /// Length of each source in bits.
    pub n: usize,
    /// Design min-entropy of each source.
    pub k: usize,
    /// Seed length in bits.
    pub d: usize,
    /// First seed slice, and first advice half.
    pub d1: usize,
    /// Keying slice of the first intermediate string.
    pub d2: usize,
    /// Second advice half.
    pub d3: usize,
    /// Inner-product slice length.
    pub d5: usize,
    /// Internal seed length.
    pub r: usize,
    /// Intermediate string length per source.
    pub z_len: usize,
    /// Re-extracted width fed to the breaker.
    pub m1: usize,
    /// Source-to-intermediate extractor `(n, d1) -> z_len`.
    pub ext_source: SeededExtCfg,
    /// Advice-half extractor `(d, d2) -> d3`.
    pub ext_advice: SeededExtCfg,
    /// Seed re-extractor `(d, r) -> m1`.
    pub ext_seed: SeededExtCfg,
    /// Intermediate re-extractor `(z_len, r) -> m1`.
    pub ext_mid: SeededExtCfg,
    /// Inner product `(d5, d5) -> r`.
    pub ip: IpCfg,
    /// The breaker, at arity `sources + 1` over `m1`-bit inputs.
    pub cb: MultiCbCfg,
}

impl TnmCfg {
    /// Validates the named structural rules and assembles the component
    /// extractors.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sources: usize,
        t: usize,
        n: usize,
        k: usize,
        d: usize,
        d1: usize,
        d2: usize,
        d3: usize,
        d5: usize,
        r: usize,
        z_len: usize,
        m1: usize,
        cb: MultiCbCfg,
    ) -> Result<TnmCfg, MultiError> {
        if sources < 1 {
            return Err(MultiError::Cfg("sources >= 1"));
        }
        if d1 + d5 > d {
            return Err(MultiError::Cfg("seed slices fit: d1 + d5 <= d"));
        }
        if d2 + d5 > z_len {
            return Err(MultiError::Cfg("intermediate slices fit: d2 + d5 <= z_len"));
        }
        if m1 > z_len {
            return Err(MultiError::Cfg("truncation fits: m1 <= z_len"));
        }
        if cb.t != t {
            return Err(MultiError::Cfg("breaker round count = t"));
        }
        if cb.s != sources + 1 {
            return Err(MultiError::Cfg("breaker arity = sources + 1"));
        }
        if cb.n != m1 {
            return Err(MultiError::Cfg("breaker source width = m1"));
        }
        if cb.a != d1 + d3 {
            return Err(MultiError::Cfg("advice length = d1 + d3"));
        }
        // Derived strings (the seed and the intermediates) are designed as
        // full-entropy; the source extractor carries the caller's `k`.
        let ext_source = SeededExtCfg::new(n, d1, z_len, k)?;
        let ext_advice = SeededExtCfg::new(d, d2, d3, d)?;
        let ext_seed = SeededExtCfg::new(d, r, m1, d)?;
        let ext_mid = SeededExtCfg::new(z_len, r, m1, z_len)?;
        let ip = IpCfg::new(d5, r)?;
        Ok(TnmCfg {
            sources,
            t,
            n,
            k,
            d,
            d1,
            d2,
            d3,
            d5,
            r,
            z_len,
            m1,
            ext_source,
            ext_advice,
            ext_seed,
            ext_mid,
            ip,
            cb,
        })
    }

    /// The slice-length scale the asymptotic planner couples `d5` to:
    /// `max(d2, d1 + d3)`. Executable configurations keep `d5` free, so
    /// this is reporting data, not a rule.
    pub fn d4(&self) -> usize {
        self.d2.max(self.d1 + self.d3)
    }

    /// Two sources, one tampering, field-blend plug-in at arity 3 over
    /// 10-bit inputs (`slice 2 + advice 8`), 2-bit output.
    pub fn toy() -> TnmCfg {
        let cb = MultiCbCfg::new(3, 1, 8, 2, 3, None).expect("preset obeys its own rules");
        TnmCfg::new(2, 1, 16, 8, 10, 6, 2, 2, 4, 4, 6, 3, cb).expect("preset obeys its own rules")
    }

    /// One source, one tampering, two-source plug-in over
    /// [`Nm2Cfg::toy_codec`] (per-breaker-source width `3 + 9 = 12`).
    pub fn toy_single_source() -> TnmCfg {
        let cb = MultiCbCfg::new(2, 1, 9, 3, 3, None).expect("preset obeys its own rules");
        TnmCfg::new(1, 1, 14, 10, 12, 8, 1, 1, 4, 4, 8, 3, cb).expect("preset obeys its own rules")
    }

    /// The plug-in the toy preset is sized for.
    pub fn toy_plug_in() -> SSourceNmExt {
        SSourceNmExt::field_blend(3, 10, 2).expect("preset widths are valid")
    }
}

/// The seeded extractor built for seed tampering, start to finish.
///
/// See the module docs for the five steps. The output is the breaker's
/// output: `ext.out_len` bits.
pub fn seeded_tnm_extract(
    cfg: &TnmCfg,
    ext: &SSourceNmExt,
    sources: &[BitString],
    seed: &BitString,
) -> Result<BitString, MultiError> {
    seeded_tnm_inner(cfg, ext, sources, seed, multi_adv_cb)
}

/// The advice-ignoring control of the seeded construction: identical
/// pipeline, but the breaker runs with all-zero advice.
pub fn seeded_tnm_extract_ignoring_advice(
    cfg: &TnmCfg,
    ext: &SSourceNmExt,
    sources: &[BitString],
    seed: &BitString,
) -> Result<BitString, MultiError> {
    seeded_tnm_inner(cfg, ext, sources, seed, multi_adv_cb_ignoring_advice)
}

fn seeded_tnm_inner(
    cfg: &TnmCfg,
    ext: &SSourceNmExt,
    sources: &[BitString],
    seed: &BitString,
    breaker: fn(
        &MultiCbCfg,
        &SSourceNmExt,
        &[BitString],
        &BitString,
    ) -> Result<BitString, MultiError>,
) -> Result<BitString, MultiError> {
    if sources.len() != cfg.sources {
        return Err(MultiError::LengthMismatch {
            which: "source count",
            want: cfg.sources,
            got: sources.len(),
        });
    }
    for source in sources {
        if source.len() != cfg.n {
            return Err(MultiError::LengthMismatch {
                which: "source",
                want: cfg.n,
                got: source.len(),
            });
        }
    }
    if seed.len() != cfg.d {
        return Err(MultiError::LengthMismatch { which: "seed", want: cfg.d, got: seed.len() });
    }
    let seed_slice = seed.slice(0, cfg.d1)?;
    let mids: Vec<BitString> = sources
        .iter()
        .map(|x| lhl_extract(&cfg.ext_source, x, &seed_slice))
        .collect::<Result<_, _>>()?;
    let key = mids[0].slice(0, cfg.d2)?;
    let advice_half = lhl_extract(&cfg.ext_advice, seed, &key)?;
    let alpha = seed_slice.concat(&advice_half);
    let seed_tail = seed.slice(cfg.d1, cfg.d5)?;
    let mid_tail = mids[0].slice(cfg.d2, cfg.d5)?;
    let internal = ip_extract(&cfg.ip, &seed_tail, &mid_tail)?;
    let mut inputs = Vec::with_capacity(cfg.sources + 1);
    inputs.push(lhl_extract(&cfg.ext_seed, seed, &internal)?);
    inputs.push(lhl_extract(&cfg.ext_mid, &mids[0], &internal)?);
    for mid in &mids[1..] {
        inputs.push(mid.slice(0, cfg.m1)?);
    }
    breaker(&cfg.cb, ext, &inputs, &alpha)
}
