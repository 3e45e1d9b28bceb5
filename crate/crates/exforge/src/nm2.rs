//! The two-source non-malleable extractor.
//!
//! Both `n`-bit sources are sliced the same way: a leading block feeds an
//! inner-product catalyst, whose output samples a handful of symbols from
//! Reed-Solomon encodings of the remainders (each remainder written
//! backwards before encoding, so the trailing slices become the leading,
//! low-degree message symbols). The slices and sampled symbols form the
//! advice for a correlation breaker over the next pair of slices, and the
//! breaker output seeds an invertible linear extraction from one further
//! slice.
//!
//! The slice widths, symbol width, and component shapes are explicit
//! configuration; the constructor enforces the structural rules that the
//! pipeline and its pre-image sampler need (exact partition, whole-symbol
//! alignment of the free slices, component width agreement). Asymptotic
//! proportionality rules live in the parameter planner, not here.

use crate::bits::BitString;
use crate::breaker::{adv_cb, adv_cb_ignoring_advice, AdvCbCfg, BreakerError};
use crate::iext::{iext_extract, IExtCfg, IExtError};
use crate::ip::{ip_extract, IpCfg, IpError};
use crate::rs::{RsCode, RsError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from configuration and evaluation.
#[derive(Debug, Error)]
pub enum Nm2Error {
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
    /// Catalyst failure.
    #[error(transparent)]
    Ip(#[from] IpError),
    /// Correlation-breaker failure.
    #[error(transparent)]
    Breaker(#[from] BreakerError),
    /// Fingerprint-code failure (including loud sampling exhaustion).
    #[error(transparent)]
    Code(#[from] RsError),
    /// Final-extraction failure.
    #[error(transparent)]
    IExt(#[from] IExtError),
}

/// Configuration: slice widths and component shapes.
///
/// Each source splits as `(first, rest)` with `|first| = n1`, and the
/// rest as `(third, fourth, fifth)` of widths `n3`, `n4`, `n5`
/// (`n1 + n3 + n4 + n5 = n`). The symbol width is `w = ceil(log2 n)` and
/// the fingerprint takes `count = r / w` distinct codeword symbols.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Nm2Cfg {
    /// Length of each source in bits.
    pub n: usize,
    /// Catalyst slice width.
    pub n1: usize,
    /// Breaker input width.
    pub n3: usize,
    /// Final-extraction source width.
    pub n4: usize,
    /// Trailing free width.
    pub n5: usize,
    /// Catalyst output width; also the fingerprint width per source.
    pub r: usize,
    /// Symbol width of the fingerprint code.
    pub w: usize,
    /// Number of sampled codeword symbols per source.
    pub count: usize,
    /// Fingerprint code: `ceil((n - n1) / w)` message symbols, `n`
    /// codeword symbols.
    pub code: RsCode,
    /// Catalyst.
    pub ip: IpCfg,
    /// Advice-driven correlation breaker over the `n3` slices.
    pub cb: AdvCbCfg,
    /// Invertible final extraction from the `n4` slice.
    pub iext: IExtCfg,
    /// Output width (the final extraction's output).
    pub out_len: usize,
}

impl Nm2Cfg {
    /// Validates the structural rules (each failure names its rule) and
    /// assembles the fingerprint code and catalyst.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        n1: usize,
        n3: usize,
        n4: usize,
        n5: usize,
        r: usize,
        cb: AdvCbCfg,
        iext: IExtCfg,
    ) -> Result<Nm2Cfg, Nm2Error> {
        if n < 2 {
            return Err(Nm2Error::Cfg("n >= 2"));
        }
        if n1 + n3 + n4 + n5 != n {
            return Err(Nm2Error::Cfg("slices partition n (n1 + n3 + n4 + n5 == n)"));
        }
        if n1 < 1 {
            return Err(Nm2Error::Cfg("n1 >= 1"));
        }
        let w = (usize::BITS - (n - 1).leading_zeros()) as usize;
        if r < w || !r.is_multiple_of(w) {
            return Err(Nm2Error::Cfg("r == count * w with count >= 1 (whole sampled symbols)"));
        }
        let count = r / w;
        if count > n {
            return Err(Nm2Error::Cfg("count <= n (distinct codeword symbols)"));
        }
        if !n5.is_multiple_of(w) {
            return Err(Nm2Error::Cfg("w divides n5 (whole free symbols on the second source)"));
        }
        if n5 < r {
            return Err(Nm2Error::Cfg("n5 >= r (free symbols cover the sampled equations)"));
        }
        if !(n4 + n5).is_multiple_of(w) {
            return Err(Nm2Error::Cfg("w divides n4 + n5 (first-source unknowns are whole symbols)"));
        }
        if cb.x_len != n3 || cb.y_len != n3 {
            return Err(Nm2Error::Cfg("breaker input widths = n3"));
        }
        if cb.a_raw != 2 * n1 + 2 * r {
            return Err(Nm2Error::Cfg("breaker advice length = 2*n1 + 2*r"));
        }
        if iext.n != n4 {
            return Err(Nm2Error::Cfg("final-extraction source width = n4"));
        }
        if iext.d != cb.out_len {
            return Err(Nm2Error::Cfg("final-extraction seed width = breaker output"));
        }
        let code = RsCode::new(w as u32, (n - n1).div_ceil(w), n)?;
        let ip = IpCfg::new(n1, r)?;
        let out_len = iext.out_len;
        Ok(Nm2Cfg { n, n1, n3, n4, n5, r, w, count, code, ip, cb, iext, out_len })
    }

    /// Codec-scale preset: `n = 12`, one sampled symbol over `GF(2^4)`,
    /// 1-bit breaker stages, 1-bit output. Small enough that the whole
    /// `2n`-bit codeword space is exhaustively enumerable; the breaker is
    /// structurally present but too narrow to carry a measurable advice
    /// margin, which the codec criteria (exact round-trip and fiber
    /// uniformity) do not need.
    pub fn toy_codec() -> Nm2Cfg {
        let cb = AdvCbCfg::new(2, 2, 12, 2, 2, 2, 1, 1, 1).expect("preset widths");
        let iext = IExtCfg::custom(4, 1, 1, 1, 1).expect("preset widths");
        Nm2Cfg::new(12, 2, 2, 4, 4, 4, cb, iext).expect("preset widths")
    }

    /// Measurement-scale preset: `n = 32`, one sampled symbol over
    /// `GF(2^5)`, 3-bit breaker stages (wide enough for the advice signal
    /// to survive the chained stages), 1-bit output honoring the
    /// final-extraction halving (`2 * out_len < breaker output`).
    pub fn toy_nm() -> Nm2Cfg {
        let cb = AdvCbCfg::new(12, 12, 30, 6, 6, 6, 3, 3, 3).expect("preset widths");
        let iext = IExtCfg::custom(5, 3, 3, 1, 1).expect("preset widths");
        Nm2Cfg::new(32, 10, 12, 5, 5, 5, cb, iext).expect("preset widths")
    }

    /// Splits a source into `(first, third, fourth, fifth)` slices.
    pub fn slices(
        &self,
        v: &BitString,
        which: &'static str,
    ) -> Result<(BitString, BitString, BitString, BitString), Nm2Error> {
        if v.len() != self.n {
            return Err(Nm2Error::LengthMismatch { which, want: self.n, got: v.len() });
        }
        Ok((
            v.slice(0, self.n1).expect("n1 <= n"),
            v.slice(self.n1, self.n3).expect("partition"),
            v.slice(self.n1 + self.n3, self.n4).expect("partition"),
            v.slice(self.n1 + self.n3 + self.n4, self.n5).expect("partition"),
        ))
    }

    /// The `r`-bit fingerprint of a source's `rest` block (everything
    /// after the catalyst slice): `count` symbols of the Reed-Solomon
    /// encoding of the reversed block, selected by `z`. Sampling consumes
    /// `w`-bit chunks of `z` and skips duplicates; running out of chunks
    /// is a loud failure.
    pub fn fingerprint(&self, rest: &BitString, z: &BitString) -> Result<BitString, Nm2Error> {
        let msg = self.code.message_from_bits(&rest.reversed())?;
        let codeword = self.code.encode(&msg)?;
        Ok(self.code.sample_symbols(z, &codeword, self.count)?)
    }
}

/// The advice-consuming tail of the pipeline:
/// `W = IExt(fourth_y, AdvCB(third_x, third_y, advice))`.
///
/// Taking exactly these inputs is the dataflow guarantee the analysis
/// rests on: given the advice, the output reads nothing of either source
/// beyond the `third` slices and the second source's `fourth` slice.
pub fn nm2_finish(
    cfg: &Nm2Cfg,
    x3: &BitString,
    y3: &BitString,
    y4: &BitString,
    advice: &BitString,
) -> Result<BitString, Nm2Error> {
    let v = adv_cb(&cfg.cb, x3, y3, advice)?;
    Ok(iext_extract(&cfg.iext, y4, &v)?)
}

/// Computes the advice `first_x ∘ first_y ∘ fingerprint_x ∘ fingerprint_y`
/// for a source pair, plus the slices the tail consumes.
fn advice_and_parts(
    cfg: &Nm2Cfg,
    x: &BitString,
    y: &BitString,
) -> Result<(BitString, BitString, BitString, BitString), Nm2Error> {
    let (x1, x3, _, _) = cfg.slices(x, "x")?;
    let (y1, y3, y4, _) = cfg.slices(y, "y")?;
    let z = ip_extract(&cfg.ip, &x1, &y1)?;
    let x_rest = x.slice(cfg.n1, cfg.n - cfg.n1).expect("rest");
    let y_rest = y.slice(cfg.n1, cfg.n - cfg.n1).expect("rest");
    let x_fp = cfg.fingerprint(&x_rest, &z)?;
    let y_fp = cfg.fingerprint(&y_rest, &z)?;
    let advice = BitString::concat_all([&x1, &y1, &x_fp, &y_fp]);
    Ok((advice, x3, y3, y4))
}

/// The full extraction.
pub fn nm2_extract(cfg: &Nm2Cfg, x: &BitString, y: &BitString) -> Result<BitString, Nm2Error> {
    let (advice, x3, y3, y4) = advice_and_parts(cfg, x, y)?;
    nm2_finish(cfg, &x3, &y3, &y4, &advice)
}

/// Broken control: identical pipeline but the correlation breaker ignores
/// the advice.
pub fn nm2_extract_ignoring_advice(
    cfg: &Nm2Cfg,
    x: &BitString,
    y: &BitString,
) -> Result<BitString, Nm2Error> {
    let (advice, x3, y3, y4) = advice_and_parts(cfg, x, y)?;
    let v = adv_cb_ignoring_advice(&cfg.cb, &x3, &y3, &advice)?;
    Ok(iext_extract(&cfg.iext, &y4, &v)?)
}

/// The advice-channel experiment: evaluates the tail twice with the
/// breaker inputs held at their untampered values and only the advice
/// differing — computed from `(x, y)` versus `(x_tampered, y_tampered)`.
///
/// With the advice ignored the two runs are identical by construction
/// (joint distance from fresh-uniform exactly `1 - 2^-out_len`); the real
/// construction must land strictly below that ceiling. Source-tampering
/// experiments cannot show this margin at executable widths because any
/// tamper also drifts the control's slice inputs.
pub fn nm2_advice_channel_pair(
    cfg: &Nm2Cfg,
    x: &BitString,
    y: &BitString,
    x_tampered: &BitString,
    y_tampered: &BitString,
) -> Result<(BitString, BitString), Nm2Error> {
    let (advice, x3, y3, y4) = advice_and_parts(cfg, x, y)?;
    let (advice_t, _, _, _) = advice_and_parts(cfg, x_tampered, y_tampered)?;
    Ok((nm2_finish(cfg, &x3, &y3, &y4, &advice)?, nm2_finish(cfg, &x3, &y3, &y4, &advice_t)?))
}
