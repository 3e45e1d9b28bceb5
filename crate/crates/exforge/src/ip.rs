//! The block inner-product two-source extractor, strong in both sources.
//!
//! Inputs are split into `m`-bit blocks read as `GF(2^m)` elements and the
//! output is the field inner product. For sources of min-entropy `k1` and
//! `k2` the output is `2^(-(k1+k2-n-m-1)/2)`-close to uniform even jointly
//! with either source.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::gf::FieldCtx;

/// Errors from inner-product configuration and evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IpError {
    /// A named configuration rule was violated.
    #[error("configuration violates: {0}")]
    Cfg(&'static str),
    /// An input's length does not match the configuration.
    #[error("{which} has length {got}, configuration wants {want}")]
    LengthMismatch { which: &'static str, want: usize, got: usize },
}

/// Configuration of the inner-product extractor
/// `{0,1}^n x {0,1}^n -> {0,1}^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpCfg {
    /// Input length of each source.
    pub n: usize,
    /// Output length (= block width).
    pub m: usize,
    /// Length after zero-padding to a multiple of `m`; equals `n` when `m`
    /// divides `n`.
    pub padded_n: usize,
}

impl IpCfg {
    /// Validates `1 <= m <= 32` and records the padded length: inputs whose
    /// length is not a multiple of `m` are zero-padded at the high end of the
    /// final block.
    pub fn new(n: usize, m: usize) -> Result<IpCfg, IpError> {
        if n == 0 {
            return Err(IpError::Cfg("n >= 1"));
        }
        if m == 0 {
            return Err(IpError::Cfg("m >= 1"));
        }
        if m > 32 {
            return Err(IpError::Cfg("m <= 32 (field width cap)"));
        }
        let padded_n = n.div_ceil(m) * m;
        Ok(IpCfg { n, m, padded_n })
    }

    /// Number of `m`-bit blocks.
    pub fn blocks(&self) -> usize {
        self.padded_n / self.m
    }

    /// Half-exponent `e` of the strongness bound `2^(e/2)` for sources of
    /// min-entropy `k1`, `k2`: the output is `2^(-(k1+k2-n-m-1)/2)`-close to
    /// uniform jointly with either source.
    pub fn error_half_exp(&self, k1: usize, k2: usize) -> i64 {
        self.n as i64 + self.m as i64 + 1 - k1 as i64 - k2 as i64
    }

    fn ctx(&self) -> FieldCtx {
        FieldCtx::new(self.m as u32).expect("m <= 32 validated at construction")
    }
}

/// Inner product of the block decompositions:
/// `sum_i x_i * y_i` over `GF(2^m)`.
///
/// Symmetric and bilinear; all-zero on either side gives all-zero output,
/// and if one side is uniform over all of `{0,1}^n` the output is exactly
/// uniform for every fixed nonzero other side.
pub fn ip_extract(cfg: &IpCfg, x: &BitString, y: &BitString) -> Result<BitString, IpError> {
    if x.len() != cfg.n {
        return Err(IpError::LengthMismatch { which: "x", want: cfg.n, got: x.len() });
    }
    if y.len() != cfg.n {
        return Err(IpError::LengthMismatch { which: "y", want: cfg.n, got: y.len() });
    }
    let ctx = cfg.ctx();
    let mut acc = 0u64;
    let mut start = 0;
    while start < cfg.n {
        let take = cfg.m.min(cfg.n - start);
        // Final partial block zero-padded at the low end.
        let xb = x.u64_window(start, take) << (cfg.m - take);
        let yb = y.u64_window(start, take) << (cfg.m - take);
        acc ^= ctx.mul(xb, yb);
        start += take;
    }
    Ok(BitString::from_u64(acc, cfg.m))
}
