//! The seeded non-malleable extractor: advice generation plus the
//! advice-driven correlation breaker, composed so that tampering with the
//! seed produces different advice with high probability, which in turn
//! decorrelates the two extractions.
//!
//! Pipeline for `snm_extract(x, y)`:
//! 1. `adv_gen` fingerprints the seed: `Y1` is a short prefix of `y`,
//!    `Z = ext_z(x, Y1)` is fresh randomness, and `Y2` is a few
//!    `Z`-selected symbols of a Reed–Solomon encoding of `y`. Any
//!    fixed-point-free tampering of `y` flips either `Y1` directly or,
//!    with high probability, one of the sampled symbols; the advice
//!    `alpha = Y1 ∘ Y2` then differs between the two runs.
//! 2. The correlation breaker turns differing advice into an output row
//!    `V` that is fresh relative to the tampered run's row.
//! 3. `W = ext_out(x, V)` extracts the final bits from `x`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::breaker::{adv_cb, adv_cb_ignoring_advice, AdvCbCfg, BreakerError};
use crate::bits::BitString;
use crate::dist::{rat, Sd};
use crate::rs::{RsCode, RsError};
use crate::seeded::{lhl_extract, SeededError, SeededExtCfg};
use num::Zero;

/// Errors from configuration and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SnmError {
    /// A named configuration rule was violated.
    #[error("configuration violates: {0}")]
    Cfg(&'static str),
    /// An input's length does not match the configuration.
    #[error("{which} has length {got}, configuration wants {want}")]
    LengthMismatch { which: &'static str, want: usize, got: usize },
    /// A sub-component rejected its configuration or input.
    #[error("component error: {0}")]
    Component(String),
}

impl From<SeededError> for SnmError {
    fn from(e: SeededError) -> SnmError {
        match e {
            SeededError::Cfg(s) => SnmError::Cfg(s),
            SeededError::LengthMismatch { which, want, got } => {
                SnmError::LengthMismatch { which, want, got }
            }
        }
    }
}

impl From<BreakerError> for SnmError {
    fn from(e: BreakerError) -> SnmError {
        match e {
            BreakerError::Cfg(s) => SnmError::Cfg(s),
            BreakerError::LengthMismatch { which, want, got } => {
                SnmError::LengthMismatch { which, want, got }
            }
        }
    }
}

impl From<RsError> for SnmError {
    fn from(e: RsError) -> SnmError {
        SnmError::Component(e.to_string())
    }
}

/// Configuration of the seeded non-malleable extractor
/// `{0,1}^n x {0,1}^d -> {0,1}^out_len` for sources of design entropy `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnmCfg {
    /// Source length.
    pub n: usize,
    /// Design min-entropy of the source.
    pub k: usize,
    /// Seed length.
    pub d: usize,
    /// Width of the seed prefix `Y1`.
    pub d1: usize,
    /// Width of `Z = ext_z(x, Y1)`.
    pub z_len: usize,
    /// Width of the `Z`-prefix driving symbol sampling.
    pub d2: usize,
    /// Width of the sampled-symbol fingerprint `Y2`.
    pub d3: usize,
    /// Output length.
    pub out_len: usize,
    /// Design error; the advice generator is budgeted `eps / 10`.
    #[serde(with = "crate::dist::sd_serde")]
    pub eps: Sd,
    /// Reed–Solomon code fingerprinting the seed: symbols of
    /// `ceil(log2 d)` bits, `ceil(d / w)` message symbols.
    pub code: RsCode,
    /// Number of sampled codeword symbols, `ceil(d3 / w)`.
    pub count: usize,
    /// Correlation breaker applied as `adv_cb(y, Z, alpha)`.
    pub cb: AdvCbCfg,
    /// Fresh-randomness extractor `(x, Y1) -> Z`.
    pub ext_z: SeededExtCfg,
    /// Final extractor `(x, V) -> W`.
    pub ext_out: SeededExtCfg,
}

impl SnmCfg {
    /// Validates the width rules (each failure names its rule) and the
    /// wiring of the supplied correlation breaker.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        k: usize,
        d: usize,
        d1: usize,
        z_len: usize,
        d2: usize,
        d3: usize,
        code_symbols: usize,
        out_len: usize,
        eps: Sd,
        cb: AdvCbCfg,
    ) -> Result<SnmCfg, SnmError> {
        if d < 2 {
            return Err(SnmError::Cfg("d >= 2"));
        }
        if d1 == 0 || d1 > d {
            return Err(SnmError::Cfg("1 <= d1 <= d"));
        }
        if d2 > z_len {
            return Err(SnmError::Cfg("d2 <= z_len"));
        }
        if d3 == 0 {
            return Err(SnmError::Cfg("d3 >= 1"));
        }
        if eps <= Sd::zero() {
            return Err(SnmError::Cfg("eps > 0"));
        }
        let w = usize::BITS as usize - (d - 1).leading_zeros() as usize; // ceil(log2 d)
        let code = RsCode::new(w as u32, d.div_ceil(w), code_symbols)?;
        let count = d3.div_ceil(w);
        if count > code_symbols {
            return Err(SnmError::Cfg("ceil(d3/w) <= code symbols"));
        }
        if d2 < count * w {
            return Err(SnmError::Cfg("d2 >= count * w (sampling seed)"));
        }
        if cb.x_len != d {
            return Err(SnmError::Cfg("breaker first input width = d"));
        }
        if cb.y_len != z_len {
            return Err(SnmError::Cfg("breaker second input width = z_len"));
        }
        if cb.a_raw != d1 + d3 {
            return Err(SnmError::Cfg("breaker advice length = d1 + d3"));
        }
        let ext_z = SeededExtCfg::new(n, d1, z_len, k)?;
        let ext_out = SeededExtCfg::new(n, cb.out_len, out_len, k)?;
        Ok(SnmCfg { n, k, d, d1, z_len, d2, d3, out_len, eps, code, count, cb, ext_z, ext_out })
    }

    /// Standard output length: `floor(k / 4)`.
    #[allow(clippy::too_many_arguments)]
    pub fn standard(
        n: usize,
        k: usize,
        d: usize,
        d1: usize,
        z_len: usize,
        d2: usize,
        d3: usize,
        code_symbols: usize,
        eps: Sd,
        cb: AdvCbCfg,
    ) -> Result<SnmCfg, SnmError> {
        SnmCfg::new(n, k, d, d1, z_len, d2, d3, code_symbols, k / 4, eps, cb)
    }

    /// Advice-generator error budget.
    pub fn eps_prime(&self) -> Sd {
        &self.eps * rat(1, 10)
    }

    /// Total advice length `d1 + d3`.
    pub fn advice_len(&self) -> usize {
        self.d1 + self.d3
    }

    /// Collision-measurement preset: `n = 16`, `d = 12`, single-symbol
    /// fingerprint over `GF(2^4)` with 16 evaluation points, design error
    /// `5/8` (so the advice budget is `1/16`).
    pub fn toy_collision() -> SnmCfg {
        let cb = AdvCbCfg::new(12, 4, 8, 4, 4, 4, 2, 2, 2).expect("preset widths");
        SnmCfg::new(16, 12, 12, 4, 4, 4, 4, 16, 2, rat(5, 8), cb)
            .expect("preset widths")
    }

    /// Non-malleability measurement preset: `n = 20`, `d = 10`, a 6-bit
    /// seed prefix feeding the breaker, 3-bit output.
    ///
    /// The breaker stages run at the full 3-bit width the 6-bit chains
    /// allow and the fingerprint is kept to 2 bits so the merge tree has
    /// only three rounds. Both choices protect the advice signal: every
    /// chained extraction folds its source to the stage width, a fold of
    /// zero freezes the stage to a constant (probability `2^-width`), and
    /// at 2-bit widths with four rounds the twelve-odd stages in series
    /// almost never let an advice difference reach the output.
    pub fn toy_nm() -> SnmCfg {
        let cb = AdvCbCfg::new(10, 6, 8, 6, 6, 6, 3, 3, 3).expect("preset widths");
        SnmCfg::new(20, 16, 10, 6, 6, 4, 2, 16, 3, rat(5, 8), cb).expect("preset widths")
    }
}

/// The advice generator. Returns `(alpha, Z)` where
/// `alpha = Y1 ∘ Y2` (`d1 + d3` bits) and `Z` is the fresh randomness the
/// breaker consumes.
///
/// `Y2` is built from `y` only through the Reed–Solomon fingerprint: the
/// `d2`-bit prefix of `Z` selects `count` distinct codeword symbols
/// (seed-driven while chunks last, completed deterministically), and their
/// concatenation is truncated to `d3` bits. The generator is total.
pub fn adv_gen(cfg: &SnmCfg, x: &BitString, y: &BitString) -> Result<(BitString, BitString), SnmError> {
    if x.len() != cfg.n {
        return Err(SnmError::LengthMismatch { which: "x", want: cfg.n, got: x.len() });
    }
    if y.len() != cfg.d {
        return Err(SnmError::LengthMismatch { which: "y", want: cfg.d, got: y.len() });
    }
    let y1 = y.slice(0, cfg.d1).expect("d1 <= d validated");
    let z = lhl_extract(&cfg.ext_z, x, &y1)?;
    let zbar = z.slice(0, cfg.d2).expect("d2 <= z_len validated");
    let msg = cfg.code.message_from_bits(y)?;
    let codeword = cfg.code.encode(&msg)?;
    let positions = cfg.code.sample_positions_total(&zbar, cfg.count);
    let mut y2 = BitString::zeros(0);
    for pos in positions {
        y2 = y2.concat(&BitString::from_u64(codeword[pos], cfg.code.w()));
    }
    let y2 = y2.slice(0, cfg.d3).expect("count * w >= d3");
    Ok((y1.concat(&y2), z))
}

/// The seeded non-malleable extractor:
/// `W = ext_out(x, adv_cb(y, Z, alpha))` with `(alpha, Z) = adv_gen(x, y)`.
pub fn snm_extract(cfg: &SnmCfg, x: &BitString, y: &BitString) -> Result<BitString, SnmError> {
    let (alpha, z) = adv_gen(cfg, x, y)?;
    let v = adv_cb(&cfg.cb, y, &z, &alpha)?;
    Ok(lhl_extract(&cfg.ext_out, x, &v)?)
}

/// Broken control: identical pipeline but the correlation breaker ignores
/// the advice. Used by verification suites to show the advice path is
/// load-bearing.
pub fn snm_extract_ignoring_advice(
    cfg: &SnmCfg,
    x: &BitString,
    y: &BitString,
) -> Result<BitString, SnmError> {
    let (alpha, z) = adv_gen(cfg, x, y)?;
    let v = adv_cb_ignoring_advice(&cfg.cb, y, &z, &alpha)?;
    Ok(lhl_extract(&cfg.ext_out, x, &v)?)
}

/// The advice-channel experiment: evaluates the pipeline twice with the
/// breaker inputs held at their untampered values `(y, Z)` and only the
/// advice differing — `alpha` from `y`, `alpha'` from `y_tampered`.
///
/// This isolates what the advice path buys: with the advice ignored the
/// two runs are identical by construction (their joint distance from
/// fresh-uniform is exactly `1 - 2^-out_len`), so the real construction
/// exhibits the generator's fingerprinting (`alpha' != alpha` with high
/// probability) composed with the breaker's decorrelation, and must land
/// strictly below that ceiling. Seed-tampering experiments cannot show
/// this margin at executable widths because any tamper also drifts the
/// chain inputs, decorrelating the control just as much.
pub fn snm_advice_channel_pair(
    cfg: &SnmCfg,
    x: &BitString,
    y: &BitString,
    y_tampered: &BitString,
) -> Result<(BitString, BitString), SnmError> {
    let (alpha, z) = adv_gen(cfg, x, y)?;
    let (alpha_p, _) = adv_gen(cfg, x, y_tampered)?;
    let v = adv_cb(&cfg.cb, y, &z, &alpha)?;
    let vp = adv_cb(&cfg.cb, y, &z, &alpha_p)?;
    Ok((lhl_extract(&cfg.ext_out, x, &v)?, lhl_extract(&cfg.ext_out, x, &vp)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{to_f64, FlatSource, JointDist, Tamperer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn advice_length_and_totality() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for cfg in [SnmCfg::toy_collision(), SnmCfg::toy_nm()] {
            for _ in 0..200 {
                let x = BitString::random(cfg.n, &mut rng);
                let y = BitString::random(cfg.d, &mut rng);
                let (alpha, z) = adv_gen(&cfg, &x, &y).unwrap();
                assert_eq!(alpha.len(), cfg.d1 + cfg.d3);
                assert_eq!(z.len(), cfg.z_len);
                assert_eq!(alpha.slice(0, cfg.d1).unwrap(), y.slice(0, cfg.d1).unwrap());
            }
        }
    }

    #[test]
    fn cfg_rules_are_named() {
        let cb = AdvCbCfg::new(12, 4, 8, 4, 4, 4, 2, 2, 2).unwrap();
        let mk = |d1: usize, z_len: usize, d2: usize, cb: AdvCbCfg| {
            SnmCfg::new(16, 12, 12, d1, z_len, d2, 4, 16, 2, rat(5, 8), cb)
        };
        assert!(matches!(mk(0, 4, 4, cb.clone()), Err(SnmError::Cfg("1 <= d1 <= d"))));
        assert!(matches!(mk(4, 4, 6, cb.clone()), Err(SnmError::Cfg("d2 <= z_len"))));
        assert!(matches!(
            mk(4, 4, 2, cb.clone()),
            Err(SnmError::Cfg("d2 >= count * w (sampling seed)"))
        ));
        assert!(matches!(
            mk(5, 4, 4, cb.clone()),
            Err(SnmError::Cfg("breaker advice length = d1 + d3"))
        ));
        let wrong_width = AdvCbCfg::new(10, 4, 8, 4, 4, 4, 2, 2, 2).unwrap();
        assert!(matches!(
            mk(4, 4, 4, wrong_width),
            Err(SnmError::Cfg("breaker first input width = d"))
        ));
        // z_len mismatch against the breaker's second input.
        let cb2 = AdvCbCfg::new(12, 5, 8, 4, 4, 4, 2, 2, 2).unwrap();
        assert!(matches!(
            mk(4, 4, 4, cb2),
            Err(SnmError::Cfg("breaker second input width = z_len"))
        ));
    }

    #[test]
    fn standard_output_length_is_quarter_k() {
        let cb = AdvCbCfg::new(12, 8, 12, 8, 8, 8, 2, 2, 2).unwrap();
        let cfg = SnmCfg::standard(20, 8, 12, 8, 8, 4, 4, 16, rat(5, 8), cb).unwrap();
        assert_eq!(cfg.out_len, 2);
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let x = BitString::random(20, &mut rng);
        let y = BitString::random(12, &mut rng);
        assert_eq!(snm_extract(&cfg, &x, &y).unwrap().len(), 2);
    }

    #[test]
    fn zero_source_annihilates() {
        let cfg = SnmCfg::toy_nm();
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..50 {
            let y = BitString::random(cfg.d, &mut rng);
            assert!(snm_extract(&cfg, &BitString::zeros(cfg.n), &y).unwrap().is_zero());
        }
    }

    /// Advice-collision rate under the full bit-flip family, with the
    /// advice map tabulated once and tampering applied by index remap.
    /// Flips inside the `Y1` window can never collide; flips outside give
    /// a collision exactly when the sampled fingerprint symbols agree,
    /// which stays within the design budget `2 * eps' = 1/8`.
    #[test]
    fn collision_rate_within_twice_design_budget() {
        let cfg = SnmCfg::toy_collision();
        let xs = FlatSource::random_subset(cfg.n, 10, 101);
        let nx = xs.support_len() as usize;
        let ny = 1usize << cfg.d;
        let mut table = vec![0u8; nx * ny];
        for (xi, x) in xs.iter().enumerate() {
            for yv in 0..ny {
                let y = BitString::from_u64(yv as u64, cfg.d);
                let (alpha, _) = adv_gen(&cfg, &x, &y).unwrap();
                table[xi * ny + yv] = alpha.to_u64() as u8;
            }
        }
        // Index remap for each single-bit flip.
        for i in 0..cfg.d {
            let remap: Vec<usize> = (0..ny)
                .map(|yv| {
                    BitString::from_u64(yv as u64, cfg.d).with_flipped(i).to_u64() as usize
                })
                .collect();
            let mut collisions = 0u64;
            for xi in 0..nx {
                let row = &table[xi * ny..(xi + 1) * ny];
                for yv in 0..ny {
                    if row[yv] == row[remap[yv]] {
                        collisions += 1;
                    }
                }
            }
            let total = (nx * ny) as u64;
            eprintln!(
                "flip bit {i}: collision fraction = {}",
                collisions as f64 / total as f64
            );
            if i < cfg.d1 {
                assert_eq!(collisions, 0, "Y1 flips always change the advice");
            }
            // Exact comparison: fraction <= 2 * eps' = 1/8.
            assert!(collisions * 8 <= total, "flip bit {i}: {collisions}/{total}");
        }
    }

    /// Shared harness: the tampering experiment's joint law (W, W', Y)
    /// measured against (U, W', Y) for both the real construction and the
    /// advice-ignoring control. Y' = f(Y) is a function of Y, so
    /// conditioning on Y carries the (Y, Y') conditioning.
    fn measure_nm(cfg: &SnmCfg, tamper: &Tamperer, log_support: u32, seed: u64) -> (Sd, Sd) {
        let xs = FlatSource::random_subset(cfg.n, log_support, seed);
        let ny = 1u64 << cfg.d;
        let mut real = JointDist::empty(vec![cfg.out_len as u16, cfg.out_len as u16, cfg.d as u16])
            .unwrap();
        let mut control = real.clone();
        for x in xs.iter() {
            // One pass per x: tabulate both variants over all seeds, then
            // pair each seed with its tampered image.
            let mut w_real = Vec::with_capacity(ny as usize);
            let mut w_ctl = Vec::with_capacity(ny as usize);
            for yv in 0..ny {
                let y = BitString::from_u64(yv, cfg.d);
                w_real.push(snm_extract(cfg, &x, &y).unwrap());
                w_ctl.push(snm_extract_ignoring_advice(cfg, &x, &y).unwrap());
            }
            for yv in 0..ny {
                let y = BitString::from_u64(yv, cfg.d);
                let ypv = tamper.apply(&y).to_u64();
                real.add(&[w_real[yv as usize].clone(), w_real[ypv as usize].clone(), y.clone()], 1);
                control.add(&[w_ctl[yv as usize].clone(), w_ctl[ypv as usize].clone(), y], 1);
            }
        }
        let sd_real = real.sd(&real.with_uniform_first()).unwrap();
        let sd_control = control.sd(&control.with_uniform_first()).unwrap();
        (sd_real, sd_control)
    }

    /// Non-malleability regression pin at module scale. Only the real
    /// construction's distance is pinned: under seed tampering the
    /// advice-ignoring control decorrelates through the drifted chain
    /// inputs just as the real construction does, so the real-vs-control
    /// margin in this experiment is sampling noise at executable widths
    /// (measured at full support: |margin| < 2e-4, sign unstable). The
    /// load-bearing comparison lives in the advice-channel experiment
    /// below, where the control provably repeats itself.
    #[test]
    fn toy_non_malleability_regression_pin() {
        let cfg = SnmCfg::toy_nm();
        let tamper = Tamperer::rotate_flip(cfg.d);
        let (sd_real, sd_control) = measure_nm(&cfg, &tamper, 5, 103);
        eprintln!(
            "snm toy nm: real sd = {}, adviceless control sd = {}",
            to_f64(&sd_real),
            to_f64(&sd_control)
        );
        assert!(sd_real <= rat(11, 16), "real sd {}", to_f64(&sd_real));
    }

    /// The advice-channel experiment: same breaker inputs, advice from
    /// `y` vs `f(y)`. The adviceless control emits the same output twice,
    /// so its joint law sits at the distance ceiling `1 - 2^-out_len`
    /// exactly; the real construction must land strictly below it and
    /// under a pinned regression threshold.
    #[test]
    fn advice_channel_beats_adviceless_control() {
        let cfg = SnmCfg::toy_nm();
        let tamper = Tamperer::rotate_flip(cfg.d);
        let xs = FlatSource::random_subset(cfg.n, 5, 103);
        let ny = 1u64 << cfg.d;
        let mut real = JointDist::empty(vec![cfg.out_len as u16; 2]).unwrap();
        let mut control = real.clone();
        for x in xs.iter() {
            for yv in 0..ny {
                let y = BitString::from_u64(yv, cfg.d);
                let yp = tamper.apply(&y);
                let (w, wp) = snm_advice_channel_pair(&cfg, &x, &y, &yp).unwrap();
                real.add(&[w, wp], 1);
                let w_ctl = snm_extract_ignoring_advice(&cfg, &x, &y).unwrap();
                control.add(&[w_ctl.clone(), w_ctl], 1);
            }
        }
        let sd_real = real.sd(&real.with_uniform_first()).unwrap();
        let sd_control = control.sd(&control.with_uniform_first()).unwrap();
        eprintln!(
            "snm advice channel: real sd = {}, adviceless control sd = {}",
            to_f64(&sd_real),
            to_f64(&sd_control)
        );
        let ceiling = rat((1 << cfg.out_len) - 1, 1 << cfg.out_len);
        assert_eq!(sd_control, ceiling, "control repeats itself verbatim");
        assert!(sd_real < sd_control, "advice path must be load-bearing");
        // Measured 0.7638 at this support/seed; the gap to the 7/8
        // ceiling is the advice signal that survives the chained stages.
        assert!(sd_real <= rat(13, 16), "regression pin: {}", to_f64(&sd_real));
    }

    /// Full-budget margin measurement (slow; run explicitly with
    /// `--ignored` to regenerate the values informing the verification
    /// thresholds).
    #[test]
    #[ignore = "exploratory budget; run with --ignored"]
    fn nm_margin_at_full_support() {
        let cfg = SnmCfg::toy_nm();
        for (name, tamper) in [
            ("flip0", Tamperer::bit_flip(cfg.d, 0)),
            ("flip9", Tamperer::bit_flip(cfg.d, 9)),
            ("rotate_flip", Tamperer::rotate_flip(cfg.d)),
        ] {
            let (sd_real, sd_control) = measure_nm(&cfg, &tamper, 9, 103);
            eprintln!(
                "snm nm margin [{name}]: real = {}, control = {}, margin = {}",
                to_f64(&sd_real),
                to_f64(&sd_control),
                to_f64(&(&sd_control - &sd_real))
            );
        }
    }
}
