//! Parameter planning: turns a target (source length, min-entropy, error)
//! into a concrete integer assignment for every slice and seed width the
//! extractor constructions use, together with a ledger quoting every
//! inequality the analysis relies on.
//!
//! Plans come in three profiles:
//!
//! * [`PlanProfile::SeededNm`] — seeded non-malleable extraction (advice
//!   generator feeding the advice correlation breaker). The planner searches
//!   for the smallest seed length `d` satisfying the whole ledger.
//! * [`PlanProfile::TwoSourceNm`] — two-source non-malleable extraction at a
//!   caller-fixed source length `n`. The planner derives the slice partition
//!   `n = n_1 + n_3 + n_4 + n_5` and the catalyst/fingerprint widths.
//! * [`PlanProfile::Multi`] — many-source non-malleable extraction with `t`
//!   advice-iteration rounds over `sources` sources.
//!
//! A plan is bookkeeping, not an executable configuration. Feasible
//! assignments are large: chain seeds overflow the 31-bit field cap of
//! [`crate::seeded::SeededExtCfg`] and source lengths overflow anything an
//! exhaustive experiment could enumerate. The toy presets shipped by the
//! construction modules stay testable precisely because they do *not*
//! satisfy this ledger; the planner documents what the full-scale analysis
//! needs, with exact integer arithmetic.
//!
//! Exactness: no floating point is used anywhere. A logarithmic bound
//! `x >= mu * log2(q)` is decided by the equivalent integer comparison
//! `2^x >= q^mu` over arbitrary-precision rationals, and the ledger records
//! the smallest integer satisfying the bound as the substituted right-hand
//! side. Where a bound sums several logarithms, each is ceiled to an integer
//! first, which only strengthens the requirement. Fractional lengths such as
//! `0.3d` are floored and the full ledger is then re-validated on the
//! floored values, so integer rounding can never silently break a premise.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{rat, two_pow, Sd};
use crate::hash::canonical_hash;

/// Planning failure.
#[derive(Debug, Error)]
pub enum PlanError {
    /// An inequality in the ledger failed. Carries the quoted rule and both
    /// substituted sides.
    #[error("infeasible: {rule} (lhs = {lhs}, rhs = {rhs})")]
    Infeasible {
        /// The violated rule, quoted as the ledger states it.
        rule: String,
        /// Substituted left-hand side.
        lhs: String,
        /// Substituted right-hand side.
        rhs: String,
    },
    /// A named precondition on the planner inputs failed.
    #[error("plan: {0}")]
    Cfg(&'static str),
    /// JSON export/import failed.
    #[error("plan json: {0}")]
    Json(String),
}

/// Which construction the plan parameterizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanProfile {
    /// Seeded non-malleable extractor (smallest-`d` search).
    SeededNm,
    /// Two-source non-malleable extractor (caller-fixed `n`).
    TwoSourceNm,
    /// Multi-source non-malleable extractor with iterated advice.
    Multi,
}

impl fmt::Display for PlanProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PlanProfile::SeededNm => "seeded-nm",
            PlanProfile::TwoSourceNm => "two-source-nm",
            PlanProfile::Multi => "multi",
        };
        f.write_str(name)
    }
}

impl FromStr for PlanProfile {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<PlanProfile, PlanError> {
        match s {
            "seeded-nm" => Ok(PlanProfile::SeededNm),
            "two-source-nm" => Ok(PlanProfile::TwoSourceNm),
            "multi" => Ok(PlanProfile::Multi),
            _ => Err(PlanError::Cfg("profile is one of seeded-nm | two-source-nm | multi")),
        }
    }
}

/// Universal constants surfaced as plan inputs rather than buried in the
/// derivation. The analysis fixes them only existentially; making them
/// explicit keeps the inequality ledger honest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanConstants {
    /// Chain/merger constant `c` (drives `s >= 8c log2(d/eps')`).
    pub c: u64,
    /// Seed lower-bound constant `C` (drives `d >= C log2(n/eps')`).
    pub big_c: u64,
    /// Advice-coupled seed constant `C'`
    /// (drives `d >= C' log2(a) log2(d a/eps')`).
    pub big_c_prime: u64,
    /// Catalyst-slice fraction `alpha` (`n_1 = floor(alpha n)`).
    #[serde(with = "crate::dist::sd_serde")]
    pub alpha: Sd,
    /// Breaker-slice fraction `beta` (`n_3 = floor(beta n)`).
    #[serde(with = "crate::dist::sd_serde")]
    pub beta: Sd,
    /// Entropy-deficiency fraction `gamma` (sources hold `(1-gamma) n`
    /// min-entropy; the multi profile budgets slices of `a/gamma` bits).
    #[serde(with = "crate::dist::sd_serde")]
    pub gamma: Sd,
}

impl Default for PlanConstants {
    /// `c = 1`, `C = C' = 2`, and the fraction triple
    /// `gamma = 1/4000 < alpha = 1/3600 < beta = 1/71`, which satisfies both
    /// ordering rules `0 < gamma < alpha < beta < 1/70` and `alpha < beta/50`.
    fn default() -> PlanConstants {
        PlanConstants {
            c: 1,
            big_c: 2,
            big_c_prime: 2,
            alpha: rat(1, 3600),
            beta: rat(1, 71),
            gamma: rat(1, 4000),
        }
    }
}

/// One ledger entry: a quoted rule with both substituted sides.
///
/// Inequalities record the exact integers (or rationals) compared;
/// definitional equalities (`n_4 = 30 beta n` after flooring, output-length
/// laws) are recorded the same way so a report shows every derived value
/// next to the rule that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerLine {
    /// The rule, quoted in the form the analysis uses.
    pub rule: String,
    /// Substituted left-hand side.
    pub lhs: String,
    /// Substituted right-hand side.
    pub rhs: String,
    /// Whether the rule holds. Always `true` in a returned plan; plans with
    /// a failing line are rejected as [`PlanError::Infeasible`] instead.
    pub holds: bool,
}

/// A validated integer assignment for one profile.
///
/// `symbols` maps every slice/length symbol of the profile to its concrete
/// value; `ledger` quotes every rule checked, with the substituted sides.
/// Construction fails (naming the violated rule) rather than returning a
/// plan with a failing ledger line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPlan {
    /// Profile this plan parameterizes.
    pub profile: PlanProfile,
    /// Source length in bits.
    pub n: u64,
    /// Design min-entropy of each source.
    pub k: u64,
    /// Target error.
    #[serde(with = "crate::dist::sd_serde")]
    pub eps: Sd,
    /// Working error of the sub-components: `eps' = eps/10`.
    #[serde(with = "crate::dist::sd_serde")]
    pub eps_prime: Sd,
    /// Number of sources (`1` for seeded, `2` for two-source, the arity for
    /// multi).
    pub sources: u64,
    /// Advice-iteration rounds (`1` except for the multi profile).
    pub rounds: u64,
    /// Constants the derivation used.
    pub constants: PlanConstants,
    /// Every slice/length symbol of the profile, by name.
    pub symbols: BTreeMap<String, u64>,
    /// Every rule checked, with substituted sides. All lines hold.
    pub ledger: Vec<LedgerLine>,
    /// Output rate: `out / (2n)` for the two-source profile (two shares of
    /// `n` bits carry `out` message bits), `out / n` otherwise.
    #[serde(with = "crate::dist::sd_serde")]
    pub rate: Sd,
}

impl ParamPlan {
    /// Value of a symbol; panics if the profile does not define it (useful
    /// in tests and reports, where a missing symbol is a bug).
    pub fn symbol(&self, name: &str) -> u64 {
        match self.symbols.get(name) {
            Some(v) => *v,
            None => panic!("plan has no symbol {name:?}"),
        }
    }

    /// Pretty JSON export (stable field order; `symbols` is an ordered map).
    pub fn to_json(&self) -> Result<String, PlanError> {
        serde_json::to_string_pretty(self).map_err(|e| PlanError::Json(e.to_string()))
    }

    /// Import from [`ParamPlan::to_json`] output.
    pub fn from_json(text: &str) -> Result<ParamPlan, PlanError> {
        serde_json::from_str(text).map_err(|e| PlanError::Json(e.to_string()))
    }

    /// Content hash over the canonical serialization; equal plans hash
    /// equally across runs and processes.
    pub fn plan_hash(&self) -> u64 {
        canonical_hash(self)
    }
}

// ---------------------------------------------------------------------------
// Exact arithmetic helpers (no floating point anywhere).

/// Smallest `L >= 0` with `2^L >= v` for integer `v >= 1`.
fn ceil_log2_u64(v: u64) -> u64 {
    assert!(v >= 1, "ceil_log2_u64 needs v >= 1");
    64 - u64::from((v - 1).leading_zeros())
}

/// Smallest `L >= 0` with `2^L >= q` (exact; `0` for `q <= 1`).
fn ceil_log2_rat(q: &Sd) -> u64 {
    if *q <= Sd::one() {
        return 0;
    }
    // Bit lengths give floor_log2 within 1; fix up exactly.
    let mut l = (q.numer().bits() as i64 - q.denom().bits() as i64 + 1).max(0) as u64;
    while l > 0 && two_pow((l - 1) as i64) >= *q {
        l -= 1;
    }
    while two_pow(l as i64) < *q {
        l += 1;
    }
    l
}

/// `q^e` by repeated squaring (exact rational power, modest `e`).
fn pow_rat(q: &Sd, mut e: u64) -> Sd {
    let mut out = Sd::one();
    let mut base = q.clone();
    while e > 0 {
        if e & 1 == 1 {
            out *= &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    out
}

/// Smallest integer `s >= 0` with `s >= mult * log2(q)`, decided exactly as
/// `2^s >= q^mult`.
fn ceil_mul_log2(mult: u64, q: &Sd) -> u64 {
    ceil_log2_rat(&pow_rat(q, mult))
}

fn sd_u64(v: u64) -> Sd {
    rat(u128::from(v), 1)
}

// ---------------------------------------------------------------------------
// Ledger builder.

#[derive(Default)]
struct Ledger {
    lines: Vec<LedgerLine>,
}

impl Ledger {
    fn push(&mut self, rule: &str, lhs: String, rhs: String, holds: bool) -> Result<(), PlanError> {
        self.lines.push(LedgerLine {
            rule: rule.to_string(),
            lhs: lhs.clone(),
            rhs: rhs.clone(),
            holds,
        });
        if holds {
            Ok(())
        } else {
            Err(PlanError::Infeasible { rule: rule.to_string(), lhs, rhs })
        }
    }

    /// `lhs >= rhs` over integers.
    fn ge_u64(&mut self, rule: &str, lhs: u64, rhs: u64) -> Result<(), PlanError> {
        self.push(rule, lhs.to_string(), rhs.to_string(), lhs >= rhs)
    }

    /// `lhs >= rhs` over exact rationals.
    fn ge_rat(&mut self, rule: &str, lhs: &Sd, rhs: &Sd) -> Result<(), PlanError> {
        self.push(rule, lhs.to_string(), rhs.to_string(), lhs >= rhs)
    }

    /// `lhs <= rhs` over integers, recorded in rule order.
    fn le_u64(&mut self, rule: &str, lhs: u64, rhs: u64) -> Result<(), PlanError> {
        self.push(rule, lhs.to_string(), rhs.to_string(), lhs <= rhs)
    }

    /// `lhs <= rhs` over exact rationals, recorded in rule order.
    fn le_rat(&mut self, rule: &str, lhs: &Sd, rhs: &Sd) -> Result<(), PlanError> {
        self.push(rule, lhs.to_string(), rhs.to_string(), lhs <= rhs)
    }

    /// Strict `lhs < rhs` over exact rationals.
    fn lt_rat(&mut self, rule: &str, lhs: &Sd, rhs: &Sd) -> Result<(), PlanError> {
        self.push(rule, lhs.to_string(), rhs.to_string(), lhs < rhs)
    }

    /// Definitional equality, recorded for the report.
    fn def_u64(&mut self, rule: &str, lhs: u64, rhs: u64) -> Result<(), PlanError> {
        self.push(rule, lhs.to_string(), rhs.to_string(), lhs == rhs)
    }
}

// ---------------------------------------------------------------------------
// Entry points.

/// Plans the profile with default constants (and, for the multi profile,
/// `sources = 2`, `rounds = 1`). Deterministic: equal inputs yield bit-equal
/// plans.
pub fn plan_params(n: u64, k: u64, eps: &Sd, profile: PlanProfile) -> Result<ParamPlan, PlanError> {
    plan_params_with(n, k, eps, profile, &PlanConstants::default())
}

/// [`plan_params`] with explicit constants.
pub fn plan_params_with(
    n: u64,
    k: u64,
    eps: &Sd,
    profile: PlanProfile,
    constants: &PlanConstants,
) -> Result<ParamPlan, PlanError> {
    match profile {
        PlanProfile::SeededNm => seeded_plan(n, k, eps, constants),
        PlanProfile::TwoSourceNm => two_source_plan(n, k, eps, constants),
        PlanProfile::Multi => multi_plan(n, k, eps, constants, 2, 1, None),
    }
}

/// Multi-profile planning with explicit arity, round count, and an optional
/// entropy-requirement shape `f`: the plan checks
/// `k >= C t^2 (log2(n) + f(eps))` with `f` defaulting to
/// `ceil(log2(1/eps))`.
pub fn plan_params_multi(
    n: u64,
    k: u64,
    eps: &Sd,
    constants: &PlanConstants,
    sources: u64,
    rounds: u64,
    entropy_shape: Option<&dyn Fn(&Sd) -> u64>,
) -> Result<ParamPlan, PlanError> {
    multi_plan(n, k, eps, constants, sources, rounds, entropy_shape)
}

/// Shipped full-scale profile instances (one per profile), used by reports
/// and regression tests. Every returned plan satisfies its whole ledger.
pub fn shipped_profiles() -> Result<Vec<ParamPlan>, PlanError> {
    let profiles = [
        (PlanProfile::SeededNm, 1u64 << 23, 1u64 << 22, two_pow(-20)),
        (PlanProfile::TwoSourceNm, 1u64 << 27, (1u64 << 27) - (1u64 << 15), two_pow(-20)),
        (PlanProfile::Multi, 1u64 << 21, 1u64 << 20, two_pow(-16)),
    ];
    profiles
        .into_iter()
        .map(|(profile, n, k, eps)| plan_params(n, k, &eps, profile))
        .collect()
}

fn common_pre(n: u64, k: u64, eps: &Sd) -> Result<Sd, PlanError> {
    if n < 2 {
        return Err(PlanError::Cfg("n >= 2"));
    }
    if k < 1 {
        return Err(PlanError::Cfg("k >= 1"));
    }
    if k > n {
        return Err(PlanError::Cfg("k <= n (min-entropy is at most the length)"));
    }
    if *eps <= rat(0, 1) || *eps >= Sd::one() {
        return Err(PlanError::Cfg("0 < eps < 1"));
    }
    Ok(eps / rat(10, 1))
}

// ---------------------------------------------------------------------------
// Seeded profile.

struct SeededAssignment {
    s: u64,
    ledger: Ledger,
}

/// Evaluates the seed-length ledger at a candidate `d`. `check_k` gates the
/// `k`-coupled lines so the smallest-`d` search can run on the seed-only
/// rules first.
#[allow(clippy::too_many_arguments)]
fn seeded_ledger_at(
    n: u64,
    k: u64,
    d: u64,
    d1: u64,
    a: u64,
    ell: u64,
    eps: &Sd,
    eps_prime: &Sd,
    consts: &PlanConstants,
    check_k: bool,
) -> Result<SeededAssignment, PlanError> {
    let mut led = Ledger::default();
    let c = consts.c;
    let big_l = 2u64; // rows per merge

    // Row width from the chain analysis; smallest integer satisfying the
    // quoted bound, recorded as its own line.
    let d_over_epsp = sd_u64(d) / eps_prime;
    let s = ceil_mul_log2(8 * c, &d_over_epsp);
    led.ge_u64("s >= 8c log2(d/eps')", s, s)?;

    // Merger rules with L = 2 rows of width m = s, seed width d' = s.
    led.ge_u64("m >= 4cL log2(d/eps)", s, ceil_mul_log2(4 * c * big_l, &(sd_u64(d) / eps)))?;
    led.ge_u64("d' >= 4cL log2(m/eps)", s, ceil_mul_log2(4 * c * big_l, &(sd_u64(s) / eps)))?;

    // Seed budget for the chains and matrix rounds.
    led.ge_u64("d >= 240(l+1)s", d, 240 * (ell + 1) * s)?;
    let spare = 4 * s + 2 * (2 * ell + 1) * 3 * s + ceil_mul_log2(2, &(Sd::one() / eps_prime));
    led.ge_rat(
        "0.05d >= 4s + 2(2l+1)3s + 2log2(1/eps')",
        &(sd_u64(d) / rat(20, 1)),
        &sd_u64(spare),
    )?;

    // Seed length versus source length and advice length.
    led.ge_u64(
        "d >= C log2(n/eps')",
        d,
        ceil_mul_log2(consts.big_c, &(sd_u64(n) / eps_prime)),
    )?;
    let log_a = ceil_log2_u64(a);
    led.ge_u64(
        "d >= C' log2(a) log2(da/eps')",
        d,
        consts.big_c_prime * log_a * ceil_mul_log2(1, &(sd_u64(d * a) / eps_prime)),
    )?;
    led.le_u64("d_1 <= d", d1, d)?;
    led.ge_u64("d >= 10 (non-empty breaker output)", d, 10)?;

    if check_k {
        led.ge_u64("k >= 6d", k, 6 * d)?;
        led.ge_u64("k >= 4 (non-empty output)", k, 4)?;
    }
    Ok(SeededAssignment { s, ledger: led })
}

fn seeded_plan(n: u64, k: u64, eps: &Sd, consts: &PlanConstants) -> Result<ParamPlan, PlanError> {
    let eps_prime = common_pre(n, k, eps)?;
    let c = consts.c;

    // Advice widths are independent of d.
    let d1 = c * ceil_mul_log2(1, &(sd_u64(n) / &eps_prime));
    let d3 = c * ceil_mul_log2(1, &(Sd::one() / &eps_prime)).max(1);
    let a = d1 + d3;
    let ell = ceil_log2_u64(a.max(1));

    let feasible = |d: u64| {
        seeded_ledger_at(n, k, d, d1, a, ell, eps, &eps_prime, consts, false).is_ok()
    };

    // Smallest-d search on the seed-only rules: exponential probe for a
    // feasible point, binary search down, then a linear walk to absorb the
    // (rare) non-monotone step where the row width jumps.
    const D_CAP: u64 = 1 << 44;
    let mut hi = 16u64;
    while hi < D_CAP && !feasible(hi) {
        hi *= 2;
    }
    if !feasible(hi) {
        // Genuinely infeasible: surface the violated line at the cap.
        seeded_ledger_at(n, k, hi, d1, a, ell, eps, &eps_prime, consts, false)?;
        unreachable!("ledger at an infeasible point must error");
    }
    let mut lo = if hi == 16 { 1 } else { hi / 2 }; // known infeasible
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut d = hi;
    while d > 1 && feasible(d - 1) {
        d -= 1;
    }

    // Full ledger (including the k-coupled lines) at the chosen d.
    let mut asg = seeded_ledger_at(n, k, d, d1, a, ell, eps, &eps_prime, consts, true)?;
    let s = asg.s;

    // Derived output lengths, floored, recorded as definitional lines.
    let v = d / 10;
    let out = k / 4;
    let m1 = s / 5;
    let w = ceil_log2_u64(d).max(1);
    let d2 = c * ceil_mul_log2(1, &(sd_u64(d) * sd_u64(a) / &eps_prime));
    let z_len = d;
    let count = d3.div_ceil(w);
    asg.ledger.def_u64("v = floor(d/10)", v, d / 10)?;
    asg.ledger.def_u64("out = floor(k/4)", out, k / 4)?;
    asg.ledger.def_u64("m_1 = floor(0.2s)", m1, s / 5)?;
    asg.ledger.le_u64("d_2 <= z_len", d2, z_len)?;
    asg.ledger.le_u64("out <= k", out, k)?;

    let mut symbols = BTreeMap::new();
    for (name, value) in [
        ("n", n),
        ("k", k),
        ("d", d),
        ("d_1", d1),
        ("d_2", d2),
        ("d_3", d3),
        ("z_len", z_len),
        ("a", a),
        ("l", ell),
        ("s", s),
        ("L", 2),
        ("m_1", m1),
        ("w", w),
        ("count", count),
        ("v", v),
        ("out", out),
    ] {
        symbols.insert(name.to_string(), value);
    }

    Ok(ParamPlan {
        profile: PlanProfile::SeededNm,
        n,
        k,
        eps: eps.clone(),
        eps_prime,
        sources: 1,
        rounds: 1,
        constants: consts.clone(),
        rate: sd_u64(out) / sd_u64(n),
        symbols,
        ledger: asg.ledger.lines,
    })
}

// ---------------------------------------------------------------------------
// Two-source profile.

fn two_source_plan(
    n: u64,
    k: u64,
    eps: &Sd,
    consts: &PlanConstants,
) -> Result<ParamPlan, PlanError> {
    let eps_prime = common_pre(n, k, eps)?;
    let mut led = Ledger::default();
    let c = consts.c;
    let (alpha, beta, gamma) = (&consts.alpha, &consts.beta, &consts.gamma);

    // Fraction ordering.
    led.lt_rat("beta < 1/70", beta, &rat(1, 70))?;
    led.lt_rat("alpha < beta/50", alpha, &(beta / rat(50, 1)))?;
    led.lt_rat("0 < gamma", &rat(0, 1), gamma)?;
    led.lt_rat("gamma < alpha", gamma, alpha)?;

    // Slice partition (floored fractions; the remainder pads n_5).
    let sd_n = sd_u64(n);
    let n1 = (alpha * &sd_n).floor().to_integer();
    let n3 = (beta * &sd_n).floor().to_integer();
    let w = ceil_log2_u64(n);
    let n1 = u64::try_from(n1).map_err(|_| PlanError::Cfg("n fits in u64"))?;
    let n3 = u64::try_from(n3).map_err(|_| PlanError::Cfg("n fits in u64"))?;
    led.ge_u64("n_1 = floor(alpha n) >= 1", n1, 1)?;
    led.ge_u64("n_3 = floor(beta n) >= w", n3, w)?;
    let n4 = 30 * n3;
    led.def_u64("n_4 = 30 beta n (after flooring beta n)", n4, 30 * n3)?;
    let used = n1 + n3 + n4;
    led.le_u64("n_1 + n_3 + n_4 <= n", used, n)?;
    let n5 = n - used;
    led.def_u64("n_1 + n_3 + n_4 + n_5 = n", n1 + n3 + n4 + n5, n)?;
    led.ge_rat("n_5 >= n/2 (from beta < 1/70)", &sd_u64(n5), &(&sd_n / rat(2, 1)))?;

    // Catalyst width: floor(alpha n / 2) rounded down to a multiple of w.
    let r0 = (alpha * &sd_n / rat(2, 1)).floor().to_integer();
    let r0 = u64::try_from(r0).map_err(|_| PlanError::Cfg("n fits in u64"))?;
    let r = r0 - r0 % w;
    led.ge_u64("r >= w (at least one sampled symbol)", r, w)?;
    led.le_rat("r <= alpha n / 2", &sd_u64(r), &(alpha * &sd_n / rat(2, 1)))?;
    led.le_u64("2r <= n_1", 2 * r, n1)?;
    let count = r / w;
    let fp_symbols = (n - n1).div_ceil(w);
    led.le_u64(
        "ceil((n - n_1)/w) <= 2^w (code has room)",
        fp_symbols,
        1u64 << w.min(40),
    )?;

    // Advice = the two catalyst slices plus both fingerprints.
    let a = 2 * n1 + 2 * r;
    let ell = ceil_log2_u64(a.max(1));

    // Correlation breaker over the n_3 slices: seed budget d := n_3.
    let d_cb = n3;
    let s = ceil_mul_log2(8 * c, &(sd_u64(d_cb) / &eps_prime));
    led.ge_u64("s >= 8c log2(d/eps')", s, s)?;
    led.ge_u64("m >= 4cL log2(d/eps)", s, ceil_mul_log2(8 * c, &(sd_u64(d_cb) / eps)))?;
    led.ge_u64("d' >= 4cL log2(m/eps)", s, ceil_mul_log2(8 * c, &(sd_u64(s) / eps)))?;
    led.ge_u64("d >= 240(l+1)s", d_cb, 240 * (ell + 1) * s)?;
    let spare = 4 * s + 2 * (2 * ell + 1) * 3 * s + ceil_mul_log2(2, &(Sd::one() / &eps_prime));
    led.ge_rat(
        "0.05d >= 4s + 2(2l+1)3s + 2log2(1/eps')",
        &(sd_u64(d_cb) / rat(20, 1)),
        &sd_u64(spare),
    )?;

    // Breaker output and the invertible final extraction on the n_4 slice.
    let v = d_cb / 10;
    led.def_u64("v = floor(d/10)", v, d_cb / 10)?;
    led.ge_u64("v >= 10 (non-empty final extraction)", v, 10)?;
    let out = (rat(3, 10) * sd_u64(v)).floor().to_integer();
    let out = u64::try_from(out).map_err(|_| PlanError::Cfg("n fits in u64"))?;
    led.def_u64("out = floor(0.3d)", out, out)?;
    led.lt_rat("out < d/2", &sd_u64(out), &(sd_u64(v) / rat(2, 1)))?;
    led.le_rat(
        "0.9d + 1 <= n",
        &(rat(9, 10) * sd_u64(v) + Sd::one()),
        &sd_u64(n4),
    )?;
    let r_iext = v / 10;
    led.le_rat("r <= 0.1d", &sd_u64(r_iext), &(sd_u64(v) / rat(10, 1)))?;
    led.ge_u64("r >= 1 (sampled equations exist)", r_iext, 1)?;

    // Source entropy.
    led.ge_rat("k >= (1 - gamma) n", &sd_u64(k), &((Sd::one() - gamma) * &sd_n))?;

    let mut symbols = BTreeMap::new();
    for (name, value) in [
        ("n", n),
        ("k", k),
        ("w", w),
        ("n_1", n1),
        ("n_3", n3),
        ("n_4", n4),
        ("n_5", n5),
        ("r", r),
        ("count", count),
        ("fp_symbols", fp_symbols),
        ("a", a),
        ("l", ell),
        ("s", s),
        ("L", 2),
        ("m_1", s / 5),
        ("d", d_cb),
        ("v", v),
        ("r_iext", r_iext),
        ("out", out),
    ] {
        symbols.insert(name.to_string(), value);
    }

    Ok(ParamPlan {
        profile: PlanProfile::TwoSourceNm,
        n,
        k,
        eps: eps.clone(),
        eps_prime,
        sources: 2,
        rounds: 1,
        constants: consts.clone(),
        rate: sd_u64(out) / (rat(2, 1) * sd_u64(n)),
        symbols,
        ledger: led.lines,
    })
}

// ---------------------------------------------------------------------------
// Multi profile.

fn multi_plan(
    n: u64,
    k: u64,
    eps: &Sd,
    consts: &PlanConstants,
    sources: u64,
    rounds: u64,
    entropy_shape: Option<&dyn Fn(&Sd) -> u64>,
) -> Result<ParamPlan, PlanError> {
    let eps_prime = common_pre(n, k, eps)?;
    if sources < 1 {
        return Err(PlanError::Cfg("sources >= 1"));
    }
    if rounds < 1 {
        return Err(PlanError::Cfg("rounds >= 1 (at least one advice iteration)"));
    }
    let mut led = Ledger::default();
    let c = consts.c;
    let t = rounds;
    let gamma = &consts.gamma;

    // Advice widths.
    let d1 = c * ceil_mul_log2(1, &(sd_u64(n) / &eps_prime));
    let d2 = d1;
    let d3 = c * ceil_mul_log2(1, &(Sd::one() / &eps_prime)).max(1);
    let a = d1 + d3;
    let d4 = d2.max(d1 + d3);
    led.def_u64("d_4 = max(d_2, d_1 + d_3)", d4, d2.max(d1 + d3))?;
    let d5 = 3 * (t + 1) * d4;
    led.def_u64("d_5 = 3(t+1)d_4", d5, 3 * (t + 1) * d4)?;

    // Working-slice budget over t rounds.
    let slice_budget = rat(2, 1) * sd_u64((t + 1) * (t + 1)) * sd_u64(a) / gamma;
    led.ge_rat("n >= 2(t+1)^2 a/gamma", &sd_u64(n), &slice_budget)?;

    // Seed length: the analysis floor, the slice layout, and the merger's
    // row-width requirement (rows are floor(d/2) wide, L = sources + 1).
    let big_l = sources + 1;
    let d_floor = consts.big_c * t * t * ceil_mul_log2(1, &(sd_u64(n) / eps));
    let mut d_merge = 20u64;
    while d_merge / 2 < ceil_mul_log2(4 * c * big_l, &(sd_u64(d_merge) / eps)) {
        d_merge *= 2;
    }
    let d = d_floor.max(d1 + d5).max(d_merge);
    led.ge_u64("d >= C t^2 log2(n/eps)", d, d_floor)?;
    led.le_u64("d_1 + d_5 <= d", d1 + d5, d)?;

    // Entropy requirements; `f` shapes the error-dependent term.
    let f_eps = match entropy_shape {
        Some(f) => f(eps),
        None => ceil_mul_log2(1, &(Sd::one() / eps)),
    };
    led.ge_u64("k >= C t^2 log2(n/eps)", k, consts.big_c * t * t * ceil_mul_log2(1, &(sd_u64(n) / eps)))?;
    led.ge_u64(
        "k >= C t^2 (log2(n) + f(eps))",
        k,
        consts.big_c * t * t * (ceil_log2_u64(n) + f_eps),
    )?;

    // Intermediate rows.
    let z_len = k / 4;
    led.def_u64("z_len = floor(k/4)", z_len, k / 4)?;
    led.le_u64("d_2 + d_5 <= z_len", d2 + d5, z_len)?;
    let m1 = d / 2;
    led.def_u64("m_1 = floor(d/2)", m1, d / 2)?;
    led.le_u64("m_1 <= z_len", m1, z_len)?;

    // Merger rows: L = sources + 1 rows of width m_1, refreshed each round.
    led.ge_u64(
        "m >= 4cL log2(d/eps)",
        m1,
        ceil_mul_log2(4 * c * big_l, &(sd_u64(d) / eps)),
    )?;
    led.ge_u64(
        "d' >= 4cL log2(m/eps)",
        d,
        ceil_mul_log2(4 * c * big_l, &(sd_u64(m1) / eps)),
    )?;

    // Output.
    let out = d / 10;
    led.def_u64("out = floor(d/10)", out, d / 10)?;
    led.ge_u64("out >= log2(1/eps)", out, ceil_mul_log2(1, &(Sd::one() / eps)))?;

    let mut symbols = BTreeMap::new();
    for (name, value) in [
        ("n", n),
        ("k", k),
        ("sources", sources),
        ("t", t),
        ("d", d),
        ("d_1", d1),
        ("d_2", d2),
        ("d_3", d3),
        ("d_4", d4),
        ("d_5", d5),
        ("a", a),
        ("z_len", z_len),
        ("m_1", m1),
        ("L", big_l),
        ("f_eps", f_eps),
        ("out", out),
    ] {
        symbols.insert(name.to_string(), value);
    }

    Ok(ParamPlan {
        profile: PlanProfile::Multi,
        n,
        k,
        eps: eps.clone(),
        eps_prime,
        sources,
        rounds,
        constants: consts.clone(),
        rate: sd_u64(out) / sd_u64(n),
        symbols,
        ledger: led.lines,
    })
}
