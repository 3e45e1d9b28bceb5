//! exforge: exact-verification toolkit for randomness extractors,
//! non-malleable extractors, and split-state non-malleable codes.
//!
//! Everything here operates at "desk scale": parameters small enough that
//! statistical distances can be computed exactly by exhaustive enumeration,
//! fibers can be counted, and uniformity claims can be checked rather than
//! assumed. The crate has three layers:
//!
//! * primitives: [`bits`], [`gf`], [`linalg`], [`dist`] (exact distributions
//!   and tamperers);
//! * constructions: seeded extraction ([`seeded`]), two-source inner product
//!   ([`ip`]), alternating extraction and mergers ([`alternating`]),
//!   correlation breakers ([`breaker`]), advice generation and seeded
//!   non-malleable extraction ([`snm`]), invertible seeded extraction
//!   ([`iext`]), Reed-Solomon sampling ([`rs`]), the two-source non-malleable
//!   extractor ([`nm2`]), the split-state code ([`code`]), and multi-source
//!   compositions ([`multi`]);
//! * verification: parameter planning with an explicit inequality ledger
//!   ([`plan`]) and the named verification suites ([`verify`]) that power
//!   both `cargo test` acceptance and the `exforge verify` CLI.

pub mod alternating;
pub mod bits;
pub mod breaker;
pub mod dist;
pub mod gf;
pub mod iext;
pub mod ip;
pub mod code;
pub mod hash;
pub mod linalg;
pub mod multi;
pub mod plan;
pub mod nm2;
pub mod rs;
pub mod snm;
pub mod seeded;

pub use bits::{BitError, BitString};
pub use gf::{FieldCtx, FieldElement, FieldError};
pub use linalg::{solve_affine_uniform, vandermonde, GfMatrix, LinalgError};
