//! Empirical verification of upper and lower bounds for weighted sums of
//! arithmetic functions over equidistributed integer families.
//!
//! The library is layered bottom-up:
//!
//! - [`arith`]: prime tables, factorization, ψ_β, Mertens-type products.
//! - [`multfn`]: arithmetic and density functions, class validators.
//! - [`families`]: weighted families, congruence sums, equidistribution
//!   diagnostics.
//! - [`sieve`]: β-sieve weights, fundamental-lemma accuracy, sifted sums.
//! - [`lemmas`]: exact left-hand sides against explicit envelopes for the
//!   smooth-sum and tail estimates.
//! - [`bounds`]: flat/rough split, case classification and both sides of
//!   the upper and lower bounds.

pub mod arith;
pub mod bounds;
pub mod error;
pub mod families;
pub mod lemmas;
pub mod multfn;
pub mod sieve;

pub use arith::{FactoredInteger, PrimeTables};
pub use error::{Error, Result};
