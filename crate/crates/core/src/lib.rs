//! Minimal positive semi-definite factor counts for complex square matrices.
//!
//! [`classify`] decides the least `k ∈ {1, …, 5}` such that `A` is a product of
//! `k` PSD matrices, or that no such product exists. [`construct`] builds
//! verified factorizations for `k ≤ 3`, and [`search`] looks for `k`-factor
//! products numerically.

pub mod error;
pub mod io;
pub mod linalg;
pub mod numrange;
pub mod sample;
pub mod structure;
pub mod classify;
pub mod construct;
pub mod search;
pub mod cli;

pub use classify::{classify, three_pd_check, Classification, ClassifyConfig, MinFactors, Rule};
pub use construct::{factor_one, factor_three, factor_two, verify_factorization, ConstructConfig, FactorList, VerifyReport};
pub use error::{Error, Result};
pub use linalg::{c, CMatrix};
pub use numrange::{range_profile, RangeConfig, RangeProfile};
pub use search::{objective_and_gradient, search_factors, SearchConfig, SearchResult};
pub use structure::{triangular_split, TriangularSplit};
