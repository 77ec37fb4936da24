//! Hessian quotient operators built from exterior-power eigenvalue sums.
//!
//! * [`symmetric`]: elementary symmetric polynomials and Gårding cones.
//! * [`exterior`]: multi-index tables and the derivation matrix.
//! * [`operator`]: `F = sigma_k(Lambda)/sigma_l(Lambda)` and its derivatives.
//! * [`lab`]: Monte-Carlo verification of the structural inequalities.
//! * [`solver`]: Neumann problems on the unit ball (radial) and disk.
//! * [`cli`]: the `hqlab` command-line front end.

pub mod cli;
pub mod config;
pub mod error;
pub mod exterior;
pub mod lab;
pub mod linalg;
pub mod operator;
pub mod solver;
pub mod symmetric;

pub use error::{HqError, Result};
pub use exterior::{
    build_index_table, derivation_jacobian, derivation_matrix, lambda_of, permutation_sign,
    IndexTable, MultiIndex,
};
pub use operator::{HqOperator, OperatorConfig};
pub use symmetric::Spectrum;
