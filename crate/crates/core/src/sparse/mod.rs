//! Sparse matrix storage and direct solves.

mod csr;
mod lu;

pub use csr::CsrMatrix;
pub use lu::{solve, ExplicitLu, Factorization, SymbolicAnalysis};
