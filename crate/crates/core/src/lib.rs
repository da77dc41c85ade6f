//! Triangular permutation polynomial systems over prime fields and the
//! vector pseudorandom generator they drive.
//!
//! A system is `m + 1` polynomials in `X_0..X_m` over F_p of the shape
//! `f_i = X_i g_i(X_{i+1}..X_m) + h_i(X_{i+1}..X_m)` for `i < m` and
//! `f_m = a X_m + b`. Iterating the map `x -> (f_0(x), .., f_m(x))` from a
//! seed yields the vectors `u_n`, of which coordinates `0..m` are emitted.

pub mod discrepancy;
pub mod error;
pub mod field;
pub mod generator;
pub mod iterate;
mod kernel;
pub mod orbit;
pub mod poly;
pub mod spectral;
pub mod system;

pub use error::{Error, ErrorClass, Result};
pub use field::{is_prime_u64, FieldElement, PrimeField};
pub use generator::{Generator, KernelKind, MulCounts, OutputFormat, OutputPoint};
pub use poly::{Monomial, SparsePoly};
pub use system::{
    make_nonresidue_system, NonresidueFamily, PermutationCertificate, PermutationRefusal,
    SystemFile, TriangularSystem,
};
