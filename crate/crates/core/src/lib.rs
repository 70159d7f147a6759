//! Exact computer algebra for lattice-chain charts with wedge conditions and
//! for finite-field censuses of the associated nilpotent matrix schemes.
//!
//! The crate is organized as:
//! - [`ring`]: exact coefficient rings (prime fields, extensions, rationals,
//!   multivariate polynomials, and `R[pi]/(pi^2 - pi0)`);
//! - [`mat`]: dense matrices with exact determinants, minors, rank, kernels,
//!   and characteristic polynomials;
//! - [`lattice`]: the concrete lattices, pairings, inclusion maps, and the
//!   involutions used by the charts;
//! - [`chart`]: symbolic affine charts, the dependent-variable substitution
//!   chains, identity verification, and a brute-force oracle;
//! - [`symplectic`]: symplectic basis completion, stabilizer decompositions,
//!   and the induced actions;
//! - [`scheme`]: finite-field point counts of the special-fiber matrix
//!   schemes, nilpotent orbit classification, and dimension estimation.

pub mod chart;
pub mod lattice;
pub mod mat;
pub mod ring;
pub mod scheme;
pub mod symplectic;
