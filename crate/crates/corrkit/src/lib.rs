//! Finite-dimensional C*-correspondences: Hilbert modules over `⊕ M_n`, KSGNS
//! dilations, composition of positive correspondences, truncated Fock modules and
//! their expectations, bi-Hilbertian bimodules with Watatani index, and exact
//! symbolic graph algebras.
//!
//! Everything is computed on explicit matrices; identities are reported as residuals
//! (or, for the graph algebra, decided exactly over the Gaussian rationals).

pub mod algebra;
pub mod error;
pub mod linalg;
pub mod module;
pub mod tensor;
pub mod positivity;
pub mod fock;
pub mod instances;
pub mod bihilb;
pub mod graphalg;
pub mod suites;
pub mod cli;
