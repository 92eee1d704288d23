//! Heat transport and fluctuation–dissipation relations for a chain of
//! harmonic oscillators, each end coupled to its own Ohmic thermal bath.

// Quadrature tables and reference values keep every digit they were published or computed with.
#![allow(clippy::excessive_precision)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fdr;
pub mod greens;
pub mod network;
pub mod quadrature;
pub mod special;
pub mod spectral;
pub mod timedomain;
pub mod transport;

pub use error::{Error, Result};
pub use network::{build_matrices, ChainParams, SystemMatrices};
pub use spectral::BathSpec;
