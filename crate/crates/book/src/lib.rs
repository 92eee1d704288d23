//! Compiles every code listing in `book/` as a doc-test, one module per
//! chapter so a failure points at its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/bath-kernels.md")]
pub mod bath_kernels {}
#[doc = include_str!("../../../book/src/chain.md")]
pub mod chain {}
#[doc = include_str!("../../../book/src/greens.md")]
pub mod greens {}
#[doc = include_str!("../../../book/src/fdr.md")]
pub mod fdr {}
#[doc = include_str!("../../../book/src/transport.md")]
pub mod transport {}
#[doc = include_str!("../../../book/src/quadrature.md")]
pub mod quadrature {}
#[doc = include_str!("../../../book/src/relaxation.md")]
pub mod relaxation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
