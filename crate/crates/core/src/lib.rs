//! Desk-scale laboratory for heat-flow proofs of limiting Sobolev embeddings.
//!
//! The crate samples vector fields on periodic boxes, runs the heat semigroup across geometric
//! time ladders, measures Lorentz and Besov–Lorentz norms, builds lattice atom tables with their
//! subordination graphs, and evaluates the monotone functional `Q_p` on atomic measures.

pub mod error;
pub mod field_grid;
pub mod heat_flow;
pub mod lab;
pub mod monotonicity;
pub mod norms;
pub mod quad;
pub mod spectral;
pub mod weights_atoms;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/heat.md")]
    mod heat {}
    #[doc = include_str!("../../../book/src/norms.md")]
    mod norms {}
    #[doc = include_str!("../../../book/src/atoms.md")]
    mod atoms {}
    #[doc = include_str!("../../../book/src/monotonicity.md")]
    mod monotonicity {}
    #[doc = include_str!("../../../book/src/lab.md")]
    mod lab {}
}
