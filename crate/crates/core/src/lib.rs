//! Heavy-tailed random walks on complexes of half-lines.
//!
//! The crate covers model specification ([`model`]), the cotangent
//! recurrence/transience classification ([`classifier`]), Lyapunov weight
//! construction and drift evaluation ([`lyapunov`]), exact simulation and
//! tail estimation ([`sampler`]), the two-dimensional lattice examples
//! ([`lattice`]) and the special functions underneath ([`specfun`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod classifier;
pub mod error;
pub mod lattice;
pub mod lyapunov;
pub mod model;
pub mod sampler;
pub mod specfun;

pub use error::{Error, Result};
