//! Constrained saddle dynamics over the Grassmann bundle of an embedded manifold.
//!
//! Layers, bottom up: [`numeric`] (dense kernels), [`manifolds`] (embedded
//! geometry), [`bundle`] (the Grassmann bundle Gr_k(TM)), [`objectives`],
//! [`saddle`] (the discretized dynamics), [`oracle`] (independent ground
//! truth) and [`harness`] (seeded campaigns and output).

// `!(a <= b)` is used on purpose so NaN fails every tolerance check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod checks;
pub mod error;
pub mod harness;
pub mod manifolds;
pub mod numeric;
pub mod objectives;
pub mod oracle;
pub mod random;
pub mod saddle;

pub use error::{Error, Result};
pub use numeric::{Frame, Projector, SymMatrix};
