//! Hodge correlators on flat complex tori.
//!
//! Two layers share one set of graded-word data structures:
//!
//! - an exact layer (cyclic tensor envelopes, free graded Lie algebras,
//!   special derivations, Chevalley complexes) over rational or Gaussian
//!   rational scalars, where every identity is checked exactly;
//! - a numeric layer (Fourier forms, Green currents, tree-sum correlator
//!   integrals) over complex floats, which fills correlator tables and
//!   assembles the correlator class and Hodge vector fields.

pub mod algebra;
pub mod correlator;
pub mod cyclic;
pub mod dg;
pub mod forms;
pub mod green;
pub mod lie;
pub mod polyops;
pub mod linalg;
pub mod trees;
pub mod scalar;

pub use scalar::{Rat, GaussRat, C64, Scalar};
