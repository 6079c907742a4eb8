//! Numerical toolkit for conformal spectral geometry on real projective
//! spaces.
//!
//! The crate builds the generalized Veronese embeddings of `RP^n` into round
//! spheres, the Mobius transformations, cap reflections and fold maps of the
//! ball, hyperbolic centers of mass of pushforward measures, a Galerkin
//! eigensolver for `-Laplacian` of conformal metrics `w g` on `RP^2` and
//! `RP^3`, and the trial-function Rayleigh-quotient chain bounding the second
//! nonzero eigenvalue by `2^{2/n} (2n + 2)`. Supporting modules compute
//! topological degrees of sphere self-maps, volume limits of degenerating
//! folds and Mobius maps, and the closed-form bound constants.

// `!(x <= tol)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod degen_limits;
pub mod degree_lab;
pub mod error;
pub mod quadrature;
pub mod spectral;
pub mod sphere_geom;
pub mod trial_bound;
pub mod veronese;

pub use error::{Error, Result};
