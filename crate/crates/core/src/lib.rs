//! Numerical laboratory for the conformal `sigma_k / sigma_l` curvature flow.
//!
//! The crate evaluates elementary symmetric functions of Schouten spectra,
//! discretizes rotationally symmetric conformal factors on the round sphere,
//! on `S^1 x S^{n-1}` and on radial Euclidean space, integrates the normalized
//! quotient flow, evaluates the global curvature functionals with their sharp
//! constants, and builds the explicit neck/bubble test metrics used to probe
//! the Yamabe-type quotient.
//!
//! The algebra, discretization and quadrature layers are generic over
//! [`Real`]; the flow integrator and the explicit constructions run in `f64`.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod constructions;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod quadrature;
pub mod sampling;
pub mod scalar;
pub mod symfun;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double precision aliases for the generic types.
pub type EigenvalueVectorF64 = symfun::EigenvalueVector<f64>;
pub type GeometryF64 = geometry::Geometry<f64>;
pub type ConformalFieldF64 = geometry::ConformalField<f64>;
pub type FunctionalSnapshotF64 = functionals::FunctionalSnapshot<f64>;

/// Single precision aliases for the generic types.
pub type EigenvalueVectorF32 = symfun::EigenvalueVector<f32>;
pub type GeometryF32 = geometry::Geometry<f32>;
pub type ConformalFieldF32 = geometry::ConformalField<f32>;

