//! Finite-order Koopman linear models from sampled state transitions.
//!
//! Two fitters share one dictionary/dataset vocabulary:
//!
//! * [`encoder::fit_dde`] meshes the sampled states, turns the mesh into
//!   per-sample quadrature weights, and assembles `A = Q R⁻¹` from the
//!   weighted Gram matrices of the lifted data.
//! * [`edmd::fit_edmd`] is the plain least-squares baseline.
//!
//! [`dynamics`] provides the damped pendulum-with-walls benchmark and its
//! dataset generators, and [`eval`] the one-step error protocol used to
//! compare the two.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
pub mod dataset;
pub mod dictionary;
pub mod dynamics;
pub mod edmd;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod mesh;
pub mod model;

pub use bounds::Bounds;
pub use dataset::TransitionDataset;
pub use dictionary::{Dictionary, WidthRule};
pub use error::{Error, Result};
pub use mesh::{build_mesh, PointCloud, SimplicialMesh};
pub use model::{KoopmanModel, Method};
