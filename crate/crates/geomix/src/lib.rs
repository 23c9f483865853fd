//! Bayesian geostatistics on SPDE/GMRF approximations of Matérn fields.
//!
//! Two models are fit by Gibbs sampling:
//!
//! * the typical spatial regression `y = mu + x'beta + eta(s) + eps`, and
//! * a two-class spatial mixture whose latent class surface is a logistic
//!   Gaussian process, sampled with a Laplace approximation.
//!
//! Every Gaussian process lives on the vertices of a triangulated mesh with a
//! sparse precision matrix; observations and prediction locations reach the
//! mesh through a barycentric projection.

// `!(x > 0.0)` is the idiom used throughout to reject NaN alongside bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod error;
pub mod io;
pub mod latent;
pub mod linalg;
pub mod mesh;
pub mod mixture;
pub mod predict;
pub mod proposal;
pub mod raster;
pub mod simulate;
pub mod spde;
pub mod typical;

pub use error::{Error, Result};
