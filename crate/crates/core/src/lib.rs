//! Sparse dynamic computed-tomography reconstruction toolkit.
//!
//! The unknown is a space-time stack of attenuation images measured through
//! a block-diagonal time-dependent Radon operator from few projection
//! angles. Reconstruction solves a nonnegativity-constrained least-squares
//! problem with an l1 penalty on 3D shearlet coefficients (time as the
//! third dimension), minimized by a primal-dual fixed-point iteration whose
//! thresholding parameter is tuned automatically to reach a target
//! transform-domain sparsity. Static per-frame variants (2D Haar wavelets,
//! 2D shearlets), a filtered back-projection baseline, a dynamic phantom
//! simulator and image-quality metrics round out the pipeline.

pub mod error;
mod fft;
pub mod io;
pub mod linop;
pub mod metrics;
pub mod phantom;
pub mod projector;
pub mod recon;
pub mod solver;
pub mod transforms;
pub mod types;

pub use error::{Error, Result};
