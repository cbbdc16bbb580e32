//! Identification of transform coders from their decoded output.
//!
//! A block transform coder with uniform midpoint quantization maps every
//! input block onto a point of a fixed lattice determined by the transform
//! and the quantizer steps. Given enough decoded blocks, that lattice, and
//! with it the coder, can be reconstructed exactly. This crate provides the
//! lattice machinery, a reference coder to generate test data, the
//! identification pipeline, and Monte Carlo experiment drivers.
//!
//! Numeric code is generic over the scalar type; `f64` aliases for the main
//! types are exported at the root.

pub mod codec;
pub mod error;
pub mod experiments;
pub mod identify;
pub mod lattice;
pub mod matrix;
pub mod qr;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default-precision aliases. The pipeline is validated against f64;
/// the generic forms remain available for experimentation.
pub type Matrix64 = matrix::Matrix<f64>;
pub type LatticeBasis64 = lattice::LatticeBasis<f64>;
pub type Tolerances64 = lattice::Tolerances<f64>;
pub type CoderConfig64 = codec::CoderConfig<f64>;
pub type ObservationSet64 = codec::ObservationSet<f64>;
