//! Federated optimization simulator built around one-step Anderson
//! acceleration (FedOSAA) of variance-reduced local updates.
//!
//! The crate is organized bottom-up:
//!
//! - [`dataset`]: LIBSVM parsing, sparse datasets, client partitions.
//! - [`objective`]: logistic and quadratic loss families with gradients,
//!   mini-batch gradients and Hessian-vector products.
//! - [`linalg`]: dense kernels (pivoted QR least squares, CG, GMRES).
//! - [`anderson`]: the one-step Anderson acceleration and its diagnostics.
//! - [`algorithms`]: one aggregation round of every federated method, with
//!   communication accounting.
//! - [`harness`]: experiment configuration, reference minimizer, traces.

pub mod algorithms;
pub mod anderson;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod objective;
pub mod sampling;

pub use error::{Error, Result};
