//! Wire cutting with tomographic fragment reconstruction.
//!
//! A circuit is split at chosen wire positions into fragments. Each fragment
//! is characterised by process tomography, conditioned on its terminal
//! measurements, and the fitted tensors are contracted back into an estimate
//! of the full output distribution.

pub mod circuit;
pub mod cut;
pub mod error;
pub mod harness;
pub mod knit;
pub mod mitigation;
pub mod noise;
pub mod qmat;
pub mod seed;
pub mod sim;
pub mod tomo;

pub use error::{Error, Result};
