//! Numerical tools for batch-normalised deep networks with orthogonal
//! weights: isometry measurements, exact backpropagation, Haar moment checks,
//! activation shaping and batch rank audits.

pub mod databatch;
pub mod error;
pub mod netfwd;
pub mod netgrad;
pub mod par;
pub mod shaping;
pub mod specmat;
pub mod stats;
pub mod weingarten;

pub use error::{Error, Result};
