//! Classical spin-model mappings for decohered toric-code states, with
//! exact transfer-matrix, uniform-MPS and Monte Carlo engines.

pub mod channel;
pub mod couplings;
pub mod error;
pub mod imps;
pub mod linalg;
pub mod mc;
pub mod scan;
pub mod statmech;
pub mod transfer;

pub use error::{Error, Result};
