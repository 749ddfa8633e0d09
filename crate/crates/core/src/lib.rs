//! Free energies and large deviations of directed polymers and random walks
//! in random environments on `Z^d` with a finite step set.

pub mod duality;
pub mod entropy;
pub mod environment;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod l2;
pub mod transfer;

pub use error::{Error, Result};
