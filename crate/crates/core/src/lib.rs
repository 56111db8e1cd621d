pub mod entropy;
pub mod error;
pub mod estimates;
pub mod exact;
pub mod geometry;
pub mod harness;
pub mod solver;

pub use error::{Error, Result};
