pub mod error;
pub mod geometry;

pub use error::{Error, Result};
pub mod norms;
pub mod connections;
pub mod parallelism;
pub mod transport;
pub mod constructions;
pub mod verification;
pub mod fixtures;
