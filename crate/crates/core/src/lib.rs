pub mod error;
pub mod tensor;

pub use error::{Error, Result};
pub mod config;
pub mod pointcloud;
pub mod rng;
pub mod blocking;
pub mod models;
pub mod training;
pub mod eval;
pub mod checks;
pub mod cli;
pub mod protocols;
