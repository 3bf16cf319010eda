pub mod beamforming;
pub mod channel;
pub mod config;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod link_rates;
pub mod report;
pub mod rng;
pub mod selection;

pub use error::{Error, Result};
