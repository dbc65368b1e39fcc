pub mod analysis;
pub mod channel;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod link;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod tracking;

pub use error::{Error, Result};
