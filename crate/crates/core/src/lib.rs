//! Weak innovation autoencoders and generative probabilistic forecasting.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod forecasting;
pub mod networks;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
