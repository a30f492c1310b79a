//! Knowledge-enhanced recurrent forecasting of fashion trend time series.

pub mod cli;
pub mod dataio;
pub mod error;
pub mod gradcheck;
pub mod knowledge;
pub mod model;
pub mod numcore;
pub mod pipeline;

pub use error::{Error, Result};
