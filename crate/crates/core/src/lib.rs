pub mod cli;
pub mod error;
pub mod et;
pub mod kijowski;
pub mod numerics;
pub mod phase_space;
pub mod state;
pub mod toa;

pub use error::{Error, Result};
