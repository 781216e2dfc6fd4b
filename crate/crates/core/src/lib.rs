pub mod altmin;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod graphinit;
pub mod moments;
pub mod pipeline;
pub mod simulate;

pub use error::{Error, Result};
