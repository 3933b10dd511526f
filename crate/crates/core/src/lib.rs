//! Chebyshev-distance data envelopment analysis with variable returns to
//! scale, second-stage environmental analysis and the separation method.

pub mod error;
pub mod dea;
pub mod lp;
pub mod partition;
pub mod pipeline;
pub mod records;
pub mod report;
pub mod second_stage;
pub mod synth;

pub use error::{Error, Result};
