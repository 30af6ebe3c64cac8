//! Transaction cost analysis for corporate bonds.

pub mod classify;
pub mod error;
pub mod features;
pub mod impact;
pub mod output;
pub mod pipeline;
pub mod reference;
pub mod regress;
pub mod spread;
pub mod stats;
pub mod synth;
pub mod tape;

pub use error::{Error, Result};
