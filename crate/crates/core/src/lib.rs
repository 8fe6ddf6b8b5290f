//! Probing, steering and subspace-geometry toolkit for residual-stream
//! activation dumps.

pub mod codec;
pub mod error;
pub mod geometry;
pub mod numerics;
pub mod probes;
pub mod steering;
pub mod store;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
