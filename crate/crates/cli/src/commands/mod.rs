pub mod caa;
pub mod geometry;
pub mod metrics;
pub mod plan;
pub mod probe;
pub mod report;
pub mod sweep;
pub mod synth;
