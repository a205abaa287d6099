//! Small-signal and signal-processing analyses.

pub mod eigen;
pub mod linearize;
pub mod prony;
pub mod sweep;
