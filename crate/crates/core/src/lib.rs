//! Space-phasor and quasistationary-phasor models of mixed synchronous-machine
//! and grid-forming-converter power systems, with small-signal and
//! time-domain analysis.

pub mod analysis;
pub mod cli;
pub mod assembly;
pub mod config;
pub mod error;
pub mod gfc;
pub mod machine;
pub mod network;
pub mod output;
pub mod phasor;
pub mod powerflow;
pub mod sim;
pub mod study;

pub use error::{Error, Result};
