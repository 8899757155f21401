//! Standard-library companion to `sbst-core`: parallel fault simulation,
//! file formats and the `sbst` command line.

pub mod cli;
pub mod formats;
pub mod parallel;

pub use parallel::ParallelSimulator;
