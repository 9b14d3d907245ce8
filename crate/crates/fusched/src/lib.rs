//! Solving, file formats and the command line around `fusched-core`.

pub mod backend;
pub mod brute;
pub mod campaign;
pub mod case;
pub mod cli;
pub mod io;
pub mod solve;
pub mod svg;

pub use fusched_core as core;
