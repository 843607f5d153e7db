//! File formats, orbit traces and the command-line front end for
//! [`schottky_core`].

pub mod cli;
pub mod format;
pub mod orbit;

pub use schottky_core as core;
