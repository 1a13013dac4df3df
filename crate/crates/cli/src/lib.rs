//! Std companion to `qsd-core`: run configuration, file formats, the
//! experimental-count analysis pipeline, and the rayon Monte Carlo driver.
//! The `qsd` binary is a thin clap layer over these modules.

pub mod config;
pub mod formats;
pub mod mcpar;
pub mod pipeline;
