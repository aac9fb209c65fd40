//! Run configuration, file formats, studies and command implementations for
//! the `coag` binary. The numerics live in `coag-core`.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod io;
