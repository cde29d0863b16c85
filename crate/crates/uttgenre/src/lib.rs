//! File formats, configuration, parallel execution and pipeline stages for
//! utterance-genre mining. The analysis itself lives in `uttgenre-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod pipeline;

pub use error::{Error, Result};
pub use uttgenre_core as core;
