//! Exact inference, projectivity checking, and likelihood-based learning
//! for three small statistical-relational modeling dialects.

pub mod cli;
pub mod error;
pub mod fixtures;
pub mod lang;
pub mod learning;
pub mod projectivity;
pub mod semantics;
pub mod stats;
pub mod worlds;

pub use error::{Error, Result};

pub use cli::run;
