//! Battery energy storage dispatch optimization with a digital-twin
//! verification loop for two independently aging strings.

pub mod aging;
pub mod cli;
pub mod core;
pub mod dispatch;
pub mod ecm;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod twin;

pub use error::{Error, Result};
