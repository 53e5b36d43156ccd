//! Two-stage ridge models that combine language features with community
//! factors, plus the preprocessing and evaluation machinery around them.

pub mod adaptation;
pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod numerics;
pub mod pipelines;
pub mod preprocessing;

pub use error::{Error, ErrorKind, Result};
