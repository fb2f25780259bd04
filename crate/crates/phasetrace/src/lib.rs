//! Scenario runner for the `phasetrace-core` simulator: scene manifests,
//! OBJ meshes, scenario configs, artifact formats and the CLI pipeline.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod noise;
pub mod obj;
pub mod oracle;
pub mod pipeline;
pub mod poses;

pub use error::{Error, Result};
pub use phasetrace_core as core;
