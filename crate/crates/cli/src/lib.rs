//! Support library for the `trackrec` binary: model-file persistence and
//! flag parsing helpers, kept in a lib target so integration tests can use
//! them directly.

pub mod model_file;
pub mod parse;

pub use model_file::{ModelFile, ModelFileError, MODEL_FORMAT_VERSION};
