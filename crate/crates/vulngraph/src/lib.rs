pub mod cache;
pub mod cli;
pub mod encoders;
pub mod error;
pub mod explain;
pub mod fusion;
pub mod graph;
pub mod java;
pub mod objectives;
pub mod pipeline;
pub mod semantic;
pub mod tensor;

pub use error::{Error, ParseError, Result};
