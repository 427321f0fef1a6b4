#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
mod numeric;
pub mod tensor;

pub use error::{Error, ExitClass, Result};
