// `!(x > 0.0)` style guards are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod harness;
pub mod heavytail;
pub mod offspring;
pub mod special;
pub mod treegen;
pub mod walk;

pub use error::{Error, Result};
