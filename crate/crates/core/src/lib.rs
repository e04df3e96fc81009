// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod autodiff;
pub mod config;
pub mod error;
pub mod extractor;
pub mod fewshot;
pub mod kv;
pub mod pipeline;
pub mod rng;
pub mod semantic;
pub mod synth;
pub mod trinet;

pub use error::{Error, Result};
