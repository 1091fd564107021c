//! Recourse generation by sampling from a learned conditional distribution
//! over favorable, realistic counterparts of a query instance.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub mod evalkit;
pub mod model;
pub mod pairing;
pub mod pipeline;
pub mod predictors;
pub mod rng;
pub mod sampling;
pub mod service;

pub use error::{Error, Result};
