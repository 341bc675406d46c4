//! Language-identity subspace analysis for multilingual token representations.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, reports and the
//! command-line pipeline live in the `lingsub` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod classifier;
pub mod error;
pub mod inlp;
pub mod intervention;
pub mod langvec;
pub mod linalg;
pub mod metrics;
pub mod repr;
pub mod synth;

pub use error::{Error, Result};
