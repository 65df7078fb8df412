// Float guards are written `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod correspondence;
pub mod embedding;
pub mod error;
pub mod fusion;
pub mod geodesics;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod mesh;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};
