#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::redundant_guards)]

pub mod conslaw;
pub mod error;
pub mod fracops;
pub mod quad;
pub mod scenario;
pub mod selftest;
pub mod specialfn;
pub mod symcat;
pub mod tfde;

pub use error::{Error, Result};
