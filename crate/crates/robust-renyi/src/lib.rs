//! Monte Carlo studies, data files and the command-line front end for
//! [`renyi_core`].
//!
//! The numerical work lives in `renyi-core`; this crate adds parallel
//! seeded simulation ([`montecarlo`]), CSV/JSON input and output ([`io`])
//! and the `robust-renyi` binary ([`cli`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod io;
pub mod montecarlo;

pub use error::{Error, Result};
