//! Minimum Rényi-type pseudodistance (min R_α) estimation.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! - the R_α pseudodistance family and its empirical criterion ([`pseudodistance`]),
//! - the four built-in parametric families ([`models`]),
//! - min R_α fitting, the density power divergence competitor and
//!   the statistic R̂_α ([`estimation`]),
//! - sandwich covariances and asymptotic relative efficiencies ([`asymptotics`]),
//! - influence functions and gross error sensitivities ([`robustness`]),
//! - the Gaussian linear regression estimator ([`regression`]).
//!
//! Integrals without a closed form are evaluated with the rules in
//! [`quadrature`]. All logarithms are natural logarithms.
//!
//! Every function is a pure function of its arguments. Samplers take an
//! explicit random number generator, there is no global state.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod alpha;
pub mod asymptotics;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod models;
pub mod pseudodistance;
pub mod quadrature;
pub mod regression;
pub mod rng;
pub mod robustness;
mod roots;

pub use alpha::{Alpha, DEFAULT_BETA_MAX};
pub use error::{Error, Result};
pub use models::{
    Contaminant, ContaminantSpec, Exponential, Model, ModelKind, MvnMean, NormalLocation, NormalScale, ParametricModel, Sample,
};
pub use quadrature::{QuadratureSpec, Scheme};
