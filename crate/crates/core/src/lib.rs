// `!(x > 0.0)` is used on purpose: it also rejects NaN. Index loops mirror tensor notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod checks;
pub mod cli;
pub mod config;
pub mod dissipation;
pub mod error;
pub mod lab;
pub mod linearized;
pub mod load;
pub mod material;
pub mod point_solver;
pub mod projection;
pub mod prox;
pub mod quadrature;
pub mod quasistatic;
pub mod sampling;
pub mod tensor3;

pub use error::{Error, Result};
