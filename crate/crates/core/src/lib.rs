//! Flat Hölder cones of non-negative functions on `[0, 1]` and the smoothness of
//! their positive roots.
//!
//! * [`function_model`]: test function families with exact derivatives.
//! * [`holder_analysis`]: Hölder and flatness seminorms on dyadic grids.
//! * [`root_calculus`]: derivatives of `f^alpha` by Faà di Bruno, stability radii.
//! * [`wavelet_engine`]: Daubechies transforms, decay fits, Besov estimates.
//! * [`theorem_suite`]: empirical verification reports.
//! * [`cli`]: the `holdercone` command line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod function_model;
pub mod holder_analysis;
pub mod numfmt;
pub mod root_calculus;
pub mod theorem_suite;
pub mod wavelet_engine;

pub use error::{Error, Result};
pub use function_model::{paper_floor, sample, Differentiable, FunctionSpec, GridFunction};
