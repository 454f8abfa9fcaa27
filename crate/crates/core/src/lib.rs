//! Constrained-mixture growth and remodeling of thin-walled vessels coupled to
//! a reduced-order hemodynamics model.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constituent;
pub mod coupling;
pub mod error;
pub mod growth;
pub mod hemodynamics;
pub mod membrane;
pub mod mixture;
pub mod output;
pub mod scenario;
pub mod tensor;
pub mod turnover;
pub mod validation;

pub use error::{Error, Result};
