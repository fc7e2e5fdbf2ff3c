//! Statistics, questionnaire scoring and dataset handling for the
//! driving-style preference study.

pub mod dataset;
pub mod error;
pub mod mdsi;
pub mod request;
pub mod stats;
pub mod study;

pub use error::{Error, Result};
