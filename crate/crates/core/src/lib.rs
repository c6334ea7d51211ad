//! Event-aware demand forecasting.
//!
//! Scheduled events such as promotions are grouped into demand uplift states
//! and enter an autoregressive regression as indicator variables:
//!
//! ```text
//! X_t = a0 + sum_i a_i X_{t-i} + sum_j b_j S_{jt} + e_t
//! ```
//!
//! The crate covers the whole workflow: ingesting weekly demand and event
//! calendars, building the states, fitting and diagnosing the model,
//! forecasting a holdout and scoring it against simple baselines.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod dus;
pub mod error;
pub mod fse;
pub mod harness;
pub mod io;
pub mod metrics;
mod serde_nonfinite;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
