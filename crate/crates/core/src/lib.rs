//! Monetary policy spillovers from FOMC announcements.
//!
//! [`hfdecomp`] splits high-frequency surprises into monetary-policy and
//! information shocks, [`paneldata`] loads country panels and aligns the
//! shocks to months, [`pbvar`] estimates pooled Bayesian panel VARs (plus the
//! mean-group benchmark and rotation pooling), [`localproj`] runs panel local
//! projections, and [`dgpsim`] simulates data with known responses.

// NaN must fail validation, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dgpsim;
pub mod error;
pub mod hfdecomp;
pub mod linalg;
pub mod localproj;
pub mod numfmt;
pub mod paneldata;
pub mod pbvar;

pub use error::{Error, Result};
