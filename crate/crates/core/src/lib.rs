//! Wearable intake monitoring.
//!
//! Pipelines for in-meal bite detection from wrist inertial data, all-day
//! meal localization from detected bites, and chewing detection by
//! late fusion of PPG and audio classifier scores. Evaluation schemes and
//! behavioral indicators operate on the event and interval types in
//! [`signal`].
//!
//! Trained networks are not part of this crate. Window scoring goes through
//! the [`bite::WindowScorer`] trait so scores produced elsewhere can be fed
//! in from files.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bite;
pub mod chew;
pub mod config;
pub mod error;
pub mod eval;
pub mod indicators;
pub mod io;
pub mod meal;
pub mod preprocess;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
pub use signal::{EventSet, InertialRecording, Interval, IntervalSet, Label, ScoreSeries, Window};
