//! Engine for mechanized causal-effect studies with a single time-point
//! treatment and right-censoring.
//!
//! The crate walks the full causal roadmap: declare a causal question and
//! model ([`graph`]), check identification against the graph
//! ([`graph::find_adjustment_sets`]), audit the observed data ([`data`]),
//! estimate the statistical estimand with cross-validated learner
//! selection ([`estimate`], [`learn`]), probe sensitivity to residual
//! bias ([`sensitivity`]), and evaluate candidate study designs by
//! outcome-blind simulation ([`sim`]). [`config`] and [`report`] tie the
//! pieces to the file formats the CLI speaks.

pub mod data;
pub mod error;
pub mod estimand;
pub mod estimate;
pub mod graph;
pub mod learn;
pub mod seeding;
pub mod sensitivity;
pub mod sim;

pub use error::{EngineError, Result};
