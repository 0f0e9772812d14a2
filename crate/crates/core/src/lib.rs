//! Estimation of per-user confidence bounds ("open-mindedness") from
//! longitudinal opinion and interaction data, with a bounded-confidence
//! simulator for ground-truth validation.
//!
//! The pipeline: per-post scores are averaged into monthly leaning scores
//! ([`leaning`]), interactions become monthly snapshot graphs ([`graph`]),
//! and each user's bound is estimated from one month pair at a time
//! ([`estimator`]). [`transitions`] and [`stats`] cover the descriptive
//! analyses; [`sim`] and [`validation`] generate synthetic data with known
//! bounds.
//!
//! Batch work runs on rayon when the `parallel` feature is enabled (the
//! default); see [`par::Execution`].

pub mod error;
pub mod estimator;
pub mod graph;
pub mod io;
pub mod leaning;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod sim;
pub mod stats;
pub mod transitions;
pub mod validation;

pub use error::{Error, Result};
pub use estimator::{estimate_all, estimate_user, EstimationBatch, EstimationResult, SkipReason};
pub use graph::{NetworkStats, SnapshotGraph};
pub use leaning::Thresholds;
pub use model::{InteractionRecord, LeaningLabel, MonthId, Opinion, OpinionTable, PostScore};
pub use par::Execution;
