//! Popularity prediction for retweet cascades from the structure of their
//! early adopters.
//!
//! The pipeline reads a follower graph ([`graph`]) and retweet logs
//! ([`cascade`]), measures each cascade at an indicating time
//! ([`features`]), fits log-linear predictors of the popularity at a later
//! reference time ([`regression`]) and scores them ([`evaluation`]).
//! [`synth`] generates corpora with known ground truth and [`pipeline`]
//! drives the command-line tool.

pub mod cascade;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod graph;
pub mod pipeline;
pub mod regression;
pub mod synth;

pub use cascade::{Cascade, CascadePrefix, RetweetEvent};
pub use error::{Error, Result};
pub use features::{FeatureConfig, FeatureRow};
pub use graph::{FollowerGraph, NodeId};
pub use regression::{ModelCoefficients, ModelVariant};
