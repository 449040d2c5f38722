//! Spatiotemporal pattern networks over symbolic dynamic filtering.
//!
//! The pipeline discretizes continuous streams ([`partitioning`]), fits
//! D-Markov and cross (xD-Markov) transition models ([`markov`]), scores
//! self- and cross-dependencies by mutual information ([`infotheory`]),
//! predicts one stream from another ([`prediction`]) and projects
//! multi-component predictions onto the measured aggregate
//! ([`disaggregation`]).

pub mod cli;
pub mod dataio;
pub mod disaggregation;
pub mod error;
pub mod experiments;
pub mod infotheory;
pub mod markov;
pub mod matrix;
mod parallel;
pub mod partitioning;
pub mod pipeline;
pub mod prediction;

pub use error::{Error, Result};
