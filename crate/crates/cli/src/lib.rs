//! Experiment harness behind the `subrad` binary.
//!
//! [`config`] declares the JSON experiment schema, [`experiment`] runs
//! seeded Monte-Carlo trials and scores detections against the planted
//! scene, and [`report`] renders per-SNR hit rates.  The binary itself is
//! a thin dispatcher in `main.rs`; everything testable lives here.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod report;
