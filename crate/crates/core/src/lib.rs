//! Evaluation harness for invoice information extraction.

pub mod schema;
pub mod normalize;
pub mod matching;
pub mod alignment;
pub mod consistency;
pub mod config;
pub mod metrics;
pub mod corpus;
pub mod evaluate;
pub mod synth;
pub mod cli;
