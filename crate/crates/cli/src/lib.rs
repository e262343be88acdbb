//! Library surface of the pipeline binary: configuration, stage functions,
//! the end-to-end pipeline, and the report types.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod stages;
