//! Batch commands and the live telemetry service for the safety-stability filter.

pub mod commands;
pub mod configs;
pub mod service;
pub mod summary;
pub mod wire;
