//! Configuration-driven runner for the wave-packet identities in `twp-core`:
//! verification suites with a JSON report, and CSV data dumps.

pub mod app;
pub mod config;
pub mod dump;
pub mod report;
pub mod suites;
