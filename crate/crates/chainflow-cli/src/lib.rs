//! Support library behind the `chainflow` binary: metrics CSV writing and
//! reading, and ratio-report construction.

pub mod metrics;
pub mod report;
