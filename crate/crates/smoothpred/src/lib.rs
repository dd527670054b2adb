//! Dynamic predecessor search for `b`-bit integer keys (`b <= 63`) drawn from
//! a smooth but otherwise unknown distribution.
//!
//! The structure has two halves. A one-shot calibration pass partitions the
//! universe into equal-width parts and freezes a small static index over a set
//! of representative keys; after that, every stored key lives in one of a set
//! of short sorted buckets addressed through the static index, with two small
//! dynamic fallback sets absorbing bucket overflow and bucket underflow. When
//! the input really is smooth, buckets stay logarithmic in size and the
//! fallbacks stay nearly idle, so updates and predecessor queries touch a
//! constant number of cache-friendly blocks plus one static-index descent.
//!
//! Module map:
//!
//! * [`partition`]: universe partitioning and the tail bound used to size it
//! * [`sampler`]: input distributions (parsing, sampling, smoothness probe)
//! * [`static_pred`]: the static rank index over reduced keys
//! * [`bucket`]: fixed-capacity sorted buckets
//! * [`fallback`]: dynamic ordered-set fallbacks
//! * [`engine`]: the full dynamic structure
//! * [`oracle`]: a deliberately boring reference implementation
//! * [`harness`]: workload generation, oracle-checked replay, sweeps

pub mod bucket;
pub mod engine;
pub mod fallback;
pub mod harness;
pub mod oracle;
pub mod partition;
pub mod sampler;
pub mod static_pred;

/// Key type. Every key must be below `2^b` for the configured `b <= 63`.
pub type Key = u64;
