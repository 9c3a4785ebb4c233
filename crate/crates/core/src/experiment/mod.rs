//! Evaluation protocol: split sampling, synthetic data, metrics and benchmark sweeps.

pub mod benchmark;
pub mod metrics;
pub mod sampling;
pub mod synthetic;

pub use benchmark::{run_benchmark, summarize, to_csv, BenchmarkConfig, BenchmarkData, ResultRow, Summary};
pub use metrics::{accuracy, balanced_accuracy, correlate, per_class_recall, silhouette_score, MetricReport};
pub use sampling::{sample_support, SamplingSpec, Split};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};
