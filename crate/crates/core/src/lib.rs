//! Fairness-aware binary classification.
//!
//! Data ingestion and partitioning, fairness metrics, resampling
//! pre-processing, fairness-constrained logistic regression and SVM fits
//! (with optional random group intercepts), cut-off post-processing, and the
//! pipeline that chains the three stages. Everything numeric is generic over
//! [`Scalar`] (`f32` or `f64`).

pub mod data;
pub mod error;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod postprocess;
pub mod preprocess;
pub mod scalar;
pub mod solver;
pub mod synth;

pub use data::{
    ingest_dataset, partition, Column, Dataset, Groups, IngestOptions, LabelCoding, Octet, Partition, Table,
};
pub use error::{FairError, Result};
pub use metrics::{FairnessMetric, FairnessReport, MetricsBundle};
pub use optim::{Coefficients, ConstraintSet, Family, ModelSpec, Problem, Smoothing};
pub use pipeline::{fair_pred, fair_pred_mixed, InProcess, PipelineConfig, PipelineOutput, PostProcess, PreProcess};
pub use scalar::Scalar;
pub use solver::{solve, Init, Solution, SolveStatus, SolverOptions};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type ModelSpec64 = ModelSpec<f64>;
pub type ModelSpec32 = ModelSpec<f32>;
pub type Coefficients64 = Coefficients<f64>;
pub type Coefficients32 = Coefficients<f32>;
pub type SolverOptions64 = SolverOptions<f64>;
pub type SolverOptions32 = SolverOptions<f32>;
pub type Solution64 = Solution<f64>;
pub type Solution32 = Solution<f32>;
