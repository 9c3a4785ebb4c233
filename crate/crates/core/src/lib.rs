//! Semi-supervised few-shot adaptation of vision-language embeddings.
//!
//! Given frozen, unit-norm image embeddings, text prototypes for C classes, a small
//! labeled support set and a pool of unlabeled embeddings, the SS-Text-U solver
//! alternates two exact/approximate block minimizations:
//!
//! * **z-step**: pseudo-labels for the unlabeled set from an entropy-regularized
//!   transport problem whose class marginal is estimated from the support set
//!   ([`ot::sinkhorn`]);
//! * **W-step**: closed-form class prototypes anchored to the text prototypes
//!   ([`solvers::update_prototypes`]).
//!
//! The [`experiment`] module holds the evaluation protocol (imbalanced support
//! sampling, balanced accuracy, silhouette analysis) and a synthetic data generator.

pub mod data;
pub mod error;
pub mod experiment;
pub mod objectives;
pub mod ot;
pub mod solvers;
pub mod zeroshot;

#[cfg(feature = "cli")]
pub mod cli;

pub use data::{Dataset, EmbeddingMatrix, EvalSet, LabelMarginal, PrototypeMatrix, SupportSet, UnlabeledSet};
pub use error::{Error, Result};
pub use objectives::{LambdaPolicy, ObjectiveValue};
pub use ot::{SimilarityMatrix, TransportPlan};
pub use solvers::{FitResult, MarginalSource, Solver, SolverConfig};
pub use zeroshot::{ProbabilityMatrix, Temperature};

/// Version string embedded in every output artifact.
pub const VERSION: &str = concat!("sstextu ", env!("CARGO_PKG_VERSION"));
