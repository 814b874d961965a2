//! Deterministic harness for pool-based active learning on multi-label
//! classification over frozen feature embeddings.
//!
//! The pieces, bottom-up:
//!
//! * [`dataset`]: the embedding directory format, validation, day-based
//!   pool/test splits and a synthetic generator;
//! * [`model`]: a linear sigmoid head trained with BCE, Rectified Adam and a
//!   cosine learning-rate schedule;
//! * [`strategies`]: random, entropy, BADGE-style gradient embeddings and
//!   TypiClust, with the shared k-means machinery;
//! * [`metrics`]: cmAP, macro AUROC and top-1 accuracy;
//! * [`experiment`]: the query/annotate/retrain/evaluate cycle and
//!   improvement curves against a baseline.

pub mod dataset;
pub mod experiment;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod strategies;

pub use dataset::{
    load_dataset, split_pool_test, synth_dataset, write_dataset, EmbeddingDataset, SplitSpec, SynthConfig,
};
pub use experiment::{improvement_curves, run_experiment, Experiment, ExperimentConfig, LearningCurve, Metric};
pub use matrix::Matrix;
pub use metrics::MetricRecord;
pub use model::{HeadParams, TrainConfig};
pub use strategies::Strategy;
