//! Data preparation, the two-stage training schedule, checkpoints and
//! evaluation.

mod checkpoint;
mod config;
mod dataset;
mod eval;
mod synth;
mod train;

pub use checkpoint::{parameter_digest, Checkpoint, MAGIC, VERSION};
pub use config::{Stage, TrainConfig};
pub use dataset::{
    bicubic_baseline, ingest_dataset, load_samples, DatasetManifest, ManifestEntry, Sample, MANIFEST_FILE,
};
pub use eval::{
    evaluate_checkpoint, evaluate_samples, self_check, super_resolve, EvalOutcome, EVAL_OVERLAP, EVAL_TILE,
};
pub use synth::{make_synthetic_dataset, SyntheticSceneSpec};
pub use train::{
    generator_from, noise_distance, train_stage1, train_stage1_on, train_stage2, train_stage2_on, StepObserver,
    TrainOutcome,
};
