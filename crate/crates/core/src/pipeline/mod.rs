//! Dataset construction, manifests, splitting, evaluation and baselines.

mod baseline;
mod build;
mod config;
mod evaluate;
mod ingest;
mod manifest;

pub use baseline::{run_baselines, BaselineReport};
pub use build::{build_dataset, sample_rng, IMAGES_DIR, MANIFEST_FILE, MAPS_DIR, MASKS_DIR};
pub use config::{DefocusSettings, HazeSettings, MotionSettings, PipelineConfig, TypeCounts};
pub use evaluate::{
    evaluate_run, predicted_type, write_outcome, EvalOptions, EvalOutcome, PROBABILITIES_FILE, PR_STEPS,
};
pub use ingest::{discover_frames, Frame};
pub use manifest::{split_dataset, DatasetManifest, SampleRecord, Split, MANIFEST_VERSION};
