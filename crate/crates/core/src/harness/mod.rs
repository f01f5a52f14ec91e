//! Datasets, file formats, scenario profiles and end-to-end pipelines.

mod dataset;
mod pipeline;
mod sensor;
mod split;

pub use dataset::{gen_dataset, AngleRange, Dataset, DatasetConfig, DatasetHeader, DatasetSample, GridSpec};
pub use pipeline::{balance_setup, spec_for, train_on_dataset, TrainOutcome};
pub use sensor::TactileSensor;
pub use split::{split, split_indices};
