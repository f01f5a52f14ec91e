use super::{split, Dataset, DatasetHeader, TactileSensor};
use crate::balance::SimConfig;
use crate::posenet::{evaluate, fit, EpochLoss, Evaluation, NetworkSpec, PoseModel, TrainConfig, TrainReport};
use crate::{Error, Result};

/// Trained model with its loss curve and held-out evaluation.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: PoseModel,
    pub report: TrainReport,
    pub test: Evaluation,
}

/// Network with the default layer stack sized for the dataset's fields.
pub fn spec_for(header: &DatasetHeader) -> NetworkSpec {
    NetworkSpec::standard(header.config.field_height, header.config.field_width)
}

/// Splits, trains and evaluates on the held-out part.
pub fn train_on_dataset(
    dataset: &Dataset,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&PoseModel, &EpochLoss),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (train, test) = split(&dataset.samples, cfg.split, cfg.seed)?;
    let mut model = PoseModel::init(spec_for(&dataset.header), cfg.seed)?;
    let report = fit(&mut model, &train, &test, cfg, on_epoch)?;
    let test = evaluate(&model, if test.is_empty() { &train } else { &test })?;
    Ok(TrainOutcome { model, report, test })
}

/// Balance simulation config and sensor matching the foot a dataset was
/// recorded with.
pub fn balance_setup(header: &DatasetHeader) -> Result<(SimConfig, TactileSensor)> {
    let cfg = SimConfig {
        sensor: header.config.clone(),
        ..SimConfig::default()
    };
    let sensor = TactileSensor::new(&header.config, header.seed)?;
    Ok((cfg, sensor))
}
