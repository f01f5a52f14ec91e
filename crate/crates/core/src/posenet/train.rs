use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernels::Mode;
use super::model::{PoseExample, PoseModel, TrainingMeta};
use super::spec::NetworkSpec;
use crate::{mix_seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Fraction of samples used for training.
    pub split: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch: 16,
            epochs: 100,
            split: 0.8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::InvalidArgument(format!("split {} outside (0, 1)", self.split)));
        }
        if self.batch == 0 {
            return Err(Error::InvalidArgument("batch must be >= 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad learning rate {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean of the minibatch losses over the epoch (dropout active).
    pub train_rmse: f64,
    pub val_rmse: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub curve: Vec<EpochLoss>,
    pub steps: usize,
}

impl TrainReport {
    /// `epoch,train_rmse,val_rmse` CSV; missing validation values are empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,train_rmse,val_rmse")?;
        for e in &self.curve {
            match e.val_rmse {
                Some(v) => writeln!(w, "{},{},{}", e.epoch, e.train_rmse, v)?,
                None => writeln!(w, "{},{},", e.epoch, e.train_rmse)?,
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rmse_theta_f: f64,
    pub rmse_theta_g: f64,
    /// `(pred − target)` for `(theta_f, theta_g)`, per sample.
    pub residuals: Vec<[f64; 2]>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f32], grad: &[f32], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let g = g as f64;
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p = (*p as f64 - lr * mh / (vh.sqrt() + Self::EPS)) as f32;
        }
    }
}

/// Splits `dataset` with `cfg.split` and trains on the training part,
/// reporting validation loss on the rest each epoch.
pub fn train<T: PoseExample + Clone>(
    dataset: &[T],
    cfg: &TrainConfig,
    spec: NetworkSpec,
) -> Result<(PoseModel, TrainReport)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (tr, va) = crate::harness::split(dataset, cfg.split, cfg.seed)?;
    train_split(&tr, &va, cfg, spec)
}

/// Trains on `train_set` with Adam; `val_set` may be empty.
pub fn train_split<T: PoseExample>(
    train_set: &[T],
    val_set: &[T],
    cfg: &TrainConfig,
    spec: NetworkSpec,
) -> Result<(PoseModel, TrainReport)> {
    let mut model = PoseModel::init(spec, cfg.seed)?;
    let report = fit(&mut model, train_set, val_set, cfg, |_, _| {})?;
    Ok((model, report))
}

/// Continues training `model` in place. `on_epoch` sees each finished epoch.
pub fn fit<T: PoseExample>(
    model: &mut PoseModel,
    train_set: &[T],
    val_set: &[T],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&PoseModel, &EpochLoss),
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train_set.len() < cfg.batch {
        return Err(Error::InvalidArgument(format!(
            "training set of {} samples is smaller than batch {}",
            train_set.len(),
            cfg.batch
        )));
    }
    let mut adam = Adam::new(model.params().len());
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 1));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut report = TrainReport::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<&T> = chunk.iter().map(|&i| &train_set[i]).collect();
            let seed = mix_seed(cfg.seed, 1000 + report.steps as u64);
            let (loss, grad) = model.loss_and_gradient(&batch, Some(seed))?;
            adam.step(model.params_mut(), &grad, cfg.lr);
            sum_sq += loss * loss * batch.len() as f64;
            count += batch.len();
            report.steps += 1;
        }
        let val_rmse = if val_set.is_empty() {
            None
        } else {
            let ev = evaluate(model, val_set)?;
            Some(((ev.rmse_theta_f.powi(2) + ev.rmse_theta_g.powi(2)) / 2.0).sqrt())
        };
        let e = EpochLoss {
            epoch: epoch + 1,
            train_rmse: (sum_sq / count as f64).sqrt(),
            val_rmse,
        };
        on_epoch(model, &e);
        report.curve.push(e);
    }
    model.training_meta = Some(TrainingMeta {
        epochs: cfg.epochs,
        lr: cfg.lr,
        batch: cfg.batch,
        seed: cfg.seed,
    });
    Ok(report)
}

/// Eval-mode RMSE per angle over `dataset`.
pub fn evaluate<T: PoseExample>(model: &PoseModel, dataset: &[T]) -> Result<Evaluation> {
    use rayon::prelude::*;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let residuals: Vec<[f64; 2]> = dataset
        .par_iter()
        .map(|ex| {
            let (f, g) = model.forward(ex.field(), Mode::Eval)?;
            Ok([f - ex.theta_f(), g - ex.theta_g()])
        })
        .collect::<Result<_>>()?;
    let n = residuals.len() as f64;
    let rmse = |k: usize| (residuals.iter().map(|r| r[k] * r[k]).sum::<f64>() / n).sqrt();
    Ok(Evaluation {
        rmse_theta_f: rmse(0),
        rmse_theta_g: rmse(1),
        residuals,
    })
}
