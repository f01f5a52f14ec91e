use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernels::{self, Mode, Scalar};
use super::spec::{LayerPlan, LayerSpec, NetworkSpec, Shape};
use crate::{mix_seed, DisplacementField, Error, Result};

const MAGIC: &[u8; 4] = b"TFPM";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

/// A labelled displacement field: the network regresses `(theta_f, theta_g)`.
pub trait PoseExample: Sync {
    fn field(&self) -> &DisplacementField;
    fn theta_f(&self) -> f64;
    fn theta_g(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSample {
    pub field: DisplacementField,
    pub theta_f: f64,
    pub theta_g: f64,
}

impl PoseExample for PoseSample {
    fn field(&self) -> &DisplacementField {
        &self.field
    }
    fn theta_f(&self) -> f64 {
        self.theta_f
    }
    fn theta_g(&self) -> f64 {
        self.theta_g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseModel {
    spec: NetworkSpec,
    plans: Vec<LayerPlan>,
    params: Vec<f32>,
    pub training_meta: Option<TrainingMeta>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    spec: NetworkSpec,
    training_meta: Option<TrainingMeta>,
    param_bytes: usize,
}

impl PoseModel {
    /// He-normal weights, zero biases.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let plans = spec.plan()?;
        let total = plans.iter().map(|p| p.param_count).sum();
        let mut params = vec![0.0f32; total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for plan in &plans {
            let (fan_in, n_weights) = match (&plan.spec, plan.input) {
                (LayerSpec::Conv { out_channels }, Shape::Chw(c, _, _)) => (c * 9, out_channels * c * 9),
                (LayerSpec::Dense { units, .. }, Shape::Flat(n)) => (n, units * n),
                _ => continue,
            };
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            for p in &mut params[plan.param_offset..plan.param_offset + n_weights] {
                *p = normal.sample(&mut rng) as f32;
            }
        }
        Ok(Self {
            spec,
            plans,
            params,
            training_meta: None,
        })
    }

    pub fn from_params(spec: NetworkSpec, params: Vec<f32>) -> Result<Self> {
        let plans = spec.plan()?;
        let total: usize = plans.iter().map(|p| p.param_count).sum();
        if params.len() != total {
            return Err(Error::DimensionMismatch {
                expected: format!("{total} parameters"),
                actual: format!("{} parameters", params.len()),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(Self {
            spec,
            plans,
            params,
            training_meta: None,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn plans(&self) -> &[LayerPlan] {
        &self.plans
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    /// Flow field as a `[u plane, v plane]` tensor scaled by the input scale.
    pub fn input_tensor<S: Scalar>(&self, field: &DisplacementField) -> Result<Vec<S>> {
        let want = (self.spec.input.width, self.spec.input.height);
        if field.dims() != want {
            return Err(Error::dims(want, field.dims()));
        }
        let inv = 1.0 / self.spec.input_scale;
        let n = field.width() * field.height();
        let mut t = vec![S::zero(); 2 * n];
        for (i, uv) in field.vectors().iter().enumerate() {
            t[i] = S::from_f64(uv[0] as f64 * inv);
            t[n + i] = S::from_f64(uv[1] as f64 * inv);
        }
        Ok(t)
    }

    /// Returns `(theta_f_hat, theta_g_hat)` in degrees.
    pub fn forward(&self, field: &DisplacementField, mode: Mode) -> Result<(f64, f64)> {
        let x = self.input_tensor::<f32>(field)?;
        let out = kernels::forward(&self.plans, &self.params, x, mode)
            .acts
            .pop()
            .expect("output");
        Ok((out[0] as f64, out[1] as f64))
    }

    /// Eval-mode prediction.
    pub fn predict(&self, field: &DisplacementField) -> Result<(f64, f64)> {
        self.forward(field, Mode::Eval)
    }

    /// Batch RMSE loss and its gradient in 32-bit arithmetic.
    pub fn loss_and_gradient<T: PoseExample>(&self, batch: &[&T], mode_seed: Option<u64>) -> Result<(f64, Vec<f32>)> {
        batch_gradient(&self.plans, &self.params, batch, |f| self.input_tensor(f), mode_seed)
    }

    /// Same as [`Self::loss_and_gradient`] in 64-bit arithmetic with explicit
    /// parameters.
    pub fn loss_and_gradient_f64<T: PoseExample>(
        &self,
        params: &[f64],
        batch: &[&T],
        mode_seed: Option<u64>,
    ) -> Result<(f64, Vec<f64>)> {
        if params.len() != self.params.len() {
            return Err(Error::InvalidArgument("parameter vector length mismatch".into()));
        }
        batch_gradient(&self.plans, params, batch, |f| self.input_tensor(f), mode_seed)
    }

    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let header = CheckpointHeader {
            spec: self.spec.clone(),
            training_meta: self.training_meta,
            param_bytes: self.params.len() * 4,
        };
        let json = serde_json::to_vec(&header)?;
        let mut buf = Vec::with_capacity(8 + json.len() + header.param_bytes);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
        buf.extend_from_slice(&json);
        for p in &self.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        w.write_all(&buf).map_err(|e| Error::io("<checkpoint>", e))
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::io("<checkpoint>", e))?;
        Self::from_checkpoint_bytes(&bytes)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |reason: &str| Error::Format {
            path: "<checkpoint>".into(),
            reason: reason.into(),
        };
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(bad("missing TFPM magic"));
        }
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let body = bytes.get(8..8 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: CheckpointHeader = serde_json::from_slice(body)?;
        let payload = &bytes[8 + hlen..];
        if payload.len() != header.param_bytes || !header.param_bytes.is_multiple_of(4) {
            return Err(bad("parameter payload length does not match header"));
        }
        let params = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let mut model = Self::from_params(header.spec, params)?;
        model.training_meta = header.training_meta;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_checkpoint(std::io::BufWriter::new(f))
            .map_err(|e| e.at_path(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_bytes(&bytes).map_err(|e| e.at_path(path))
    }
}

/// RMSE over all `2 × batch` outputs and its gradient. Per-sample passes run
/// in parallel; gradients are summed in sample order.
fn batch_gradient<S: Scalar, T: PoseExample>(
    plans: &[LayerPlan],
    params: &[S],
    batch: &[&T],
    tensor: impl Fn(&DisplacementField) -> Result<Vec<S>> + Sync,
    mode_seed: Option<u64>,
) -> Result<(f64, Vec<S>)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let traces: Vec<_> = batch
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let mode = match mode_seed {
                Some(s) => Mode::Train {
                    seed: mix_seed(s, i as u64),
                },
                None => Mode::Eval,
            };
            Ok(kernels::forward(plans, params, tensor(ex.field())?, mode))
        })
        .collect::<Result<_>>()?;
    let residuals: Vec<[f64; 2]> = traces
        .iter()
        .zip(batch)
        .map(|(t, ex)| {
            let out = t.acts.last().expect("output");
            [out[0].to_f64() - ex.theta_f(), out[1].to_f64() - ex.theta_g()]
        })
        .collect();
    let n = (2 * batch.len()) as f64;
    let loss = (residuals.iter().flatten().map(|r| r * r).sum::<f64>() / n).sqrt();
    let mut grad = vec![S::zero(); params.len()];
    if loss == 0.0 {
        return Ok((loss, grad));
    }
    let scale = 1.0 / (n * loss);
    let grads: Vec<Vec<S>> = traces
        .par_iter()
        .zip(residuals.par_iter())
        .map(|(t, r)| {
            let mut g = vec![S::zero(); params.len()];
            let d = vec![S::from_f64(r[0] * scale), S::from_f64(r[1] * scale)];
            kernels::backward(plans, params, t, d, &mut g);
            g
        })
        .collect();
    for g in &grads {
        for (a, &b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    Ok((loss, grad))
}
