use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::optflow::FlowParams;
use crate::posenet::PoseExample;
use crate::skin_sim::ScenarioState;
use crate::{DisplacementField, Error, LegGeometry, Result, SkinParams};

const MAGIC: &[u8; 4] = b"TFDS";

/// Inclusive arithmetic range of angles, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AngleRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    pub fn single(v: f64) -> Self {
        Self::new(v, v, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step > 0.0) || self.stop < self.start {
            return Err(Error::InvalidArgument(format!(
                "bad angle range {}..{} step {}",
                self.start, self.stop, self.step
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub theta_g: AngleRange,
    pub theta_leg: AngleRange,
}

impl Default for GridSpec {
    /// Plate −12°..12° in 1° steps, leg 40°..135° in 5° steps: 25 × 20.
    fn default() -> Self {
        Self {
            theta_g: AngleRange::new(-12.0, 12.0, 1.0),
            theta_leg: AngleRange::new(40.0, 135.0, 5.0),
        }
    }
}

impl GridSpec {
    /// Grid points, plate angle outermost.
    pub fn points(&self) -> Result<Vec<(f64, f64)>> {
        self.theta_g.validate()?;
        self.theta_leg.validate()?;
        let legs = self.theta_leg.values();
        Ok(self
            .theta_g
            .values()
            .into_iter()
            .flat_map(|g| legs.iter().map(move |&l| (g, l)))
            .collect())
    }
}

/// Everything needed to synthesize a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub grid: GridSpec,
    pub skin: SkinParams,
    pub geometry: LegGeometry,
    pub flow: FlowParams,
    pub raster_width: usize,
    pub raster_height: usize,
    /// Side of one pattern patch, px.
    pub pattern_patch_px: usize,
    pub pattern_candidates: usize,
    /// Network input dims the flow is pooled to.
    pub field_width: usize,
    pub field_height: usize,
    /// Adds uniform ±0.2° IMU error to the `theta_f` labels.
    pub label_noise: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self::ci()
    }
}

impl DatasetConfig {
    /// 160×140 raster pooled to 32×28.
    pub fn ci() -> Self {
        Self {
            grid: GridSpec::default(),
            skin: SkinParams::for_raster_width(160),
            geometry: LegGeometry::default(),
            flow: FlowParams::default(),
            raster_width: 160,
            raster_height: 140,
            pattern_patch_px: 4,
            pattern_candidates: 8,
            field_width: 32,
            field_height: 28,
            label_noise: false,
        }
    }

    /// 640×480 camera raster pooled to 214×182.
    pub fn full() -> Self {
        Self {
            skin: SkinParams::for_raster_width(640),
            raster_width: 640,
            raster_height: 480,
            field_width: 214,
            field_height: 182,
            ..Self::ci()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.skin.validate()?;
        self.geometry.validate()?;
        self.flow.validate()?;
        if self.pattern_patch_px == 0
            || !self.raster_width.is_multiple_of(self.pattern_patch_px)
            || !self.raster_height.is_multiple_of(self.pattern_patch_px)
        {
            return Err(Error::InvalidArgument(
                "raster dims must be positive multiples of the pattern patch size".into(),
            ));
        }
        if self.field_width == 0
            || self.field_height == 0
            || self.field_width > self.raster_width
            || self.field_height > self.raster_height
        {
            return Err(Error::InvalidArgument("field dims must fit inside the raster".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub config: DatasetConfig,
    pub seed: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    pub theta_g: f32,
    pub theta_leg: f32,
    pub theta_f: f32,
    pub field: DisplacementField,
}

impl PoseExample for DatasetSample {
    fn field(&self) -> &DisplacementField {
        &self.field
    }
    fn theta_f(&self) -> f64 {
        self.theta_f as f64
    }
    fn theta_g(&self) -> f64 {
        self.theta_g as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<DatasetSample>,
}

/// Synthesizes one sample per grid point: deform, render, run flow, pool.
pub fn gen_dataset(config: &DatasetConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let points = config.grid.points()?;
    let sensor = super::TactileSensor::new(config, seed)?;
    let samples = points
        .par_iter()
        .enumerate()
        .map(|(i, &(tg, tl))| {
            let sample_seed = crate::mix_seed(seed, i as u64);
            let state = ScenarioState::in_contact(tg, tl, &config.geometry, &config.skin);
            let flow = sensor.sense(&state, sample_seed)?;
            let field = sensor.pool(&flow)?;
            let mut theta_f = state.theta_f;
            if config.label_noise {
                let mut rng = ChaCha8Rng::seed_from_u64(sample_seed ^ 0x5EED);
                theta_f += rng.random_range(-0.2..=0.2);
            }
            Ok(DatasetSample {
                theta_g: tg as f32,
                theta_leg: tl as f32,
                theta_f: theta_f as f32,
                field,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        header: DatasetHeader {
            config: config.clone(),
            seed,
            count: samples.len(),
        },
        samples,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn field_dims(&self) -> (usize, usize) {
        (self.header.config.field_width, self.header.config.field_height)
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let (fw, fh) = self.field_dims();
        let io = |e| Error::io("<dataset>", e);
        let json = serde_json::to_vec(&self.header)?;
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&(json.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&json).map_err(io)?;
        for s in &self.samples {
            if s.field.dims() != (fw, fh) {
                return Err(Error::dims((fw, fh), s.field.dims()));
            }
            let mut block = Vec::with_capacity(4 * (3 + 2 * fw * fh));
            for v in [s.theta_g, s.theta_leg, s.theta_f] {
                block.extend_from_slice(&v.to_le_bytes());
            }
            for uv in s.field.vectors() {
                block.extend_from_slice(&uv[0].to_le_bytes());
                block.extend_from_slice(&uv[1].to_le_bytes());
            }
            w.write_all(&block).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let bad = |reason: String| Error::Format {
            path: "<dataset>".into(),
            reason,
        };
        let mut head = [0u8; 8];
        r.read_exact(&mut head).map_err(|_| bad("truncated preamble".into()))?;
        if &head[..4] != MAGIC {
            return Err(bad("missing TFDS magic".into()));
        }
        let hlen = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes")) as usize;
        let mut json = vec![0u8; hlen];
        r.read_exact(&mut json).map_err(|_| bad("truncated header".into()))?;
        let header: DatasetHeader = serde_json::from_slice(&json)?;
        let (fw, fh) = (header.config.field_width, header.config.field_height);
        let mut block = vec![0u8; 4 * (3 + 2 * fw * fh)];
        let mut samples = Vec::with_capacity(header.count);
        for i in 0..header.count {
            r.read_exact(&mut block)
                .map_err(|_| bad(format!("truncated at sample {i} of {}", header.count)))?;
            let vals: Vec<f32> = block
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let vectors = vals[3..].chunks_exact(2).map(|c| [c[0], c[1]]).collect();
            samples.push(DatasetSample {
                theta_g: vals[0],
                theta_leg: vals[1],
                theta_f: vals[2],
                field: DisplacementField::from_vectors(fw, fh, vectors)?,
            });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|e| Error::io("<dataset>", e))? != 0 {
            return Err(bad("trailing bytes after last sample".into()));
        }
        Ok(Self { header, samples })
    }

    /// Reads only the header of a dataset file.
    pub fn load_header(path: impl AsRef<Path>) -> Result<DatasetHeader> {
        let path = path.as_ref();
        let bad = |reason: &str| Error::Format {
            path: path.into(),
            reason: reason.into(),
        };
        let mut r = BufReader::new(std::fs::File::open(path).map_err(|e| Error::io(path, e))?);
        let mut head = [0u8; 8];
        r.read_exact(&mut head).map_err(|_| bad("truncated preamble"))?;
        if &head[..4] != MAGIC {
            return Err(bad("missing TFDS magic"));
        }
        let mut json = vec![0u8; u32::from_le_bytes(head[4..8].try_into().expect("4 bytes")) as usize];
        r.read_exact(&mut json).map_err(|_| bad("truncated header"))?;
        Ok(serde_json::from_slice(&json)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(f).map_err(|e| e.at_path(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(f).map_err(|e| e.at_path(path))
    }
}
