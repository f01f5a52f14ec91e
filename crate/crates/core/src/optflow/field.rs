use crate::{Error, Result};

/// Dense per-pixel displacement `(u, v)` in pixels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    width: usize,
    height: usize,
    vectors: Vec<[f32; 2]>,
}

impl DisplacementField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, [0.0, 0.0])
    }

    pub fn constant(width: usize, height: usize, uv: [f32; 2]) -> Self {
        Self {
            width,
            height,
            vectors: vec![uv; width * height],
        }
    }

    pub fn from_vectors(width: usize, height: usize, vectors: Vec<[f32; 2]>) -> Result<Self> {
        if vectors.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} vectors", width * height),
                actual: format!("{} vectors", vectors.len()),
            });
        }
        if vectors.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "displacement field contains non-finite components".into(),
            ));
        }
        Ok(Self { width, height, vectors })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 2]) -> Self {
        let mut vectors = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                vectors.push(f(x, y));
            }
        }
        Self { width, height, vectors }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn vectors(&self) -> &[[f32; 2]] {
        &self.vectors
    }

    pub fn vectors_mut(&mut self) -> &mut [[f32; 2]] {
        &mut self.vectors
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 2] {
        self.vectors[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, uv: [f32; 2]) {
        self.vectors[y * self.width + x] = uv;
    }

    /// Mean Euclidean magnitude of the vectors.
    pub fn mean_magnitude(&self) -> f64 {
        if self.vectors.is_empty() {
            return 0.0;
        }
        let sum: f64 = self.vectors.iter().map(|[u, v]| (*u as f64).hypot(*v as f64)).sum();
        sum / self.vectors.len() as f64
    }

    /// Component-wise mean `(mean u, mean v)`.
    pub fn mean_vector(&self) -> [f64; 2] {
        let n = self.vectors.len().max(1) as f64;
        let (su, sv) = self
            .vectors
            .iter()
            .fold((0.0, 0.0), |(a, b), [u, v]| (a + *u as f64, b + *v as f64));
        [su / n, sv / n]
    }

    /// Endpoint errors against `truth` over the interior, skipping `margin`
    /// pixels at each border.
    pub fn endpoint_errors(&self, truth: &DisplacementField, margin: usize) -> Result<Vec<f64>> {
        if self.dims() != truth.dims() {
            return Err(Error::dims(truth.dims(), self.dims()));
        }
        let mut out = Vec::new();
        for y in margin..self.height.saturating_sub(margin) {
            for x in margin..self.width.saturating_sub(margin) {
                let [u, v] = self.get(x, y);
                let [tu, tv] = truth.get(x, y);
                out.push(((u - tu) as f64).hypot((v - tv) as f64));
            }
        }
        Ok(out)
    }

    pub fn mean_endpoint_error(&self, truth: &DisplacementField, margin: usize) -> Result<f64> {
        let e = self.endpoint_errors(truth, margin)?;
        if e.is_empty() {
            return Err(Error::InvalidArgument("evaluation region is empty".into()));
        }
        Ok(e.iter().sum::<f64>() / e.len() as f64)
    }

    /// Block-mean pooling onto an `out_w × out_h` grid.
    ///
    /// Output cell `(i, j)` averages source rows `⌊j·H/out_h⌋ .. ⌊(j+1)·H/out_h⌋`
    /// and likewise for columns, so non-integer ratios (640×480 → 214×182)
    /// are covered without gaps or overlap.
    pub fn downsample(&self, out_w: usize, out_h: usize) -> Result<DisplacementField> {
        if out_w == 0 || out_h == 0 {
            return Err(Error::InvalidArgument(format!(
                "downsample target {out_w}x{out_h} has a zero dimension"
            )));
        }
        if out_w > self.width || out_h > self.height {
            return Err(Error::InvalidArgument(format!(
                "downsample target {out_w}x{out_h} exceeds source {}x{}",
                self.width, self.height
            )));
        }
        let col_edges: Vec<usize> = (0..=out_w).map(|i| i * self.width / out_w).collect();
        let row_edges: Vec<usize> = (0..=out_h).map(|j| j * self.height / out_h).collect();
        let mut vectors = Vec::with_capacity(out_w * out_h);
        for j in 0..out_h {
            for i in 0..out_w {
                let (mut su, mut sv, mut n) = (0.0f64, 0.0f64, 0usize);
                for y in row_edges[j]..row_edges[j + 1] {
                    for x in col_edges[i]..col_edges[i + 1] {
                        let [u, v] = self.get(x, y);
                        su += u as f64;
                        sv += v as f64;
                        n += 1;
                    }
                }
                let n = n as f64;
                vectors.push([(su / n) as f32, (sv / n) as f32]);
            }
        }
        Ok(DisplacementField {
            width: out_w,
            height: out_h,
            vectors,
        })
    }
}

/// Block-mean downsampling of a flow field; see [`DisplacementField::downsample`].
pub fn downsample_field(field: &DisplacementField, out_w: usize, out_h: usize) -> Result<DisplacementField> {
    field.downsample(out_w, out_h)
}
