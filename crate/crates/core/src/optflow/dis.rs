//! Dense inverse search.
//!
//! Per pyramid level, coarse to fine:
//!
//! 1. a grid of template patches is cut from the reference image; each patch
//!    is aligned to the query by inverse-compositional Gauss-Newton on the
//!    patch SSD (the 2×2 Hessian depends only on the template gradients and
//!    is computed once per patch);
//! 2. neighbouring patches exchange displacements in a forward and a
//!    backward sweep, each keeping whichever candidate has the lower SSD;
//! 3. patch displacements are densified into a per-pixel field, each patch
//!    weighted by the inverse of its photometric residual at the pixel;
//! 4. the dense field is refined by minimising a linearised data term plus a
//!    quadratic smoothness term.
//!
//! The result of a level initialises the next finer one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pyramid::{blur, Pyramid};
use super::{DisplacementField, GrayImage, PatternImage};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub pyramid_levels: usize,
    /// Patch side at every level, in that level's pixels.
    pub patch_size: usize,
    pub patch_stride: usize,
    pub iterations_per_patch: usize,
    pub variational_refinement: bool,
    pub refine_iterations: usize,
    /// Smoothness weight of the refinement energy, for intensities scaled
    /// to [0, 1].
    pub smoothness: f32,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            pyramid_levels: 4,
            patch_size: 8,
            patch_stride: 4,
            iterations_per_patch: 12,
            variational_refinement: true,
            refine_iterations: 20,
            smoothness: 0.75,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid_levels < 1 {
            return Err(Error::InvalidArgument("pyramid_levels must be >= 1".into()));
        }
        if self.patch_size < 4 {
            return Err(Error::InvalidArgument("patch_size must be >= 4".into()));
        }
        if self.patch_stride == 0 || self.patch_stride > self.patch_size {
            return Err(Error::InvalidArgument("patch_stride must be in 1..=patch_size".into()));
        }
        if !(self.smoothness > 0.0) {
            return Err(Error::InvalidArgument("smoothness must be > 0".into()));
        }
        Ok(())
    }
}

/// Dense flow from `reference` to `query`: for each reference pixel `x` the
/// returned `u` satisfies `query(x + u) ≈ reference(x)`.
pub fn dis_flow(reference: &PatternImage, query: &PatternImage, params: &FlowParams) -> Result<DisplacementField> {
    if reference.dims() != query.dims() {
        return Err(Error::dims(reference.dims(), query.dims()));
    }
    dis_flow_gray(&reference.to_gray(), &query.to_gray(), params)
}

/// [`dis_flow`] on pre-converted grayscale images.
pub fn dis_flow_gray(reference: &GrayImage, query: &GrayImage, params: &FlowParams) -> Result<DisplacementField> {
    DisReference::new(reference, params)?.flow(query)
}

/// A reference image prepared for repeated flow queries: its pyramid,
/// gradients and per-patch inverse Hessians are computed once.
#[derive(Debug, Clone)]
pub struct DisReference {
    params: FlowParams,
    levels: Vec<RefLevel>,
}

#[derive(Debug, Clone)]
struct RefLevel {
    image: GrayImage,
    gx: GrayImage,
    gy: GrayImage,
    /// Patches per row; `patches` is row-major.
    cols: usize,
    patches: Vec<PatchTemplate>,
}

#[derive(Debug, Clone, Copy)]
struct PatchTemplate {
    x0: usize,
    y0: usize,
    /// Inverse Hessian `(ixx, ixy, iyy)`, `None` for a flat template.
    inv_hessian: Option<[f32; 3]>,
}

impl DisReference {
    pub fn new(reference: &GrayImage, params: &FlowParams) -> Result<Self> {
        params.validate()?;
        let (w, h) = (reference.width, reference.height);
        if w < params.patch_size || h < params.patch_size {
            return Err(Error::InvalidArgument(format!(
                "image {w}x{h} smaller than patch size {}",
                params.patch_size
            )));
        }
        // the pattern is piecewise constant; pre-smoothing keeps the bilinear
        // model consistent with the template gradients at patch edges
        let pyr = Pyramid::build(blur(reference), params.pyramid_levels, params.patch_size * 2);
        let levels = (0..pyr.num_levels())
            .map(|i| {
                let image = pyr.level(i).clone();
                let (gx, gy) = image.gradients();
                let cols = patch_origins(image.width, params.patch_size, params.patch_stride).len();
                let patches = patch_templates(&image, &gx, &gy, params);
                RefLevel {
                    image,
                    gx,
                    gy,
                    cols,
                    patches,
                }
            })
            .collect();
        Ok(Self {
            params: params.clone(),
            levels,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.levels[0].image.width, self.levels[0].image.height)
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    /// Flow from the prepared reference to `query`.
    pub fn flow(&self, query: &GrayImage) -> Result<DisplacementField> {
        let qdims = (query.width, query.height);
        if qdims != self.dims() {
            return Err(Error::dims(self.dims(), qdims));
        }
        let qry_pyr = Pyramid::build(blur(query), self.levels.len(), self.params.patch_size * 2);
        let mut flow: Option<Flow> = None;
        for (level, r) in self.levels.iter().enumerate().rev() {
            let q = qry_pyr.level(level);
            let init = match flow.take() {
                Some(coarse) => coarse.upsample(r.image.width, r.image.height),
                None => Flow::zeros(r.image.width, r.image.height),
            };
            let mut patches = search_patches(r, q, &init, &self.params);
            propagate(r, q, &mut patches, &self.params);
            let mut dense = densify(&r.image, q, &init, &patches, &self.params);
            if self.params.variational_refinement {
                refine(r, q, &mut dense, &self.params);
            }
            flow = Some(dense);
        }
        let flow = flow.expect("at least one level");
        DisplacementField::from_vectors(flow.width, flow.height, flow.uv)
    }

    /// [`Self::flow`] for an RGB query frame.
    pub fn flow_rgb(&self, query: &PatternImage) -> Result<DisplacementField> {
        self.flow(&query.to_gray())
    }
}

fn patch_templates(r: &GrayImage, gx: &GrayImage, gy: &GrayImage, params: &FlowParams) -> Vec<PatchTemplate> {
    let ps = params.patch_size;
    let xs = patch_origins(r.width, ps, params.patch_stride);
    let ys = patch_origins(r.height, ps, params.patch_stride);
    ys.iter()
        .flat_map(|&y0| xs.iter().map(move |&x0| (x0, y0)))
        .map(|(x0, y0)| {
            let (mut hxx, mut hxy, mut hyy) = (0.0f32, 0.0f32, 0.0f32);
            for y in y0..y0 + ps {
                for x in x0..x0 + ps {
                    let (a, b) = (gx.at(x, y), gy.at(x, y));
                    hxx += a * a;
                    hxy += a * b;
                    hyy += b * b;
                }
            }
            let det = hxx * hyy - hxy * hxy;
            let trace = hxx + hyy;
            let inv_hessian = (det > 1e-6 * trace * trace && trace >= 1e-3).then(|| [hyy / det, -hxy / det, hxx / det]);
            PatchTemplate { x0, y0, inv_hessian }
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Flow {
    width: usize,
    height: usize,
    uv: Vec<[f32; 2]>,
}

impl Flow {
    fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            uv: vec![[0.0; 2]; width * height],
        }
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> [f32; 2] {
        self.uv[y * self.width + x]
    }

    /// Bilinear upsampling to a finer level, doubling the vectors.
    fn upsample(&self, width: usize, height: usize) -> Flow {
        let sx = self.width as f32 / width as f32;
        let sy = self.height as f32 / height as f32;
        let mut uv = Vec::with_capacity(width * height);
        for y in 0..height {
            let cy = (y as f32 + 0.5) * sy - 0.5;
            let (y0, y1, fy) = super::image::clamp_taps(cy, self.height);
            for x in 0..width {
                let cx = (x as f32 + 0.5) * sx - 0.5;
                let (x0, x1, fx) = super::image::clamp_taps(cx, self.width);
                let mut out = [0.0f32; 2];
                for (c, o) in out.iter_mut().enumerate() {
                    let a = self.at(x0, y0)[c];
                    let b = self.at(x1, y0)[c];
                    let cc = self.at(x0, y1)[c];
                    let d = self.at(x1, y1)[c];
                    let top = a + (b - a) * fx;
                    let bot = cc + (d - cc) * fx;
                    *o = top + (bot - top) * fy;
                }
                // vectors scale with resolution
                uv.push([out[0] / sx, out[1] / sy]);
            }
        }
        Flow { width, height, uv }
    }
}

#[derive(Debug, Clone, Copy)]
struct PatchResult {
    x0: usize,
    y0: usize,
    uv: [f32; 2],
    ssd: f32,
}

fn patch_origins(len: usize, size: usize, stride: usize) -> Vec<usize> {
    let last = len - size;
    let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
    if *v.last().expect("len >= size") != last {
        v.push(last);
    }
    v
}

fn search_patches(r: &RefLevel, q: &GrayImage, init: &Flow, params: &FlowParams) -> Vec<PatchResult> {
    let ps = params.patch_size;
    r.patches
        .par_iter()
        .map(|t| {
            let c = init.at(t.x0 + ps / 2, t.y0 + ps / 2);
            let uv = match t.inv_hessian {
                Some(inv) => align_patch(r, q, t.x0, t.y0, ps, inv, c, params.iterations_per_patch),
                None => c,
            };
            let ssd = patch_ssd(&r.image, q, t.x0, t.y0, ps, uv, &mut vec![0.0; ps * ps]);
            PatchResult {
                x0: t.x0,
                y0: t.y0,
                uv,
                ssd,
            }
        })
        .collect()
}

/// Forward sweep from the left and upper neighbours, then backward from the
/// right and lower ones. An adopted displacement is polished by another
/// Gauss-Newton solve.
fn propagate(r: &RefLevel, q: &GrayImage, patches: &mut [PatchResult], params: &FlowParams) {
    let ps = params.patch_size;
    let cols = r.cols;
    let n = patches.len();
    let mut buf = vec![0.0f32; ps * ps];
    for forward in [true, false] {
        for k in 0..n {
            let i = if forward { k } else { n - 1 - k };
            let (col, row) = (i % cols, i / cols);
            let neighbours = if forward {
                [(col > 0).then(|| i - 1), (row > 0).then(|| i - cols)]
            } else {
                [(col + 1 < cols).then(|| i + 1), (i + cols < n).then(|| i + cols)]
            };
            let mut best = patches[i];
            for j in neighbours.into_iter().flatten() {
                let uv = patches[j].uv;
                if uv == best.uv {
                    continue;
                }
                let ssd = patch_ssd(&r.image, q, best.x0, best.y0, ps, uv, &mut buf);
                if ssd < best.ssd {
                    best.uv = uv;
                    best.ssd = ssd;
                }
            }
            if best.uv != patches[i].uv {
                if let Some(inv) = r.patches[i].inv_hessian {
                    best.uv = align_patch(r, q, best.x0, best.y0, ps, inv, best.uv, params.iterations_per_patch);
                    best.ssd = patch_ssd(&r.image, q, best.x0, best.y0, ps, best.uv, &mut buf);
                }
                patches[i] = best;
            }
        }
    }
}

fn patch_ssd(r: &GrayImage, q: &GrayImage, x0: usize, y0: usize, ps: usize, uv: [f32; 2], buf: &mut [f32]) -> f32 {
    q.sample_block(x0, y0, ps, uv, buf);
    let mut s = 0.0;
    for y in 0..ps {
        let row = &r.data[(y0 + y) * r.width + x0..(y0 + y) * r.width + x0 + ps];
        for (a, b) in buf[y * ps..(y + 1) * ps].iter().zip(row) {
            let e = a - b;
            s += e * e;
        }
    }
    s
}

/// Inverse-compositional Gauss-Newton for a pure translation. Falls back to
/// the initial guess if the solve diverges or does not improve the SSD.
#[allow(clippy::too_many_arguments)]
fn align_patch(
    r: &RefLevel,
    q: &GrayImage,
    x0: usize,
    y0: usize,
    ps: usize,
    [ixx, ixy, iyy]: [f32; 3],
    init: [f32; 2],
    iterations: usize,
) -> [f32; 2] {
    let (img, gx, gy) = (&r.image, &r.gx, &r.gy);
    let w = img.width;
    let mut buf = vec![0.0f32; ps * ps];
    let mut uv = init;
    for _ in 0..iterations {
        q.sample_block(x0, y0, ps, uv, &mut buf);
        let (mut bx, mut by) = (0.0f32, 0.0f32);
        for y in 0..ps {
            let o = (y0 + y) * w + x0;
            let rows = img.data[o..o + ps]
                .iter()
                .zip(&gx.data[o..o + ps])
                .zip(&gy.data[o..o + ps]);
            for (&qv, ((&rv, &a), &b)) in buf[y * ps..(y + 1) * ps].iter().zip(rows) {
                let e = qv - rv;
                bx += a * e;
                by += b * e;
            }
        }
        let dx = ixx * bx + ixy * by;
        let dy = ixy * bx + iyy * by;
        uv[0] -= dx;
        uv[1] -= dy;
        if !(uv[0].is_finite() && uv[1].is_finite()) {
            return init;
        }
        if dx * dx + dy * dy < 1e-6 {
            break;
        }
    }
    let max_jump = ps as f32;
    if (uv[0] - init[0]).hypot(uv[1] - init[1]) > max_jump
        || patch_ssd(img, q, x0, y0, ps, uv, &mut buf) > patch_ssd(img, q, x0, y0, ps, init, &mut buf)
    {
        return init;
    }
    uv
}

fn densify(r: &GrayImage, q: &GrayImage, init: &Flow, patches: &[PatchResult], params: &FlowParams) -> Flow {
    let (w, h) = (r.width, r.height);
    let ps = params.patch_size;
    let mut acc = vec![[0.0f32; 3]; w * h];
    let mut buf = vec![0.0f32; ps * ps];
    for p in patches {
        q.sample_block(p.x0, p.y0, ps, p.uv, &mut buf);
        for y in p.y0..p.y0 + ps {
            for x in p.x0..p.x0 + ps {
                let e = (buf[(y - p.y0) * ps + x - p.x0] - r.at(x, y)).abs();
                let wgt = 1.0 / e.max(1.0);
                let a = &mut acc[y * w + x];
                a[0] += wgt * p.uv[0];
                a[1] += wgt * p.uv[1];
                a[2] += wgt;
            }
        }
    }
    let uv = acc
        .iter()
        .zip(&init.uv)
        .map(|(a, i)| if a[2] > 0.0 { [a[0] / a[2], a[1] / a[2]] } else { *i })
        .collect();
    Flow {
        width: w,
        height: h,
        uv,
    }
}

/// Jacobi iterations on the linearised data term plus smoothness energy
/// `Σ (Ix·du + Iy·dv + It)² + λ·Σ |∇(w + dw)|²`.
fn refine(level: &RefLevel, q: &GrayImage, flow: &mut Flow, params: &FlowParams) {
    let r = &level.image;
    let (w, h) = (flow.width, flow.height);
    let mut warped = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let [u, v] = flow.at(x, y);
            warped[y * w + x] = q.sample(x as f32 + u, y as f32 + v);
        }
    }
    let warped = GrayImage::new(w, h, warped);
    let (wx, wy) = warped.gradients();
    let (rx, ry) = (&level.gx, &level.gy);
    // images are kept in 0..255 units
    let lambda = params.smoothness * 255.0 * 255.0;
    let base = flow.uv.clone();
    let mut cur = base.clone();
    let mut next = cur.clone();
    let mut coef = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let ix = 0.5 * (wx.data[i] + rx.data[i]);
        let iy = 0.5 * (wy.data[i] + ry.data[i]);
        let it = warped.data[i] - r.data[i];
        coef.push([ix, iy, it]);
    }
    for _ in 0..params.refine_iterations {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let mut avg = [0.0f32; 2];
                let mut n = 0.0f32;
                for (nx, ny) in neighbours4(x, y, w, h) {
                    let c = cur[ny * w + nx];
                    avg[0] += c[0];
                    avg[1] += c[1];
                    n += 1.0;
                }
                avg[0] /= n;
                avg[1] /= n;
                let [ix, iy, it] = coef[i];
                let du = avg[0] - base[i][0];
                let dv = avg[1] - base[i][1];
                let resid = ix * du + iy * dv + it;
                let denom = lambda + ix * ix + iy * iy;
                next[i] = [avg[0] - ix * resid / denom, avg[1] - iy * resid / denom];
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    flow.uv = cur;
}

#[inline]
fn neighbours4(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    let mut v = [(0usize, 0usize); 4];
    let mut n = 0;
    if x > 0 {
        v[n] = (x - 1, y);
        n += 1;
    }
    if x + 1 < w {
        v[n] = (x + 1, y);
        n += 1;
    }
    if y > 0 {
        v[n] = (x, y - 1);
        n += 1;
    }
    if y + 1 < h {
        v[n] = (x, y + 1);
        n += 1;
    }
    v.into_iter().take(n)
}
