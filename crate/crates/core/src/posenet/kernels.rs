//! Forward and backward passes over a planned layer stack, generic over the
//! float type so gradients can be checked in double precision.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{Activation, LayerPlan, LayerSpec, Shape, CONV_KERNEL};

pub trait Scalar:
    Copy
    + Debug
    + Default
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + AddAssign
    + Sum
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn zero() -> Self {
        Self::default()
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Dropout behaviour for one forward pass.
#[derive(Debug, Clone, Copy)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

/// Per-layer state kept from the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace<S> {
    /// `acts[i]` is the input of layer i; the last entry is the network output.
    pub acts: Vec<Vec<S>>,
    /// Max-pool argmax indices or dropout masks (scale or zero), per layer.
    aux: Vec<Aux<S>>,
}

#[derive(Debug, Clone)]
enum Aux<S> {
    None,
    Argmax(Vec<usize>),
    Mask(Vec<S>),
}

fn relu<S: Scalar>(v: &mut [S]) {
    let z = S::zero();
    for x in v {
        if *x < z {
            *x = z;
        }
    }
}

pub fn forward<S: Scalar>(plans: &[LayerPlan], params: &[S], input: Vec<S>, mode: Mode) -> Trace<S> {
    let mut acts = Vec::with_capacity(plans.len() + 1);
    let mut aux = Vec::with_capacity(plans.len());
    acts.push(input);
    for (li, plan) in plans.iter().enumerate() {
        let x = acts.last().expect("input present");
        let p = &params[plan.param_offset..plan.param_offset + plan.param_count];
        let (out, a) = match (&plan.spec, plan.input, plan.output) {
            (LayerSpec::Conv { .. }, Shape::Chw(c, h, w), Shape::Chw(o, oh, ow)) => {
                let mut y = conv_forward(p, x, c, h, w, o, oh, ow);
                relu(&mut y);
                (y, Aux::None)
            }
            (LayerSpec::MaxPool, Shape::Chw(c, h, w), Shape::Chw(_, oh, ow)) => {
                let (y, idx) = pool_forward(x, c, h, w, oh, ow);
                (y, Aux::Argmax(idx))
            }
            (LayerSpec::Flatten, _, _) => (x.clone(), Aux::None),
            (LayerSpec::Dense { activation, .. }, Shape::Flat(n), Shape::Flat(m)) => {
                let mut y = dense_forward(p, x, n, m);
                if *activation == Activation::Relu {
                    relu(&mut y);
                }
                (y, Aux::None)
            }
            (LayerSpec::Dropout { rate }, _, _) => match mode {
                Mode::Eval => (x.clone(), Aux::None),
                Mode::Train { seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (li as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                    let keep = S::from_f64(1.0 / (1.0 - rate));
                    let mask: Vec<S> = (0..x.len())
                        .map(|_| if rng.random::<f64>() < *rate { S::zero() } else { keep })
                        .collect();
                    let y = x.iter().zip(&mask).map(|(&v, &m)| v * m).collect();
                    (y, Aux::Mask(mask))
                }
            },
            _ => unreachable!("plan shapes are validated"),
        };
        acts.push(out);
        aux.push(a);
    }
    Trace { acts, aux }
}

/// Accumulates parameter gradients into `grad` given the loss gradient with
/// respect to the network output.
pub fn backward<S: Scalar>(plans: &[LayerPlan], params: &[S], trace: &Trace<S>, d_out: Vec<S>, grad: &mut [S]) {
    let mut d = d_out;
    for (li, plan) in plans.iter().enumerate().rev() {
        let x = &trace.acts[li];
        let y = &trace.acts[li + 1];
        let range = plan.param_offset..plan.param_offset + plan.param_count;
        let need_input_grad = li > 0;
        d = match (&plan.spec, plan.input, plan.output) {
            (LayerSpec::Conv { .. }, Shape::Chw(c, h, w), Shape::Chw(o, oh, ow)) => {
                mask_relu(&mut d, y);
                conv_backward(
                    &params[range.clone()],
                    x,
                    &d,
                    c,
                    h,
                    w,
                    o,
                    oh,
                    ow,
                    &mut grad[range],
                    need_input_grad,
                )
            }
            (LayerSpec::MaxPool, _, _) => {
                let Aux::Argmax(idx) = &trace.aux[li] else {
                    unreachable!()
                };
                let mut dx = vec![S::zero(); x.len()];
                for (&i, &g) in idx.iter().zip(&d) {
                    dx[i] += g;
                }
                dx
            }
            (LayerSpec::Flatten, _, _) => d,
            (LayerSpec::Dense { activation, .. }, Shape::Flat(n), Shape::Flat(m)) => {
                if *activation == Activation::Relu {
                    mask_relu(&mut d, y);
                }
                dense_backward(&params[range.clone()], x, &d, n, m, &mut grad[range], need_input_grad)
            }
            (LayerSpec::Dropout { .. }, _, _) => match &trace.aux[li] {
                Aux::Mask(mask) => d.iter().zip(mask).map(|(&g, &m)| g * m).collect(),
                _ => d,
            },
            _ => unreachable!("plan shapes are validated"),
        };
    }
}

fn mask_relu<S: Scalar>(d: &mut [S], y: &[S]) {
    let z = S::zero();
    for (g, &v) in d.iter_mut().zip(y) {
        if !(v > z) {
            *g = z;
        }
    }
}

// conv weights are laid out [o][c][ky][kx], followed by o biases.
//
// Valid convolution is computed on "wide" rows: output index `i = y·w + x`
// over the input width, so every kernel tap is one contiguous slice op of
// length `(oh − 1)·w + ow`; columns `x ≥ ow` are discarded.
#[allow(clippy::too_many_arguments)]
fn conv_forward<S: Scalar>(p: &[S], x: &[S], c: usize, h: usize, w: usize, o: usize, oh: usize, ow: usize) -> Vec<S> {
    let k = CONV_KERNEL;
    let span = (oh - 1) * w + ow;
    let (weights, bias) = p.split_at(o * c * k * k);
    let mut y = vec![S::zero(); o * oh * ow];
    let mut wide = vec![S::zero(); span];
    for oc in 0..o {
        wide.fill(bias[oc]);
        for ic in 0..c {
            let plane = &x[ic * h * w..(ic + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = weights[((oc * c + ic) * k + ky) * k + kx];
                    let off = ky * w + kx;
                    axpy(wv, &plane[off..off + span], &mut wide);
                }
            }
        }
        let out = &mut y[oc * oh * ow..(oc + 1) * oh * ow];
        for yy in 0..oh {
            out[yy * ow..(yy + 1) * ow].copy_from_slice(&wide[yy * w..yy * w + ow]);
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<S: Scalar>(
    p: &[S],
    x: &[S],
    d: &[S],
    c: usize,
    h: usize,
    w: usize,
    o: usize,
    oh: usize,
    ow: usize,
    grad: &mut [S],
    need_input_grad: bool,
) -> Vec<S> {
    let k = CONV_KERNEL;
    let span = (oh - 1) * w + ow;
    let nw = o * c * k * k;
    let weights = &p[..nw];
    let (gw, gb) = grad.split_at_mut(nw);
    let mut dx = if need_input_grad {
        vec![S::zero(); x.len()]
    } else {
        Vec::new()
    };
    let mut wide = vec![S::zero(); span];
    for oc in 0..o {
        let dplane = &d[oc * oh * ow..(oc + 1) * oh * ow];
        gb[oc] += dplane.iter().copied().sum::<S>();
        wide.fill(S::zero());
        for yy in 0..oh {
            wide[yy * w..yy * w + ow].copy_from_slice(&dplane[yy * ow..(yy + 1) * ow]);
        }
        for ic in 0..c {
            let plane = &x[ic * h * w..(ic + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let wi = ((oc * c + ic) * k + ky) * k + kx;
                    let off = ky * w + kx;
                    gw[wi] += dot(&plane[off..off + span], &wide);
                    if need_input_grad {
                        let base = ic * h * w + off;
                        axpy(weights[wi], &wide, &mut dx[base..base + span]);
                    }
                }
            }
        }
    }
    dx
}

#[inline]
fn axpy<S: Scalar>(a: S, x: &[S], y: &mut [S]) {
    for (t, &v) in y.iter_mut().zip(x) {
        *t += a * v;
    }
}

/// Dot product with eight interleaved partial sums.
#[inline]
fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = [S::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = S::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

fn pool_forward<S: Scalar>(x: &[S], c: usize, h: usize, w: usize, oh: usize, ow: usize) -> (Vec<S>, Vec<usize>) {
    let mut y = Vec::with_capacity(c * oh * ow);
    let mut idx = Vec::with_capacity(c * oh * ow);
    for ic in 0..c {
        let base = ic * h * w;
        for yy in 0..oh {
            for xx in 0..ow {
                let mut bi = base + 2 * yy * w + 2 * xx;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * yy + dy) * w + 2 * xx + dx;
                    if x[i] > x[bi] {
                        bi = i;
                    }
                }
                y.push(x[bi]);
                idx.push(bi);
            }
        }
    }
    (y, idx)
}

// dense weights are laid out [m][n], followed by m biases
fn dense_forward<S: Scalar>(p: &[S], x: &[S], n: usize, m: usize) -> Vec<S> {
    let (weights, bias) = p.split_at(n * m);
    (0..m)
        .map(|j| {
            let row = &weights[j * n..(j + 1) * n];
            bias[j] + dot(row, x)
        })
        .collect()
}

fn dense_backward<S: Scalar>(
    p: &[S],
    x: &[S],
    d: &[S],
    n: usize,
    m: usize,
    grad: &mut [S],
    need_input_grad: bool,
) -> Vec<S> {
    let (gw, gb) = grad.split_at_mut(n * m);
    let mut dx = if need_input_grad {
        vec![S::zero(); n]
    } else {
        Vec::new()
    };
    for j in 0..m {
        let g = d[j];
        gb[j] += g;
        axpy(g, x, &mut gw[j * n..(j + 1) * n]);
        if need_input_grad {
            axpy(g, &p[j * n..(j + 1) * n], &mut dx);
        }
    }
    dx
}
