//! MicroPulseNet: a small temporally dilated 3-D convolutional pulse
//! estimator with hand-written forward and backward passes.
//!
//! Architecture: three conv layers with 3x3x3 kernels, temporal dilations
//! 1, 2, 4, channels 3 -> 8 -> 8 -> 8, zero padding preserving all
//! dimensions, tanh activations; then spatial global-average pooling and a
//! per-frame linear map 8 -> 1. Inputs are prescaled from `[0,255]` to
//! `[-1,1]` as part of the architecture. About 4.1k parameters total.
//!
//! Convolutions run as im2col + matrix multiplication; the backward pass
//! reuses the cached column matrices, so gradients are exact transposes of
//! the forward computation.

use std::path::Path;

use ndarray::{s, Array1, Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::npy::{read_npy, write_npy};
use crate::scalar::Real;
use crate::signal::{VideoClip, Waveform};
use crate::{Error, Result};

/// Channel progression through the conv stack.
pub const MICRO_CHANNELS: [usize; 4] = [3, 8, 8, 8];

/// Temporal dilation per conv layer; spatial dilation is always 1.
pub const MICRO_DILATIONS: [usize; 3] = [1, 2, 4];

/// Minimum clip length in frames (receptive-field floor for the dilated
/// stack).
pub const MICRO_MIN_FRAMES: usize = 13;

/// Input prescale: pixel / 127.5 - 1 maps `[0,255]` onto `[-1,1]`.
const PRESCALE: f64 = 1.0 / 127.5;

const KERNEL_OFFSETS: usize = 27;

/// One convolution layer. The kernel tensor is stored flattened as a
/// `(out_channels, in_channels * 27)` matrix whose columns are ordered by
/// kernel offset `(kt, ky, kx)` in C order, then input channel; see
/// [`ConvLayer::kernel`] for the logical 5-D view.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<F: Real> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
    pub dilation: usize,
    pub in_channels: usize,
}

impl<F: Real> ConvLayer<F> {
    pub fn out_channels(&self) -> usize {
        self.weight.dim().0
    }

    /// Logical kernel entry at `(oc, ic, kt, ky, kx)`, each kernel index in
    /// `0..3`.
    pub fn kernel(&self, oc: usize, ic: usize, kt: usize, ky: usize, kx: usize) -> F {
        let k = (kt * 3 + ky) * 3 + kx;
        self.weight[[oc, k * self.in_channels + ic]]
    }
}

/// All trainable parameters plus the spatial dimensions the net was built
/// for (inference requires matching dimensions).
#[derive(Debug, Clone, PartialEq)]
pub struct MicroNetParams<F: Real = f64> {
    pub layers: [ConvLayer<F>; 3],
    pub head_weight: Array1<F>,
    pub head_bias: F,
    pub input_height: usize,
    pub input_width: usize,
}

impl<F: Real> MicroNetParams<F> {
    /// Glorot-uniform initialization, deterministic given the seed. Draws
    /// run layer by layer in C order so the layout pins the RNG stream.
    pub fn init(input_height: usize, input_width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let v: f64 = rng.gen::<f64>() * 2.0 - 1.0;
            F::from_f64_c(v * limit)
        };
        let mut layers = Vec::with_capacity(3);
        for l in 0..3 {
            let ic = MICRO_CHANNELS[l];
            let oc = MICRO_CHANNELS[l + 1];
            let (fan_in, fan_out) = (ic * KERNEL_OFFSETS, oc * KERNEL_OFFSETS);
            let mut values = Vec::with_capacity(oc * ic * KERNEL_OFFSETS);
            for _ in 0..oc * ic * KERNEL_OFFSETS {
                values.push(draw(fan_in, fan_out));
            }
            layers.push(ConvLayer {
                weight: Array2::from_shape_vec((oc, ic * KERNEL_OFFSETS), values)
                    .expect("length matches shape"),
                bias: Array1::zeros(oc),
                dilation: MICRO_DILATIONS[l],
                in_channels: ic,
            });
        }
        let head: Vec<F> = (0..MICRO_CHANNELS[3]).map(|_| draw(8, 1)).collect();
        Self {
            layers: layers
                .try_into()
                .unwrap_or_else(|_| unreachable!("exactly 3 layers")),
            head_weight: Array1::from_vec(head),
            head_bias: F::zero(),
            input_height,
            input_width,
        }
    }

    /// All-zero parameters (useful as an optimizer accumulator and in
    /// tests).
    pub fn zeros(input_height: usize, input_width: usize) -> Self {
        let layers = std::array::from_fn(|l| ConvLayer {
            weight: Array2::zeros((MICRO_CHANNELS[l + 1], MICRO_CHANNELS[l] * KERNEL_OFFSETS)),
            bias: Array1::zeros(MICRO_CHANNELS[l + 1]),
            dilation: MICRO_DILATIONS[l],
            in_channels: MICRO_CHANNELS[l],
        });
        Self {
            layers,
            head_weight: Array1::zeros(MICRO_CHANNELS[3]),
            head_bias: F::zero(),
            input_height,
            input_width,
        }
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum::<usize>()
            + self.head_weight.len()
            + 1
    }

    /// In-place `self += scale * other` over every parameter, the update
    /// primitive for gradient descent.
    pub fn axpy(&mut self, scale: F, other: &MicroGradients<F>) {
        for (layer, (dw, db)) in self.layers.iter_mut().zip(other.layers.iter()) {
            layer.weight.zip_mut_with(dw, |w, &g| *w += scale * g);
            layer.bias.zip_mut_with(db, |b, &g| *b += scale * g);
        }
        self.head_weight
            .zip_mut_with(&other.head_weight, |w, &g| *w += scale * g);
        self.head_bias += scale * other.head_bias;
    }
}

/// Gradients for every parameter plus the input gradient, shaped like the
/// clip.
#[derive(Debug, Clone)]
pub struct MicroGradients<F: Real> {
    /// Per layer: kernel-matrix gradient and bias gradient.
    pub layers: [(Array2<F>, Array1<F>); 3],
    pub head_weight: Array1<F>,
    pub head_bias: F,
    /// d loss / d pixel, shape `(frame, row, column, channel)`.
    pub input: Array4<F>,
}

impl<F: Real> MicroGradients<F> {
    pub fn zeros_like(params: &MicroNetParams<F>) -> Self {
        Self {
            layers: std::array::from_fn(|l| {
                (
                    Array2::zeros(params.layers[l].weight.dim()),
                    Array1::zeros(params.layers[l].bias.len()),
                )
            }),
            head_weight: Array1::zeros(params.head_weight.len()),
            head_bias: F::zero(),
            input: Array4::zeros((0, 0, 0, 0)),
        }
    }

    /// In-place `self = decay * self + scale * other` over the parameter
    /// gradients (the input gradient is not accumulated).
    pub fn scale_add(&mut self, decay: F, scale: F, other: &MicroGradients<F>) {
        for ((dw, db), (ow, ob)) in self.layers.iter_mut().zip(other.layers.iter()) {
            dw.zip_mut_with(ow, |a, &b| *a = decay * *a + scale * b);
            db.zip_mut_with(ob, |a, &b| *a = decay * *a + scale * b);
        }
        self.head_weight
            .zip_mut_with(&other.head_weight, |a, &b| *a = decay * *a + scale * b);
        self.head_bias = decay * self.head_bias + scale * other.head_bias;
    }
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardCache<F: Real> {
    dims: (usize, usize, usize),
    /// Column matrix fed into each layer's matrix multiply.
    cols: [Array2<F>; 3],
    /// Post-tanh activations of each layer, `(positions, channels)`.
    acts: [Array2<F>; 3],
    /// Pooled features, `(frames, channels)`.
    feat: Array2<F>,
}

impl<F: Real> ForwardCache<F> {
    /// Post-tanh activations per layer, `(positions, channels)`. Exposed
    /// for inspection (saturation checks, feature probes).
    pub fn activations(&self) -> &[Array2<F>; 3] {
        &self.acts
    }
}

/// The 27 kernel offsets in C order over `(kt, ky, kx)`, scaled by the
/// temporal dilation.
fn offsets(dilation: usize) -> [(isize, isize, isize); KERNEL_OFFSETS] {
    let mut out = [(0isize, 0isize, 0isize); KERNEL_OFFSETS];
    let d = dilation as isize;
    let mut i = 0;
    for kt in -1..=1isize {
        for ky in -1..=1isize {
            for kx in -1..=1isize {
                out[i] = (kt * d, ky, kx);
                i += 1;
            }
        }
    }
    out
}

/// Intersection of `0..len` with `0..len` shifted by `-shift`; the range of
/// output positions whose shifted source index is in bounds.
fn valid_range(len: usize, shift: isize) -> (usize, usize) {
    let lo = if shift < 0 { (-shift) as usize } else { 0 };
    let hi = if shift > 0 {
        len.saturating_sub(shift as usize)
    } else {
        len
    };
    (lo, hi.max(lo))
}

/// Gathers shifted copies of the input features into one column matrix:
/// row `(n,y,x)`, column `k * IC + ic` holds `input[(n,y,x) + offset_k, ic]`
/// with zeros where the offset leaves the volume.
fn im2col<F: Real>(
    input: &Array2<F>,
    dims: (usize, usize, usize),
    dilation: usize,
) -> Array2<F> {
    let (n, h, w) = dims;
    let ic = input.dim().1;
    let mut cols = Array2::<F>::zeros((n * h * w, ic * KERNEL_OFFSETS));
    for (k, &(dt, dy, dx)) in offsets(dilation).iter().enumerate() {
        let (t0, t1) = valid_range(n, dt);
        let (y0, y1) = valid_range(h, dy);
        let (x0, x1) = valid_range(w, dx);
        if t0 >= t1 || y0 >= y1 || x0 >= x1 {
            continue;
        }
        let c0 = k * ic;
        for t in t0..t1 {
            let st = (t as isize + dt) as usize;
            for y in y0..y1 {
                let sy = (y as isize + dy) as usize;
                let row = (t * h + y) * w;
                let srow = (st * h + sy) * w;
                let sx0 = (x0 as isize + dx) as usize;
                let sx1 = (x1 as isize + dx) as usize;
                cols.slice_mut(s![row + x0..row + x1, c0..c0 + ic])
                    .assign(&input.slice(s![srow + sx0..srow + sx1, ..]));
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-adds column-matrix gradients back onto
/// the input feature gradient.
fn col2im<F: Real>(
    d_cols: &Array2<F>,
    dims: (usize, usize, usize),
    dilation: usize,
    ic: usize,
) -> Array2<F> {
    let (n, h, w) = dims;
    let mut d_input = Array2::<F>::zeros((n * h * w, ic));
    for (k, &(dt, dy, dx)) in offsets(dilation).iter().enumerate() {
        let (t0, t1) = valid_range(n, dt);
        let (y0, y1) = valid_range(h, dy);
        let (x0, x1) = valid_range(w, dx);
        if t0 >= t1 || y0 >= y1 || x0 >= x1 {
            continue;
        }
        let c0 = k * ic;
        for t in t0..t1 {
            let st = (t as isize + dt) as usize;
            for y in y0..y1 {
                let sy = (y as isize + dy) as usize;
                let row = (t * h + y) * w;
                let srow = (st * h + sy) * w;
                let sx0 = (x0 as isize + dx) as usize;
                let sx1 = (x1 as isize + dx) as usize;
                let mut dst = d_input.slice_mut(s![srow + sx0..srow + sx1, ..]);
                dst.zip_mut_with(
                    &d_cols.slice(s![row + x0..row + x1, c0..c0 + ic]),
                    |a, &b| *a += b,
                );
            }
        }
    }
    d_input
}

fn check_shape<F: Real>(params: &MicroNetParams<F>, clip: &VideoClip<F>) -> Result<()> {
    if clip.height() != params.input_height || clip.width() != params.input_width {
        return Err(Error::ShapeMismatch(format!(
            "clip is {}x{} but the net was built for {}x{}",
            clip.height(),
            clip.width(),
            params.input_height,
            params.input_width
        )));
    }
    if clip.n_frames() < MICRO_MIN_FRAMES {
        return Err(Error::ShapeMismatch(format!(
            "need at least {MICRO_MIN_FRAMES} frames, got {}",
            clip.n_frames()
        )));
    }
    Ok(())
}

/// Runs the network, returning one value per frame plus the activation
/// cache for [`micro_backward`].
pub fn micro_forward<F: Real>(
    params: &MicroNetParams<F>,
    clip: &VideoClip<F>,
) -> Result<(Waveform<F>, ForwardCache<F>)> {
    check_shape(params, clip)?;
    let (n, h, w, _) = clip.data().dim();
    let dims = (n, h, w);
    let positions = n * h * w;

    let flat = clip
        .data()
        .as_standard_layout()
        .into_shape_with_order((positions, 3))
        .expect("clip data is contiguous")
        .to_owned();
    let scale = F::from_f64_c(PRESCALE);
    let one = F::one();
    let mut act = flat.mapv(|v| v * scale - one);

    let mut cols_cache: Vec<Array2<F>> = Vec::with_capacity(3);
    let mut acts_cache: Vec<Array2<F>> = Vec::with_capacity(3);
    for layer in &params.layers {
        let cols = im2col(&act, dims, layer.dilation);
        let mut z = cols.dot(&layer.weight.t());
        z += &layer.bias;
        act = z.mapv(|v| v.tanh());
        cols_cache.push(cols);
        acts_cache.push(act.clone());
    }

    let hw = F::from_f64_c(1.0 / (h * w) as f64);
    let oc = MICRO_CHANNELS[3];
    let mut feat = Array2::<F>::zeros((n, oc));
    for t in 0..n {
        let block = act.slice(s![t * h * w..(t + 1) * h * w, ..]);
        for c in 0..oc {
            feat[[t, c]] = block.column(c).iter().copied().sum::<F>() * hw;
        }
    }

    let pred = Array1::from_shape_fn(n, |t| {
        feat.row(t)
            .iter()
            .zip(params.head_weight.iter())
            .map(|(&f, &hwt)| f * hwt)
            .sum::<F>()
            + params.head_bias
    });

    let cache = ForwardCache {
        dims,
        cols: cols_cache
            .try_into()
            .unwrap_or_else(|_| unreachable!("exactly 3 layers")),
        acts: acts_cache
            .try_into()
            .unwrap_or_else(|_| unreachable!("exactly 3 layers")),
        feat,
    };
    Ok((Waveform::new(pred, clip.fps())?, cache))
}

/// Exact gradients of `loss` with respect to every parameter and every
/// input pixel, given `d loss / d prediction`.
pub fn micro_backward<F: Real>(
    params: &MicroNetParams<F>,
    cache: &ForwardCache<F>,
    loss_grad: &Array1<F>,
) -> Result<MicroGradients<F>> {
    let (n, h, w) = cache.dims;
    if loss_grad.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "loss gradient has {} entries for {n} frames",
            loss_grad.len()
        )));
    }
    let oc = MICRO_CHANNELS[3];

    let d_head_w = cache.feat.t().dot(loss_grad);
    let d_head_b = loss_grad.iter().copied().sum::<F>();

    // Global average pooling spreads each frame's feature gradient evenly
    // over its spatial positions.
    let hw_inv = F::from_f64_c(1.0 / (h * w) as f64);
    let mut d_act = Array2::<F>::zeros((n * h * w, oc));
    for t in 0..n {
        let g = loss_grad[t] * hw_inv;
        let mut block = d_act.slice_mut(s![t * h * w..(t + 1) * h * w, ..]);
        for c in 0..oc {
            let v = g * params.head_weight[c];
            block.column_mut(c).fill(v);
        }
    }

    let mut d_layers: Vec<(Array2<F>, Array1<F>)> = Vec::with_capacity(3);
    for l in (0..3).rev() {
        let layer = &params.layers[l];
        // tanh'(z) = 1 - tanh(z)^2, and acts holds tanh(z).
        let mut d_z = d_act;
        d_z.zip_mut_with(&cache.acts[l], |g, &a| *g = *g * (F::one() - a * a));

        let d_bias = Array1::from_shape_fn(layer.bias.len(), |c| {
            d_z.column(c).iter().copied().sum::<F>()
        });
        let d_weight = d_z.t().dot(&cache.cols[l]);
        let d_cols = d_z.dot(&layer.weight);
        d_act = col2im(&d_cols, cache.dims, layer.dilation, layer.in_channels);
        d_layers.push((d_weight, d_bias));
    }
    d_layers.reverse();

    let scale = F::from_f64_c(PRESCALE);
    let input = d_act.mapv(|v| v * scale);
    let input = input
        .into_shape_with_order((n, h, w, 3))
        .expect("position-major layout");

    Ok(MicroGradients {
        layers: d_layers
            .try_into()
            .unwrap_or_else(|_| unreachable!("exactly 3 layers")),
        head_weight: d_head_w,
        head_bias: d_head_b,
        input,
    })
}

#[derive(Serialize, Deserialize)]
struct LayerManifest {
    name: String,
    in_channels: usize,
    out_channels: usize,
    dilation: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    input_height: usize,
    input_width: usize,
    kernel: [usize; 3],
    input_scale: String,
    layers: Vec<LayerManifest>,
}

impl<F: Real> MicroNetParams<F> {
    /// Writes the parameters as NPY arrays plus a JSON manifest describing
    /// layer order, shapes, and dilations. Values are stored as f32.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let manifest = Manifest {
            input_height: self.input_height,
            input_width: self.input_width,
            kernel: [3, 3, 3],
            input_scale: "pixel / 127.5 - 1".to_string(),
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(i, l)| LayerManifest {
                    name: format!("conv{}", i + 1),
                    in_channels: l.in_channels,
                    out_channels: l.out_channels(),
                    dilation: l.dilation,
                })
                .collect(),
        };
        let file = std::fs::File::create(dir.join("manifest.json"))?;
        serde_json::to_writer_pretty(file, &manifest)?;

        for (i, layer) in self.layers.iter().enumerate() {
            let w32 = layer.weight.mapv(|v| v.to_f64_c() as f32);
            write_npy(dir.join(format!("conv{}_weight.npy", i + 1)), &w32)?;
            let b32 = layer.bias.mapv(|v| v.to_f64_c() as f32);
            write_npy(dir.join(format!("conv{}_bias.npy", i + 1)), &b32)?;
        }
        let hw32 = self.head_weight.mapv(|v| v.to_f64_c() as f32);
        write_npy(dir.join("head_weight.npy"), &hw32)?;
        let hb = Array1::from_vec(vec![self.head_bias.to_f64_c() as f32]);
        write_npy(dir.join("head_bias.npy"), &hb)?;
        Ok(())
    }

    /// Loads parameters written by [`MicroNetParams::save`].
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let file = std::fs::File::open(dir.join("manifest.json"))?;
        let manifest: Manifest = serde_json::from_reader(file)?;
        if manifest.layers.len() != 3 {
            return Err(Error::Format(format!(
                "expected 3 conv layers, manifest lists {}",
                manifest.layers.len()
            )));
        }

        let mut layers = Vec::with_capacity(3);
        for (i, lm) in manifest.layers.iter().enumerate() {
            if lm.in_channels != MICRO_CHANNELS[i]
                || lm.out_channels != MICRO_CHANNELS[i + 1]
                || lm.dilation != MICRO_DILATIONS[i]
            {
                return Err(Error::Format(format!(
                    "layer {} does not match the fixed architecture",
                    lm.name
                )));
            }
            let w = read_npy(dir.join(format!("conv{}_weight.npy", i + 1)))?;
            let expected = (lm.out_channels, lm.in_channels * KERNEL_OFFSETS);
            let w = w
                .into_dimensionality::<ndarray::Ix2>()
                .map_err(|_| Error::Format(format!("conv{} weight is not 2-D", i + 1)))?;
            if w.dim() != expected {
                return Err(Error::Format(format!(
                    "conv{} weight has shape {:?}, expected {:?}",
                    i + 1,
                    w.dim(),
                    expected
                )));
            }
            let b = read_npy(dir.join(format!("conv{}_bias.npy", i + 1)))?
                .into_dimensionality::<ndarray::Ix1>()
                .map_err(|_| Error::Format(format!("conv{} bias is not 1-D", i + 1)))?;
            if b.len() != lm.out_channels {
                return Err(Error::Format(format!("conv{} bias length mismatch", i + 1)));
            }
            layers.push(ConvLayer {
                weight: w.mapv(|v| F::from_f64_c(v as f64)),
                bias: b.mapv(|v| F::from_f64_c(v as f64)),
                dilation: lm.dilation,
                in_channels: lm.in_channels,
            });
        }

        let head_weight = read_npy(dir.join("head_weight.npy"))?
            .into_dimensionality::<ndarray::Ix1>()
            .map_err(|_| Error::Format("head weight is not 1-D".to_string()))?;
        if head_weight.len() != MICRO_CHANNELS[3] {
            return Err(Error::Format("head weight length mismatch".to_string()));
        }
        let head_bias = read_npy(dir.join("head_bias.npy"))?
            .into_dimensionality::<ndarray::Ix1>()
            .map_err(|_| Error::Format("head bias is not 1-D".to_string()))?;
        if head_bias.len() != 1 {
            return Err(Error::Format("head bias must hold one value".to_string()));
        }

        Ok(Self {
            layers: layers
                .try_into()
                .unwrap_or_else(|_| unreachable!("exactly 3 layers")),
            head_weight: head_weight.mapv(|v| F::from_f64_c(v as f64)),
            head_bias: F::from_f64_c(head_bias[0] as f64),
            input_height: manifest.input_height,
            input_width: manifest.input_width,
        })
    }
}
