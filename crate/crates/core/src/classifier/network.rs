//! The compact CNN: three 3x3 convolutions (16, 32, 64 channels, same
//! padding, ReLU), 2x2 max-pooling after the first two, global average
//! pooling to a 64-d feature, and an affine layer to class logits.
//!
//! Activations use a channel-major batch layout `[c][b][y][x]` so each
//! convolution over a whole mini-batch is a single GEMM on im2col columns.
//!
//! Parameters live in one flat vector in this order: conv1 weight
//! `[16][1][3][3]`, conv1 bias, conv2 weight `[32][16][3][3]`, conv2 bias,
//! conv3 weight `[64][32][3][3]`, conv3 bias, fc weight `[C][64]`, fc bias.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::real::{gemm, Real};

pub const CONV_CHANNELS: [usize; 3] = [16, 32, 64];
pub const FEATURE_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct ConvLayout {
    c_in: usize,
    c_out: usize,
    weight: usize,
    bias: usize,
}

impl ConvLayout {
    fn k(&self) -> usize {
        self.c_in * 9
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Layout {
    convs: [ConvLayout; 3],
    fc_weight: usize,
    fc_bias: usize,
    total: usize,
}

impl Layout {
    fn new(classes: usize) -> Self {
        let mut off = 0;
        let mut c_in = 1;
        let convs = CONV_CHANNELS.map(|c_out| {
            let l = ConvLayout {
                c_in,
                c_out,
                weight: off,
                bias: off + c_out * c_in * 9,
            };
            off = l.bias + c_out;
            c_in = c_out;
            l
        });
        let fc_weight = off;
        let fc_bias = fc_weight + classes * FEATURE_DIM;
        Self {
            convs,
            fc_weight,
            fc_bias,
            total: fc_bias + classes,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    width: usize,
    height: usize,
    classes: usize,
    layout: Layout,
    params: Vec<T>,
}

/// Intermediate values of a forward pass kept for back-propagation.
#[derive(Clone, Debug)]
pub struct Trace<T> {
    batch: usize,
    /// Per conv layer: spatial dims, im2col columns, post-ReLU output.
    conv_dims: [(usize, usize); 3],
    cols: [Vec<T>; 3],
    acts: [Vec<T>; 3],
    /// Per pool layer: source index of every pooled output.
    pool_src: [Vec<u32>; 2],
    pub features: Vec<T>,
    pub logits: Vec<T>,
}

/// Loss and parameter gradient of one mini-batch.
#[derive(Clone, Debug)]
pub struct Gradient<T> {
    pub loss: f64,
    pub grad: Vec<T>,
}

/// Valid `(dst, src, len)` spans of a 3x3 tap offset `d ∈ {0, 1, 2}` along
/// an axis of length `n` with same padding.
fn tap_span(d: usize, n: usize) -> (usize, usize, usize) {
    match d {
        0 => (1, 0, n - 1),
        1 => (0, 0, n),
        _ => (0, 1, n - 1),
    }
}

fn im2col<T: Real>(x: &[T], c_in: usize, batch: usize, h: usize, w: usize, cols: &mut Vec<T>) {
    cols.clear();
    cols.reserve(c_in * 9 * batch * h * w);
    let zero = T::zero();
    let zeros = |cols: &mut Vec<T>, k: usize| cols.extend(std::iter::repeat_n(zero, k));
    for c in 0..c_in {
        for ky in 0..3 {
            let (dy, sy, ny) = tap_span(ky, h);
            for kx in 0..3 {
                let (dx, sx, nx) = tap_span(kx, w);
                for b in 0..batch {
                    let src = &x[(c * batch + b) * h * w..][..h * w];
                    zeros(cols, dy * w);
                    for y in 0..ny {
                        zeros(cols, dx);
                        cols.extend_from_slice(&src[(sy + y) * w + sx..][..nx]);
                        zeros(cols, w - dx - nx);
                    }
                    zeros(cols, (h - dy - ny) * w);
                }
            }
        }
    }
}

fn col2im<T: Real>(cols: &[T], c_in: usize, batch: usize, h: usize, w: usize) -> Vec<T> {
    let n = batch * h * w;
    let mut x = vec![T::zero(); c_in * n];
    for c in 0..c_in {
        for ky in 0..3 {
            let (dy, sy, ny) = tap_span(ky, h);
            for kx in 0..3 {
                let (dx, sx, nx) = tap_span(kx, w);
                let row = &cols[((c * 9) + ky * 3 + kx) * n..][..n];
                for b in 0..batch {
                    let src = &row[b * h * w..][..h * w];
                    let dst = &mut x[(c * batch + b) * h * w..][..h * w];
                    for y in 0..ny {
                        let d = &mut dst[(sy + y) * w + sx..][..nx];
                        for (a, &g) in d.iter_mut().zip(&src[(dy + y) * w + dx..][..nx]) {
                            *a = *a + g;
                        }
                    }
                }
            }
        }
    }
    x
}

/// 2x2 / stride-2 max pooling over `[c][b][h][w]`; returns output and the
/// flat source index of each output element. Ties pick the first element.
fn max_pool<T: Real>(x: &[T], planes: usize, h: usize, w: usize) -> (Vec<T>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut src = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        for oy in 0..oh {
            let top = (p * h + 2 * oy) * w;
            let (r0, r1) = (&x[top..][..w], &x[top + w..][..w]);
            for ox in 0..ow {
                let i = 2 * ox;
                let mut best = (r0[i], top + i);
                for (v, j) in [(r0[i + 1], top + i + 1), (r1[i], top + w + i), (r1[i + 1], top + w + i + 1)] {
                    if v > best.0 {
                        best = (v, j);
                    }
                }
                out.push(best.0);
                src.push(best.1 as u32);
            }
        }
    }
    (out, src)
}

impl<T: Real> Network<T> {
    /// He-initialized network (Gaussian weights with variance `2 / fan_in`,
    /// zero biases).
    pub fn new(width: usize, height: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let layout = Layout::new(classes);
        let mut params = vec![T::zero(); layout.total];
        let mut fill = |start: usize, len: usize, fan_in: usize| {
            let std = (2.0 / fan_in as f64).sqrt();
            for p in &mut params[start..start + len] {
                let z: f64 = StandardNormal.sample(rng);
                *p = T::lit(std * z);
            }
        };
        for l in &layout.convs {
            fill(l.weight, l.c_out * l.k(), l.k());
        }
        fill(layout.fc_weight, classes * FEATURE_DIM, FEATURE_DIM);
        Self {
            width,
            height,
            classes,
            layout,
            params,
        }
    }

    pub fn from_params(width: usize, height: usize, classes: usize, params: Vec<T>) -> Option<Self> {
        let layout = Layout::new(classes);
        (params.len() == layout.total).then_some(Self {
            width,
            height,
            classes,
            layout,
            params,
        })
    }

    /// Converts parameters to another precision.
    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            width: self.width,
            height: self.height,
            classes: self.classes,
            layout: self.layout.clone(),
            params: self.params.iter().map(|p| U::lit(p.as_f64())).collect(),
        }
    }

    pub fn input_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Flat index range of the affine layer weights `[C][F]`.
    pub fn fc_weight_range(&self) -> std::ops::Range<usize> {
        self.layout.fc_weight..self.layout.fc_bias
    }

    fn conv_forward(&self, l: &ConvLayout, x: &[T], batch: usize, h: usize, w: usize, cols: &mut Vec<T>) -> Vec<T> {
        im2col(x, l.c_in, batch, h, w, cols);
        let n = batch * h * w;
        let mut out = Vec::with_capacity(l.c_out * n);
        for &bias in &self.params[l.bias..l.bias + l.c_out] {
            out.extend(std::iter::repeat_n(bias, n));
        }
        let weight = &self.params[l.weight..l.weight + l.c_out * l.k()];
        gemm(false, false, l.c_out, n, l.k(), weight, cols, T::one(), &mut out);
        for v in &mut out {
            *v = v.max(T::zero());
        }
        out
    }

    /// Forward pass over a batch of `width x height` inputs laid out
    /// `[b][y][x]`.
    pub fn forward(&self, input: &[T], batch: usize) -> Trace<T> {
        assert_eq!(input.len(), batch * self.width * self.height, "input size");
        let (mut h, mut w) = (self.height, self.width);
        let mut conv_dims = [(0, 0); 3];
        let mut cols: [Vec<T>; 3] = Default::default();
        let mut acts: [Vec<T>; 3] = Default::default();
        let mut pool_src: [Vec<u32>; 2] = Default::default();
        let mut x = input.to_vec();
        for (i, l) in self.layout.convs.iter().enumerate() {
            conv_dims[i] = (h, w);
            let out = self.conv_forward(l, &x, batch, h, w, &mut cols[i]);
            if i < 2 {
                let (pooled, src) = max_pool(&out, l.c_out * batch, h, w);
                pool_src[i] = src;
                h /= 2;
                w /= 2;
                x = pooled;
            }
            acts[i] = out;
        }
        let hw = h * w;
        let (ch, cw) = conv_dims[2];
        debug_assert_eq!((ch, cw), (h, w));
        let inv = T::lit(1.0 / hw as f64);
        let mut features = vec![T::zero(); batch * FEATURE_DIM];
        for c in 0..FEATURE_DIM {
            for b in 0..batch {
                let s: T = acts[2][(c * batch + b) * hw..][..hw].iter().copied().sum();
                features[b * FEATURE_DIM + c] = s * inv;
            }
        }
        let logits = self.logits_from_features(&features, batch);
        Trace {
            batch,
            conv_dims,
            cols,
            acts,
            pool_src,
            features,
            logits,
        }
    }

    pub fn logits_from_features(&self, features: &[T], batch: usize) -> Vec<T> {
        let c = self.classes;
        let mut logits = vec![T::zero(); batch * c];
        for row in logits.chunks_mut(c) {
            row.copy_from_slice(&self.params[self.layout.fc_bias..self.layout.fc_bias + c]);
        }
        let wfc = &self.params[self.layout.fc_weight..self.layout.fc_bias];
        gemm(false, true, batch, c, FEATURE_DIM, features, wfc, T::one(), &mut logits);
        logits
    }

    /// Mean cross-entropy of `labels` and its gradient w.r.t. every parameter.
    pub fn loss_and_gradient(&self, input: &[T], labels: &[usize]) -> Gradient<T> {
        let batch = labels.len();
        let trace = self.forward(input, batch);
        let c = self.classes;
        let mut grad = vec![T::zero(); self.params.len()];

        let probs = softmax_rows(&trace.logits, c);
        let mut loss = 0.0;
        let inv_b = T::lit(1.0 / batch as f64);
        let mut dlogits = probs;
        for (b, &y) in labels.iter().enumerate() {
            loss -= dlogits[b * c + y].as_f64().max(1e-300).ln();
            dlogits[b * c + y] = dlogits[b * c + y] - T::one();
        }
        loss /= batch as f64;
        dlogits.iter_mut().for_each(|v| *v = *v * inv_b);

        // affine layer
        let (fw, fb) = (self.layout.fc_weight, self.layout.fc_bias);
        gemm(true, false, c, FEATURE_DIM, batch, &dlogits, &trace.features, T::zero(), &mut grad[fw..fb]);
        for row in dlogits.chunks(c) {
            for k in 0..c {
                grad[fb + k] = grad[fb + k] + row[k];
            }
        }
        let mut dfeat = vec![T::zero(); batch * FEATURE_DIM];
        gemm(false, false, batch, FEATURE_DIM, c, &dlogits, &self.params[fw..fb], T::zero(), &mut dfeat);

        // global average pool + ReLU of conv3
        let (h3, w3) = trace.conv_dims[2];
        let hw = h3 * w3;
        let inv_hw = T::lit(1.0 / hw as f64);
        let mut dact = vec![T::zero(); FEATURE_DIM * batch * hw];
        for ch in 0..FEATURE_DIM {
            for b in 0..batch {
                let g = dfeat[b * FEATURE_DIM + ch] * inv_hw;
                let base = (ch * batch + b) * hw;
                for i in 0..hw {
                    if trace.acts[2][base + i] > T::zero() {
                        dact[base + i] = g;
                    }
                }
            }
        }

        for li in (0..3).rev() {
            let l = self.layout.convs[li];
            let (h, w) = trace.conv_dims[li];
            let n = batch * h * w;
            // ReLU mask already applied to dact
            gemm(false, true, l.c_out, l.k(), n, &dact, &trace.cols[li], T::zero(), &mut grad[l.weight..l.bias]);
            for (ch, row) in dact.chunks(n).enumerate() {
                grad[l.bias + ch] = row.iter().copied().sum();
            }
            if li == 0 {
                break;
            }
            let mut dcols = vec![T::zero(); l.k() * n];
            let weight = &self.params[l.weight..l.bias];
            gemm(true, false, l.k(), n, l.c_out, weight, &dact, T::zero(), &mut dcols);
            let dpooled = col2im(&dcols, l.c_in, batch, h, w);
            // un-pool into the previous conv's output and apply its ReLU mask
            let prev = &trace.acts[li - 1];
            let mut dprev = vec![T::zero(); prev.len()];
            for (g, &src) in dpooled.iter().zip(&trace.pool_src[li - 1]) {
                let s = src as usize;
                if prev[s] > T::zero() {
                    dprev[s] = dprev[s] + *g;
                }
            }
            dact = dprev;
        }
        Gradient { loss, grad }
    }

    /// Mean cross-entropy only.
    pub fn loss(&self, input: &[T], labels: &[usize]) -> f64 {
        let trace = self.forward(input, labels.len());
        let probs = softmax_rows(&trace.logits, self.classes);
        labels
            .iter()
            .enumerate()
            .map(|(b, &y)| -probs[b * self.classes + y].as_f64().max(1e-300).ln())
            .sum::<f64>()
            / labels.len() as f64
    }
}

impl<T: Real> Trace<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Row-wise numerically stable softmax.
pub fn softmax_rows<T: Real>(logits: &[T], classes: usize) -> Vec<T> {
    let mut out = logits.to_vec();
    for row in out.chunks_mut(classes) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn parameter_count() {
        let net: Network<f32> = Network::new(8, 8, 3, &mut stream(0, &[]));
        let expect = (16 * 9 + 16) + (32 * 16 * 9 + 32) + (64 * 32 * 9 + 64) + (3 * 64 + 3);
        assert_eq!(net.params().len(), expect);
        assert_eq!(net.fc_weight_range().len(), 3 * FEATURE_DIM);
    }

    #[test]
    fn im2col_col2im_adjoint() {
        // <im2col(x), y> == <x, col2im(y)>
        let (c, b, h, w) = (2, 2, 3, 4);
        let x: Vec<f64> = (0..c * b * h * w).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut cols = Vec::new();
        im2col(&x, c, b, h, w, &mut cols);
        let y: Vec<f64> = (0..cols.len()).map(|i| (i as f64 * 0.3).cos()).collect();
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let back = col2im(&y, c, b, h, w);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn pooling_picks_maxima() {
        let x = [1.0f64, 5.0, 2.0, 0.0, 3.0, 4.0, 9.0, 8.0];
        let (out, src) = max_pool(&x, 1, 2, 4);
        assert_eq!(out, vec![5.0, 9.0]);
        assert_eq!(src, vec![1, 6]);
    }

    #[test]
    fn batch_rows_are_independent() {
        let net: Network<f64> = Network::new(8, 8, 3, &mut stream(1, &[]));
        let a: Vec<f64> = (0..64).map(|i| (i as f64 * 0.1).sin().abs()).collect();
        let b: Vec<f64> = (0..64).map(|i| (i as f64 * 0.2).cos().abs()).collect();
        let single = net.forward(&a, 1);
        let both = net.forward(&[a.clone(), b].concat(), 2);
        for (x, y) in single.logits.iter().zip(&both.logits[..3]) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
