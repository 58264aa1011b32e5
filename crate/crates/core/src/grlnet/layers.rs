//! Dense building blocks with hand-written backward passes.
//!
//! Activations are single-sample `f64` buffers in channel-major order
//! (`[c][y][x]`). Each layer accumulates parameter gradients into its
//! [`Param`]s; callers zero them between optimizer steps.

use rand_distr::{Distribution, Normal};

use crate::seed::Rng;

/// A parameter tensor with its gradient accumulator and momentum buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl Param {
    pub fn zeros(n: usize) -> Self {
        Param {
            value: vec![0.0; n],
            grad: vec![0.0; n],
            velocity: vec![0.0; n],
        }
    }

    pub fn normal(n: usize, std: f64, rng: &mut Rng) -> Self {
        let dist = Normal::new(0.0, std).expect("finite std");
        let mut p = Param::zeros(n);
        p.value.iter_mut().for_each(|v| *v = dist.sample(rng));
        p
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// `c[m x n] += a[m x k] * b[k x n]`, all row-major.
pub fn matmul_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// `c[m x k] += a[m x n] * b[k x n]^T`.
pub fn matmul_bt_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, n: usize, k: usize) {
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let dot: f64 = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
            c[i * k + p] += dot;
        }
    }
}

/// `c[k x n] += a[m x k]^T * b[m x n]`.
pub fn matmul_at_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// 3x3 convolution, stride 2, zero padding 1, followed by ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvStage {
    pub cin: usize,
    pub cout: usize,
    pub weight: Param,
    pub bias: Param,
}

/// What a conv stage keeps for its backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    cols: Vec<f64>,
    in_h: usize,
    in_w: usize,
    out: Vec<f64>,
}

pub fn conv_out_dim(n: usize) -> usize {
    n.div_ceil(2)
}

impl ConvStage {
    pub fn new(cin: usize, cout: usize, rng: &mut Rng) -> Self {
        let fan_in = cin * 9;
        ConvStage {
            cin,
            cout,
            weight: Param::normal(cout * fan_in, (2.0 / fan_in as f64).sqrt(), rng),
            bias: Param::zeros(cout),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn im2col(&self, input: &[f64], h: usize, w: usize) -> Vec<f64> {
        let (oh, ow) = (conv_out_dim(h), conv_out_dim(w));
        let n = oh * ow;
        let mut cols = vec![0.0; self.cin * 9 * n];
        for c in 0..self.cin {
            let plane = &input[c * h * w..(c + 1) * h * w];
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = (c * 9 + ky * 3 + kx) * n;
                    for oy in 0..oh {
                        let iy = (2 * oy + ky) as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for ox in 0..ow {
                            let ix = (2 * ox + kx) as isize - 1;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            cols[row + oy * ow + ox] = plane[iy as usize * w + ix as usize];
                        }
                    }
                }
            }
        }
        cols
    }

    pub fn forward(&self, input: &[f64], h: usize, w: usize) -> ConvCache {
        let n = conv_out_dim(h) * conv_out_dim(w);
        let cols = self.im2col(input, h, w);
        let mut out = vec![0.0; self.cout * n];
        for (o, chunk) in out.chunks_exact_mut(n).enumerate() {
            chunk.iter_mut().for_each(|v| *v = self.bias.value[o]);
        }
        matmul_acc(&self.weight.value, &cols, &mut out, self.cout, self.cin * 9, n);
        out.iter_mut().for_each(|v| *v = v.max(0.0));
        ConvCache {
            cols,
            in_h: h,
            in_w: w,
            out,
        }
    }

    /// Given dL/d(output) (post-ReLU), accumulate parameter gradients and
    /// return dL/d(input).
    pub fn backward(&mut self, cache: &ConvCache, d_out: &[f64]) -> Vec<f64> {
        let (h, w) = (cache.in_h, cache.in_w);
        let (oh, ow) = (conv_out_dim(h), conv_out_dim(w));
        let n = oh * ow;
        let d_pre: Vec<f64> = d_out
            .iter()
            .zip(&cache.out)
            .map(|(g, o)| if *o > 0.0 { *g } else { 0.0 })
            .collect();
        for (o, chunk) in d_pre.chunks_exact(n).enumerate() {
            self.bias.grad[o] += chunk.iter().sum::<f64>();
        }
        let k = self.cin * 9;
        matmul_bt_acc(&d_pre, &cache.cols, &mut self.weight.grad, self.cout, n, k);
        let mut d_cols = vec![0.0; k * n];
        matmul_at_acc(&self.weight.value, &d_pre, &mut d_cols, self.cout, k, n);
        let mut d_in = vec![0.0; self.cin * h * w];
        for c in 0..self.cin {
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = (c * 9 + ky * 3 + kx) * n;
                    for oy in 0..oh {
                        let iy = (2 * oy + ky) as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for ox in 0..ow {
                            let ix = (2 * ox + kx) as isize - 1;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            d_in[c * h * w + iy as usize * w + ix as usize] +=
                                d_cols[row + oy * ow + ox];
                        }
                    }
                }
            }
        }
        d_in
    }
}

impl ConvCache {
    pub fn output(&self) -> &[f64] {
        &self.out
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    pub fn new(inputs: usize, outputs: usize, gain: f64, rng: &mut Rng) -> Self {
        Linear {
            inputs,
            outputs,
            weight: Param::normal(inputs * outputs, gain / (inputs as f64).sqrt(), rng),
            bias: Param::zeros(outputs),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Linear {
            inputs,
            outputs,
            weight: Param::zeros(inputs * outputs),
            bias: Param::zeros(outputs),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        (0..self.outputs)
            .map(|o| {
                let row = &self.weight.value[o * self.inputs..(o + 1) * self.inputs];
                self.bias.value[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    /// Input gradient only; parameters untouched.
    pub fn backward_input(&self, d_y: &[f64]) -> Vec<f64> {
        let mut d_x = vec![0.0; self.inputs];
        for (o, g) in d_y.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            let row = &self.weight.value[o * self.inputs..(o + 1) * self.inputs];
            for (dx, w) in d_x.iter_mut().zip(row) {
                *dx += g * w;
            }
        }
        d_x
    }

    pub fn backward_params(&mut self, x: &[f64], d_y: &[f64]) {
        for (o, g) in d_y.iter().enumerate() {
            self.bias.grad[o] += g;
            let row = &mut self.weight.grad[o * self.inputs..(o + 1) * self.inputs];
            for (dw, v) in row.iter_mut().zip(x) {
                *dw += g * v;
            }
        }
    }

    pub fn backward(&mut self, x: &[f64], d_y: &[f64]) -> Vec<f64> {
        self.backward_params(x, d_y);
        self.backward_input(d_y)
    }
}

/// Per-channel spatial mean.
pub fn global_avg_pool(x: &[f64], channels: usize) -> Vec<f64> {
    let n = x.len() / channels;
    x.chunks_exact(n)
        .map(|c| c.iter().sum::<f64>() / n as f64)
        .collect()
}

pub fn global_avg_pool_backward(d_pool: &[f64], spatial: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(d_pool.len() * spatial);
    for g in d_pool {
        let v = g / spatial as f64;
        out.extend(std::iter::repeat_n(v, spatial));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_variants_agree() {
        let a: Vec<f64> = (0..6).map(|v| v as f64 - 2.0).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|v| (v as f64).sin()).collect(); // 3x4
        let mut c = vec![0.0; 8];
        matmul_acc(&a, &b, &mut c, 2, 3, 4);
        for i in 0..2 {
            for j in 0..4 {
                let e: f64 = (0..3).map(|p| a[i * 3 + p] * b[p * 4 + j]).sum();
                assert!((c[i * 4 + j] - e).abs() < 1e-12);
            }
        }
        // c2 = c * b^T (2x4 * 4x3)
        let mut c2 = vec![0.0; 6];
        matmul_bt_acc(&c, &b, &mut c2, 2, 4, 3);
        let mut c3 = vec![0.0; 12]; // a^T * c : 3x4
        matmul_at_acc(&a, &c, &mut c3, 2, 3, 4);
        for p in 0..3 {
            for j in 0..4 {
                let e: f64 = (0..2).map(|i| a[i * 3 + p] * c[i * 4 + j]).sum();
                assert!((c3[p * 4 + j] - e).abs() < 1e-12);
            }
        }
        for i in 0..2 {
            for p in 0..3 {
                let e: f64 = (0..4).map(|j| c[i * 4 + j] * b[p * 4 + j]).sum();
                assert!((c2[i * 3 + p] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = crate::seed::rng(3);
        let mut conv = ConvStage::new(2, 3, &mut rng);
        conv.bias.value.iter_mut().for_each(|b| *b = 0.1);
        let (h, w) = (5, 6);
        let input: Vec<f64> = (0..2 * h * w).map(|i| ((i * 37) % 11) as f64 / 11.0 - 0.4).collect();
        let probe: Vec<f64> = (0..3 * 3 * 3).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let loss = |c: &ConvStage, x: &[f64]| -> f64 {
            c.forward(x, h, w).output().iter().zip(&probe).map(|(o, p)| o * p).sum()
        };
        let cache = conv.forward(&input, h, w);
        let d_in = conv.backward(&cache, &probe);
        let eps = 1e-6;
        for i in [0, 5, 17, 40, 59] {
            let mut xp = input.clone();
            xp[i] += eps;
            let mut xm = input.clone();
            xm[i] -= eps;
            let fd = (loss(&conv, &xp) - loss(&conv, &xm)) / (2.0 * eps);
            assert!((fd - d_in[i]).abs() < 1e-6, "input {i}: {fd} vs {}", d_in[i]);
        }
        for i in [0, 7, 20, 53] {
            let mut cp = conv.clone();
            cp.weight.value[i] += eps;
            let mut cm = conv.clone();
            cm.weight.value[i] -= eps;
            let fd = (loss(&cp, &input) - loss(&cm, &input)) / (2.0 * eps);
            assert!((fd - conv.weight.grad[i]).abs() < 1e-6);
        }
    }
}
