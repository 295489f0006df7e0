//! Dense tanh networks with reverse-mode gradients and full-batch Adam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Normal};
use crate::scalar::Real;

/// Standard deviation of the truncated-normal weight initializer.
pub const INIT_SIGMA: f64 = 0.1;

/// Feed-forward network: tanh on hidden layers, identity on the output.
/// `weights[l]` is `sizes[l+1] × sizes[l]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T = f64> {
    pub sizes: Vec<usize>,
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
    pub seed: u64,
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
        return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
    }
    Ok(())
}

impl<T: Real> Mlp<T> {
    /// Truncated-normal weights (σ = 0.1, cut at ±2σ), zero biases.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        check_sizes(sizes)?;
        let mut normal = Normal::new(stream(seed, 0));
        let weights = sizes
            .windows(2)
            .map(|w| (0..w[0] * w[1]).map(|_| T::cst(normal.truncated(INIT_SIGMA))).collect())
            .collect();
        let biases = sizes[1..].iter().map(|&n| vec![T::zero(); n]).collect();
        Ok(Mlp { sizes: sizes.to_vec(), weights, biases, seed })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(Mlp {
            sizes: sizes.to_vec(),
            weights: sizes.windows(2).map(|w| vec![T::zero(); w[0] * w[1]]).collect(),
            biases: sizes[1..].iter().map(|&n| vec![T::zero(); n]).collect(),
            seed: 0,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn n_in(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_out(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// `(rows, cols)` of every weight matrix.
    pub fn weight_shapes(&self) -> Vec<(usize, usize)> {
        self.sizes.windows(2).map(|w| (w[1], w[0])).collect()
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    /// Parameters in layer order, each layer as weights then biases.
    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params(&mut self, p: &[T]) {
        assert_eq!(p.len(), self.n_params());
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&p[k..k + nw]);
            k += nw;
            b.copy_from_slice(&p[k..k + nb]);
            k += nb;
        }
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        if input.len() != self.n_in() {
            return Err(Error::Shape(format!("input length {} != {}", input.len(), self.n_in())));
        }
        let mut tape = Tape::new();
        self.forward_batch(input, 1, &mut tape)?;
        Ok(self.outputs(&tape).to_vec())
    }

    /// Forward pass over a batch of `n` row-major inputs, keeping the
    /// activations of every layer for a following [`Mlp::backward`].
    pub fn forward_batch(&self, inputs: &[T], n: usize, tape: &mut Tape<T>) -> Result<()> {
        if inputs.len() != n * self.n_in() {
            return Err(Error::Shape(format!("batch of {} values is not {n} × {}", inputs.len(), self.n_in())));
        }
        tape.n = n;
        tape.acts.resize(self.sizes.len(), Vec::new());
        tape.acts[0].clear();
        tape.acts[0].extend_from_slice(inputs);
        let last = self.n_layers() - 1;
        for l in 0..=last {
            let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
            let (prev, next) = tape.acts.split_at_mut(l + 1);
            let a = &prev[l];
            let out = &mut next[0];
            out.clear();
            let b = &self.biases[l];
            for _ in 0..n {
                out.extend_from_slice(b);
            }
            // out (n × rows) += a (n × cols) · Wᵀ
            let (r, c) = (rows as isize, cols as isize);
            T::gemm(n, cols, rows, (a, c, 1), (&self.weights[l], 1, c), true, (out, r, 1));
            if l < last {
                out.iter_mut().for_each(|y| *y = y.tanh());
            }
        }
        Ok(())
    }

    /// Reverse pass: given `∂loss/∂output` for every batch row, accumulate
    /// `∂loss/∂params` into `grad` (same layout as [`Mlp::params`]) and,
    /// if requested, return `∂loss/∂input`.
    pub fn backward(&self, tape: &Tape<T>, douts: &[T], grad: &mut [T], want_input: bool) -> Option<Vec<T>> {
        let n = tape.n;
        assert_eq!(douts.len(), n * self.n_out());
        assert_eq!(grad.len(), self.n_params());
        let mut offsets = Vec::with_capacity(self.n_layers());
        let mut k = 0;
        for l in 0..self.n_layers() {
            offsets.push(k);
            k += self.sizes[l + 1] * (self.sizes[l] + 1);
        }
        let mut delta = douts.to_vec();
        let last = self.n_layers() - 1;
        for l in (0..=last).rev() {
            let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
            if l < last {
                let y = &tape.acts[l + 1];
                for (d, yv) in delta.iter_mut().zip(y) {
                    *d = *d * (T::one() - *yv * *yv);
                }
            }
            let a = &tape.acts[l];
            let (gw, gb) = grad[offsets[l]..offsets[l] + rows * (cols + 1)].split_at_mut(rows * cols);
            for d in delta.chunks(rows) {
                for (g, v) in gb.iter_mut().zip(d) {
                    *g = *g + *v;
                }
            }
            let (r, c) = (rows as isize, cols as isize);
            // gW (rows × cols) += δᵀ · a
            T::gemm(rows, n, cols, (&delta, 1, r), (a, c, 1), true, (gw, c, 1));
            if l > 0 || want_input {
                let mut prev = vec![T::zero(); n * cols];
                // prev (n × cols) = δ · W
                T::gemm(n, rows, cols, (&delta, r, 1), (&self.weights[l], c, 1), false, (&mut prev, c, 1));
                delta = prev;
            }
        }
        if want_input {
            Some(delta)
        } else {
            None
        }
    }

    /// Output rows of the last forward pass.
    pub fn outputs<'a>(&self, tape: &'a Tape<T>) -> &'a [T] {
        tape.acts.last().expect("forward pass first")
    }

    pub fn to_file(&self, norm: Option<(&Normalizer, &Normalizer)>) -> ModelFile {
        let cast = |v: &Vec<T>| v.iter().map(|x| x.re()).collect::<Vec<f64>>();
        ModelFile {
            layer_sizes: self.sizes.clone(),
            weights: self.weights.iter().map(cast).collect(),
            biases: self.biases.iter().map(cast).collect(),
            input_norm: norm.map(|n| n.0.clone()),
            output_norm: norm.map(|n| n.1.clone()),
            seed: self.seed,
        }
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        check_sizes(&f.layer_sizes)?;
        let shapes_ok = f.weights.len() == f.layer_sizes.len() - 1
            && f.biases.len() == f.weights.len()
            && f.layer_sizes.windows(2).enumerate().all(|(l, w)| {
                f.weights[l].len() == w[0] * w[1] && f.biases[l].len() == w[1]
            });
        if !shapes_ok {
            return Err(Error::Shape("model file weights do not match layer_sizes".into()));
        }
        let cast = |v: &Vec<f64>| v.iter().map(|&x| T::cst(x)).collect::<Vec<T>>();
        Ok(Mlp {
            sizes: f.layer_sizes.clone(),
            weights: f.weights.iter().map(cast).collect(),
            biases: f.biases.iter().map(cast).collect(),
            seed: f.seed,
        })
    }
}

/// Per-layer activations of a batch forward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    n: usize,
    acts: Vec<Vec<T>>,
}

impl<T> Tape<T> {
    pub fn new() -> Self {
        Tape { n: 0, acts: Vec::new() }
    }
}

/// Adam with `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(n: usize, lr: f64) -> Self {
        Adam { lr, m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        self.t += 1;
        let (b1, b2) = (T::cst(Self::BETA1), T::cst(Self::BETA2));
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let lr = T::cst(self.lr);
        let eps = T::cst(Self::EPS);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] = params[i] - lr * mh / (vh.sqrt() + eps);
        }
    }
}

/// Per-feature affine normalization to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Statistics of `rows` (each of equal width); zero spreads become 1.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect();
        let std = (0..d)
            .map(|k| {
                let v = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Normalizer { mean, std }
    }

    pub fn identity(d: usize) -> Self {
        Normalizer { mean: vec![0.0; d], std: vec![1.0; d] }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(k, v)| (v - self.mean[k]) / self.std[k]).collect()
    }

    pub fn invert(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(k, v)| v * self.std[k] + self.mean[k]).collect()
    }
}

/// JSON model layout: sizes, row-major weights, biases, normalization, seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    #[serde(default)]
    pub input_norm: Option<Normalizer>,
    #[serde(default)]
    pub output_norm: Option<Normalizer>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Training loss at the start of every epoch.
    pub history: Vec<f64>,
}

/// Mean squared error over all entries and its gradient with respect to the
/// outputs.
pub fn mse<T: Real>(outputs: &[T], targets: &[T]) -> (f64, Vec<T>) {
    let n = outputs.len() as f64;
    let mut loss = 0.0;
    let scale = T::cst(2.0 / n);
    let grad = outputs
        .iter()
        .zip(targets)
        .map(|(o, t)| {
            let d = *o - *t;
            loss += d.re() * d.re();
            scale * d
        })
        .collect();
    (loss / n, grad)
}

fn flatten<T: Real>(rows: &[Vec<f64>]) -> Vec<T> {
    rows.iter().flatten().map(|&x| T::cst(x)).collect()
}

pub fn mse_on<T: Real>(mlp: &Mlp<T>, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    let mut tape = Tape::new();
    mlp.forward_batch(&flatten::<T>(inputs), inputs.len(), &mut tape)?;
    Ok(mse(mlp.outputs(&tape), &flatten::<T>(targets)).0)
}

/// Full-batch Adam on the mean squared error.
pub fn train<T: Real>(
    mlp: &mut Mlp<T>,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    validation: Option<(&[Vec<f64>], &[Vec<f64>])>,
    epochs: usize,
    lr: f64,
) -> Result<TrainReport> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Shape(format!("{} inputs vs {} targets", inputs.len(), targets.len())));
    }
    if !(lr > 0.0) {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    let x = flatten::<T>(inputs);
    let y = flatten::<T>(targets);
    let n = inputs.len();
    let mut tape = Tape::new();
    let mut adam = Adam::new(mlp.n_params(), lr);
    let mut params = mlp.params();
    let mut grad = vec![T::zero(); params.len()];
    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        mlp.forward_batch(&x, n, &mut tape)?;
        let (loss, dout) = mse(mlp.outputs(&tape), &y);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(loss);
        grad.iter_mut().for_each(|g| *g = T::zero());
        mlp.backward(&tape, &dout, &mut grad, false);
        adam.step(&mut params, &grad);
        mlp.set_params(&params);
    }
    let train_loss = mse_on(mlp, inputs, targets)?;
    if !train_loss.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: epochs });
    }
    let val_loss = match validation {
        Some((vi, vt)) if !vi.is_empty() => Some(mse_on(mlp, vi, vt)?),
        _ => None,
    };
    Ok(TrainReport { epochs, train_loss, val_loss, history })
}
