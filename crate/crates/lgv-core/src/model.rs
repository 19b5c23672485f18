//! Minimal differentiable MLP classifier over a flat weight vector.
//!
//! The network is a fully-connected stack described by [`ModelSpec`]:
//! `layer_widths = [d, h_1, ..., C]`, a hidden activation (ReLU or tanh)
//! and softmax cross-entropy loss. All parameters live in one flat `f64`
//! vector laid out layer by layer as `[W_0 row-major, b_0, W_1, b_1, ...]`,
//! which is what makes weight-space geometry (averaging, deviations, rays,
//! subspace projections) uniform across the crate.
//!
//! Everything here is a pure function of its arguments; weights are shared
//! immutably.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => libm::tanh(x),
        }
    }

    /// Derivative at pre-activation `x`. The ReLU subgradient at 0 is 0.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = libm::tanh(x);
                1.0 - t * t
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::Tanh => write!(f, "tanh"),
        }
    }
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid(alloc::format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }
}

/// Architecture of the classifier; the binding identity for weight vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    layer_widths: Vec<usize>,
    activation: Activation,
}

impl ModelSpec {
    /// `layer_widths` runs input dimension first, class count last.
    pub fn new(layer_widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(invalid("a model needs at least 2 layer widths (d and C)"));
        }
        if layer_widths.iter().any(|&w| w == 0) {
            return Err(invalid("all layer widths must be >= 1"));
        }
        Ok(ModelSpec {
            layer_widths,
            activation,
        })
    }

    pub fn layer_widths(&self) -> &[usize] {
        &self.layer_widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    /// Total parameter count `p = sum (w_in + 1) * w_out`.
    pub fn param_count(&self) -> usize {
        self.layer_widths
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    /// FNV-1a over the architecture; binds weight vectors to their spec.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |byte: u8| {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        eat(match self.activation {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        });
        for &w in &self.layer_widths {
            for b in (w as u64).to_le_bytes() {
                eat(b);
            }
        }
        h
    }

    /// Bind a raw value vector to this spec, validating length and finiteness.
    pub fn bind(&self, values: Vec<f64>) -> Result<WeightVector> {
        if values.len() != self.param_count() {
            return Err(invalid(alloc::format!(
                "weight vector has length {}, spec requires {}",
                values.len(),
                self.param_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("weight vector contains non-finite entries"));
        }
        Ok(WeightVector {
            values,
            spec_hash: self.hash(),
        })
    }

    pub fn zero_weights(&self) -> WeightVector {
        WeightVector {
            values: vec![0.0; self.param_count()],
            spec_hash: self.hash(),
        }
    }

    /// Glorot-uniform initialisation: per-layer weights uniform in
    /// `+-sqrt(6 / (fan_in + fan_out))`, biases zero. Deterministic in `seed`.
    pub fn init_weights(&self, seed: u64) -> WeightVector {
        use rand::Rng;
        let mut rng = rng::rng_from(seed);
        let mut values = Vec::with_capacity(self.param_count());
        for w in self.layer_widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            for _ in 0..fan_in * fan_out {
                values.push(rng.random_range(-bound..bound));
            }
            values.extend(core::iter::repeat(0.0).take(fan_out));
        }
        WeightVector {
            values,
            spec_hash: self.hash(),
        }
    }

    fn check_weights(&self, w: &WeightVector) -> Result<()> {
        if w.spec_hash != self.hash() {
            return Err(Error::SpecMismatch {
                expected: self.hash(),
                found: w.spec_hash,
            });
        }
        debug_assert_eq!(w.values.len(), self.param_count());
        Ok(())
    }

    fn check_batch(&self, b: &Batch) -> Result<()> {
        if b.inputs.cols() != self.input_dim() {
            return Err(invalid(alloc::format!(
                "batch input dimension {} does not match model input dimension {}",
                b.inputs.cols(),
                self.input_dim()
            )));
        }
        let c = self.class_count();
        if b.labels.iter().any(|&y| y >= c) {
            return Err(invalid(alloc::format!(
                "batch contains a label outside [0, {c})"
            )));
        }
        Ok(())
    }
}

/// Flat vector of all model parameters, bound to a [`ModelSpec`] by hash.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    values: Vec<f64>,
    spec_hash: u64,
}

impl WeightVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec_hash(&self) -> u64 {
        self.spec_hash
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn from_parts(values: Vec<f64>, spec_hash: u64) -> Self {
        WeightVector { values, spec_hash }
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `self + scale * other`, keeping the spec binding.
    pub fn add_scaled(&self, other: &[f64], scale: f64) -> Result<WeightVector> {
        if other.len() != self.values.len() {
            return Err(invalid("vector length mismatch"));
        }
        let values = self
            .values
            .iter()
            .zip(other)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(WeightVector {
            values,
            spec_hash: self.spec_hash,
        })
    }

    pub fn l2_norm(&self) -> f64 {
        crate::linalg::norm2(&self.values)
    }
}

/// A batch of examples: inputs as an `n x d` matrix plus class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    inputs: Matrix,
    labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Matrix, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(invalid("batch must contain at least one example"));
        }
        if inputs.rows() != labels.len() {
            return Err(invalid(alloc::format!(
                "{} input rows but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        if inputs.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(invalid("batch inputs contain non-finite entries"));
        }
        Ok(Batch { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    /// Batch with the same labels but different input rows (used by attacks
    /// to evaluate perturbed inputs).
    pub fn with_inputs(&self, inputs: Matrix) -> Result<Batch> {
        Batch::new(inputs, self.labels.clone())
    }

    /// Sub-batch at the given row indices.
    pub fn select(&self, indices: &[usize]) -> Result<Batch> {
        let d = self.inputs.cols();
        let mut inputs = Matrix::zeros(indices.len(), d);
        let mut labels = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            if i >= self.len() {
                return Err(invalid("selection index out of range"));
            }
            inputs.row_mut(r).copy_from_slice(self.inputs.row(i));
            labels.push(self.labels[i]);
        }
        Batch::new(inputs, labels)
    }
}

/// Per-layer views into the flat weight vector.
struct LayerView<'a> {
    weights: &'a [f64], // w_out x w_in, row-major
    bias: &'a [f64],    // w_out
    fan_in: usize,
    fan_out: usize,
}

fn layer_views<'a>(spec: &ModelSpec, values: &'a [f64]) -> Vec<LayerView<'a>> {
    let mut views = Vec::with_capacity(spec.layer_widths().len() - 1);
    let mut offset = 0;
    for w in spec.layer_widths().windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weights = &values[offset..offset + fan_in * fan_out];
        offset += fan_in * fan_out;
        let bias = &values[offset..offset + fan_out];
        offset += fan_out;
        views.push(LayerView {
            weights,
            bias,
            fan_in,
            fan_out,
        });
    }
    views
}

/// Forward pass for one example, keeping pre- and post-activations for
/// backprop. `pre[l]` is the affine output of layer `l`; `post[l]` its
/// activated value (the last layer stays linear: logits).
struct Trace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

fn forward_trace(spec: &ModelSpec, layers: &[LayerView<'_>], x: &[f64]) -> Trace {
    let n_layers = layers.len();
    let mut pre = Vec::with_capacity(n_layers);
    let mut post = Vec::with_capacity(n_layers);
    let mut current: Vec<f64> = x.to_vec();
    for (l, layer) in layers.iter().enumerate() {
        let mut a = vec![0.0; layer.fan_out];
        for o in 0..layer.fan_out {
            let row = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
            let mut acc = layer.bias[o];
            for (wi, xi) in row.iter().zip(&current) {
                acc += wi * xi;
            }
            a[o] = acc;
        }
        let z = if l + 1 == n_layers {
            a.clone()
        } else {
            a.iter().map(|&v| spec.activation().apply(v)).collect()
        };
        pre.push(a);
        current = z.clone();
        post.push(z);
    }
    Trace { pre, post }
}

/// Logits for one example.
pub fn logits(spec: &ModelSpec, w: &WeightVector, x: &[f64]) -> Result<Vec<f64>> {
    spec.check_weights(w)?;
    if x.len() != spec.input_dim() {
        return Err(invalid("input dimension mismatch"));
    }
    let layers = layer_views(spec, w.values());
    Ok(forward_trace(spec, &layers, x).post.pop().unwrap())
}

/// Stable softmax of a logit vector.
fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log(sum(exp(logits)))`, stable.
fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| libm::exp(z - max)).sum();
    max + libm::log(sum)
}

/// Mean softmax cross-entropy over the batch.
pub fn loss(spec: &ModelSpec, w: &WeightVector, b: &Batch) -> Result<f64> {
    spec.check_weights(w)?;
    spec.check_batch(b)?;
    let layers = layer_views(spec, w.values());
    let mut total = 0.0;
    for (x, &y) in b.inputs().iter_rows().zip(b.labels()) {
        let trace = forward_trace(spec, &layers, x);
        let logits = trace.post.last().unwrap();
        total += log_sum_exp(logits) - logits[y];
    }
    Ok(total / b.len() as f64)
}

/// Gradient of the mean loss with respect to the inputs, one row per example.
pub fn grad_input(spec: &ModelSpec, w: &WeightVector, b: &Batch) -> Result<Matrix> {
    backward(spec, w, b, BackwardMode::Input)
        .map(|out| out.grad_input.unwrap())
}

/// Gradient of the mean loss with respect to the flat weight vector.
pub fn grad_weights(spec: &ModelSpec, w: &WeightVector, b: &Batch) -> Result<WeightVector> {
    backward(spec, w, b, BackwardMode::Weights)
        .map(|out| WeightVector::from_parts(out.grad_weights.unwrap(), w.spec_hash()))
}

/// Mean loss together with the weight gradient (one fused pass; the training
/// loop calls this per mini-batch).
pub fn loss_and_grad_weights(spec: &ModelSpec, w: &WeightVector, b: &Batch) -> Result<(f64, WeightVector)> {
    let out = backward(spec, w, b, BackwardMode::Weights)?;
    Ok((
        out.loss,
        WeightVector::from_parts(out.grad_weights.unwrap(), w.spec_hash()),
    ))
}

enum BackwardMode {
    Input,
    Weights,
}

struct BackwardOut {
    loss: f64,
    grad_input: Option<Matrix>,
    grad_weights: Option<Vec<f64>>,
}

fn backward(spec: &ModelSpec, w: &WeightVector, b: &Batch, mode: BackwardMode) -> Result<BackwardOut> {
    spec.check_weights(w)?;
    spec.check_batch(b)?;
    let layers = layer_views(spec, w.values());
    let n = b.len() as f64;
    let inv_n = 1.0 / n;

    let mut total_loss = 0.0;
    let mut grad_in = match mode {
        BackwardMode::Input => Some(Matrix::zeros(b.len(), spec.input_dim())),
        BackwardMode::Weights => None,
    };
    let mut grad_w = match mode {
        BackwardMode::Weights => Some(vec![0.0; spec.param_count()]),
        BackwardMode::Input => None,
    };

    for (row_idx, (x, &y)) in b.inputs().iter_rows().zip(b.labels()).enumerate() {
        let trace = forward_trace(spec, &layers, x);
        let logits = trace.post.last().unwrap();
        total_loss += log_sum_exp(logits) - logits[y];

        // delta = d(per-example loss) / d(logits), scaled by 1/n for the mean
        let mut delta: Vec<f64> = softmax(logits);
        delta[y] -= 1.0;
        for d in delta.iter_mut() {
            *d *= inv_n;
        }

        for l in (0..layers.len()).rev() {
            let layer = &layers[l];
            let input: &[f64] = if l == 0 { x } else { &trace.post[l - 1] };

            if let Some(gw) = grad_w.as_mut() {
                // offset of layer l inside the flat vector
                let mut offset = 0;
                for prev in &layers[..l] {
                    offset += prev.fan_in * prev.fan_out + prev.fan_out;
                }
                for o in 0..layer.fan_out {
                    let base = offset + o * layer.fan_in;
                    for i in 0..layer.fan_in {
                        gw[base + i] += delta[o] * input[i];
                    }
                }
                let bias_base = offset + layer.fan_in * layer.fan_out;
                for o in 0..layer.fan_out {
                    gw[bias_base + o] += delta[o];
                }
            }

            // propagate to the layer input
            let mut prev_delta = vec![0.0; layer.fan_in];
            for o in 0..layer.fan_out {
                let row = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                let d = delta[o];
                for (pd, wi) in prev_delta.iter_mut().zip(row) {
                    *pd += wi * d;
                }
            }
            if l > 0 {
                for (pd, &a) in prev_delta.iter_mut().zip(&trace.pre[l - 1]) {
                    *pd *= spec.activation().derivative(a);
                }
            }
            delta = prev_delta;
        }

        if let Some(gi) = grad_in.as_mut() {
            gi.row_mut(row_idx).copy_from_slice(&delta);
        }
    }

    Ok(BackwardOut {
        loss: total_loss / n,
        grad_input: grad_in,
        grad_weights: grad_w,
    })
}

/// A scalar loss over a flat weight vector; the common surface for
/// curvature probes. The MLP batch loss implements it, and tests plug in
/// closed-form quadratics.
pub trait LossSurface {
    fn dim(&self) -> usize;
    fn loss_at(&self, w: &[f64]) -> f64;
    fn grad_at(&self, w: &[f64]) -> Vec<f64>;
}

/// The mean cross-entropy of a fixed batch as a function of the weights.
pub struct BatchLoss<'a> {
    pub spec: &'a ModelSpec,
    pub batch: &'a Batch,
}

impl LossSurface for BatchLoss<'_> {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn loss_at(&self, w: &[f64]) -> f64 {
        let wv = WeightVector::from_parts(w.to_vec(), self.spec.hash());
        loss(self.spec, &wv, self.batch).expect("batch loss")
    }

    fn grad_at(&self, w: &[f64]) -> Vec<f64> {
        let wv = WeightVector::from_parts(w.to_vec(), self.spec.hash());
        grad_weights(self.spec, &wv, self.batch)
            .expect("batch gradient")
            .values
    }
}

/// Relative step for the Hessian-vector central difference.
fn hvp_step(w_norm: f64) -> f64 {
    1e-4 * (1.0 + w_norm)
}

/// Hessian-vector product by central differences of the analytic gradient:
/// `(g(w + h u) - g(w - h u)) / (2 h) * ||v||` with `u = v / ||v||` and
/// `h = 1e-4 (1 + ||w||)`.
pub fn hvp_on(surface: &dyn LossSurface, w: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if w.len() != surface.dim() || v.len() != surface.dim() {
        return Err(invalid("hvp dimension mismatch"));
    }
    let v_norm = crate::linalg::norm2(v);
    if v_norm == 0.0 {
        return Err(invalid("hvp direction must be non-zero"));
    }
    let h = hvp_step(crate::linalg::norm2(w));
    let scale = h / v_norm;
    let plus: Vec<f64> = w.iter().zip(v).map(|(wi, vi)| wi + scale * vi).collect();
    let minus: Vec<f64> = w.iter().zip(v).map(|(wi, vi)| wi - scale * vi).collect();
    let g_plus = surface.grad_at(&plus);
    let g_minus = surface.grad_at(&minus);
    Ok(g_plus
        .iter()
        .zip(&g_minus)
        .map(|(p, m)| (p - m) / (2.0 * h) * v_norm)
        .collect())
}

/// Hessian-vector product of the batch loss at `w` in direction `v`.
pub fn hvp(spec: &ModelSpec, w: &WeightVector, b: &Batch, v: &WeightVector) -> Result<WeightVector> {
    spec.check_weights(w)?;
    spec.check_weights(v)?;
    spec.check_batch(b)?;
    let surface = BatchLoss { spec, batch: b };
    let out = hvp_on(&surface, w.values(), v.values())?;
    Ok(WeightVector::from_parts(out, w.spec_hash()))
}

/// Smallest absolute hidden pre-activation over the batch.
///
/// Finite-difference checks against ReLU nets are only valid away from the
/// activation kinks (the subgradient at 0 is defined as 0); this margin
/// lets a test resample inputs until every unit is safely off its kink.
pub fn min_hidden_preactivation(spec: &ModelSpec, w: &WeightVector, b: &Batch) -> Result<f64> {
    spec.check_weights(w)?;
    spec.check_batch(b)?;
    let layers = layer_views(spec, w.values());
    let mut margin = f64::INFINITY;
    for x in b.inputs().iter_rows() {
        let trace = forward_trace(spec, &layers, x);
        for pre in &trace.pre[..trace.pre.len() - 1] {
            for &a in pre {
                margin = margin.min(a.abs());
            }
        }
    }
    Ok(margin)
}

/// Predicted class (argmax of the logits, ties broken by lowest index).
pub fn predict(spec: &ModelSpec, w: &WeightVector, x: &[f64]) -> Result<usize> {
    let z = logits(spec, w, x)?;
    let mut best = 0;
    for (i, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = i;
        }
    }
    Ok(best)
}

/// A spec paired with a bound weight vector; convenience wrapper for
/// targets and single-model surrogates.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    weights: WeightVector,
}

impl Model {
    pub fn new(spec: ModelSpec, weights: WeightVector) -> Result<Self> {
        spec.check_weights(&weights)?;
        Ok(Model { spec, weights })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn loss(&self, b: &Batch) -> Result<f64> {
        loss(&self.spec, &self.weights, b)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        predict(&self.spec, &self.weights, x)
    }

    pub fn predictions(&self, inputs: &Matrix) -> Result<Vec<usize>> {
        inputs.iter_rows().map(|x| self.predict(x)).collect()
    }

    /// Fraction of batch examples classified correctly.
    pub fn accuracy(&self, b: &Batch) -> Result<f64> {
        let preds = self.predictions(b.inputs())?;
        let correct = preds
            .iter()
            .zip(b.labels())
            .filter(|(p, y)| p == y)
            .count();
        Ok(correct as f64 / b.len() as f64)
    }
}

/// Human-readable spec summary, e.g. `16-32-4 relu`.
impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let widths: Vec<String> = self
            .layer_widths
            .iter()
            .map(|w| alloc::format!("{w}"))
            .collect();
        write!(f, "{} {}", widths.join("-"), self.activation)
    }
}
