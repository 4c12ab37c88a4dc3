//! One-dimensional convolutional regressor over a tabular feature row.
//!
//! Architecture: the `p` features are read as a single-channel sequence in
//! schema column order; a valid stride-1 convolution with `F` kernels of width
//! `K` and ReLU gives `F × (p − K + 1)` activations, flattened filter-major;
//! a dense ReLU layer of `U` units; optional inverted dropout (training only);
//! a linear scalar output. Loss is mean squared error; gradients are exact.

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DROPOUT_RATE: f64 = 0.25;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnnSpec {
    pub filters: usize,
    pub kernel_size: usize,
    pub dense_units: usize,
    pub use_dropout: bool,
    pub dropout_rate: f64,
    pub learning_rate: f64,
}

impl CnnSpec {
    pub fn new(filters: usize, kernel_size: usize, dense_units: usize, use_dropout: bool, learning_rate: f64) -> Self {
        Self {
            filters,
            kernel_size,
            dense_units,
            use_dropout,
            dropout_rate: DEFAULT_DROPOUT_RATE,
            learning_rate,
        }
    }

    pub fn conv_width(&self, input_width: usize) -> usize {
        input_width + 1 - self.kernel_size
    }

    fn validate(&self, input_width: usize) -> Result<()> {
        if self.filters == 0 || self.kernel_size == 0 || self.dense_units == 0 {
            return Err(Error::InvalidParameter("filters, kernel size and units must be positive".into()));
        }
        if self.kernel_size > input_width {
            return Err(Error::InvalidParameter(format!(
                "kernel size {} exceeds input width {input_width}",
                self.kernel_size
            )));
        }
        if self.use_dropout && !(self.dropout_rate > 0.0 && self.dropout_rate < 1.0) {
            return Err(Error::InvalidParameter(format!("dropout rate {} outside (0, 1)", self.dropout_rate)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

/// Flat row-major array with its declared shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.shape.iter().product::<usize>() == self.data.len()
    }
}

/// Parameters, and equally gradients, of a [`CnnModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnParameters {
    /// `[F, K]`
    pub conv_kernels: Tensor,
    /// `[F]`
    pub conv_biases: Tensor,
    /// `[F·(p−K+1), U]`
    pub dense_weights: Tensor,
    /// `[U]`
    pub dense_biases: Tensor,
    /// `[U, 1]`
    pub output_weights: Tensor,
    /// `[1]`
    pub output_bias: Tensor,
}

impl CnnParameters {
    pub fn zeros(spec: &CnnSpec, input_width: usize) -> Self {
        let (f, k, u) = (spec.filters, spec.kernel_size, spec.dense_units);
        let flat = f * spec.conv_width(input_width);
        Self {
            conv_kernels: Tensor::zeros(&[f, k]),
            conv_biases: Tensor::zeros(&[f]),
            dense_weights: Tensor::zeros(&[flat, u]),
            dense_biases: Tensor::zeros(&[u]),
            output_weights: Tensor::zeros(&[u, 1]),
            output_bias: Tensor::zeros(&[1]),
        }
    }

    pub fn tensors(&self) -> [&Tensor; 6] {
        [
            &self.conv_kernels,
            &self.conv_biases,
            &self.dense_weights,
            &self.dense_biases,
            &self.output_weights,
            &self.output_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 6] {
        [
            &mut self.conv_kernels,
            &mut self.conv_biases,
            &mut self.dense_weights,
            &mut self.dense_biases,
            &mut self.output_weights,
            &mut self.output_bias,
        ]
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.data.len();
            t.data.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub spec: CnnSpec,
    pub input_width: usize,
    pub params: CnnParameters,
    pub seed: u64,
}

/// Activations kept for the backward pass.
struct Trace {
    conv_pre: Vec<f64>,
    conv_act: Vec<f64>,
    dense_pre: Vec<f64>,
    /// Post-ReLU, post-dropout.
    dense_out: Vec<f64>,
    output: f64,
}

/// He-normal weights (`sd = sqrt(2/fan_in)`), zero biases.
pub fn init_model(spec: CnnSpec, input_width: usize, seed: u64) -> Result<CnnModel> {
    spec.validate(input_width)?;
    let mut params = CnnParameters::zeros(&spec, input_width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conv_fan_in = spec.kernel_size;
    let dense_fan_in = spec.filters * spec.conv_width(input_width);
    let out_fan_in = spec.dense_units;
    for (tensor, fan_in) in [
        (&mut params.conv_kernels, conv_fan_in),
        (&mut params.dense_weights, dense_fan_in),
        (&mut params.output_weights, out_fan_in),
    ] {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive sd");
        tensor.data.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
    }
    Ok(CnnModel { spec, input_width, params, seed })
}

impl CnnModel {
    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.input_width {
            return Err(Error::DimensionMismatch { expected: self.input_width, actual: row.len() });
        }
        Ok(())
    }

    pub fn conv_width(&self) -> usize {
        self.spec.conv_width(self.input_width)
    }

    /// Convolution activations (post-ReLU), `F` rows of `p − K + 1`.
    pub fn conv_activations(&self, row: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_row(row)?;
        let trace = self.trace(row, None);
        Ok(trace.conv_act.chunks(self.conv_width()).map(<[f64]>::to_vec).collect())
    }

    fn trace(&self, row: &[f64], mask: Option<&[f64]>) -> Trace {
        let (f_count, k) = (self.spec.filters, self.spec.kernel_size);
        let u_count = self.spec.dense_units;
        let width = self.conv_width();
        let p = &self.params;

        let mut conv_pre = vec![0.0; f_count * width];
        for f in 0..f_count {
            let kernel = &p.conv_kernels.data[f * k..(f + 1) * k];
            let bias = p.conv_biases.data[f];
            for j in 0..width {
                conv_pre[f * width + j] = bias + kernel.iter().zip(&row[j..j + k]).map(|(w, x)| w * x).sum::<f64>();
            }
        }
        let conv_act: Vec<f64> = conv_pre.iter().map(|z| z.max(0.0)).collect();

        let mut dense_pre = p.dense_biases.data.clone();
        for (i, &a) in conv_act.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let w = &p.dense_weights.data[i * u_count..(i + 1) * u_count];
            for (z, wi) in dense_pre.iter_mut().zip(w) {
                *z += a * wi;
            }
        }
        let mut dense_out: Vec<f64> = dense_pre.iter().map(|z| z.max(0.0)).collect();
        if let Some(mask) = mask {
            dense_out.iter_mut().zip(mask).for_each(|(a, m)| *a *= m);
        }
        let output = p.output_bias.data[0]
            + dense_out.iter().zip(&p.output_weights.data).map(|(a, w)| a * w).sum::<f64>();
        Trace {
            conv_pre,
            conv_act,
            dense_pre,
            dense_out,
            output,
        }
    }

    /// Inference-mode prediction.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        self.check_row(row)?;
        Ok(self.trace(row, None).output)
    }

    /// Forward pass. With `dropout_rng` present and dropout enabled, a fresh
    /// inverted-dropout mask is drawn; otherwise this equals [`Self::predict`].
    pub fn forward<R: Rng>(&self, row: &[f64], dropout_rng: Option<&mut R>) -> Result<f64> {
        self.check_row(row)?;
        let mask = dropout_rng.and_then(|rng| self.dropout_mask(rng));
        Ok(self.trace(row, mask.as_deref()).output)
    }

    fn dropout_mask<R: Rng>(&self, rng: &mut R) -> Option<Vec<f64>> {
        if !self.spec.use_dropout {
            return None;
        }
        let keep = 1.0 - self.spec.dropout_rate;
        Some(
            (0..self.spec.dense_units)
                .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect(),
        )
    }

    fn accumulate(&self, row: &[f64], trace: &Trace, mask: Option<&[f64]>, d_out: f64, grads: &mut CnnParameters) {
        let (f_count, k) = (self.spec.filters, self.spec.kernel_size);
        let u_count = self.spec.dense_units;
        let width = self.conv_width();
        let p = &self.params;

        grads.output_bias.data[0] += d_out;
        let mut d_dense = vec![0.0; u_count];
        for u in 0..u_count {
            grads.output_weights.data[u] += d_out * trace.dense_out[u];
            if trace.dense_pre[u] > 0.0 {
                let m = mask.map_or(1.0, |m| m[u]);
                d_dense[u] = d_out * p.output_weights.data[u] * m;
            }
        }
        for (g, d) in grads.dense_biases.data.iter_mut().zip(&d_dense) {
            *g += d;
        }

        for f in 0..f_count {
            let mut d_bias = 0.0;
            for j in 0..width {
                let i = f * width + j;
                let a = trace.conv_act[i];
                let w = &p.dense_weights.data[i * u_count..(i + 1) * u_count];
                let gw = &mut grads.dense_weights.data[i * u_count..(i + 1) * u_count];
                let mut d_act = 0.0;
                for u in 0..u_count {
                    gw[u] += a * d_dense[u];
                    d_act += w[u] * d_dense[u];
                }
                if trace.conv_pre[i] > 0.0 {
                    d_bias += d_act;
                    let gk = &mut grads.conv_kernels.data[f * k..(f + 1) * k];
                    for (g, x) in gk.iter_mut().zip(&row[j..j + k]) {
                        *g += d_act * x;
                    }
                }
            }
            grads.conv_biases.data[f] += d_bias;
        }
    }

    /// Mean squared error and its exact gradient over a batch, inference mode.
    pub fn backward(&self, rows: &[Vec<f64>], targets: &[f64]) -> Result<(f64, CnnParameters)> {
        self.backward_with_masks(rows, targets, None)
    }

    /// As [`Self::backward`] with fixed per-row dropout masks (one scale factor
    /// per dense unit).
    pub fn backward_with_masks(
        &self,
        rows: &[Vec<f64>],
        targets: &[f64],
        masks: Option<&[Vec<f64>]>,
    ) -> Result<(f64, CnnParameters)> {
        if rows.is_empty() {
            return Err(Error::Empty("empty batch".into()));
        }
        if rows.len() != targets.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), actual: targets.len() });
        }
        let n = rows.len() as f64;
        let mut grads = CnnParameters::zeros(&self.spec, self.input_width);
        let mut loss = 0.0;
        for (i, (row, y)) in rows.iter().zip(targets).enumerate() {
            self.check_row(row)?;
            let mask = masks.map(|m| m[i].as_slice());
            let trace = self.trace(row, mask);
            let residual = trace.output - y;
            loss += residual * residual;
            self.accumulate(row, &trace, mask, 2.0 * residual / n, &mut grads);
        }
        Ok((loss / n, grads))
    }

    pub fn mse(&self, rows: &[Vec<f64>], targets: &[f64]) -> Result<f64> {
        if rows.is_empty() {
            return Err(Error::Empty("no rows to evaluate".into()));
        }
        let mut total = 0.0;
        for (row, y) in rows.iter().zip(targets) {
            total += (self.predict(row)? - y).powi(2);
        }
        Ok(total / rows.len() as f64)
    }
}

/// First/second moment accumulators for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: CnnParameters,
    pub second_moment: CnnParameters,
    pub step: u64,
}

impl AdamState {
    pub fn new(like: &CnnModel) -> Self {
        let zeros = CnnParameters::zeros(&like.spec, like.input_width);
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update (β₁ = 0.9, β₂ = 0.999, ε = 1e-8).
pub fn adam_step(params: &mut CnnParameters, state: &mut AdamState, grads: &CnnParameters, lr: f64) -> Result<()> {
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    let tensors = params.tensors_mut().into_iter();
    let moments = state.first_moment.tensors_mut().into_iter().zip(state.second_moment.tensors_mut());
    for ((theta, (m, v)), g) in tensors.zip(moments).zip(grads.tensors()) {
        for i in 0..theta.data.len() {
            let gi = g.data[i];
            m.data[i] = ADAM_BETA1 * m.data[i] + (1.0 - ADAM_BETA1) * gi;
            v.data[i] = ADAM_BETA2 * v.data[i] + (1.0 - ADAM_BETA2) * gi * gi;
            let m_hat = m.data[i] / c1;
            let v_hat = v.data[i] / c2;
            theta.data[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs_cap: usize,
    pub batch_size: usize,
    /// Chronological tail held out for validation.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_cap: 25,
            batch_size: 32,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Per-epoch losses. Training loss is the mean of the epoch's minibatch
/// losses (training mode); validation loss is inference-mode MSE at epoch end.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub epochs_run: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// 0-based epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
}

impl TrainReport {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.val_loss.iter().copied().reduce(f64::min)
    }
}

/// Minibatch Adam on MSE. Rows are expected in chronological order; the last
/// `validation_fraction` of them is held out before any shuffling. Returns the
/// parameters of the epoch with the lowest validation loss (earliest on ties).
pub fn train(model: &CnnModel, rows: &[Vec<f64>], targets: &[f64], config: &TrainConfig) -> Result<(CnnModel, TrainReport)> {
    let mut report = TrainReport {
        batch_size: config.batch_size,
        seed: config.seed,
        ..Default::default()
    };
    if config.epochs_cap == 0 {
        return Ok((model.clone(), report));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be positive".into()));
    }
    if !(config.validation_fraction > 0.0 && config.validation_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "validation fraction {} outside (0, 1)",
            config.validation_fraction
        )));
    }
    if rows.len() != targets.len() {
        return Err(Error::DimensionMismatch { expected: rows.len(), actual: targets.len() });
    }
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 rows to train, got {n}")));
    }
    let n_val = ((config.validation_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let n_train = n - n_val;
    let (train_rows, val_rows) = rows.split_at(n_train);
    let (train_targets, val_targets) = targets.split_at(n_train);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = model.clone();
    let mut adam = AdamState::new(model);
    let mut best: Option<(f64, CnnModel)> = None;
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut batch_rows = Vec::with_capacity(config.batch_size);
    let mut batch_targets = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs_cap {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            batch_rows.clear();
            batch_targets.clear();
            batch_rows.extend(chunk.iter().map(|&i| train_rows[i].clone()));
            batch_targets.extend(chunk.iter().map(|&i| train_targets[i]));
            let masks: Option<Vec<Vec<f64>>> = current
                .spec
                .use_dropout
                .then(|| chunk.iter().map(|_| current.dropout_mask(&mut rng).unwrap()).collect());
            let (loss, grads) = current.backward_with_masks(&batch_rows, &batch_targets, masks.as_deref())?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch: epoch + 1, loss });
            }
            adam_step(&mut current.params, &mut adam, &grads, current.spec.learning_rate)
                .map_err(|_| Error::Diverged { epoch: epoch + 1, loss: f64::NAN })?;
            epoch_loss += loss;
            batches += 1;
        }
        let train_loss = epoch_loss / batches as f64;
        let val_loss = current.mse(val_rows, val_targets)?;
        if !train_loss.is_finite() || !val_loss.is_finite() || !current.params.all_finite() {
            return Err(Error::Diverged { epoch: epoch + 1, loss: train_loss });
        }
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
        report.epochs_run = epoch + 1;
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, current.clone()));
            report.best_epoch = Some(epoch);
        }
    }
    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, report))
}
