//! The multi-scale convolutional network: assembly, training with class
//! weighting, and segment/clip-level prediction.
//!
//! # Architecture
//!
//! Three parallel branches over the `channels x freq x frames` input, all
//! same-padded so spatial dimensions never change:
//!
//! 1. reduce 1x1 conv -> ReLU -> 3x3 conv -> ReLU
//! 2. reduce 1x1 conv -> ReLU -> 5x5 conv -> ReLU
//! 3. 3x3 max-pool (stride 1) -> 1x1 conv -> ReLU
//!
//! plus an optional plain 1x1 fourth branch behind a config switch. Branch
//! outputs concatenate along channels, flatten, and feed a fully-connected
//! chain (defaults 124 -> 64 -> 1) ending in one sigmoid unit; the second
//! class probability is `1 - P1` by definition.
//!
//! # Memory strategy
//!
//! The first dense layer dominates the parameter count (flatten length times
//! 124), so its weight lives transposed in a [`StreamingDense`]: forward and
//! input-gradient passes stream it once, and the weight gradient is consumed
//! tile by tile — during training each tile goes straight into the Adam
//! update, so no full-size gradient buffer ever exists. Everything else uses
//! ordinary [`Param`] tensors.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::roc_auc;
use crate::ieeg::Split;
use crate::nn::{
    relu_backward, relu_inplace, sigmoid, weighted_bce_logits, write_param_snapshot, AdamConfig,
    AdamState, Conv2d, Conv2dScratch, Dense, MaxPool3x3, NamedTensor, NamedTensorRef,
    StreamingDense,
};
use crate::seeding::substream;
use crate::signal::PipelineConfig;
use crate::spectro::{read_tensor_blob, CacheIndex, Standardizer, StftConfig};

/// Shape of one model input tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputShape {
    pub n_channels: usize,
    pub n_freq: usize,
    pub n_frames: usize,
}

impl InputShape {
    pub fn volume(&self) -> usize {
        self.n_channels * self.n_freq * self.n_frames
    }
}

/// Network hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchitectureConfig {
    /// Output channels of every convolution.
    pub conv_units: usize,
    /// Fully-connected layer widths between flatten and the sigmoid unit.
    pub fc_sizes: Vec<usize>,
    /// Adds a plain 1x1 convolution as a fourth branch (off by default; the
    /// three-branch form is the canonical one).
    pub include_identity_branch: bool,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        ArchitectureConfig {
            conv_units: 64,
            fc_sizes: vec![124, 64],
            include_identity_branch: false,
        }
    }
}

impl ArchitectureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.conv_units == 0 {
            return Err(Error::InvalidConfig("conv_units must be >= 1".into()));
        }
        if self.fc_sizes.is_empty() || self.fc_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig(
                "fc_sizes must be a non-empty list of positive sizes".into(),
            ));
        }
        Ok(())
    }

    pub fn n_branches(&self) -> usize {
        3 + usize::from(self.include_identity_branch)
    }

    /// Channel count after concatenation.
    pub fn concat_channels(&self) -> usize {
        self.n_branches() * self.conv_units
    }
}

/// How segment probabilities combine into one clip probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationRule {
    Max,
    Mean,
}

impl std::str::FromStr for AggregationRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(AggregationRule::Max),
            "mean" => Ok(AggregationRule::Mean),
            other => Err(Error::InvalidConfig(format!(
                "aggregation rule must be 'max' or 'mean', got '{other}'"
            ))),
        }
    }
}

/// Combines segment probabilities under `rule`.
pub fn aggregate(probs: &[f64], rule: AggregationRule) -> f64 {
    match rule {
        AggregationRule::Max => probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        AggregationRule::Mean => probs.iter().sum::<f64>() / probs.len() as f64,
    }
}

/// Per-clip model output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClipPrediction {
    pub clip_id: String,
    pub segment_probs: Vec<f64>,
    pub clip_prob: f64,
    pub rule: AggregationRule,
}

/// Rows the first dense layer hands to its gradient consumer per tile.
const FC1_TILE_ROWS: usize = 8192;

/// The assembled network.
pub struct MultiScaleNet {
    pub input_shape: InputShape,
    pub arch: ArchitectureConfig,
    b1_reduce: Conv2d,
    b1_conv: Conv2d,
    b2_reduce: Conv2d,
    b2_conv: Conv2d,
    b3_conv: Conv2d,
    b4_conv: Option<Conv2d>,
    fc1: StreamingDense,
    fc_hidden: Vec<Dense>,
    fc_out: Dense,
}

impl MultiScaleNet {
    /// Builds the network with deterministic per-parameter initialization:
    /// every layer draws from its own named substream of `seed`.
    pub fn new(input_shape: InputShape, arch: &ArchitectureConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        if input_shape.volume() == 0 {
            return Err(Error::InvalidConfig("input shape has zero volume".into()));
        }
        let ic = input_shape.n_channels;
        let u = arch.conv_units;
        let stream = |name: &str| substream(seed, &format!("init.{name}"));

        let b1_reduce = Conv2d::new("b1.reduce", ic, u, 1, 1, &mut stream("b1.reduce"));
        let b1_conv = Conv2d::new("b1.conv", u, u, 3, 3, &mut stream("b1.conv"));
        let b2_reduce = Conv2d::new("b2.reduce", ic, u, 1, 1, &mut stream("b2.reduce"));
        let b2_conv = Conv2d::new("b2.conv", u, u, 5, 5, &mut stream("b2.conv"));
        let b3_conv = Conv2d::new("b3.conv", ic, u, 1, 1, &mut stream("b3.conv"));
        let b4_conv = arch
            .include_identity_branch
            .then(|| Conv2d::new("b4.conv", ic, u, 1, 1, &mut stream("b4.conv")));

        let flatten = arch.concat_channels() * input_shape.n_freq * input_shape.n_frames;
        let fc1 = StreamingDense::new("fc1", flatten, arch.fc_sizes[0], &mut stream("fc1"));
        let mut fc_hidden = Vec::new();
        for w in arch.fc_sizes.windows(2) {
            let name = format!("fc{}", fc_hidden.len() + 2);
            fc_hidden.push(Dense::new(&name, w[0], w[1], &mut stream(&name)));
        }
        let last = *arch.fc_sizes.last().expect("validated non-empty");
        let fc_out = Dense::new("out", last, 1, &mut stream("out"));

        Ok(MultiScaleNet {
            input_shape,
            arch: arch.clone(),
            b1_reduce,
            b1_conv,
            b2_reduce,
            b2_conv,
            b3_conv,
            b4_conv,
            fc1,
            fc_hidden,
            fc_out,
        })
    }

    fn spatial(&self) -> (usize, usize) {
        (self.input_shape.n_freq, self.input_shape.n_frames)
    }

    pub fn flatten_len(&self) -> usize {
        self.fc1.in_features
    }

    fn convs(&self) -> Vec<&Conv2d> {
        let mut v = vec![
            &self.b1_reduce,
            &self.b1_conv,
            &self.b2_reduce,
            &self.b2_conv,
            &self.b3_conv,
        ];
        if let Some(b4) = &self.b4_conv {
            v.push(b4);
        }
        v
    }

    fn convs_mut(&mut self) -> Vec<&mut Conv2d> {
        let mut v = vec![
            &mut self.b1_reduce,
            &mut self.b1_conv,
            &mut self.b2_reduce,
            &mut self.b2_conv,
            &mut self.b3_conv,
        ];
        if let Some(b4) = &mut self.b4_conv {
            v.push(b4);
        }
        v
    }

    /// All ordinary parameters (everything except the streamed fc1 weight),
    /// in the fixed registration/serialization order.
    fn params_mut(&mut self) -> Vec<&mut crate::nn::Param> {
        let mut v = Vec::new();
        for c in [
            &mut self.b1_reduce,
            &mut self.b1_conv,
            &mut self.b2_reduce,
            &mut self.b2_conv,
            &mut self.b3_conv,
        ] {
            v.push(&mut c.weight);
            v.push(&mut c.bias);
        }
        if let Some(b4) = &mut self.b4_conv {
            v.push(&mut b4.weight);
            v.push(&mut b4.bias);
        }
        v.push(&mut self.fc1.bias);
        for d in &mut self.fc_hidden {
            v.push(&mut d.weight);
            v.push(&mut d.bias);
        }
        v.push(&mut self.fc_out.weight);
        v.push(&mut self.fc_out.bias);
        v
    }

    /// Clears every gradient accumulator.
    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Named views of every tensor, for serialization. The streamed fc1
    /// weight appears as `fc1.weight_t` with shape `[in, out]`.
    pub fn named_views(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut v = Vec::new();
        for c in self.convs() {
            v.push((
                c.weight.name.clone(),
                c.weight.value.shape().to_vec(),
                c.weight.value.data(),
            ));
            v.push((
                c.bias.name.clone(),
                c.bias.value.shape().to_vec(),
                c.bias.value.data(),
            ));
        }
        v.push((
            "fc1.weight_t".to_string(),
            vec![self.fc1.in_features, self.fc1.out_features],
            self.fc1.weight_t.as_slice(),
        ));
        v.push((
            self.fc1.bias.name.clone(),
            self.fc1.bias.value.shape().to_vec(),
            self.fc1.bias.value.data(),
        ));
        for d in &self.fc_hidden {
            v.push((
                d.weight.name.clone(),
                d.weight.value.shape().to_vec(),
                d.weight.value.data(),
            ));
            v.push((
                d.bias.name.clone(),
                d.bias.value.shape().to_vec(),
                d.bias.value.data(),
            ));
        }
        v.push((
            self.fc_out.weight.name.clone(),
            self.fc_out.weight.value.shape().to_vec(),
            self.fc_out.weight.value.data(),
        ));
        v.push((
            self.fc_out.bias.name.clone(),
            self.fc_out.bias.value.shape().to_vec(),
            self.fc_out.bias.value.data(),
        ));
        v
    }

    /// Installs tensors by name, consuming `tensors`. Every parameter must be
    /// present with the exact shape; unknown names are rejected.
    pub fn load_named(&mut self, tensors: Vec<NamedTensor>, origin: &Path) -> Result<()> {
        let mut by_name: HashMap<String, NamedTensor> =
            tensors.into_iter().map(|t| (t.name.clone(), t)).collect();
        let malformed = |reason: String| Error::MalformedModel {
            path: origin.to_path_buf(),
            reason,
        };

        {
            let expect: Vec<(String, Vec<usize>)> = self
                .named_views()
                .into_iter()
                .map(|(n, s, _)| (n, s))
                .collect();
            for (name, shape) in &expect {
                let t = by_name
                    .get(name)
                    .ok_or_else(|| malformed(format!("missing tensor '{name}'")))?;
                if &t.shape != shape || t.data.len() != t.volume() {
                    return Err(malformed(format!(
                        "tensor '{name}' has shape {:?} with {} values, expected {:?}",
                        t.shape,
                        t.data.len(),
                        shape
                    )));
                }
            }
            if by_name.len() != expect.len() {
                let expected: std::collections::HashSet<&String> =
                    expect.iter().map(|(n, _)| n).collect();
                let extra: Vec<&String> = by_name
                    .keys()
                    .filter(|k| !expected.contains(k))
                    .collect();
                return Err(malformed(format!("unexpected tensors {extra:?}")));
            }
        }

        let mut take = |name: &str| by_name.remove(name).expect("presence checked").data;
        for c in [
            &mut self.b1_reduce,
            &mut self.b1_conv,
            &mut self.b2_reduce,
            &mut self.b2_conv,
            &mut self.b3_conv,
        ] {
            c.weight.value.data_mut().copy_from_slice(&take(&c.weight.name.clone()));
            c.bias.value.data_mut().copy_from_slice(&take(&c.bias.name.clone()));
        }
        if let Some(b4) = &mut self.b4_conv {
            b4.weight.value.data_mut().copy_from_slice(&take("b4.conv.weight"));
            b4.bias.value.data_mut().copy_from_slice(&take("b4.conv.bias"));
        }
        self.fc1.weight_t = take("fc1.weight_t");
        self.fc1.bias.value.data_mut().copy_from_slice(&take("fc1.bias"));
        for d in &mut self.fc_hidden {
            d.weight.value.data_mut().copy_from_slice(&take(&d.weight.name.clone()));
            d.bias.value.data_mut().copy_from_slice(&take(&d.bias.name.clone()));
        }
        self.fc_out.weight.value.data_mut().copy_from_slice(&take("out.weight"));
        self.fc_out.bias.value.data_mut().copy_from_slice(&take("out.bias"));
        Ok(())
    }

    /// Every parameter (including the streamed fc1 weight) concatenated in
    /// serialization order; mostly useful to tests and checksums.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for (_, _, data) in self.named_views() {
            flat.extend_from_slice(data);
        }
        flat
    }

    /// The accumulated gradient in [`flatten_params`] order. The fc1 weight
    /// gradient is never stored on the layer (it is streamed to the
    /// `backward_batch` consumer in tiles), so the caller supplies the
    /// buffer it collected, laid out like `fc1.weight_t`.
    pub fn flatten_grads(&self, fc1_weight_grad: &[f64]) -> Result<Vec<f64>> {
        if fc1_weight_grad.len() != self.fc1.weight_t.len() {
            return Err(Error::ShapeMismatch(format!(
                "fc1 weight gradient has {} values, expected {}",
                fc1_weight_grad.len(),
                self.fc1.weight_t.len()
            )));
        }
        let mut flat = Vec::new();
        for c in self.convs() {
            flat.extend_from_slice(c.weight.grad.data());
            flat.extend_from_slice(c.bias.grad.data());
        }
        flat.extend_from_slice(fc1_weight_grad);
        flat.extend_from_slice(self.fc1.bias.grad.data());
        for d in &self.fc_hidden {
            flat.extend_from_slice(d.weight.grad.data());
            flat.extend_from_slice(d.bias.grad.data());
        }
        flat.extend_from_slice(self.fc_out.weight.grad.data());
        flat.extend_from_slice(self.fc_out.bias.grad.data());
        Ok(flat)
    }

    /// Inverse of [`flatten_params`].
    pub fn load_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let total: usize = self.named_views().iter().map(|(_, _, d)| d.len()).sum();
        if flat.len() != total {
            return Err(Error::ShapeMismatch(format!(
                "flat parameter vector has {} values, model needs {total}",
                flat.len()
            )));
        }
        let mut at = 0;
        macro_rules! copy_into {
            ($dst:expr) => {{
                let n = $dst.len();
                $dst.copy_from_slice(&flat[at..at + n]);
                at += n;
            }};
        }
        for c in self.convs_mut() {
            copy_into!(c.weight.value.data_mut());
            copy_into!(c.bias.value.data_mut());
        }
        copy_into!(self.fc1.weight_t.as_mut_slice());
        copy_into!(self.fc1.bias.value.data_mut());
        for d in &mut self.fc_hidden {
            copy_into!(d.weight.value.data_mut());
            copy_into!(d.bias.value.data_mut());
        }
        copy_into!(self.fc_out.weight.value.data_mut());
        copy_into!(self.fc_out.bias.value.data_mut());
        debug_assert_eq!(at, flat.len());
        Ok(())
    }

    /// Forward pass over a `[batch, volume]` buffer; returns logits.
    /// Intermediate activations stay in `st` for a following backward pass.
    pub fn forward_batch(&self, x: &[f64], batch: usize, st: &mut BatchState) -> Result<Vec<f64>> {
        let vol = self.input_shape.volume();
        if x.len() != batch * vol || batch == 0 {
            return Err(Error::ShapeMismatch(format!(
                "batch input has {} values, expected {batch} x {vol}",
                x.len()
            )));
        }
        let (h, w) = self.spatial();
        let hw = h * w;
        let u = self.arch.conv_units;
        let seg = u * hw;
        let flat_len = self.flatten_len();
        st.ensure(batch, seg, self.input_shape.n_channels * hw, flat_len);

        for i in 0..batch {
            let xi = &x[i * vol..(i + 1) * vol];
            let row_base = i * flat_len;

            // Branch 1: 1x1 reduce -> ReLU -> 3x3 -> (ReLU later, row-wise).
            self.b1_reduce
                .forward(xi, h, w, &mut st.scratch, &mut st.tmp);
            relu_inplace(&mut st.tmp);
            st.y1[i * seg..(i + 1) * seg].copy_from_slice(&st.tmp);
            self.b1_conv
                .forward(&st.y1[i * seg..(i + 1) * seg], h, w, &mut st.scratch, &mut st.tmp);
            st.flat[row_base..row_base + seg].copy_from_slice(&st.tmp);

            // Branch 2: 1x1 reduce -> ReLU -> 5x5.
            self.b2_reduce
                .forward(xi, h, w, &mut st.scratch, &mut st.tmp);
            relu_inplace(&mut st.tmp);
            st.y3[i * seg..(i + 1) * seg].copy_from_slice(&st.tmp);
            self.b2_conv
                .forward(&st.y3[i * seg..(i + 1) * seg], h, w, &mut st.scratch, &mut st.tmp);
            st.flat[row_base + seg..row_base + 2 * seg].copy_from_slice(&st.tmp);

            // Branch 3: 3x3 max-pool (stride 1) -> 1x1.
            MaxPool3x3::forward(
                xi,
                self.input_shape.n_channels,
                h,
                w,
                &mut st.pool_y,
                &mut st.pool_arg,
            );
            let pview = i * self.input_shape.n_channels * hw;
            st.pooled[pview..pview + self.input_shape.n_channels * hw]
                .copy_from_slice(&st.pool_y);
            self.b3_conv.forward(
                &st.pooled[pview..pview + self.input_shape.n_channels * hw],
                h,
                w,
                &mut st.scratch,
                &mut st.tmp,
            );
            st.flat[row_base + 2 * seg..row_base + 3 * seg].copy_from_slice(&st.tmp);

            // Optional fourth branch: plain 1x1.
            if let Some(b4) = &self.b4_conv {
                b4.forward(xi, h, w, &mut st.scratch, &mut st.tmp);
                st.flat[row_base + 3 * seg..row_base + 4 * seg].copy_from_slice(&st.tmp);
            }

            relu_inplace(&mut st.flat[row_base..row_base + flat_len]);
        }

        // Fully-connected chain on the whole batch.
        st.h.clear();
        let mut cur = self.fc1.forward_batch(&st.flat[..batch * flat_len], batch);
        relu_inplace(&mut cur);
        st.h.push(cur);
        for layer in &self.fc_hidden {
            let mut nxt = layer.forward_batch(st.h.last().expect("pushed"), batch);
            relu_inplace(&mut nxt);
            st.h.push(nxt);
        }
        let logits = self
            .fc_out
            .forward_batch(st.h.last().expect("non-empty"), batch);
        Ok(logits)
    }

    /// Forward pass returning probabilities.
    pub fn predict_batch(&self, x: &[f64], batch: usize, st: &mut BatchState) -> Result<Vec<f64>> {
        Ok(self
            .forward_batch(x, batch, st)?
            .into_iter()
            .map(sigmoid)
            .collect())
    }

    /// Backward pass for the batch most recently run through
    /// [`forward_batch`] with the same `st`. Parameter gradients accumulate
    /// into `Param::grad`; the fc1 weight gradient is handed to
    /// `fc1_consume` tile by tile (row offset, mutable weight rows, gradient
    /// rows) instead of being materialized.
    pub fn backward_batch<F>(
        &mut self,
        x: &[f64],
        batch: usize,
        st: &mut BatchState,
        d_logits: &[f64],
        fc1_consume: F,
    ) where
        F: FnMut(usize, &mut [f64], &[f64]),
    {
        debug_assert_eq!(d_logits.len(), batch);
        let (h, w) = self.spatial();
        let hw = h * w;
        let u = self.arch.conv_units;
        let seg = u * hw;
        let vol = self.input_shape.volume();
        let flat_len = self.flatten_len();
        let n_h = st.h.len();

        // Dense chain, batched.
        let mut d_cur = vec![0.0; batch * self.arch.fc_sizes[n_h - 1]];
        self.fc_out
            .backward_batch(&st.h[n_h - 1], d_logits, batch, Some(&mut d_cur));
        relu_backward(&st.h[n_h - 1], &mut d_cur);
        for j in (0..self.fc_hidden.len()).rev() {
            let mut d_prev = vec![0.0; batch * self.arch.fc_sizes[j]];
            self.fc_hidden[j].backward_batch(&st.h[j], &d_cur, batch, Some(&mut d_prev));
            relu_backward(&st.h[j], &mut d_prev);
            d_cur = d_prev;
        }
        self.fc1.backward_batch(
            &st.flat[..batch * flat_len],
            &d_cur,
            batch,
            Some(&mut st.d_flat[..batch * flat_len]),
            FC1_TILE_ROWS,
            fc1_consume,
        );
        relu_backward(
            &st.flat[..batch * flat_len],
            &mut st.d_flat[..batch * flat_len],
        );

        // Convolution branches, sample by sample.
        for i in 0..batch {
            let xi = &x[i * vol..(i + 1) * vol];
            let row = i * flat_len;
            let y1 = &st.y1[i * seg..(i + 1) * seg];
            let y3 = &st.y3[i * seg..(i + 1) * seg];
            let pooled =
                &st.pooled[i * self.input_shape.n_channels * hw..][..self.input_shape.n_channels * hw];

            // Branch 1.
            st.d_mid.resize(seg, 0.0);
            self.b1_conv.backward(
                y1,
                h,
                w,
                &st.d_flat[row..row + seg],
                &mut st.scratch,
                Some(&mut st.d_mid),
            );
            relu_backward(y1, &mut st.d_mid);
            self.b1_reduce
                .backward(xi, h, w, &st.d_mid, &mut st.scratch, None);

            // Branch 2.
            self.b2_conv.backward(
                y3,
                h,
                w,
                &st.d_flat[row + seg..row + 2 * seg],
                &mut st.scratch,
                Some(&mut st.d_mid),
            );
            relu_backward(y3, &mut st.d_mid);
            self.b2_reduce
                .backward(xi, h, w, &st.d_mid, &mut st.scratch, None);

            // Branch 3: the pool has no parameters and nothing upstream
            // needs an input gradient, so backprop stops at the 1x1 conv.
            self.b3_conv.backward(
                pooled,
                h,
                w,
                &st.d_flat[row + 2 * seg..row + 3 * seg],
                &mut st.scratch,
                None,
            );

            if let Some(b4) = &mut self.b4_conv {
                b4.backward(
                    xi,
                    h,
                    w,
                    &st.d_flat[row + 3 * seg..row + 4 * seg],
                    &mut st.scratch,
                    None,
                );
            }
        }
    }
}

/// Reusable per-batch buffers and stashed activations.
#[derive(Default)]
pub struct BatchState {
    scratch: Conv2dScratch,
    tmp: Vec<f64>,
    pool_y: Vec<f64>,
    pool_arg: Vec<u32>,
    /// Post-ReLU outputs of the two reduce convolutions, per sample.
    y1: Vec<f64>,
    y3: Vec<f64>,
    /// Pooled input of branch 3, per sample.
    pooled: Vec<f64>,
    /// Concatenated post-ReLU branch outputs = flattened dense input.
    flat: Vec<f64>,
    /// Gradient of `flat`.
    d_flat: Vec<f64>,
    /// Per-sample mid-branch gradient buffer.
    d_mid: Vec<f64>,
    /// Post-ReLU dense activations, one buffer per fc layer.
    h: Vec<Vec<f64>>,
}

impl BatchState {
    pub fn new() -> Self {
        Self::default()
    }

    fn ensure(&mut self, batch: usize, seg: usize, pooled_len: usize, flat_len: usize) {
        self.y1.resize(batch * seg, 0.0);
        self.y3.resize(batch * seg, 0.0);
        self.pooled.resize(batch * pooled_len, 0.0);
        self.flat.resize(batch * flat_len, 0.0);
        self.d_flat.resize(batch * flat_len, 0.0);
    }
}

// --- segment stores ---

/// Source of standardized training samples. `load_into` fills a buffer of
/// `shape().volume()` f64 values, already standardized.
pub trait SegmentStore {
    fn shape(&self) -> InputShape;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn clip_id(&self, i: usize) -> &str;
    fn is_preictal(&self, i: usize) -> bool;
    fn load_into(&mut self, i: usize, out: &mut [f64]) -> Result<()>;
}

/// In-memory store, mainly for tests and small runs.
pub struct MemorySegmentStore {
    shape: InputShape,
    rows: Vec<(String, bool, Vec<f64>)>,
}

impl MemorySegmentStore {
    pub fn new(shape: InputShape) -> Self {
        MemorySegmentStore {
            shape,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, clip_id: impl Into<String>, preictal: bool, values: Vec<f64>) -> Result<()> {
        if values.len() != self.shape.volume() {
            return Err(Error::ShapeMismatch(format!(
                "segment has {} values, store shape needs {}",
                values.len(),
                self.shape.volume()
            )));
        }
        self.rows.push((clip_id.into(), preictal, values));
        Ok(())
    }
}

impl SegmentStore for MemorySegmentStore {
    fn shape(&self) -> InputShape {
        self.shape
    }
    fn len(&self) -> usize {
        self.rows.len()
    }
    fn clip_id(&self, i: usize) -> &str {
        &self.rows[i].0
    }
    fn is_preictal(&self, i: usize) -> bool {
        self.rows[i].1
    }
    fn load_into(&mut self, i: usize, out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.rows[i].2);
        Ok(())
    }
}

/// Store backed by a preprocess cache directory: blobs are read on demand
/// and standardized with the cache's fitted standardizer, so only one batch
/// of samples is ever resident.
pub struct DiskSegmentStore {
    dir: std::path::PathBuf,
    shape: InputShape,
    standardizer: Standardizer,
    entries: Vec<crate::spectro::CacheEntry>,
}

impl DiskSegmentStore {
    pub fn from_cache(dir: &Path, index: &CacheIndex, split: Split) -> Result<Self> {
        let entries: Vec<_> = index.entries_in(split).cloned().collect();
        if entries.is_empty() {
            return Err(Error::EmptyInput(format!(
                "cache at {} has no '{split}' segments",
                dir.display()
            )));
        }
        let shape = InputShape {
            n_channels: entries[0].n_channels as usize,
            n_freq: entries[0].n_freq as usize,
            n_frames: entries[0].n_frames as usize,
        };
        if entries.iter().any(|e| {
            (e.n_channels as usize, e.n_freq as usize, e.n_frames as usize)
                != (shape.n_channels, shape.n_freq, shape.n_frames)
        }) {
            return Err(Error::MalformedCache {
                path: dir.to_path_buf(),
                reason: "segments disagree on tensor shape".into(),
            });
        }
        if index.standardizer.len() != shape.volume() {
            return Err(Error::MalformedCache {
                path: dir.to_path_buf(),
                reason: format!(
                    "standardizer covers {} elements, tensors have {}",
                    index.standardizer.len(),
                    shape.volume()
                ),
            });
        }
        Ok(DiskSegmentStore {
            dir: dir.to_path_buf(),
            shape,
            standardizer: index.standardizer.clone(),
            entries,
        })
    }
}

impl SegmentStore for DiskSegmentStore {
    fn shape(&self) -> InputShape {
        self.shape
    }
    fn len(&self) -> usize {
        self.entries.len()
    }
    fn clip_id(&self, i: usize) -> &str {
        &self.entries[i].clip_id
    }
    fn is_preictal(&self, i: usize) -> bool {
        self.entries[i].label == crate::ieeg::Label::Preictal
    }
    fn load_into(&mut self, i: usize, out: &mut [f64]) -> Result<()> {
        let entry = &self.entries[i];
        let path = self.dir.join(&entry.file);
        let (dims, data) = read_tensor_blob(&path)?;
        if dims != [entry.n_channels, entry.n_freq, entry.n_frames] || data.len() != out.len() {
            return Err(Error::MalformedCache {
                path,
                reason: format!("blob dims {dims:?} disagree with index entry"),
            });
        }
        for (o, v) in out.iter_mut().zip(&data) {
            *o = *v as f64;
        }
        self.standardizer
            .apply_slice((self.shape.n_channels, self.shape.n_freq, self.shape.n_frames), out)
    }
}

// --- training ---

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Loss weight of the preictal class; `None` computes
    /// interictal count / preictal count over the samples given to train.
    pub class_weight_pos: Option<f64>,
    pub batch_size: usize,
    pub epochs: usize,
    /// Fraction of clips per class held out for validation, in [0, 0.5].
    pub validation_fraction: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            class_weight_pos: None,
            batch_size: 32,
            epochs: 30,
            validation_fraction: 0.1,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let Some(w) = self.class_weight_pos {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "class_weight_pos must be positive, got {w}"
                )));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(0.0..=0.5).contains(&self.validation_fraction) {
            return Err(Error::InvalidConfig(format!(
                "validation_fraction must be in [0, 0.5], got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// Default preictal class weight: interictal count over preictal count.
pub fn default_class_weight(n_interictal: usize, n_preictal: usize) -> f64 {
    n_interictal as f64 / n_preictal as f64
}

/// One history row.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    /// NaN when no usable validation split exists.
    pub val_auc: f64,
}

/// Everything `train` returns.
pub struct TrainOutcome {
    pub net: MultiScaleNet,
    pub history: Vec<EpochStats>,
    /// Epoch whose parameters were returned; `None` when no validation AUC
    /// was available (the final epoch's parameters are returned then).
    pub best_epoch: Option<usize>,
    /// The positive-class weight actually used.
    pub class_weight_pos: f64,
}

impl std::fmt::Debug for TrainOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrainOutcome")
            .field("epochs", &self.history.len())
            .field("best_epoch", &self.best_epoch)
            .field("class_weight_pos", &self.class_weight_pos)
            .finish_non_exhaustive()
    }
}

/// Segment indices split at clip granularity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Holds out the **last** `fraction` of clips per class, in order of first
/// appearance — never random, and never splitting one clip's segments across
/// the two sides. With a positive fraction at least one clip per class is
/// held out, except that a class with a single clip keeps it in training.
pub fn plan_validation_split<S: SegmentStore + ?Sized>(store: &S, fraction: f64) -> Result<SplitPlan> {
    // Group segment indices by clip, keeping first-appearance order.
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (bool, Vec<usize>)> = HashMap::new();
    for i in 0..store.len() {
        let id = store.clip_id(i).to_string();
        let label = store.is_preictal(i);
        match groups.get_mut(&id) {
            Some((l, idxs)) => {
                if *l != label {
                    return Err(Error::InvalidConfig(format!(
                        "clip '{id}' appears with both labels"
                    )));
                }
                idxs.push(i);
            }
            None => {
                order.push(id.clone());
                groups.insert(id, (label, vec![i]));
            }
        }
    }

    let mut plan = SplitPlan {
        train: Vec::new(),
        validation: Vec::new(),
    };
    for class in [false, true] {
        let clips: Vec<&String> = order
            .iter()
            .filter(|id| groups[*id].0 == class)
            .collect();
        let n = clips.len();
        let n_val = if fraction > 0.0 && n > 1 {
            ((fraction * n as f64).floor() as usize).clamp(1, n - 1)
        } else {
            0
        };
        for (k, id) in clips.iter().enumerate() {
            let dest = if k >= n - n_val {
                &mut plan.validation
            } else {
                &mut plan.train
            };
            dest.extend_from_slice(&groups[*id].1);
        }
    }
    plan.train.sort_unstable();
    plan.validation.sort_unstable();
    Ok(plan)
}

/// Runs probabilities for the given store indices in batches.
fn probs_for_indices<S: SegmentStore + ?Sized>(
    net: &MultiScaleNet,
    store: &mut S,
    indices: &[usize],
    batch_size: usize,
    st: &mut BatchState,
) -> Result<Vec<f64>> {
    let vol = net.input_shape.volume();
    let mut probs = Vec::with_capacity(indices.len());
    let mut xbuf = vec![0.0f64; batch_size * vol];
    for chunk in indices.chunks(batch_size) {
        for (j, &i) in chunk.iter().enumerate() {
            store.load_into(i, &mut xbuf[j * vol..(j + 1) * vol])?;
        }
        probs.extend(net.predict_batch(&xbuf[..chunk.len() * vol], chunk.len(), st)?);
    }
    Ok(probs)
}

/// Trains a fresh network on `store` and returns the parameters of the epoch
/// with the best validation AUC (the final epoch when no validation split is
/// available). Deterministic given (store contents, configs, seed).
///
/// `workdir` holds the best-epoch parameter snapshot during the run.
pub fn train<S: SegmentStore + ?Sized>(
    store: &mut S,
    arch: &ArchitectureConfig,
    cfg: &TrainConfig,
    workdir: &Path,
) -> Result<TrainOutcome> {
    arch.validate()?;
    cfg.validate()?;
    if store.len() == 0 {
        return Err(Error::EmptyInput("training store has no segments".into()));
    }
    let n_pos = (0..store.len()).filter(|&i| store.is_preictal(i)).count();
    let n_neg = store.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass(format!(
            "training needs both classes, got {n_pos} preictal / {n_neg} interictal segments"
        )));
    }
    let w_pos = cfg
        .class_weight_pos
        .unwrap_or_else(|| default_class_weight(n_neg, n_pos));

    let plan = plan_validation_split(store, cfg.validation_fraction)?;
    let train_idx = plan.train;
    let val_idx = plan.validation;
    {
        let t_pos = train_idx.iter().filter(|&&i| store.is_preictal(i)).count();
        if t_pos == 0 || t_pos == train_idx.len() {
            return Err(Error::SingleClass(
                "training split lost one class to the validation holdout".into(),
            ));
        }
    }
    // Validation AUC needs both classes; otherwise it is skipped (NaN).
    let val_usable = {
        let v_pos = val_idx.iter().filter(|&&i| store.is_preictal(i)).count();
        v_pos > 0 && v_pos < val_idx.len()
    };

    let mut net = MultiScaleNet::new(store.shape(), arch, cfg.rng_seed)?;
    let mut st = BatchState::new();
    let mut history = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            net,
            history,
            best_epoch: None,
            class_weight_pos: w_pos,
        });
    }

    let mut opt = AdamState::new(AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    });
    let fc1_slot = opt.register("fc1.weight_t", net.fc1.weight_t.len());
    let other_slots: Vec<usize> = net
        .params_mut()
        .iter()
        .map(|p| (p.name.clone(), p.value.len()))
        .collect::<Vec<_>>()
        .into_iter()
        .map(|(name, len)| opt.register(&name, len))
        .collect();

    let vol = net.input_shape.volume();
    let mut xbuf = vec![0.0f64; cfg.batch_size * vol];
    let mut best_auc = f64::NEG_INFINITY;
    let mut best_epoch = None;
    let snapshot_path = workdir.join("best-epoch.params");
    std::fs::create_dir_all(workdir).map_err(|e| Error::io(workdir, e))?;

    for epoch in 1..=cfg.epochs {
        let mut order = train_idx.clone();
        shuffle(&mut order, cfg.rng_seed, &format!("train.shuffle.epoch{epoch}"));

        let mut loss_sum = 0.0;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let b = chunk.len();
            let mut targets = Vec::with_capacity(b);
            for (j, &i) in chunk.iter().enumerate() {
                store.load_into(i, &mut xbuf[j * vol..(j + 1) * vol])?;
                targets.push(store.is_preictal(i));
            }
            let logits = net.forward_batch(&xbuf[..b * vol], b, &mut st)?;

            let mut d_logits = Vec::with_capacity(b);
            for (z, &y) in logits.iter().zip(&targets) {
                let terms = weighted_bce_logits(*z, y, w_pos);
                if !terms.loss.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "training loss at epoch {epoch}, batch {bi}"
                    )));
                }
                loss_sum += terms.loss;
                d_logits.push(terms.dloss / b as f64);
            }

            net.zero_grads();
            opt.begin_step();
            let fc1_out = net.fc1.out_features;
            let mut fc1_err: Option<Error> = None;
            net.backward_batch(&xbuf[..b * vol], b, &mut st, &d_logits, |row0, wrows, grows| {
                if fc1_err.is_none() {
                    if let Err(e) = opt.update(fc1_slot, row0 * fc1_out, wrows, grows) {
                        fc1_err = Some(e);
                    }
                }
            });
            if let Some(e) = fc1_err {
                return Err(e);
            }
            for (p, &slot) in net.params_mut().into_iter().zip(&other_slots) {
                opt.update(slot, 0, p.value.data_mut(), p.grad.data())?;
            }
        }
        let train_loss = loss_sum / order.len() as f64;

        let val_auc = if val_usable {
            let probs = probs_for_indices(&net, store, &val_idx, cfg.batch_size, &mut st)?;
            let preds: Vec<(f64, bool)> = probs
                .into_iter()
                .zip(val_idx.iter().map(|&i| store.is_preictal(i)))
                .collect();
            roc_auc(&preds)?.0
        } else {
            f64::NAN
        };
        history.push(EpochStats {
            epoch,
            train_loss,
            val_auc,
        });

        if val_auc.is_finite() && val_auc > best_auc {
            best_auc = val_auc;
            best_epoch = Some(epoch);
            let views = net.named_views();
            let refs: Vec<(&str, &[usize], &[f64])> = views
                .iter()
                .map(|(n, s, d)| (n.as_str(), s.as_slice(), *d))
                .collect();
            write_param_snapshot(&snapshot_path, &refs)?;
        }
    }

    if best_epoch.is_some() {
        let tensors = crate::nn::read_param_snapshot(&snapshot_path)?;
        net.load_named(tensors, &snapshot_path)?;
    }
    Ok(TrainOutcome {
        net,
        history,
        best_epoch,
        class_weight_pos: w_pos,
    })
}

/// Fisher–Yates with a labeled substream.
fn shuffle(indices: &mut [usize], seed: u64, label: &str) {
    use rand::Rng;
    let mut rng = substream(seed, label);
    for i in (1..indices.len()).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
}

/// Runs one clip's standardized segment tensors through the network and
/// aggregates. `segments` must contain exactly `expected` tensors in time
/// order.
pub fn predict_clip(
    net: &MultiScaleNet,
    clip_id: &str,
    segments: &[Vec<f64>],
    expected: usize,
    rule: AggregationRule,
    st: &mut BatchState,
) -> Result<ClipPrediction> {
    if segments.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "clip '{clip_id}' has {} segments, expected {expected}",
            segments.len()
        )));
    }
    let vol = net.input_shape.volume();
    let mut xbuf = vec![0.0f64; segments.len() * vol];
    for (j, s) in segments.iter().enumerate() {
        if s.len() != vol {
            return Err(Error::ShapeMismatch(format!(
                "segment {j} of clip '{clip_id}' has {} values, expected {vol}",
                s.len()
            )));
        }
        xbuf[j * vol..(j + 1) * vol].copy_from_slice(s);
    }
    let segment_probs = net.predict_batch(&xbuf, segments.len(), st)?;
    let clip_prob = aggregate(&segment_probs, rule);
    Ok(ClipPrediction {
        clip_id: clip_id.to_string(),
        segment_probs,
        clip_prob,
        rule,
    })
}

// --- model document ---

pub const MODEL_FORMAT: &str = "ictus-model";
pub const MODEL_VERSION: u32 = 1;

/// Everything needed to run the model end to end on raw clips.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelMeta {
    pub input_shape: InputShape,
    pub arch: ArchitectureConfig,
    pub pipeline: PipelineConfig,
    pub stft: StftConfig,
    pub standardizer: Standardizer,
}

#[derive(Serialize)]
struct ModelDocumentRef<'a> {
    format: &'static str,
    version: u32,
    meta: &'a ModelMeta,
    tensors: Vec<NamedTensorRef<'a>>,
}

#[derive(Deserialize)]
struct ModelDocumentOwned {
    format: String,
    version: u32,
    meta: ModelMeta,
    tensors: Vec<NamedTensor>,
}

/// Writes the model document as JSON. Parameter data is borrowed, not
/// copied, so the only transient cost is the output buffer.
pub fn save_model(net: &MultiScaleNet, meta: &ModelMeta, path: &Path) -> Result<()> {
    let views = net.named_views();
    let doc = ModelDocumentRef {
        format: MODEL_FORMAT,
        version: MODEL_VERSION,
        meta,
        tensors: views
            .iter()
            .map(|(n, s, d)| NamedTensorRef {
                name: n.as_str(),
                shape: s.as_slice(),
                data: d,
            })
            .collect(),
    };
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &doc).map_err(|e| Error::MalformedModel {
        path: path.to_path_buf(),
        reason: format!("serialization failed: {e}"),
    })?;
    use std::io::Write;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a model document and rebuilds the network.
pub fn load_model(path: &Path) -> Result<(MultiScaleNet, ModelMeta)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let doc: ModelDocumentOwned =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::MalformedModel {
            path: path.to_path_buf(),
            reason: format!("invalid JSON: {e}"),
        })?;
    if doc.format != MODEL_FORMAT {
        return Err(Error::MalformedModel {
            path: path.to_path_buf(),
            reason: format!("format '{}' is not '{MODEL_FORMAT}'", doc.format),
        });
    }
    if doc.version != MODEL_VERSION {
        return Err(Error::MalformedModel {
            path: path.to_path_buf(),
            reason: format!("unsupported version {}", doc.version),
        });
    }
    let mut net = MultiScaleNet::new(doc.meta.input_shape, &doc.meta.arch, 0)?;
    net.load_named(doc.tensors, path)?;
    Ok((net, doc.meta))
}
