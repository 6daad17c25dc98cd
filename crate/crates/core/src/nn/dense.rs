//! Fully connected layers.
//!
//! [`Dense`] is the ordinary layer with weight `[out, in]` and materialised
//! gradients; it is meant for small fan-ins. [`StreamingDense`] stores its
//! weight transposed (`[in, out]`) and hands the weight gradient to the
//! caller in contiguous row tiles instead of materialising it, so a layer
//! whose weight occupies gigabytes can be trained without a second
//! gradient-sized allocation: consumers apply each tile (e.g. an optimiser
//! update) and let it be overwritten by the next.

use rand::Rng;

use super::matmul::{matmul_nn, matmul_nt, matmul_tn};
use super::tensor::{Param, Tensor};

fn he_uniform(n: usize, fan_in: usize, rng: &mut impl Rng) -> Vec<f64> {
    let limit = (6.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

/// Standard fully connected layer, weight `[out, in]`.
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    pub in_features: usize,
    pub out_features: usize,
}

impl Dense {
    pub fn new(name: &str, in_features: usize, out_features: usize, rng: &mut impl Rng) -> Self {
        let weight = Param::new(
            format!("{name}.weight"),
            Tensor::from_vec(
                &[out_features, in_features],
                he_uniform(out_features * in_features, in_features, rng),
            )
            .expect("weight volume matches shape"),
        );
        let bias = Param::new(format!("{name}.bias"), Tensor::zeros(&[out_features]));
        Self { weight, bias, in_features, out_features }
    }

    /// `y[b,o] = sum_i x[b,i] w[o,i] + bias[o]` for a `[batch, in]` input.
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), batch * self.in_features);
        let mut y = vec![0.0; batch * self.out_features];
        matmul_nt(
            &mut y,
            x,
            self.weight.value.data(),
            batch,
            self.in_features,
            self.out_features,
            false,
        );
        for b in 0..batch {
            for (v, bias) in y[b * self.out_features..(b + 1) * self.out_features]
                .iter_mut()
                .zip(self.bias.value.data())
            {
                *v += bias;
            }
        }
        y
    }

    /// Accumulates parameter gradients; overwrites `dx` when provided.
    pub fn backward_batch(&mut self, x: &[f64], dy: &[f64], batch: usize, dx: Option<&mut [f64]>) {
        debug_assert_eq!(dy.len(), batch * self.out_features);
        for b in 0..batch {
            for (g, &d) in self.bias.grad.data_mut().iter_mut().zip(&dy[b * self.out_features..]) {
                *g += d;
            }
        }
        matmul_tn(
            self.weight.grad.data_mut(),
            dy,
            self.out_features,
            x,
            self.out_features,
            batch,
            self.in_features,
            true,
        );
        if let Some(dx) = dx {
            matmul_nn(
                dx,
                dy,
                self.weight.value.data(),
                batch,
                self.out_features,
                self.in_features,
                false,
            );
        }
    }
}

/// Fully connected layer with the weight stored transposed as a flat
/// `[in, out]` row-major buffer. Forward and input-gradient passes stream
/// the weight exactly once; the weight gradient is produced in row tiles
/// and passed to `consume` together with the matching mutable weight rows.
pub struct StreamingDense {
    pub name: String,
    pub weight_t: Vec<f64>,
    pub bias: Param,
    pub in_features: usize,
    pub out_features: usize,
}

impl StreamingDense {
    pub fn new(name: &str, in_features: usize, out_features: usize, rng: &mut impl Rng) -> Self {
        let weight_t = he_uniform(in_features * out_features, in_features, rng);
        let bias = Param::new(format!("{name}.bias"), Tensor::zeros(&[out_features]));
        Self { name: name.to_string(), weight_t, bias, in_features, out_features }
    }

    /// `y = x . W_t + bias` for a `[batch, in]` input.
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), batch * self.in_features);
        let mut y = vec![0.0; batch * self.out_features];
        matmul_nn(&mut y, x, &self.weight_t, batch, self.in_features, self.out_features, false);
        for b in 0..batch {
            for (v, bias) in y[b * self.out_features..(b + 1) * self.out_features]
                .iter_mut()
                .zip(self.bias.value.data())
            {
                *v += bias;
            }
        }
        y
    }

    /// Backward pass. The input gradient (when requested) is computed
    /// *before* any weight rows are handed out, so `consume` is free to
    /// update the weights in place. For each tile, `consume` receives the
    /// starting input-row index, the mutable weight rows
    /// `weight_t[row0*out..(row0+rows)*out]` and the gradient tile of the
    /// same shape.
    pub fn backward_batch<F>(
        &mut self,
        x: &[f64],
        dy: &[f64],
        batch: usize,
        dx: Option<&mut [f64]>,
        tile_rows: usize,
        mut consume: F,
    ) where
        F: FnMut(usize, &mut [f64], &[f64]),
    {
        assert!(tile_rows > 0);
        debug_assert_eq!(x.len(), batch * self.in_features);
        debug_assert_eq!(dy.len(), batch * self.out_features);
        for b in 0..batch {
            for (g, &d) in self.bias.grad.data_mut().iter_mut().zip(&dy[b * self.out_features..]) {
                *g += d;
            }
        }
        if let Some(dx) = dx {
            // dx[b,i] = sum_o dy[b,o] w_t[i,o]: W_t rows are the `b` operand
            // of an NT product, streamed once.
            matmul_nt(dx, dy, &self.weight_t, batch, self.out_features, self.in_features, false);
        }
        let out = self.out_features;
        let mut tile = vec![0.0; tile_rows * out];
        let mut row0 = 0;
        while row0 < self.in_features {
            let rows = tile_rows.min(self.in_features - row0);
            let t = &mut tile[..rows * out];
            // t[i,o] = sum_b x[b, row0+i] dy[b,o]
            matmul_tn(t, &x[row0..], self.in_features, dy, rows, batch, out, false);
            consume(row0, &mut self.weight_t[row0 * out..(row0 + rows) * out], t);
            row0 += rows;
        }
    }
}
