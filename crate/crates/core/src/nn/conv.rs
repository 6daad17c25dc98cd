//! 2D convolution (stride 1, same padding) via im2col + GEMM.
//!
//! Activations are single-sample, channel-major `[c, h, w]` buffers. The
//! unrolled column matrix has one row per `(in_channel, ky, kx)` tap and one
//! column per output pixel, so the forward pass is a single
//! `[out, K] x [K, HW]` product. Scratch buffers are owned by the caller and
//! reused across samples to keep allocation out of the hot loop.

use rand::Rng;

use super::matmul::{matmul_nn, matmul_nt};
use super::tensor::{Param, Tensor};

/// Reusable workspace for [`Conv2d`] forward/backward calls. One instance
/// can be shared by every conv layer in a network (buffers are resized on
/// demand and sized for the largest user).
#[derive(Default)]
pub struct Conv2dScratch {
    col: Vec<f64>,
    wt: Vec<f64>,
    dcol: Vec<f64>,
}

impl Conv2dScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Convolution layer with weight `[out, in, kh, kw]` and bias `[out]`.
/// Kernel sides must be odd so that same padding is symmetric.
pub struct Conv2d {
    pub weight: Param,
    pub bias: Param,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kh: usize,
    pub kw: usize,
}

impl Conv2d {
    /// He-uniform initialisation: weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
    /// bias zero. `name` prefixes the parameter names (`{name}.weight`).
    pub fn new(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kh: usize,
        kw: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(kh % 2 == 1 && kw % 2 == 1, "kernel sides must be odd");
        let fan_in = (in_channels * kh * kw) as f64;
        let limit = (6.0 / fan_in).sqrt();
        let n = out_channels * in_channels * kh * kw;
        let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-limit..limit)).collect();
        let weight = Param::new(
            format!("{name}.weight"),
            Tensor::from_vec(&[out_channels, in_channels, kh, kw], data)
                .expect("weight volume matches shape"),
        );
        let bias = Param::new(format!("{name}.bias"), Tensor::zeros(&[out_channels]));
        Self { weight, bias, in_channels, out_channels, kh, kw }
    }

    fn k(&self) -> usize {
        self.in_channels * self.kh * self.kw
    }

    /// `y = W * col(x) + b`, `y` resized to `[out, h, w]`.
    pub fn forward(
        &self,
        x: &[f64],
        h: usize,
        w: usize,
        scratch: &mut Conv2dScratch,
        y: &mut Vec<f64>,
    ) {
        debug_assert_eq!(x.len(), self.in_channels * h * w);
        let hw = h * w;
        im2col(x, self.in_channels, h, w, self.kh, self.kw, &mut scratch.col);
        y.resize(self.out_channels * hw, 0.0);
        matmul_nn(y, self.weight.value.data(), &scratch.col, self.out_channels, self.k(), hw, false);
        for o in 0..self.out_channels {
            let b = self.bias.value.data()[o];
            if b != 0.0 {
                for v in &mut y[o * hw..(o + 1) * hw] {
                    *v += b;
                }
            }
        }
    }

    /// Accumulates parameter gradients for one sample and, when `dx` is
    /// given, overwrites it with the input gradient. `x` is the same buffer
    /// passed to `forward` (the column matrix is recomputed rather than
    /// stored per sample).
    pub fn backward(
        &mut self,
        x: &[f64],
        h: usize,
        w: usize,
        dy: &[f64],
        scratch: &mut Conv2dScratch,
        dx: Option<&mut [f64]>,
    ) {
        let hw = h * w;
        let k = self.k();
        debug_assert_eq!(dy.len(), self.out_channels * hw);

        // Bias gradient: row sums of dy.
        for o in 0..self.out_channels {
            let s: f64 = dy[o * hw..(o + 1) * hw].iter().sum();
            self.bias.grad.data_mut()[o] += s;
        }

        // Weight gradient: dW += dY . col(x)^T.
        im2col(x, self.in_channels, h, w, self.kh, self.kw, &mut scratch.col);
        matmul_nt(
            self.weight.grad.data_mut(),
            dy,
            &scratch.col,
            self.out_channels,
            hw,
            k,
            true,
        );

        if let Some(dx) = dx {
            debug_assert_eq!(dx.len(), self.in_channels * hw);
            // dcol = W^T . dY, computed with a contiguous transposed copy of
            // the (small) weight matrix so the fast NN kernel applies.
            scratch.wt.resize(k * self.out_channels, 0.0);
            let wmat = self.weight.value.data();
            for o in 0..self.out_channels {
                for kk in 0..k {
                    scratch.wt[kk * self.out_channels + o] = wmat[o * k + kk];
                }
            }
            scratch.dcol.resize(k * hw, 0.0);
            matmul_nn(&mut scratch.dcol, &scratch.wt, dy, k, self.out_channels, hw, false);
            col2im_add(&scratch.dcol, self.in_channels, h, w, self.kh, self.kw, dx);
        }
    }
}

/// Unrolls `x` `[c, h, w]` into `col` `[c*kh*kw, h*w]` with same padding.
/// Every cell of `col` is written (padding cells are zeroed explicitly), so
/// the buffer can be reused without clearing.
fn im2col(x: &[f64], c: usize, h: usize, w: usize, kh: usize, kw: usize, col: &mut Vec<f64>) {
    let hw = h * w;
    let ph = (kh / 2) as isize;
    let pw = (kw / 2) as isize;
    col.resize(c * kh * kw * hw, 0.0);
    let mut row = 0usize;
    for ch in 0..c {
        for ky in 0..kh {
            for kx in 0..kw {
                let dst = &mut col[row * hw..(row + 1) * hw];
                let sy = ky as isize - ph;
                let sx = kx as isize - pw;
                for oy in 0..h {
                    let iy = oy as isize + sy;
                    let drow = &mut dst[oy * w..(oy + 1) * w];
                    if iy < 0 || iy >= h as isize {
                        drow.fill(0.0);
                        continue;
                    }
                    let src = &x[ch * hw + iy as usize * w..ch * hw + (iy as usize + 1) * w];
                    let lo = (-sx).max(0) as usize;
                    let hi = (w as isize - sx.max(0)) as usize;
                    drow[..lo].fill(0.0);
                    drow[lo..hi]
                        .copy_from_slice(&src[(lo as isize + sx) as usize..(hi as isize + sx) as usize]);
                    drow[hi..].fill(0.0);
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds `dcol` back onto `dx` (which is
/// zeroed first, since `backward` overwrites the input gradient).
fn col2im_add(dcol: &[f64], c: usize, h: usize, w: usize, kh: usize, kw: usize, dx: &mut [f64]) {
    let hw = h * w;
    let ph = (kh / 2) as isize;
    let pw = (kw / 2) as isize;
    dx.fill(0.0);
    let mut row = 0usize;
    for ch in 0..c {
        for ky in 0..kh {
            for kx in 0..kw {
                let src = &dcol[row * hw..(row + 1) * hw];
                let sy = ky as isize - ph;
                let sx = kx as isize - pw;
                for oy in 0..h {
                    let iy = oy as isize + sy;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let srow = &src[oy * w..(oy + 1) * w];
                    let dst = &mut dx[ch * hw + iy as usize * w..ch * hw + (iy as usize + 1) * w];
                    let lo = (-sx).max(0) as usize;
                    let hi = (w as isize - sx.max(0)) as usize;
                    for (d, s) in dst[(lo as isize + sx) as usize..(hi as isize + sx) as usize]
                        .iter_mut()
                        .zip(&srow[lo..hi])
                    {
                        *d += s;
                    }
                }
                row += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct nested-loop same-padding convolution.
    fn naive_conv(
        x: &[f64],
        w_: &[f64],
        b: &[f64],
        in_c: usize,
        out_c: usize,
        kh: usize,
        kw: usize,
        h: usize,
        w: usize,
    ) -> Vec<f64> {
        let hw = h * w;
        let mut y = vec![0.0; out_c * hw];
        let ph = kh as i64 / 2;
        let pw = kw as i64 / 2;
        for o in 0..out_c {
            for oy in 0..h {
                for ox in 0..w {
                    let mut acc = b[o];
                    for c in 0..in_c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = oy as i64 + ky as i64 - ph;
                                let ix = ox as i64 + kx as i64 - pw;
                                if iy >= 0 && iy < h as i64 && ix >= 0 && ix < w as i64 {
                                    acc += x[c * hw + iy as usize * w + ix as usize]
                                        * w_[((o * in_c + c) * kh + ky) * kw + kx];
                                }
                            }
                        }
                    }
                    y[o * hw + oy * w + ox] = acc;
                }
            }
        }
        y
    }

    fn random_conv(
        name: &str,
        in_c: usize,
        out_c: usize,
        kh: usize,
        kw: usize,
        seed_label: &str,
    ) -> (Conv2d, rand_chacha::ChaCha8Rng) {
        let mut rng = crate::seeding::substream(99, seed_label);
        let conv = Conv2d::new(name, in_c, out_c, kh, kw, &mut rng);
        (conv, rng)
    }

    #[test]
    fn forward_matches_naive_conv() {
        use rand::Rng;
        for (in_c, out_c, kh, kw, h, w) in
            [(2, 3, 3, 3, 5, 4), (1, 2, 1, 1, 3, 3), (3, 2, 5, 5, 6, 7), (2, 2, 3, 5, 4, 4)]
        {
            let (mut conv, mut rng) =
                random_conv("c", in_c, out_c, kh, kw, &format!("conv-{in_c}-{out_c}-{kh}-{kw}"));
            for b in conv.bias.value.data_mut() {
                *b = rng.gen_range(-0.5..0.5);
            }
            let x: Vec<f64> = (0..in_c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut scratch = Conv2dScratch::new();
            let mut y = Vec::new();
            conv.forward(&x, h, w, &mut scratch, &mut y);
            let want = naive_conv(
                &x,
                conv.weight.value.data(),
                conv.bias.value.data(),
                in_c,
                out_c,
                kh,
                kw,
                h,
                w,
            );
            for (a, b) in y.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "mismatch {a} vs {b}");
            }
        }
    }

    /// Finite-difference check over all three gradients (input, weight,
    /// bias) using the scalar loss L = sum(y * r) for a fixed random r.
    #[test]
    fn backward_matches_finite_differences() {
        use rand::Rng;
        let (in_c, out_c, kh, kw, h, w) = (2, 2, 3, 3, 4, 3);
        let (mut conv, mut rng) = random_conv("c", in_c, out_c, kh, kw, "conv-grad");
        for b in conv.bias.value.data_mut() {
            *b = rng.gen_range(-0.5..0.5);
        }
        let x: Vec<f64> = (0..in_c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r: Vec<f64> = (0..out_c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut scratch = Conv2dScratch::new();

        let mut y = Vec::new();
        conv.forward(&x, h, w, &mut scratch, &mut y);
        let mut dx = vec![0.0; x.len()];
        conv.backward(&x, h, w, &r, &mut scratch, Some(&mut dx));

        let loss = |conv: &Conv2d, x: &[f64], scratch: &mut Conv2dScratch| -> f64 {
            let mut y = Vec::new();
            conv.forward(x, h, w, scratch, &mut y);
            y.iter().zip(&r).map(|(a, b)| a * b).sum()
        };
        let step = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);

        // Input gradient.
        let mut xp = x.clone();
        for i in 0..x.len() {
            xp[i] = x[i] + step;
            let up = loss(&conv, &xp, &mut scratch);
            xp[i] = x[i] - step;
            let dn = loss(&conv, &xp, &mut scratch);
            xp[i] = x[i];
            assert!(rel(dx[i], (up - dn) / (2.0 * step)) < 1e-6, "dx[{i}]");
        }
        // Weight gradient.
        for i in 0..conv.weight.value.len() {
            let orig = conv.weight.value.data()[i];
            conv.weight.value.data_mut()[i] = orig + step;
            let up = loss(&conv, &x, &mut scratch);
            conv.weight.value.data_mut()[i] = orig - step;
            let dn = loss(&conv, &x, &mut scratch);
            conv.weight.value.data_mut()[i] = orig;
            assert!(
                rel(conv.weight.grad.data()[i], (up - dn) / (2.0 * step)) < 1e-6,
                "dW[{i}]"
            );
        }
        // Bias gradient.
        for i in 0..out_c {
            let orig = conv.bias.value.data()[i];
            conv.bias.value.data_mut()[i] = orig + step;
            let up = loss(&conv, &x, &mut scratch);
            conv.bias.value.data_mut()[i] = orig - step;
            let dn = loss(&conv, &x, &mut scratch);
            conv.bias.value.data_mut()[i] = orig;
            assert!(rel(conv.bias.grad.data()[i], (up - dn) / (2.0 * step)) < 1e-6, "db[{i}]");
        }
    }

    #[test]
    fn identity_1x1_kernel_passes_input_through() {
        let mut rng = crate::seeding::substream(99, "conv-id");
        let mut conv = Conv2d::new("c", 1, 1, 1, 1, &mut rng);
        conv.weight.value.data_mut()[0] = 1.0;
        let x = vec![0.5, -1.0, 2.0, 0.0, 3.5, -0.25];
        let mut y = Vec::new();
        conv.forward(&x, 2, 3, &mut Conv2dScratch::new(), &mut y);
        assert_eq!(y, x);
    }

    #[test]
    fn all_ones_3x3_on_all_ones_input() {
        // Sliding a 3x3 ones kernel over a 3x3 ones image with same padding:
        // the window overlap is 4 at corners, 6 at edges, 9 at the center.
        let mut rng = crate::seeding::substream(99, "conv-ones");
        let mut conv = Conv2d::new("c", 1, 1, 3, 3, &mut rng);
        conv.weight.value.data_mut().fill(1.0);
        let x = vec![1.0; 9];
        let mut y = Vec::new();
        conv.forward(&x, 3, 3, &mut Conv2dScratch::new(), &mut y);
        assert_eq!(y, vec![4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn zero_kernel_outputs_bias() {
        let mut rng = crate::seeding::substream(99, "conv-zero");
        let mut conv = Conv2d::new("c", 2, 3, 3, 3, &mut rng);
        conv.weight.value.data_mut().fill(0.0);
        conv.bias.value.data_mut().copy_from_slice(&[1.5, -2.0, 0.25]);
        let x: Vec<f64> = (0..2 * 4 * 5).map(|i| i as f64).collect();
        let mut y = Vec::new();
        conv.forward(&x, 4, 5, &mut Conv2dScratch::new(), &mut y);
        for (o, &b) in [1.5, -2.0, 0.25].iter().enumerate() {
            assert!(y[o * 20..(o + 1) * 20].iter().all(|&v| v == b));
        }
    }

    #[test]
    fn conv_is_linear_in_input_with_zero_bias() {
        use rand::Rng;
        let (conv, mut rng) = random_conv("c", 2, 2, 3, 3, "conv-linear");
        let n = 2 * 4 * 4;
        let x1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, b) = (0.7, -1.3);
        let mix: Vec<f64> = x1.iter().zip(&x2).map(|(u, v)| a * u + b * v).collect();
        let mut scratch = Conv2dScratch::new();
        let (mut y1, mut y2, mut ym) = (Vec::new(), Vec::new(), Vec::new());
        conv.forward(&x1, 4, 4, &mut scratch, &mut y1);
        conv.forward(&x2, 4, 4, &mut scratch, &mut y2);
        conv.forward(&mix, 4, 4, &mut scratch, &mut ym);
        for i in 0..ym.len() {
            assert!((ym[i] - (a * y1[i] + b * y2[i])).abs() < 1e-12);
        }
        // `random_conv` leaves the bias at zero; the property needs that.
        assert!(conv.bias.value.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradients_accumulate_across_calls() {
        let (mut conv, mut rng) = random_conv("c", 1, 1, 3, 3, "conv-accum");
        use rand::Rng;
        let x: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dy: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut scratch = Conv2dScratch::new();
        conv.backward(&x, 3, 3, &dy, &mut scratch, None);
        let once: Vec<f64> = conv.weight.grad.data().to_vec();
        conv.backward(&x, 3, 3, &dy, &mut scratch, None);
        for (a, b) in conv.weight.grad.data().iter().zip(&once) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
    }
}
