//! 3x3 max pooling with stride 1 and same padding.
//!
//! The forward pass records the flat input index of each window maximum so
//! the backward pass is an exact scatter-add. Ties resolve to the first
//! candidate in row-major scan order, which keeps the op deterministic.

/// Marker type for the pooling op; all state lives in the recorded argmax.
pub struct MaxPool3x3;

impl MaxPool3x3 {
    /// Pools `x` of shape `[c, h, w]`. Writes the pooled values into `y`
    /// (resized to `c*h*w`) and the winning input indices into `argmax`.
    pub fn forward(x: &[f64], c: usize, h: usize, w: usize, y: &mut Vec<f64>, argmax: &mut Vec<u32>) {
        debug_assert_eq!(x.len(), c * h * w);
        let hw = h * w;
        y.clear();
        y.resize(c * hw, 0.0);
        argmax.clear();
        argmax.resize(c * hw, 0);
        for ch in 0..c {
            let base = ch * hw;
            for oy in 0..h {
                let y0 = oy.saturating_sub(1);
                let y1 = (oy + 2).min(h);
                for ox in 0..w {
                    let x0 = ox.saturating_sub(1);
                    let x1 = (ox + 2).min(w);
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for iy in y0..y1 {
                        let row = base + iy * w;
                        for ix in x0..x1 {
                            let v = x[row + ix];
                            if v > best {
                                best = v;
                                best_idx = row + ix;
                            }
                        }
                    }
                    y[base + oy * w + ox] = best;
                    argmax[base + oy * w + ox] = best_idx as u32;
                }
            }
        }
    }

    /// Scatter-adds `dy` into `dx` at the recorded winners. `dx` must be
    /// pre-zeroed (or hold a gradient to accumulate into).
    pub fn backward(argmax: &[u32], dy: &[f64], dx: &mut [f64]) {
        debug_assert_eq!(argmax.len(), dy.len());
        for (&idx, &g) in argmax.iter().zip(dy) {
            dx[idx as usize] += g;
        }
    }
}
