//! Pointwise activations and the channel concat used to join branches.
//!
//! Flattening is a free reshape on row-major buffers, and concatenation
//! along the leading (channel) axis is buffer append; the helpers here make
//! the backward contracts explicit.

/// `x = max(x, 0)` elementwise.
pub fn relu_inplace(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Backward through ReLU given the *forward output* `y`: zeroes `dy`
/// wherever the unit was inactive. The derivative at exactly zero is taken
/// as zero.
pub fn relu_backward(y: &[f64], dy: &mut [f64]) {
    debug_assert_eq!(y.len(), dy.len());
    for (d, &v) in dy.iter_mut().zip(y) {
        if v <= 0.0 {
            *d = 0.0;
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// d(sigmoid)/dz expressed through the forward output `y`.
pub fn sigmoid_backward(y: f64, dy: f64) -> f64 {
    dy * y * (1.0 - y)
}

/// Concatenates channel-major blocks (the channel axis is outermost, so this
/// is a plain append). Returns the block boundaries for the backward split.
pub fn concat_channels(parts: &[&[f64]], out: &mut Vec<f64>) -> Vec<usize> {
    out.clear();
    let mut offsets = Vec::with_capacity(parts.len() + 1);
    offsets.push(0);
    for p in parts {
        out.extend_from_slice(p);
        offsets.push(out.len());
    }
    offsets
}

/// Splits a concatenated gradient back into per-part slices using the
/// offsets returned by [`concat_channels`].
pub fn split_channels<'a>(grad: &'a [f64], offsets: &[usize]) -> Vec<&'a [f64]> {
    offsets
        .windows(2)
        .map(|w| &grad[w[0]..w[1]])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_and_backward() {
        let mut x = vec![-1.0, 0.0, 2.0];
        relu_inplace(&mut x);
        assert_eq!(x, vec![0.0, 0.0, 2.0]);
        let mut dy = vec![5.0, 5.0, 5.0];
        relu_backward(&x, &mut dy);
        assert_eq!(dy, vec![0.0, 0.0, 5.0]);
    }

    #[test]
    fn sigmoid_is_stable_and_bounded() {
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(800.0) <= 1.0 && sigmoid(800.0) > 0.999);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0) < 1e-300);
        // Symmetry: s(-z) = 1 - s(z).
        for z in [-3.0, -0.7, 0.1, 2.5] {
            assert!((sigmoid(-z) - (1.0 - sigmoid(z))).abs() < 1e-15);
        }
    }

    #[test]
    fn concat_then_split_roundtrips() {
        let a = [1.0, 2.0];
        let b = [3.0];
        let c = [4.0, 5.0, 6.0];
        let mut out = Vec::new();
        let offsets = concat_channels(&[&a, &b, &c], &mut out);
        assert_eq!(out, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let parts = split_channels(&out, &offsets);
        assert_eq!(parts[0], &a);
        assert_eq!(parts[1], &b);
        assert_eq!(parts[2], &c);
    }
}
