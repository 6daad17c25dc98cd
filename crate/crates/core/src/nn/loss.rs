//! Class-weighted binary cross-entropy.
//!
//! Two forms are provided. [`weighted_bce`] takes a probability and is the
//! plain textbook loss with the probability clamped away from {0, 1};
//! [`weighted_bce_logits`] fuses the sigmoid and works in logit space, which
//! is the numerically sound choice for training (its gradient never
//! saturates to an exact zero the way the clamped form does).

use super::ops::sigmoid;

/// Loss value together with its derivative. For [`weighted_bce`] the
/// derivative is with respect to the probability `p`; for
/// [`weighted_bce_logits`] it is with respect to the logit `z`.
/// `clamped` reports whether the probability had to be pulled back into the
/// open interval (always `false` for the logit form, which cannot saturate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BceTerms {
    pub loss: f64,
    pub dloss: f64,
    pub clamped: bool,
}

const P_EPS: f64 = 1e-12;

/// `-w*ln(p)` for positives, `-ln(1-p)` for negatives, with `p` clamped to
/// `[1e-12, 1 - 1e-12]` (and the clamping reported). Positive samples carry
/// weight `pos_weight`; negatives have weight 1.
pub fn weighted_bce(p: f64, target: bool, pos_weight: f64) -> BceTerms {
    let pc = p.clamp(P_EPS, 1.0 - P_EPS);
    let clamped = pc != p;
    if target {
        BceTerms { loss: -pos_weight * pc.ln(), dloss: -pos_weight / pc, clamped }
    } else {
        BceTerms { loss: -(1.0 - pc).ln(), dloss: 1.0 / (1.0 - pc), clamped }
    }
}

/// ln(1 + e^t) computed without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Same loss expressed on the pre-sigmoid logit `z`:
/// positives `w*softplus(-z)`, negatives `softplus(z)`.
/// `dloss = w_y * (sigmoid(z) - y)` stays informative at any magnitude.
pub fn weighted_bce_logits(z: f64, target: bool, pos_weight: f64) -> BceTerms {
    if target {
        BceTerms {
            loss: pos_weight * softplus(-z),
            dloss: pos_weight * (sigmoid(z) - 1.0),
            clamped: false,
        }
    } else {
        BceTerms { loss: softplus(z), dloss: sigmoid(z), clamped: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        // p = 0.5 either way: loss = w * ln 2, d = -w/p or 1/(1-p).
        let t = weighted_bce(0.5, true, 3.0);
        assert!((t.loss - 3.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((t.dloss + 6.0).abs() < 1e-12);
        assert!(!t.clamped);
        let f = weighted_bce(0.5, false, 3.0);
        assert!((f.loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((f.dloss - 2.0).abs() < 1e-12);
        // The imbalance-ratio weight straight from the evaluation setup.
        let w = weighted_bce(0.5, true, 5.885);
        assert!((w.loss - 5.885 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn clamping_keeps_values_finite_and_is_reported() {
        for (p, y) in [(0.0, true), (1.0, false), (-0.3, true), (1.7, false)] {
            let t = weighted_bce(p, y, 5.0);
            assert!(t.loss.is_finite() && t.dloss.is_finite());
            assert!(t.clamped);
        }
        // Exactly at the clamp boundary nothing moves, so nothing is reported.
        assert!(!weighted_bce(1e-12, true, 1.0).clamped);
        assert!(!weighted_bce(0.3, false, 1.0).clamped);
    }

    #[test]
    fn probability_gradient_matches_finite_differences() {
        let h = 1e-7;
        for p in [0.05, 0.3, 0.5, 0.8, 0.97] {
            for target in [true, false] {
                let g = weighted_bce(p, target, 5.885).dloss;
                let up = weighted_bce(p + h, target, 5.885).loss;
                let dn = weighted_bce(p - h, target, 5.885).loss;
                let num = (up - dn) / (2.0 * h);
                assert!((g - num).abs() / g.abs().max(num.abs()) < 1e-6, "p={p} y={target}");
            }
        }
    }

    #[test]
    fn logit_form_agrees_with_probability_form() {
        for z in [-4.0, -1.0, 0.0, 0.3, 2.0] {
            for target in [true, false] {
                let p = sigmoid(z);
                let a = weighted_bce_logits(z, target, 2.5);
                let b = weighted_bce(p, target, 2.5);
                assert!((a.loss - b.loss).abs() < 1e-10);
                // Chain rule: dL/dz = dL/dp * p(1-p).
                assert!((a.dloss - b.dloss * p * (1.0 - p)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let h = 1e-6;
        for z in [-10.0, -2.0, 0.0, 1.5, 12.0] {
            for target in [true, false] {
                let g = weighted_bce_logits(z, target, 4.0).dloss;
                let up = weighted_bce_logits(z + h, target, 4.0).loss;
                let dn = weighted_bce_logits(z - h, target, 4.0).loss;
                let num = (up - dn) / (2.0 * h);
                assert!(
                    (g - num).abs() / g.abs().max(num.abs()).max(1e-6) < 1e-5,
                    "z={z} target={target}: {g} vs {num}"
                );
            }
        }
    }

    #[test]
    fn logit_form_never_overflows() {
        for z in [-900.0, 900.0] {
            for target in [true, false] {
                let t = weighted_bce_logits(z, target, 6.0);
                assert!(t.loss.is_finite() && t.dloss.is_finite());
            }
        }
    }
}
