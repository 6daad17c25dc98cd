//! Central-difference gradient verification.
//!
//! Used by the test suites of every differentiable op and by the model-level
//! checks: analytic backward passes are only trusted once they agree with
//! finite differences on small problems.

use crate::error::{Error, Result};

/// Outcome of a gradient check.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// Number of coordinates compared.
    pub checked: usize,
    /// Largest relative error `|a - n| / max(|a|, |n|, 1e-6)`.
    pub max_rel_error: f64,
    /// Coordinate attaining `max_rel_error`.
    pub worst_index: usize,
}

/// Compares `analytic` against central finite differences of the scalar
/// function `f` around `x`. `f` must be deterministic. `step` is the
/// one-sided perturbation (1e-5 is a good default for f64).
pub fn gradient_check<F>(mut f: F, x: &[f64], analytic: &[f64], step: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> f64,
{
    if x.len() != analytic.len() {
        return Err(Error::ShapeMismatch(format!(
            "gradient check: {} inputs vs {} analytic entries",
            x.len(),
            analytic.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("gradient check over zero coordinates".into()));
    }
    let mut xp = x.to_vec();
    let mut max_rel = 0.0;
    let mut worst = 0;
    for i in 0..x.len() {
        xp[i] = x[i] + step;
        let up = f(&xp);
        xp[i] = x[i] - step;
        let dn = f(&xp);
        xp[i] = x[i];
        let numeric = (up - dn) / (2.0 * step);
        if !numeric.is_finite() || !analytic[i].is_finite() {
            return Err(Error::NonFinite(format!("gradient check at coordinate {i}")));
        }
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
        if rel > max_rel {
            max_rel = rel;
            worst = i;
        }
    }
    Ok(GradCheckReport { checked: x.len(), max_rel_error: max_rel, worst_index: worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_correct_gradient_of_quadratic() {
        // f(x) = sum(x_i^2), grad = 2x.
        let x = vec![0.3, -1.2, 2.0, 0.0];
        let grad: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let rep = gradient_check(|x| x.iter().map(|v| v * v).sum(), &x, &grad, 1e-5).unwrap();
        assert_eq!(rep.checked, 4);
        assert!(rep.max_rel_error < 1e-8, "rel {}", rep.max_rel_error);
    }

    #[test]
    fn flags_a_wrong_gradient() {
        let x = vec![0.5, 1.5];
        let mut grad = vec![1.0, 3.0]; // true grad of sum(x^2) is (1.0, 3.0)
        grad[1] = 2.0; // corrupt one coordinate
        let rep = gradient_check(|x| x.iter().map(|v| v * v).sum(), &x, &grad, 1e-5).unwrap();
        assert!(rep.max_rel_error > 0.1);
        assert_eq!(rep.worst_index, 1);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let err = gradient_check(|_| 0.0, &[1.0], &[1.0, 2.0], 1e-5).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
    }
}
