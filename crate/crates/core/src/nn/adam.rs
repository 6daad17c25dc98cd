//! Adam optimiser with slot-based state so huge parameters can be updated
//! in tiles.
//!
//! Each parameter registers once and gets a slot holding its first/second
//! moment vectors. [`AdamState::update`] applies the rule to any contiguous
//! sub-range of a slot, which lets the streaming dense layer fuse its
//! tile-wise gradient computation with the weight update and never hold the
//! full gradient in memory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tensor::Param;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

struct Slot {
    name: String,
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Optimiser state for a fixed set of registered parameters.
pub struct AdamState {
    cfg: AdamConfig,
    t: u64,
    inv_bc1: f64,
    inv_bc2: f64,
    slots: Vec<Slot>,
}

impl AdamState {
    pub fn new(cfg: AdamConfig) -> Self {
        Self { cfg, t: 0, inv_bc1: 1.0, inv_bc2: 1.0, slots: Vec::new() }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    /// Registers a parameter of `len` elements; returns its slot id.
    pub fn register(&mut self, name: &str, len: usize) -> usize {
        self.slots.push(Slot { name: name.to_string(), m: vec![0.0; len], v: vec![0.0; len] });
        self.slots.len() - 1
    }

    /// Advances the step counter and refreshes the bias corrections. Call
    /// once per optimisation step, before any `update` for that step.
    pub fn begin_step(&mut self) {
        self.t += 1;
        self.inv_bc1 = 1.0 / (1.0 - self.cfg.beta1.powi(self.t as i32));
        self.inv_bc2 = 1.0 / (1.0 - self.cfg.beta2.powi(self.t as i32));
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Applies Adam to `w` using gradient `g`, where `w` corresponds to the
    /// slot range `[offset, offset + g.len())`. Rejects non-finite
    /// gradients, which otherwise poison the moments silently.
    pub fn update(&mut self, slot: usize, offset: usize, w: &mut [f64], g: &[f64]) -> Result<()> {
        assert_eq!(w.len(), g.len(), "weight/gradient length mismatch");
        assert!(self.t > 0, "begin_step must be called before update");
        let s = &mut self.slots[slot];
        assert!(
            offset + g.len() <= s.m.len(),
            "update range exceeds slot '{}' ({} > {})",
            s.name,
            offset + g.len(),
            s.m.len()
        );
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let lr = self.cfg.learning_rate;
        let eps = self.cfg.epsilon;
        let m = &mut s.m[offset..offset + g.len()];
        let v = &mut s.v[offset..offset + g.len()];
        for i in 0..g.len() {
            let gi = g[i];
            if !gi.is_finite() {
                return Err(Error::NonFiniteGradient(format!(
                    "parameter '{}' element {}",
                    s.name,
                    offset + i
                )));
            }
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let mhat = m[i] * self.inv_bc1;
            let vhat = v[i] * self.inv_bc2;
            w[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Convenience for whole-`Param` updates: applies one step to every
/// parameter, in the order they were registered (which must match the order
/// of `params`). Gradients are left untouched; callers zero them before the
/// next accumulation.
pub fn adam_step(state: &mut AdamState, params: &mut [&mut Param]) -> Result<()> {
    state.begin_step();
    for (slot, p) in params.iter_mut().enumerate() {
        let Param { value, grad, .. } = &mut **p;
        state.update(slot, 0, value.data_mut(), grad.data())?;
    }
    Ok(())
}
