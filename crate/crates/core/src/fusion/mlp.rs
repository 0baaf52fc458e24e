//! Two-layer perceptron: bias-free sigmoid hidden layer, single sigmoid output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{bce_loss, init_uniform, sigmoid, Differentiable, Sample};
use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 3;

/// Keeps probabilities strictly inside (0, 1) even when the sigmoid saturates.
#[inline]
pub(crate) fn open_unit(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Hidden width policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenSize {
    /// Score fusion: a fixed small hidden layer.
    #[default]
    Three,
    /// Embedding fusion: half of the input dimension, rounded down (at least 1).
    HalfInput,
    Fixed(usize),
}

impl HiddenSize {
    pub fn resolve(self, in_dim: usize) -> usize {
        match self {
            HiddenSize::Three => DEFAULT_HIDDEN,
            HiddenSize::HalfInput => (in_dim / 2).max(1),
            HiddenSize::Fixed(h) => h.max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub in_dim: usize,
    pub hidden_dim: usize,
    /// `hidden_dim x in_dim`, row-major. No first-layer bias.
    pub w1: Vec<f64>,
    /// Output weights, one per hidden unit.
    pub w2: Vec<f64>,
    pub b2: f64,
}

pub(crate) struct MlpTrace {
    pub hidden: Vec<f64>,
    pub out: f64,
}

impl MlpParams {
    pub fn zeros(in_dim: usize, hidden_dim: usize) -> Self {
        MlpParams {
            in_dim,
            hidden_dim,
            w1: vec![0.0; in_dim * hidden_dim],
            w2: vec![0.0; hidden_dim],
            b2: 0.0,
        }
    }

    pub fn init<R: Rng>(in_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        MlpParams {
            in_dim,
            hidden_dim,
            w1: init_uniform(rng, in_dim, in_dim * hidden_dim),
            w2: init_uniform(rng, hidden_dim, hidden_dim),
            b2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w1.len() != self.in_dim * self.hidden_dim || self.w2.len() != self.hidden_dim {
            return Err(Error::DimensionMismatch(format!(
                "MLP weights do not match {}x{} shape",
                self.hidden_dim, self.in_dim
            )));
        }
        if !self.w1.iter().chain(&self.w2).chain([&self.b2]).all(|w| w.is_finite()) {
            return Err(Error::NonFinite("MLP weights".into()));
        }
        Ok(())
    }

    pub(crate) fn trace(&self, x: &[f64]) -> MlpTrace {
        let hidden: Vec<f64> = self
            .w1
            .chunks_exact(self.in_dim)
            .map(|row| sigmoid(row.iter().zip(x).map(|(w, v)| w * v).sum()))
            .collect();
        let logit = self.w2.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + self.b2;
        MlpTrace {
            hidden,
            out: open_unit(sigmoid(logit)),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.in_dim {
            return Err(Error::DimensionMismatch(format!(
                "MLP expects {} inputs, got {}",
                self.in_dim,
                x.len()
            )));
        }
        Ok(self.trace(x).out)
    }

    /// Backpropagates `d_logit` (dL/d output logit). Adds parameter gradients
    /// into `grad` (flat layout) and, if given, input gradients into `d_x`.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        trace: &MlpTrace,
        d_logit: f64,
        grad: &mut [f64],
        mut d_x: Option<&mut [f64]>,
    ) {
        let (g_w1, rest) = grad.split_at_mut(self.w1.len());
        let (g_w2, g_b2) = rest.split_at_mut(self.hidden_dim);
        g_b2[0] += d_logit;
        for j in 0..self.hidden_dim {
            let h = trace.hidden[j];
            g_w2[j] += d_logit * h;
            let d_a = d_logit * self.w2[j] * h * (1.0 - h);
            let row = j * self.in_dim;
            for i in 0..self.in_dim {
                g_w1[row + i] += d_a * x[i];
            }
            if let Some(dx) = d_x.as_deref_mut() {
                for i in 0..self.in_dim {
                    dx[i] += d_a * self.w1[row + i];
                }
            }
        }
    }
}

impl Differentiable for MlpParams {
    fn num_params(&self) -> usize {
        self.w1.len() + self.w2.len() + 1
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    fn set_flat_params(&mut self, flat: &[f64]) {
        let (w1, rest) = flat.split_at(self.w1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.w2.copy_from_slice(w2);
        self.b2 = b2[0];
    }

    fn loss(&self, s: &Sample) -> f64 {
        bce_loss(self.trace(&s.x).out, s.target)
    }

    fn loss_and_grad(&self, s: &Sample, grad: &mut [f64]) -> f64 {
        let trace = self.trace(&s.x);
        self.backward(&s.x, &trace, trace.out - s.target, grad, None);
        bce_loss(trace.out, s.target)
    }

    fn check_sample(&self, s: &Sample) -> Result<()> {
        if s.x.len() != self.in_dim {
            return Err(Error::DimensionMismatch(format!(
                "MLP expects {} inputs, sample has {}",
                self.in_dim,
                s.x.len()
            )));
        }
        Ok(())
    }
}
