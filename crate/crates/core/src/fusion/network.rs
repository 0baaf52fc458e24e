//! Shared machinery for the differentiable fusion networks.

use rand::Rng;

/// Clamp applied to probabilities inside the cross-entropy.
pub const BCE_EPS: f64 = 1e-12;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a probability against a 0/1 target.
pub fn bce_loss(pred: f64, target: f64) -> f64 {
    let p = pred.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// One training example in network-ready form.
///
/// `x` is the main input, `gate` the gate-decoder input (empty for networks
/// without a gate) and `target` the 0/1 label or, for the MOS fuser, the MOS
/// regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub gate: Vec<f64>,
    pub target: f64,
}

impl Sample {
    pub fn new(x: Vec<f64>, target: f64) -> Self {
        Sample {
            x,
            gate: Vec::new(),
            target,
        }
    }

    pub fn gated(x: Vec<f64>, gate: Vec<f64>, target: f64) -> Self {
        Sample { x, gate, target }
    }
}

/// A network trainable by plain SGD on a flat parameter vector.
pub trait Differentiable: Clone {
    fn num_params(&self) -> usize;

    fn flat_params(&self) -> Vec<f64>;

    fn set_flat_params(&mut self, flat: &[f64]);

    /// Per-sample training loss.
    fn loss(&self, s: &Sample) -> f64;

    /// Per-sample loss; adds the gradient w.r.t. the flat parameters into `grad`.
    fn loss_and_grad(&self, s: &Sample, grad: &mut [f64]) -> f64;

    /// Checks that a sample fits the network's input shapes.
    fn check_sample(&self, s: &Sample) -> crate::Result<()>;
}

/// Uniform draw in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub(crate) fn init_uniform<R: Rng>(rng: &mut R, fan_in: usize, len: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    (0..len).map(|_| rng.random_range(-bound..=bound)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_at_half_is_ln2() {
        assert!((bce_loss(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_loss(0.5, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bce_vanishes_at_perfect_prediction() {
        assert!(bce_loss(1.0 - 1e-13, 1.0) < 1e-11);
        assert!(bce_loss(1e-13, 0.0) < 1e-11);
        assert!(bce_loss(1.0, 1.0) < 1e-11);
        assert!(bce_loss(0.0, 1.0).is_finite());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
