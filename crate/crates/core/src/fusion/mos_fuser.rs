//! MOS fusion network: a bias-free weighting layer followed by an affine
//! residual map, clamped to the MOS scale at inference.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{init_uniform, Differentiable, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosFuserParams {
    pub w: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl MosFuserParams {
    /// Plain average of the inputs.
    pub fn averaging(m: usize) -> Self {
        MosFuserParams {
            w: vec![1.0 / m as f64; m],
            a: 1.0,
            b: 0.0,
        }
    }

    pub fn init<R: Rng>(m: usize, rng: &mut R) -> Self {
        MosFuserParams {
            w: init_uniform(rng, m, m),
            a: 1.0,
            b: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.is_empty() {
            return Err(Error::DimensionMismatch("MOS fuser needs at least one input".into()));
        }
        if !self.w.iter().chain([&self.a, &self.b]).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("MOS fuser weights".into()));
        }
        Ok(())
    }

    /// Unclamped output, used as the regression prediction during training.
    pub fn raw(&self, mos: &[f64]) -> f64 {
        self.a * self.w.iter().zip(mos).map(|(w, z)| w * z).sum::<f64>() + self.b
    }

    pub fn forward(&self, mos: &[f64]) -> Result<f64> {
        if mos.len() != self.w.len() {
            return Err(Error::DimensionMismatch(format!(
                "MOS fuser expects {} inputs, got {}",
                self.w.len(),
                mos.len()
            )));
        }
        Ok(self.raw(mos).clamp(0.0, 5.0))
    }
}

impl Differentiable for MosFuserParams {
    fn num_params(&self) -> usize {
        self.w.len() + 2
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut v = self.w.clone();
        v.push(self.a);
        v.push(self.b);
        v
    }

    fn set_flat_params(&mut self, flat: &[f64]) {
        let m = self.w.len();
        self.w.copy_from_slice(&flat[..m]);
        self.a = flat[m];
        self.b = flat[m + 1];
    }

    /// Squared error of the unclamped output.
    fn loss(&self, s: &Sample) -> f64 {
        let r = self.raw(&s.x) - s.target;
        r * r
    }

    fn loss_and_grad(&self, s: &Sample, grad: &mut [f64]) -> f64 {
        let weighted: f64 = self.w.iter().zip(&s.x).map(|(w, z)| w * z).sum();
        let r = self.a * weighted + self.b - s.target;
        let m = self.w.len();
        for (g, z) in grad[..m].iter_mut().zip(&s.x) {
            *g += 2.0 * r * self.a * z;
        }
        grad[m] += 2.0 * r * weighted;
        grad[m + 1] += 2.0 * r;
        r * r
    }

    fn check_sample(&self, s: &Sample) -> Result<()> {
        if s.x.len() != self.w.len() {
            return Err(Error::DimensionMismatch(format!(
                "MOS fuser expects {} inputs, sample has {}",
                self.w.len(),
                s.x.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averaging_weights() {
        let p = MosFuserParams::averaging(3);
        assert!((p.forward(&[3.0, 3.0, 3.0]).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn clamps_to_scale() {
        let p = MosFuserParams {
            w: vec![1.0],
            a: 1.0,
            b: 2.2,
        };
        assert_eq!(p.raw(&[5.0]), 7.2);
        assert_eq!(p.forward(&[5.0]).unwrap(), 5.0);
        let p = MosFuserParams {
            w: vec![1.0],
            a: -1.0,
            b: 0.0,
        };
        assert_eq!(p.forward(&[2.0]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(MosFuserParams::averaging(2).forward(&[1.0]).is_err());
    }
}
