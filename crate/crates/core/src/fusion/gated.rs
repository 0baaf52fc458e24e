//! Gated MLP: a linear decoder maps MOS input to one sigmoid gate per FAD
//! score; the gated FAD scores feed the two-layer MLP.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{open_unit, MlpParams};
use super::network::{bce_loss, init_uniform, sigmoid, Differentiable, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatedMlpParams {
    /// Number of FAD inputs (= decoder outputs).
    pub fad_dim: usize,
    /// Number of MOS inputs to the decoder.
    pub mos_dim: usize,
    /// Decoder weights, `fad_dim x mos_dim` row-major.
    pub wd: Vec<f64>,
    pub bd: Vec<f64>,
    pub inner: MlpParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatedOutput {
    pub score: f64,
    pub gate: Vec<f64>,
}

impl GatedMlpParams {
    pub fn neutral(fad_dim: usize, mos_dim: usize, inner: MlpParams) -> Self {
        GatedMlpParams {
            fad_dim,
            mos_dim,
            wd: vec![0.0; fad_dim * mos_dim],
            bd: vec![0.0; fad_dim],
            inner,
        }
    }

    pub fn init<R: Rng>(fad_dim: usize, mos_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let wd = init_uniform(rng, mos_dim, fad_dim * mos_dim);
        let inner = MlpParams::init(fad_dim, hidden_dim, rng);
        GatedMlpParams {
            fad_dim,
            mos_dim,
            wd,
            bd: vec![0.0; fad_dim],
            inner,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.wd.len() != self.fad_dim * self.mos_dim
            || self.bd.len() != self.fad_dim
            || self.inner.in_dim != self.fad_dim
        {
            return Err(Error::DimensionMismatch(format!(
                "gated MLP decoder does not map {} MOS inputs onto {} FAD inputs",
                self.mos_dim, self.fad_dim
            )));
        }
        if !self.wd.iter().chain(&self.bd).all(|w| w.is_finite()) {
            return Err(Error::NonFinite("gate decoder weights".into()));
        }
        self.inner.validate()
    }

    pub(crate) fn gate(&self, mos: &[f64]) -> Vec<f64> {
        if self.mos_dim == 0 {
            return self.bd.iter().map(|&b| open_unit(sigmoid(b))).collect();
        }
        self.wd
            .chunks_exact(self.mos_dim)
            .zip(&self.bd)
            .map(|(row, b)| open_unit(sigmoid(row.iter().zip(mos).map(|(w, z)| w * z).sum::<f64>() + b)))
            .collect()
    }

    pub fn forward(&self, fad: &[f64], mos: &[f64]) -> Result<GatedOutput> {
        if fad.len() != self.fad_dim || mos.len() != self.mos_dim {
            return Err(Error::DimensionMismatch(format!(
                "gated MLP expects ({}, {}) inputs, got ({}, {})",
                self.fad_dim,
                self.mos_dim,
                fad.len(),
                mos.len()
            )));
        }
        let gate = self.gate(mos);
        let gated: Vec<f64> = fad.iter().zip(&gate).map(|(y, g)| y * g).collect();
        Ok(GatedOutput {
            score: self.inner.trace(&gated).out,
            gate,
        })
    }
}

impl Differentiable for GatedMlpParams {
    fn num_params(&self) -> usize {
        self.wd.len() + self.bd.len() + self.inner.num_params()
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(&self.wd);
        v.extend_from_slice(&self.bd);
        v.extend(self.inner.flat_params());
        v
    }

    fn set_flat_params(&mut self, flat: &[f64]) {
        let (wd, rest) = flat.split_at(self.wd.len());
        let (bd, inner) = rest.split_at(self.bd.len());
        self.wd.copy_from_slice(wd);
        self.bd.copy_from_slice(bd);
        self.inner.set_flat_params(inner);
    }

    fn loss(&self, s: &Sample) -> f64 {
        let gate = self.gate(&s.gate);
        let gated: Vec<f64> = s.x.iter().zip(&gate).map(|(y, g)| y * g).collect();
        bce_loss(self.inner.trace(&gated).out, s.target)
    }

    fn loss_and_grad(&self, s: &Sample, grad: &mut [f64]) -> f64 {
        let gate = self.gate(&s.gate);
        let gated: Vec<f64> = s.x.iter().zip(&gate).map(|(y, g)| y * g).collect();
        let trace = self.inner.trace(&gated);

        let (g_wd, rest) = grad.split_at_mut(self.wd.len());
        let (g_bd, g_inner) = rest.split_at_mut(self.bd.len());
        let mut d_gated = vec![0.0; self.fad_dim];
        self.inner
            .backward(&gated, &trace, trace.out - s.target, g_inner, Some(&mut d_gated));

        for k in 0..self.fad_dim {
            let g = gate[k];
            let d_pre = d_gated[k] * s.x[k] * g * (1.0 - g);
            g_bd[k] += d_pre;
            let row = k * self.mos_dim;
            for l in 0..self.mos_dim {
                g_wd[row + l] += d_pre * s.gate[l];
            }
        }
        bce_loss(trace.out, s.target)
    }

    fn check_sample(&self, s: &Sample) -> Result<()> {
        if s.x.len() != self.fad_dim || s.gate.len() != self.mos_dim {
            return Err(Error::DimensionMismatch(format!(
                "gated MLP expects ({}, {}) inputs, sample has ({}, {})",
                self.fad_dim,
                self.mos_dim,
                s.x.len(),
                s.gate.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn neutral_gate_halves_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inner = MlpParams::init(7, 3, &mut rng);
        let gated = GatedMlpParams::neutral(7, 1, inner.clone());
        let fad = [0.1, 0.9, 0.33, 0.5, 0.77, 0.01, 1.0];
        let out = gated.forward(&fad, &[3.4]).unwrap();
        assert_eq!(out.gate, vec![0.5; 7]);
        let halved: Vec<f64> = fad.iter().map(|v| 0.5 * v).collect();
        assert_eq!(out.score.to_bits(), inner.forward(&halved).unwrap().to_bits());
    }

    #[test]
    fn closed_gate_blocks_fad() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let inner = MlpParams::init(4, 3, &mut rng);
        let mut gated = GatedMlpParams::neutral(4, 1, inner.clone());
        gated.bd = vec![-20.0; 4];
        let baseline = inner.forward(&[0.0; 4]).unwrap();
        for fad in [[0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0], [0.2, 0.8, 0.5, 0.9]] {
            let out = gated.forward(&fad, &[2.0]).unwrap();
            assert!(out.gate.iter().all(|&g| g > 0.0 && g < 1e-8));
            assert!((out.score - baseline).abs() < 1e-8);
        }
    }

    #[test]
    fn embedding_mode_square_decoder() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = GatedMlpParams::init(16, 16, 8, &mut rng);
        p.validate().unwrap();
        let out = p.forward(&[0.5; 16], &[3.0; 16]).unwrap();
        assert_eq!(out.gate.len(), 16);
        assert!(p.forward(&[0.5; 16], &[3.0; 15]).is_err());
    }
}
