//! Synthetic score corpus with a closed-form Bayes oracle.
//!
//! Every utterance has a latent true MOS `q` drawn from a label-dependent
//! truncated-normal mixture on `[1, 5]`. The MOS predictors observe `q` with
//! Gaussian noise. Each FAD system is informative only when `q` falls inside
//! its MOS regime; outside it emits noise. A shared per-utterance offset `u`
//! on all FAD logits makes the FAD scores correlated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, ScoreRecord, Split};
use crate::error::{Error, Result};
use crate::fusion::sigmoid;
use crate::metrics::compute_eer;

pub const MOS_SUPPORT: (f64, f64) = (1.0, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Mixture of normals, each truncated to `[1, 5]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosDistribution {
    pub components: Vec<MosComponent>,
}

impl MosDistribution {
    pub fn normal(mean: f64, sd: f64) -> Self {
        MosDistribution {
            components: vec![MosComponent {
                weight: 1.0,
                mean,
                sd,
            }],
        }
    }

    fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let total = self.total_weight();
        let mut pick = rng.random::<f64>() * total;
        let mut comp = self.components[self.components.len() - 1];
        for c in &self.components {
            if pick < c.weight {
                comp = *c;
                break;
            }
            pick -= c.weight;
        }
        let normal = Normal::new(comp.mean, comp.sd).expect("validated sd");
        for _ in 0..10_000 {
            let q = normal.sample(rng);
            if (MOS_SUPPORT.0..=MOS_SUPPORT.1).contains(&q) {
                return q;
            }
        }
        comp.mean.clamp(MOS_SUPPORT.0, MOS_SUPPORT.1)
    }

    /// Log density on `[1, 5]`.
    pub fn ln_pdf(&self, q: f64) -> f64 {
        if !(MOS_SUPPORT.0..=MOS_SUPPORT.1).contains(&q) {
            return f64::NEG_INFINITY;
        }
        let total = self.total_weight();
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let mass = normal_cdf((MOS_SUPPORT.1 - c.mean) / c.sd)
                    - normal_cdf((MOS_SUPPORT.0 - c.mean) / c.sd);
                (c.weight / total).ln() + ln_normal_pdf(q, c.mean, c.sd) - mass.ln()
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// Probability mass above `x` (within the support).
    pub fn upper_tail(&self, x: f64) -> f64 {
        let total = self.total_weight();
        self.components
            .iter()
            .map(|c| {
                let cdf = |v: f64| normal_cdf((v - c.mean) / c.sd);
                let mass = cdf(MOS_SUPPORT.1) - cdf(MOS_SUPPORT.0);
                let above = cdf(MOS_SUPPORT.1) - cdf(x.clamp(MOS_SUPPORT.0, MOS_SUPPORT.1));
                c.weight / total * above / mass
            })
            .sum()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.components.is_empty()
            || self
                .components
                .iter()
                .any(|c| !(c.sd > 0.0) || !(c.weight > 0.0) || !c.mean.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "{name}: components need positive sd and weight"
            )));
        }
        Ok(())
    }
}

/// MOS interval where a FAD system is informative: `lo <= q < hi`, with the
/// top of the scale included when `hi = 5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub lo: f64,
    pub hi: f64,
}

impl Regime {
    pub fn contains(&self, q: f64) -> bool {
        self.lo <= q && (q < self.hi || (q == self.hi && self.hi >= MOS_SUPPORT.1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub n_train: usize,
    pub n_valid: usize,
    pub n_eval: usize,
    pub spoof_prior: f64,
    pub mos_bonafide: MosDistribution,
    pub mos_spoof: MosDistribution,
    pub n_fad_systems: usize,
    pub n_mos_systems: usize,
    /// One regime per FAD system.
    pub system_regimes: Vec<Regime>,
    pub informative_slope: f64,
    pub informative_noise_sd: f64,
    pub uninformative_noise_sd: f64,
    pub shared_noise_sd: f64,
    pub mos_obs_sd: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        let low = Regime { lo: 1.0, hi: 3.25 };
        let high = Regime { lo: 3.25, hi: 5.0 };
        GenConfig {
            n_train: 25_000,
            n_valid: 10_000,
            n_eval: 10_000,
            spoof_prior: 0.9,
            mos_bonafide: MosDistribution::normal(3.5, 0.2),
            mos_spoof: MosDistribution {
                components: vec![
                    MosComponent {
                        weight: 0.89,
                        mean: 1.8,
                        sd: 0.2,
                    },
                    MosComponent {
                        weight: 0.11,
                        mean: 3.4,
                        sd: 0.2,
                    },
                ],
            },
            n_fad_systems: 7,
            n_mos_systems: 7,
            system_regimes: vec![low, low, low, high, high, high, high],
            informative_slope: 0.7,
            informative_noise_sd: 1.0,
            uninformative_noise_sd: 1.0,
            shared_noise_sd: 0.8,
            mos_obs_sd: 0.2,
            seed: 42,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.spoof_prior > 0.0 && self.spoof_prior < 1.0) {
            return bad(format!("spoof_prior must be in (0, 1), got {}", self.spoof_prior));
        }
        self.mos_bonafide.validate("mos_bonafide")?;
        self.mos_spoof.validate("mos_spoof")?;
        if self.n_fad_systems == 0 {
            return bad("n_fad_systems must be >= 1".into());
        }
        if self.system_regimes.len() != self.n_fad_systems {
            return bad(format!(
                "{} regimes for {} FAD systems",
                self.system_regimes.len(),
                self.n_fad_systems
            ));
        }
        if self
            .system_regimes
            .iter()
            .any(|r| !(0.0 <= r.lo && r.lo <= r.hi && r.hi <= 5.0))
        {
            return bad("regimes must lie within [0, 5]".into());
        }
        for (name, sd) in [
            ("informative_noise_sd", self.informative_noise_sd),
            ("uninformative_noise_sd", self.uninformative_noise_sd),
            ("shared_noise_sd", self.shared_noise_sd),
            ("mos_obs_sd", self.mos_obs_sd),
        ] {
            if !(sd > 0.0 && sd.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !self.informative_slope.is_finite() {
            return bad("informative_slope must be finite".into());
        }
        Ok(())
    }

    pub fn split_size(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train,
            Split::Valid => self.n_valid,
            Split::Eval => self.n_eval,
        }
    }

    fn stream_offset(&self, split: Split) -> u64 {
        match split {
            Split::Train => 0,
            Split::Valid => self.n_train as u64,
            Split::Eval => (self.n_train + self.n_valid) as u64,
        }
    }
}

fn generate_record(cfg: &GenConfig, split: Split, index: usize) -> ScoreRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.stream_offset(split) + index as u64);

    let spoof = rng.random::<f64>() < cfg.spoof_prior;
    let q = if spoof {
        cfg.mos_spoof.sample(&mut rng)
    } else {
        cfg.mos_bonafide.sample(&mut rng)
    };
    let mos_noise = Normal::new(0.0, cfg.mos_obs_sd).expect("validated");
    let mos: Vec<f64> = (0..cfg.n_mos_systems)
        .map(|_| (q + mos_noise.sample(&mut rng)).clamp(0.0, 5.0))
        .collect();
    let mos_fused = (!mos.is_empty())
        .then(|| (mos.iter().sum::<f64>() / mos.len() as f64).clamp(0.0, 5.0));

    let s = if spoof { 1.0 } else { -1.0 };
    let u = Normal::new(0.0, cfg.shared_noise_sd)
        .expect("validated")
        .sample(&mut rng);
    let informative = Normal::new(0.0, cfg.informative_noise_sd).expect("validated");
    let uninformative = Normal::new(0.0, cfg.uninformative_noise_sd).expect("validated");
    let fad = cfg
        .system_regimes
        .iter()
        .map(|regime| {
            let logit = if regime.contains(q) {
                -cfg.informative_slope * s + u + informative.sample(&mut rng)
            } else {
                u + uninformative.sample(&mut rng)
            };
            sigmoid(logit)
        })
        .collect();

    ScoreRecord {
        utt_id: format!("{}_{index:06}", split.as_str()),
        label: if spoof { Label::Spoof } else { Label::Bonafide },
        split,
        fad,
        mos,
        mos_fused,
    }
}

/// Generates one split. Record `i` draws from its own ChaCha stream, so the
/// output is identical however the work is scheduled.
pub fn generate_split(cfg: &GenConfig, split: Split) -> Result<Dataset> {
    cfg.validate()?;
    let records: Vec<ScoreRecord> = (0..cfg.split_size(split))
        .into_par_iter()
        .map(|i| generate_record(cfg, split, i))
        .collect();
    Dataset::with_dims(records, cfg.n_fad_systems, cfg.n_mos_systems)
}

/// Generates train, valid and eval splits, in that order.
pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    let parts = Split::ALL
        .iter()
        .map(|&s| generate_split(cfg, s))
        .collect::<Result<Vec<_>>>()?;
    Dataset::concat(&parts.iter().collect::<Vec<_>>())
}

// ---------------------------------------------------------------------------
// Bayes oracle

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const HERMITE_NODES: usize = 48;
const MAX_Q_STEP: f64 = 0.0025;

fn ln_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn ln_normal_cdf(z: f64) -> f64 {
    if z > -30.0 {
        normal_cdf(z).ln()
    } else {
        // asymptotic tail
        -0.5 * z * z - (-z).ln() - LN_SQRT_2PI
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Gauss-Hermite nodes and weights for `int f(x) exp(-x^2) dx`.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let mut out = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-0.16667),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * out[0].0,
            3 => 1.91 * z - 0.91 * out[1].0,
            _ => 2.0 * z - out[i - 2].0,
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        let w = 2.0 / (pp * pp);
        out[i] = (z, w);
        out[n - 1 - i] = (-z, w);
    }
    out
}

/// Closed-form posterior `P(bonafide | observed scores)` under a [`GenConfig`].
///
/// The FAD likelihood is constant in `q` between regime boundaries, so the
/// integral over `q` splits into segments: per segment the shared offset `u`
/// is integrated by Gauss-Hermite quadrature and the MOS likelihood by
/// Simpson's rule.
#[derive(Debug, Clone)]
pub struct Oracle {
    cfg: GenConfig,
    hermite: Vec<(f64, f64)>,
    segments: Vec<(f64, f64)>,
}

impl Oracle {
    pub fn new(cfg: &GenConfig) -> Result<Self> {
        cfg.validate()?;
        let mut cuts = vec![MOS_SUPPORT.0, MOS_SUPPORT.1];
        for r in &cfg.system_regimes {
            for b in [r.lo, r.hi] {
                if b > MOS_SUPPORT.0 && b < MOS_SUPPORT.1 {
                    cuts.push(b);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        Ok(Oracle {
            cfg: cfg.clone(),
            hermite: gauss_hermite(HERMITE_NODES),
            segments: cuts.windows(2).map(|w| (w[0], w[1])).collect(),
        })
    }

    pub fn config(&self) -> &GenConfig {
        &self.cfg
    }

    /// Log density of the FAD logits given the informative pattern and label,
    /// with the shared offset integrated out.
    fn ln_fad_likelihood(&self, logits: &[f64], informative: &[bool], spoof: bool) -> f64 {
        let cfg = &self.cfg;
        let s = if spoof { 1.0 } else { -1.0 };
        let mean_sd = |inf: bool| {
            if inf {
                (-cfg.informative_slope * s, cfg.informative_noise_sd)
            } else {
                (0.0, cfg.uninformative_noise_sd)
            }
        };
        // Nodes are centred on the conditional mode of u and scaled by its
        // conditional sd, so the quadrature stays accurate for extreme logits.
        let su = cfg.shared_noise_sd;
        let (mut prec, mut lin) = (1.0 / (su * su), 0.0);
        for (&l, &inf) in logits.iter().zip(informative) {
            let (mu, sd) = mean_sd(inf);
            prec += 1.0 / (sd * sd);
            lin += (l - mu) / (sd * sd);
        }
        let centre = lin / prec;
        let scale = (2.0 / prec).sqrt();
        let terms: Vec<f64> = self
            .hermite
            .iter()
            .map(|&(x, w)| {
                let u = centre + scale * x;
                let ll: f64 = logits
                    .iter()
                    .zip(informative)
                    .map(|(&l, &inf)| {
                        let (mu, sd) = mean_sd(inf);
                        ln_normal_pdf(l, mu + u, sd)
                    })
                    .sum();
                w.ln() + x * x + ln_normal_pdf(u, 0.0, su) + ll
            })
            .collect();
        log_sum_exp(&terms) + scale.ln()
    }

    fn ln_mos_obs(&self, mos: &[f64], q: f64) -> f64 {
        let sd = self.cfg.mos_obs_sd;
        mos.iter()
            .map(|&z| {
                if z >= 5.0 {
                    ln_normal_cdf((q - 5.0) / sd)
                } else if z <= 0.0 {
                    ln_normal_cdf(-q / sd)
                } else {
                    ln_normal_pdf(z, q, sd)
                }
            })
            .sum()
    }

    /// `log int_seg p(q | label) p(mos | q) dq` by composite Simpson.
    fn ln_mos_segment(&self, mos: &[f64], (a, b): (f64, f64), dist: &MosDistribution) -> f64 {
        let sd_eff = self.cfg.mos_obs_sd / (mos.len().max(1) as f64).sqrt();
        let step = MAX_Q_STEP.min(sd_eff / 8.0);
        let mut n = ((b - a) / step).ceil() as usize;
        n += n % 2;
        let n = n.max(2);
        let h = (b - a) / n as f64;
        let terms: Vec<f64> = (0..=n)
            .map(|k| {
                let q = a + k as f64 * h;
                let w: f64 = if k == 0 || k == n {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w.ln() + dist.ln_pdf(q) + self.ln_mos_obs(mos, q)
            })
            .collect();
        log_sum_exp(&terms) + (h / 3.0).ln()
    }

    fn ln_likelihood(&self, r: &ScoreRecord, spoof: bool) -> f64 {
        let dist = if spoof {
            &self.cfg.mos_spoof
        } else {
            &self.cfg.mos_bonafide
        };
        let logits: Vec<f64> = r
            .fad
            .iter()
            .map(|&f| {
                let f = f.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                f.ln() - (-f).ln_1p()
            })
            .collect();
        let terms: Vec<f64> = self
            .segments
            .iter()
            .map(|&(a, b)| {
                let mid = 0.5 * (a + b);
                let pattern: Vec<bool> = self
                    .cfg
                    .system_regimes
                    .iter()
                    .map(|reg| reg.contains(mid))
                    .collect();
                self.ln_fad_likelihood(&logits, &pattern, spoof) + self.ln_mos_segment(&r.mos, (a, b), dist)
            })
            .collect();
        log_sum_exp(&terms)
    }

    pub fn posterior(&self, r: &ScoreRecord) -> Result<f64> {
        if r.fad.len() != self.cfg.n_fad_systems || r.mos.len() != self.cfg.n_mos_systems {
            return Err(Error::DimensionMismatch(format!(
                "oracle expects ({}, {}) scores, record {} has ({}, {})",
                self.cfg.n_fad_systems,
                self.cfg.n_mos_systems,
                r.utt_id,
                r.fad.len(),
                r.mos.len()
            )));
        }
        let log_odds = (1.0 - self.cfg.spoof_prior).ln() - self.cfg.spoof_prior.ln()
            + self.ln_likelihood(r, false)
            - self.ln_likelihood(r, true);
        Ok(sigmoid(log_odds))
    }

    pub fn posteriors(&self, ds: &Dataset) -> Result<Vec<f64>> {
        ds.records().par_iter().map(|r| self.posterior(r)).collect()
    }
}

pub fn bayes_posterior(cfg: &GenConfig, r: &ScoreRecord) -> Result<f64> {
    Oracle::new(cfg)?.posterior(r)
}

/// EER of the Bayes posterior on the labelled records of `ds`.
pub fn oracle_eer(cfg: &GenConfig, ds: &Dataset) -> Result<f64> {
    let scores = Oracle::new(cfg)?.posteriors(ds)?;
    let (s, l) = crate::metrics::labelled(&scores, ds);
    Ok(compute_eer(&s, &l)?.eer)
}
