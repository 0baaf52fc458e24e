//! Fusion models: MLP, Gated MLP, MOS fuser, and GBDT, with the MOS
//! thresholding wrapper and batch prediction.

mod gated;
mod mlp;
mod mos_fuser;
mod network;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gated::{GatedMlpParams, GatedOutput};
pub use mlp::{HiddenSize, MlpParams, DEFAULT_HIDDEN};
pub use mos_fuser::MosFuserParams;
pub use network::{bce_loss, sigmoid, Differentiable, Sample, BCE_EPS};

use crate::data::{Dataset, ScoreRecord};
use crate::error::{Error, Result};
use crate::gbdt::TreeEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    pub m1: f64,
    pub m2: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig { m1: 2.5, m2: 4.0 }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.m1 && self.m1 < self.m2 && self.m2 <= 5.0) {
            return Err(Error::InvalidConfig(format!(
                "thresholds must satisfy 0 <= m1 < m2 <= 5, got m1={} m2={}",
                self.m1, self.m2
            )));
        }
        Ok(())
    }
}

/// Hard MOS override: fake below `m1`, real above `m2`, otherwise the base
/// score untouched. MOS exactly at `m1` or `m2` passes through.
pub fn apply_threshold(cfg: &ThresholdConfig, mos_fused: f64, base_score: f64) -> f64 {
    if mos_fused < cfg.m1 {
        0.0
    } else if mos_fused > cfg.m2 {
        1.0
    } else {
        base_score
    }
}

/// Which record fields form a model's input vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// FAD scores only.
    Fad,
    /// FAD scores followed by the fused MOS.
    FadFused,
    /// FAD scores followed by every MOS component.
    FadMos,
}

impl FeatureSet {
    pub fn dim(self, ds_fad: usize, ds_mos: usize) -> usize {
        match self {
            FeatureSet::Fad => ds_fad,
            FeatureSet::FadFused => ds_fad + 1,
            FeatureSet::FadMos => ds_fad + ds_mos,
        }
    }

    pub fn extract(self, r: &ScoreRecord) -> Result<Vec<f64>> {
        let mut x = r.fad.clone();
        match self {
            FeatureSet::Fad => {}
            FeatureSet::FadFused => x.push(fused_mos(r)?),
            FeatureSet::FadMos => x.extend_from_slice(&r.mos),
        }
        Ok(x)
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fad" => Ok(FeatureSet::Fad),
            "fad-fused" | "fad_fused" => Ok(FeatureSet::FadFused),
            "fad-mos" | "fad_mos" => Ok(FeatureSet::FadMos),
            other => Err(format!("unknown feature set {other:?}")),
        }
    }
}

/// What drives the gate decoder of a Gated MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateInput {
    /// Score fusion: the scalar fused MOS.
    #[default]
    Fused,
    /// Embedding fusion: the full MOS vector.
    Mos,
}

impl GateInput {
    pub fn dim(self, ds_mos: usize) -> usize {
        match self {
            GateInput::Fused => 1,
            GateInput::Mos => ds_mos,
        }
    }

    pub fn extract(self, r: &ScoreRecord) -> Result<Vec<f64>> {
        match self {
            GateInput::Fused => Ok(vec![fused_mos(r)?]),
            GateInput::Mos => Ok(r.mos.clone()),
        }
    }
}

pub(crate) fn fused_mos(r: &ScoreRecord) -> Result<f64> {
    r.mos_fused
        .ok_or_else(|| Error::record(&r.utt_id, "mos_fused is required but absent"))
}

/// Anything that maps a record to a score.
pub trait Scorer: Sync {
    fn score(&self, r: &ScoreRecord) -> Result<f64>;
}

/// A trained fusion model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "snake_case")]
pub enum FusionModel {
    Mlp {
        features: FeatureSet,
        params: MlpParams,
    },
    GatedMlp {
        gate_input: GateInput,
        params: GatedMlpParams,
    },
    MosFuser {
        params: MosFuserParams,
    },
    Gbdt {
        features: FeatureSet,
        ensemble: TreeEnsemble,
    },
}

impl FusionModel {
    pub fn kind(&self) -> &'static str {
        match self {
            FusionModel::Mlp { .. } => "mlp",
            FusionModel::GatedMlp { .. } => "gated_mlp",
            FusionModel::MosFuser { .. } => "mos_fuser",
            FusionModel::Gbdt { .. } => "gbdt",
        }
    }

    /// Fails unless records of `ds` fit this model's input shapes.
    pub fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        let (n, m) = (ds.fad_dim(), ds.mos_dim());
        let (want, have) = match self {
            FusionModel::Mlp { features, params } => (params.in_dim, features.dim(n, m)),
            FusionModel::GatedMlp { gate_input, params } => {
                if params.fad_dim != n {
                    return Err(Error::DimensionMismatch(format!(
                        "gated MLP expects {} FAD scores, data has {n}",
                        params.fad_dim
                    )));
                }
                (params.mos_dim, gate_input.dim(m))
            }
            FusionModel::MosFuser { params } => (params.dim(), m),
            FusionModel::Gbdt { features, ensemble } => (ensemble.n_features, features.dim(n, m)),
        };
        if want != have && !ds.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} model expects {want} inputs, data provides {have}",
                self.kind()
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FusionModel::Mlp { params, .. } => params.validate(),
            FusionModel::GatedMlp { params, .. } => params.validate(),
            FusionModel::MosFuser { params } => params.validate(),
            FusionModel::Gbdt { ensemble, .. } => ensemble.config.validate(),
        }
    }
}

impl Scorer for FusionModel {
    fn score(&self, r: &ScoreRecord) -> Result<f64> {
        match self {
            FusionModel::Mlp { features, params } => params.forward(&features.extract(r)?),
            FusionModel::GatedMlp { gate_input, params } => {
                Ok(params.forward(&r.fad, &gate_input.extract(r)?)?.score)
            }
            FusionModel::MosFuser { params } => params.forward(&r.mos),
            FusionModel::Gbdt { features, ensemble } => ensemble.predict(&features.extract(r)?),
        }
    }
}

/// Wraps a scorer with the MOS threshold override, keyed on `mos_fused`.
#[derive(Debug, Clone, Copy)]
pub struct Thresholded<'a, S: Scorer> {
    pub base: &'a S,
    pub cfg: ThresholdConfig,
}

impl<'a, S: Scorer> Thresholded<'a, S> {
    pub fn new(base: &'a S, cfg: ThresholdConfig) -> Self {
        Thresholded { base, cfg }
    }
}

impl<S: Scorer> Scorer for Thresholded<'_, S> {
    fn score(&self, r: &ScoreRecord) -> Result<f64> {
        let base = self.base.score(r)?;
        Ok(apply_threshold(&self.cfg, fused_mos(r)?, base))
    }
}

/// Scores every record, in record order. Records are scored in parallel.
pub fn predict_batch<S: Scorer>(model: &S, ds: &Dataset) -> Result<Vec<f64>> {
    ds.records().par_iter().map(|r| model.score(r)).collect()
}

/// On-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub model: FusionModel,
    pub init_seed: Option<u64>,
    /// Echo of the configuration the model was trained with.
    pub train_config: serde_json::Value,
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        file.model.validate()?;
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, Split};

    fn rec(z: Option<f64>) -> ScoreRecord {
        ScoreRecord {
            utt_id: "x".into(),
            label: Label::Spoof,
            split: Split::Eval,
            fad: vec![0.2, 0.7],
            mos: vec![3.0, 3.2],
            mos_fused: z,
        }
    }

    #[test]
    fn threshold_regions() {
        let cfg = ThresholdConfig::default();
        assert_eq!(apply_threshold(&cfg, 2.0, 0.9), 0.0);
        assert_eq!(apply_threshold(&cfg, 4.5, 0.1), 1.0);
        assert_eq!(apply_threshold(&cfg, 3.1, 0.42).to_bits(), 0.42f64.to_bits());
        assert_eq!(apply_threshold(&cfg, 2.5, 0.3), 0.3);
        assert_eq!(apply_threshold(&cfg, 4.0, 0.3), 0.3);
    }

    #[test]
    fn threshold_config_validation() {
        assert!(ThresholdConfig::default().validate().is_ok());
        assert!(ThresholdConfig { m1: 4.0, m2: 2.5 }.validate().is_err());
        assert!(ThresholdConfig { m1: -1.0, m2: 2.5 }.validate().is_err());
    }

    #[test]
    fn feature_sets() {
        let r = rec(Some(3.1));
        assert_eq!(FeatureSet::Fad.extract(&r).unwrap(), vec![0.2, 0.7]);
        assert_eq!(FeatureSet::FadFused.extract(&r).unwrap(), vec![0.2, 0.7, 3.1]);
        assert_eq!(FeatureSet::FadMos.extract(&r).unwrap(), vec![0.2, 0.7, 3.0, 3.2]);
        assert!(FeatureSet::FadFused.extract(&rec(None)).is_err());
    }

    #[test]
    fn thresholded_wrapper_requires_fused_mos() {
        let model = FusionModel::Mlp {
            features: FeatureSet::Fad,
            params: MlpParams::zeros(2, 3),
        };
        let t = Thresholded::new(&model, ThresholdConfig::default());
        assert_eq!(t.score(&rec(Some(1.0))).unwrap(), 0.0);
        assert_eq!(t.score(&rec(Some(3.0))).unwrap(), 0.5);
        assert!(t.score(&rec(None)).is_err());
    }

    #[test]
    fn predict_batch_empty() {
        let model = FusionModel::MosFuser {
            params: MosFuserParams::averaging(2),
        };
        assert!(predict_batch(&model, &Dataset::empty(2, 2)).unwrap().is_empty());
    }
}
