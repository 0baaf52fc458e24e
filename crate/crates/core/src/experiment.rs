//! End-to-end fusion benchmark on the synthetic corpus: generate, filter the
//! training data by MOS, train every fusion model, and score the eval split
//! with and without the MOS threshold override.

use serde::{Deserialize, Serialize};

use crate::data::{select_split, Dataset, Split};
use crate::error::Result;
use crate::filter::{filter_by_mos, FilterConfig, MosKey};
use crate::fusion::{
    predict_batch, FeatureSet, FusionModel, GateInput, HiddenSize, Scorer, ThresholdConfig,
    Thresholded,
};
use crate::gbdt::{train_gbdt, GbdtConfig, GbdtHistory};
use crate::metrics::{compute_eer, labelled};
use crate::synth::{generate_split, GenConfig, Oracle};
use crate::train::{train_model, ModelSpec, TrainConfig};

/// Fusion systems compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    /// MLP on FAD scores only.
    FadMlp,
    /// GBDT on FAD scores only.
    FadGbdt,
    /// MLP on FAD scores plus fused MOS.
    Mlp,
    /// GBDT on FAD scores plus fused MOS.
    Gbdt,
    GatedMlp,
    MlpThreshold,
    GbdtThreshold,
    GatedMlpThreshold,
}

impl System {
    pub const ALL: [System; 8] = [
        System::FadMlp,
        System::FadGbdt,
        System::Mlp,
        System::Gbdt,
        System::GatedMlp,
        System::MlpThreshold,
        System::GbdtThreshold,
        System::GatedMlpThreshold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            System::FadMlp => "FAD fusion / MLP",
            System::FadGbdt => "FAD fusion / GBDT",
            System::Mlp => "MOS-FAD fusion / MLP",
            System::Gbdt => "MOS-FAD fusion / GBDT",
            System::GatedMlp => "MOS-FAD fusion / Gated MLP",
            System::MlpThreshold => "MOS-FAD fusion / MLP + threshold",
            System::GbdtThreshold => "MOS-FAD fusion / GBDT + threshold",
            System::GatedMlpThreshold => "MOS-FAD fusion / Gated MLP + threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub gen: GenConfig,
    /// Apply the MOS filter to the train and valid splits.
    pub filter_training: bool,
    pub filter: FilterConfig,
    pub train: TrainConfig,
    pub gbdt: GbdtConfig,
    pub threshold: ThresholdConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            gen: GenConfig::default(),
            filter_training: true,
            filter: FilterConfig::default(),
            train: TrainConfig::default(),
            gbdt: GbdtConfig::default(),
            threshold: ThresholdConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResult {
    pub system: System,
    pub eer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub seed: u64,
    pub n_train: usize,
    pub n_valid: usize,
    pub oracle_eer: f64,
    pub results: Vec<SystemResult>,
}

impl BenchmarkRun {
    pub fn eer(&self, system: System) -> Option<f64> {
        self.results
            .iter()
            .find(|r| r.system == system)
            .map(|r| r.eer)
    }
}

/// Trained fusion models of one benchmark run.
pub struct TrainedSystems {
    pub fad_mlp: FusionModel,
    pub fad_gbdt: FusionModel,
    pub mlp: FusionModel,
    pub gbdt: FusionModel,
    pub gated_mlp: FusionModel,
}

pub fn gbdt_features(ds: &Dataset, features: FeatureSet) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let x = ds.iter().map(|r| features.extract(r)).collect::<Result<Vec<_>>>()?;
    Ok((x, ds.targets()?))
}

pub fn train_gbdt_model(
    train: &Dataset,
    valid: &Dataset,
    features: FeatureSet,
    cfg: &GbdtConfig,
) -> Result<(FusionModel, GbdtHistory)> {
    let (tx, ty) = gbdt_features(train, features)?;
    let (vx, vy) = gbdt_features(valid, features)?;
    let (ensemble, history) = train_gbdt(&tx, &ty, Some((&vx, &vy)), cfg)?;
    Ok((FusionModel::Gbdt { features, ensemble }, history))
}

/// Train/valid data as the benchmark feeds it to the models.
pub fn training_data(cfg: &BenchmarkConfig) -> Result<(Dataset, Dataset)> {
    let train = generate_split(&cfg.gen, Split::Train)?;
    let valid = generate_split(&cfg.gen, Split::Valid)?;
    if cfg.filter_training {
        Ok((
            filter_by_mos(&train, MosKey::Auto, &cfg.filter)?,
            filter_by_mos(&valid, MosKey::Auto, &cfg.filter)?,
        ))
    } else {
        Ok((train, valid))
    }
}

pub fn train_systems(cfg: &BenchmarkConfig, train: &Dataset, valid: &Dataset) -> Result<TrainedSystems> {
    let mlp = |features| ModelSpec::Mlp {
        features,
        hidden: HiddenSize::Three,
    };
    let gated = ModelSpec::GatedMlp {
        gate_input: GateInput::Fused,
        hidden: HiddenSize::Three,
    };
    let specs = [mlp(FeatureSet::Fad), mlp(FeatureSet::FadFused), gated];
    let mut nets = specs
        .iter()
        .map(|spec| train_model(spec, train, valid, &cfg.train).map(|(m, _)| m))
        .collect::<Result<Vec<_>>>()?
        .into_iter();
    let (fad_mlp, mlp, gated_mlp) = (
        nets.next().expect("three"),
        nets.next().expect("three"),
        nets.next().expect("three"),
    );
    Ok(TrainedSystems {
        fad_mlp,
        fad_gbdt: train_gbdt_model(train, valid, FeatureSet::Fad, &cfg.gbdt)?.0,
        mlp,
        gbdt: train_gbdt_model(train, valid, FeatureSet::FadFused, &cfg.gbdt)?.0,
        gated_mlp,
    })
}

fn eval_eer<S: Scorer>(model: &S, eval: &Dataset) -> Result<f64> {
    let scores = predict_batch(model, eval)?;
    let (s, l) = labelled(&scores, eval);
    Ok(compute_eer(&s, &l)?.eer)
}

pub fn evaluate_systems(
    systems: &TrainedSystems,
    eval: &Dataset,
    threshold: ThresholdConfig,
) -> Result<Vec<SystemResult>> {
    System::ALL
        .iter()
        .map(|&system| {
            let thr = |m| Thresholded::new(m, threshold);
            let eer = match system {
                System::FadMlp => eval_eer(&systems.fad_mlp, eval)?,
                System::FadGbdt => eval_eer(&systems.fad_gbdt, eval)?,
                System::Mlp => eval_eer(&systems.mlp, eval)?,
                System::Gbdt => eval_eer(&systems.gbdt, eval)?,
                System::GatedMlp => eval_eer(&systems.gated_mlp, eval)?,
                System::MlpThreshold => eval_eer(&thr(&systems.mlp), eval)?,
                System::GbdtThreshold => eval_eer(&thr(&systems.gbdt), eval)?,
                System::GatedMlpThreshold => eval_eer(&thr(&systems.gated_mlp), eval)?,
            };
            Ok(SystemResult { system, eer })
        })
        .collect()
}

/// One full benchmark run; `seed` drives both the corpus and the training.
pub fn run_benchmark(base: &BenchmarkConfig, seed: u64) -> Result<BenchmarkRun> {
    let mut cfg = base.clone();
    cfg.gen.seed = seed;
    cfg.train.seed = seed;
    let (train, valid) = training_data(&cfg)?;
    let eval = select_split(&generate_split(&cfg.gen, Split::Eval)?, Split::Eval);
    let systems = train_systems(&cfg, &train, &valid)?;
    let oracle = Oracle::new(&cfg.gen)?;
    let posteriors = oracle.posteriors(&eval)?;
    let (s, l) = labelled(&posteriors, &eval);
    Ok(BenchmarkRun {
        seed,
        n_train: train.len(),
        n_valid: valid.len(),
        oracle_eer: compute_eer(&s, &l)?.eer,
        results: evaluate_systems(&systems, &eval, cfg.threshold)?,
    })
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median EER per system over several runs, in [`System::ALL`] order.
pub fn median_eers(runs: &[BenchmarkRun]) -> Vec<(System, f64)> {
    System::ALL
        .iter()
        .map(|&s| {
            let mut v: Vec<f64> = runs.iter().filter_map(|r| r.eer(s)).collect();
            (s, median(&mut v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }
}
