//! Leaf-wise gradient-boosted decision trees on histogram-binned features,
//! with a binary logistic objective and validation-AUC early stopping.

mod bins;
mod split;
mod tree;

use serde::{Deserialize, Serialize};

pub use bins::BinMapper;
pub use split::{find_best_split, split_gain, SplitCandidate};
pub use tree::{Node, Tree};

use crate::error::{Error, Result};
use crate::fusion::sigmoid;
use crate::metrics::compute_auc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Auc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub objective: Objective,
    pub metric: Metric,
    pub num_leaves: usize,
    pub max_bin: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub num_rounds: usize,
    pub early_stopping_patience: usize,
    pub min_data_in_leaf: usize,
    pub lambda_l2: f64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            objective: Objective::Binary,
            metric: Metric::Auc,
            num_leaves: 16,
            max_bin: 25,
            max_depth: 4,
            learning_rate: 0.1,
            num_rounds: 100,
            early_stopping_patience: 20,
            min_data_in_leaf: 5,
            lambda_l2: 0.0,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("gbdt: {msg}")));
        if self.num_leaves < 2 {
            return bad("num_leaves must be >= 2");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if !(2..=u16::MAX as usize).contains(&self.max_bin) {
            return bad("max_bin must be >= 2");
        }
        if !(self.lambda_l2 >= 0.0) {
            return bad("lambda_l2 must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub config: GbdtConfig,
    pub n_features: usize,
    pub bin_boundaries: Vec<Vec<f64>>,
    /// Log-odds of the bona fide prior in the training data.
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    /// Probability of bona fide.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch(format!(
                "ensemble expects {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        Ok(sigmoid(self.raw_score(x)))
    }

    /// Same ensemble restricted to its first `rounds` trees.
    pub fn truncated(&self, rounds: usize) -> TreeEnsemble {
        TreeEnsemble {
            trees: self.trees[..rounds.min(self.trees.len())].to_vec(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    pub train_logloss: f64,
    pub valid_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtHistory {
    pub rounds: Vec<RoundStats>,
    /// Number of trees kept in the returned ensemble.
    pub best_round: usize,
}

fn logloss(raw: &[f64], y: &[f64]) -> f64 {
    raw.iter()
        .zip(y)
        .map(|(&f, &t)| crate::fusion::bce_loss(sigmoid(f), t))
        .sum::<f64>()
        / raw.len() as f64
}

fn check_rows(x: &[Vec<f64>], y: &[f64], what: &str) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let d = x.first().map_or(0, Vec::len);
    if let Some(r) = x.iter().position(|r| r.len() != d) {
        return Err(Error::DimensionMismatch(format!("{what}: row {r} has a different width")));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{what} features")));
    }
    Ok(d)
}

/// Boosts trees on `(train_x, train_y)` with `y = 1` for bona fide.
///
/// When a validation set is given, training stops once validation AUC has not
/// improved for `early_stopping_patience` rounds and the best prefix is kept.
pub fn train_gbdt(
    train_x: &[Vec<f64>],
    train_y: &[f64],
    valid: Option<(&[Vec<f64>], &[f64])>,
    config: &GbdtConfig,
) -> Result<(TreeEnsemble, GbdtHistory)> {
    config.validate()?;
    let d = check_rows(train_x, train_y, "train")?;
    let n_pos = train_y.iter().filter(|&&t| t == 1.0).count();
    if n_pos == 0 || n_pos == train_y.len() {
        return Err(Error::SingleClass("gbdt training set".into()));
    }
    let valid = match valid {
        Some((vx, vy)) => {
            let vd = check_rows(vx, vy, "valid")?;
            if vd != d && !vx.is_empty() {
                return Err(Error::DimensionMismatch(format!(
                    "valid has {vd} features, train has {d}"
                )));
            }
            let vlabels: Vec<bool> = vy.iter().map(|&t| t == 1.0).collect();
            let both = vlabels.iter().any(|&b| b) && vlabels.iter().any(|&b| !b);
            both.then_some((vx, vlabels))
        }
        None => None,
    };

    let mapper = BinMapper::build(train_x, config.max_bin);
    let binned = mapper.bin_rows(train_x);
    let prior = n_pos as f64 / train_y.len() as f64;
    let base_score = (prior / (1.0 - prior)).ln();

    let mut ensemble = TreeEnsemble {
        config: config.clone(),
        n_features: d,
        bin_boundaries: mapper.boundaries.clone(),
        base_score,
        trees: Vec::new(),
    };
    let mut raw = vec![base_score; train_x.len()];
    let mut valid_raw: Vec<f64> = valid
        .as_ref()
        .map(|(vx, _)| vec![base_score; vx.len()])
        .unwrap_or_default();
    let mut history = GbdtHistory {
        rounds: Vec::new(),
        best_round: 0,
    };
    let mut best_auc = f64::NEG_INFINITY;
    let mut grad = vec![0.0; raw.len()];
    let mut hess = vec![0.0; raw.len()];

    for round in 1..=config.num_rounds {
        for i in 0..raw.len() {
            let p = sigmoid(raw[i]);
            grad[i] = p - train_y[i];
            hess[i] = p * (1.0 - p);
        }
        let Some(tree) = tree::grow_tree(&grad, &hess, &binned, &mapper, config) else {
            break;
        };
        for (f, x) in raw.iter_mut().zip(train_x) {
            *f += tree.predict(x);
        }
        let mut valid_auc = None;
        if let Some((vx, vlabels)) = &valid {
            for (f, x) in valid_raw.iter_mut().zip(vx.iter()) {
                *f += tree.predict(x);
            }
            valid_auc = Some(compute_auc(&valid_raw, vlabels)?);
        }
        ensemble.trees.push(tree);
        history.rounds.push(RoundStats {
            round,
            train_logloss: logloss(&raw, train_y),
            valid_auc,
        });
        match valid_auc {
            Some(auc) => {
                if auc > best_auc {
                    best_auc = auc;
                    history.best_round = round;
                } else if round - history.best_round >= config.early_stopping_patience {
                    break;
                }
            }
            None => history.best_round = round,
        }
    }
    Ok((ensemble.truncated(history.best_round), history))
}
