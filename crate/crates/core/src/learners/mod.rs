//! Online linear classifiers over sparse vectors with growing dimension, and
//! the batch max-margin baseline they are compared against.
//!
//! All learners share the same hypothesis class: a linear score w.x through
//! the origin, with the predicted label sign(score) and score 0 resolving to
//! benign. Models lazily extend to the largest feature index they encounter;
//! a feature the model has never touched behaves exactly like weight 0 (and,
//! for the confidence-weighted learner, initial variance `a`).

pub mod batch;
mod cw;
mod logistic_sgd;
mod passive_aggressive;
mod perceptron;
pub mod persist;

pub use batch::{batch_train, BatchModel, BatchTrainConfig};
pub use cw::CwModel;
pub use logistic_sgd::LrSgdModel;
pub use passive_aggressive::PaModel;
pub use perceptron::PerceptronModel;
pub use persist::{load_model, load_model_unchecked, save_model, ModelFile, PersistError, SavedModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Label;
use crate::sparse::SparseVector;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("sample rejected: non-finite value {value} at feature {index}")]
    NonFiniteFeature { index: u32, value: f64 },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid hyperparameter {name} = {value}")]
    BadHyperparameter { name: &'static str, value: f64 },
}

/// A classification decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// sign(score); score 0 resolves to benign.
    pub label: Label,
    /// Inner product of the weight (mean) vector with the sample.
    pub score: f64,
    /// Margin confidence. The confidence-weighted learner reports
    /// score / sqrt(x' Sigma x) (+inf for the zero vector); the other
    /// learners report |score|.
    pub confidence: f64,
}

/// Read-only view of a linear model: enough for prediction and explanation.
pub trait LinearScorer {
    fn predict(&self, x: &SparseVector) -> Prediction;
    /// Mean weight of one feature (0 for features beyond the model).
    fn weight(&self, feature: u32) -> f64;
    /// Current dense dimension.
    fn dim(&self) -> u32;
}

/// A learner updated one labeled sample at a time, in stream order.
pub trait OnlineLearner: LinearScorer {
    fn learn(&mut self, x: &SparseVector, y: Label) -> Result<(), LearnerError>;
    fn kind(&self) -> &'static str;
}

pub(crate) fn check_finite(x: &SparseVector) -> Result<(), LearnerError> {
    for (index, value) in x.iter() {
        if !value.is_finite() {
            return Err(LearnerError::NonFiniteFeature { index, value });
        }
    }
    Ok(())
}

pub(crate) fn grow(v: &mut Vec<f64>, len: usize, fill: f64) {
    if v.len() < len {
        v.resize(len, fill);
    }
}

/// The available online learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    Cw,
    Pa,
    Perceptron,
    LrSgd,
}

impl LearnerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Cw => "cw",
            LearnerKind::Pa => "pa",
            LearnerKind::Perceptron => "perceptron",
            LearnerKind::LrSgd => "lrsgd",
        }
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cw" => Ok(LearnerKind::Cw),
            "pa" => Ok(LearnerKind::Pa),
            "perceptron" => Ok(LearnerKind::Perceptron),
            "lrsgd" => Ok(LearnerKind::LrSgd),
            other => Err(format!("unknown learner {other:?}")),
        }
    }
}

/// Hyperparameters for constructing an online learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    /// CW confidence level, in (0.5, 1).
    pub eta: f64,
    /// CW initial variance for newly seen features.
    pub initial_variance: f64,
    /// Logistic-SGD step size.
    pub learning_rate: f64,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec {
            kind: LearnerKind::Cw,
            eta: 0.9,
            initial_variance: 1.0,
            learning_rate: 0.1,
        }
    }
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        LearnerSpec {
            kind,
            ..Default::default()
        }
    }

    pub fn build(&self) -> Result<OnlineModel, LearnerError> {
        Ok(match self.kind {
            LearnerKind::Cw => OnlineModel::Cw(CwModel::new(self.eta, self.initial_variance)?),
            LearnerKind::Pa => OnlineModel::PassiveAggressive(PaModel::new()),
            LearnerKind::Perceptron => OnlineModel::Perceptron(PerceptronModel::new()),
            LearnerKind::LrSgd => OnlineModel::LogisticSgd(LrSgdModel::new(self.learning_rate)?),
        })
    }
}

/// Concrete online model, serializable for the model file container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum OnlineModel {
    #[serde(rename = "cw")]
    Cw(CwModel),
    #[serde(rename = "pa")]
    PassiveAggressive(PaModel),
    #[serde(rename = "perceptron")]
    Perceptron(PerceptronModel),
    #[serde(rename = "lrsgd")]
    LogisticSgd(LrSgdModel),
}

impl LinearScorer for OnlineModel {
    fn predict(&self, x: &SparseVector) -> Prediction {
        match self {
            OnlineModel::Cw(m) => m.predict(x),
            OnlineModel::PassiveAggressive(m) => m.predict(x),
            OnlineModel::Perceptron(m) => m.predict(x),
            OnlineModel::LogisticSgd(m) => m.predict(x),
        }
    }

    fn weight(&self, feature: u32) -> f64 {
        match self {
            OnlineModel::Cw(m) => m.weight(feature),
            OnlineModel::PassiveAggressive(m) => m.weight(feature),
            OnlineModel::Perceptron(m) => m.weight(feature),
            OnlineModel::LogisticSgd(m) => m.weight(feature),
        }
    }

    fn dim(&self) -> u32 {
        match self {
            OnlineModel::Cw(m) => m.dim(),
            OnlineModel::PassiveAggressive(m) => m.dim(),
            OnlineModel::Perceptron(m) => m.dim(),
            OnlineModel::LogisticSgd(m) => m.dim(),
        }
    }
}

impl OnlineLearner for OnlineModel {
    fn learn(&mut self, x: &SparseVector, y: Label) -> Result<(), LearnerError> {
        match self {
            OnlineModel::Cw(m) => m.learn(x, y),
            OnlineModel::PassiveAggressive(m) => m.learn(x, y),
            OnlineModel::Perceptron(m) => m.learn(x, y),
            OnlineModel::LogisticSgd(m) => m.learn(x, y),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            OnlineModel::Cw(m) => m.kind(),
            OnlineModel::PassiveAggressive(m) => m.kind(),
            OnlineModel::Perceptron(m) => m.kind(),
            OnlineModel::LogisticSgd(m) => m.kind(),
        }
    }
}

/// Shared prediction for the plain weight-vector learners.
pub(crate) fn predict_linear(w: &[f64], x: &SparseVector) -> Prediction {
    let score = x.dot_dense(w);
    Prediction {
        label: Label::from_score(score),
        score,
        confidence: score.abs(),
    }
}
