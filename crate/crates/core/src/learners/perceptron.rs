//! Online perceptron: mistake-driven additive updates.

use serde::{Deserialize, Serialize};

use super::{check_finite, grow, predict_linear, LearnerError, LinearScorer, OnlineLearner, Prediction};
use crate::graph::Label;
use crate::sparse::SparseVector;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerceptronModel {
    w: Vec<f64>,
}

impl PerceptronModel {
    pub fn new() -> Self {
        PerceptronModel::default()
    }
}

impl LinearScorer for PerceptronModel {
    fn predict(&self, x: &SparseVector) -> Prediction {
        predict_linear(&self.w, x)
    }

    fn weight(&self, feature: u32) -> f64 {
        self.w.get(feature as usize).copied().unwrap_or(0.0)
    }

    fn dim(&self) -> u32 {
        self.w.len() as u32
    }
}

impl OnlineLearner for PerceptronModel {
    /// w += y * x, only on mispredictions.
    fn learn(&mut self, x: &SparseVector, y: Label) -> Result<(), LearnerError> {
        check_finite(x)?;
        if self.predict(x).label == y {
            return Ok(());
        }
        let Some(max_index) = x.max_index() else {
            return Ok(());
        };
        grow(&mut self.w, max_index as usize + 1, 0.0);
        let yf = f64::from(y.to_i8());
        for (i, v) in x.iter() {
            self.w[i as usize] += yf * v;
        }
        Ok(())
    }

    fn kind(&self) -> &'static str {
        "perceptron"
    }
}
