//! Logistic regression trained by stochastic gradient descent, one sample
//! per step.

use serde::{Deserialize, Serialize};

use super::{check_finite, grow, predict_linear, LearnerError, LinearScorer, OnlineLearner, Prediction};
use crate::graph::Label;
use crate::sparse::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSgdModel {
    w: Vec<f64>,
    learning_rate: f64,
}

impl LrSgdModel {
    pub fn new(learning_rate: f64) -> Result<Self, LearnerError> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(LearnerError::BadHyperparameter {
                name: "learning_rate",
                value: learning_rate,
            });
        }
        Ok(LrSgdModel {
            w: Vec::new(),
            learning_rate,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LinearScorer for LrSgdModel {
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

impl OnlineLearner for LrSgdModel {
    /// w += lr * y * x * sigmoid(-y (w.x)): the negative gradient of the
    /// per-sample logistic loss.
    fn learn(&mut self, x: &SparseVector, y: Label) -> Result<(), LearnerError> {
        check_finite(x)?;
        let Some(max_index) = x.max_index() else {
            return Ok(());
        };
        grow(&mut self.w, max_index as usize + 1, 0.0);
        let yf = f64::from(y.to_i8());
        let step = self.learning_rate * sigmoid(-yf * x.dot_dense(&self.w));
        for (i, v) in x.iter() {
            self.w[i as usize] += step * yf * v;
        }
        Ok(())
    }

    fn kind(&self) -> &'static str {
        "lrsgd"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_from_zero_is_half_the_learning_rate() {
        let mut m = LrSgdModel::new(0.1).unwrap();
        let x = SparseVector::from_pairs([(0, 2.0), (1, 1.0)]);
        m.learn(&x, Label::Malicious).unwrap();
        // sigmoid(0) = 0.5
        assert!((m.weight(0) - 0.1 * 0.5 * 2.0).abs() < 1e-15);
        assert!((m.weight(1) - 0.1 * 0.5 * 1.0).abs() < 1e-15);
    }

    #[test]
    fn updates_even_when_correct() {
        let mut m = LrSgdModel::new(0.5).unwrap();
        let x = SparseVector::from_pairs([(0, 1.0)]);
        m.learn(&x, Label::Malicious).unwrap();
        let w1 = m.weight(0);
        m.learn(&x, Label::Malicious).unwrap();
        assert!(m.weight(0) > w1, "gradient never vanishes exactly");
    }

    #[test]
    fn rejects_bad_learning_rates() {
        assert!(LrSgdModel::new(0.0).is_err());
        assert!(LrSgdModel::new(f64::NAN).is_err());
    }
}
