//! Passive-aggressive updates: the smallest weight change that zeroes the
//! hinge loss on the current sample.

use serde::{Deserialize, Serialize};

use super::{check_finite, grow, predict_linear, LearnerError, LinearScorer, OnlineLearner, Prediction};
use crate::graph::Label;
use crate::sparse::SparseVector;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PaModel {
    w: Vec<f64>,
}

impl PaModel {
    pub fn new() -> Self {
        PaModel::default()
    }
}

impl LinearScorer for PaModel {
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

impl OnlineLearner for PaModel {
    /// w += tau * y * x with tau = max(0, 1 - y(w.x)) / ||x||^2, so the
    /// hinge loss on the just-seen sample becomes 0. Zero vectors are
    /// skipped: no weight change can affect their score.
    fn learn(&mut self, x: &SparseVector, y: Label) -> Result<(), LearnerError> {
        check_finite(x)?;
        let norm_sq = x.norm_sq();
        if norm_sq == 0.0 {
            return Ok(());
        }
        let yf = f64::from(y.to_i8());
        let loss = (1.0 - yf * x.dot_dense(&self.w)).max(0.0);
        if loss == 0.0 {
            return Ok(());
        }
        let tau = loss / norm_sq;
        grow(&mut self.w, x.max_index().unwrap() as usize + 1, 0.0);
        for (i, v) in x.iter() {
            self.w[i as usize] += tau * yf * v;
        }
        Ok(())
    }

    fn kind(&self) -> &'static str {
        "pa"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sample_from_zero_score_lands_exactly_on_the_margin() {
        let mut m = PaModel::new();
        let x = SparseVector::from_pairs([(0, 0.6), (1, 0.8)]); // ||x||^2 = 1
        m.learn(&x, Label::Malicious).unwrap();
        let p = m.predict(&x);
        assert!((p.score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn post_update_hinge_loss_is_zero() {
        let mut m = PaModel::new();
        for (pairs, y) in [
            (vec![(0, 2.0), (3, 1.0)], Label::Malicious),
            (vec![(1, 1.0), (3, 4.0)], Label::Benign),
            (vec![(0, 1.0)], Label::Benign),
        ] {
            let x = SparseVector::from_pairs(pairs.into_iter().map(|(i, v)| (i as u32, v)));
            m.learn(&x, y).unwrap();
            let margin = f64::from(y.to_i8()) * m.predict(&x).score;
            assert!(margin >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn zero_vector_is_skipped() {
        let mut m = PaModel::new();
        m.learn(&SparseVector::empty(), Label::Malicious).unwrap();
        assert_eq!(m, PaModel::new());
    }
}
