//! Batch linear max-margin baseline: L2-regularized hinge loss trained to
//! convergence by dual coordinate descent over the fixed feature set observed
//! in the training batch.
//!
//! Same hypothesis class as the online learners (a linear score through the
//! origin, no bias term), so regimen comparisons isolate the training
//! paradigm rather than the model family.

use log::warn;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{check_finite, predict_linear, LearnerError, LinearScorer, Prediction};
use crate::graph::Label;
use crate::sparse::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchTrainConfig {
    /// Upper bound on the dual variables (the hinge-loss cost C).
    pub cost: f64,
    /// Convergence threshold on the largest projected gradient in an epoch.
    pub tolerance: f64,
    pub max_epochs: usize,
    /// Seed for the per-epoch coordinate permutations.
    pub seed: u64,
}

impl Default for BatchTrainConfig {
    fn default() -> Self {
        BatchTrainConfig {
            cost: 1.0,
            tolerance: 1e-6,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchModel {
    w: Vec<f64>,
    /// The training batch contained only one class.
    pub single_class: bool,
}

impl LinearScorer for BatchModel {
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

/// Trains min_w 1/2 ||w||^2 + C * sum_i hinge(y_i, w.x_i) via its dual,
/// one coordinate (sample) at a time in seeded random order.
pub fn batch_train(
    samples: &[(SparseVector, Label)],
    config: &BatchTrainConfig,
) -> Result<BatchModel, LearnerError> {
    if samples.is_empty() {
        return Err(LearnerError::EmptyTrainingSet);
    }
    for (x, _) in samples {
        check_finite(x)?;
    }

    let single_class = {
        let first = samples[0].1;
        samples.iter().all(|&(_, y)| y == first)
    };
    if single_class {
        warn!(
            "batch training set contains a single class ({:?}); the model can only lean one way",
            samples[0].1
        );
    }

    let dim = samples
        .iter()
        .filter_map(|(x, _)| x.max_index())
        .max()
        .map_or(0, |m| m as usize + 1);
    let mut w = vec![0.0; dim];
    let mut alphas = vec![0.0; samples.len()];
    let norms: Vec<f64> = samples.iter().map(|(x, _)| x.norm_sq()).collect();

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = StdRng::seed_from_u64(config.seed);

    for _epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut max_violation = 0.0f64;
        for &i in &order {
            if norms[i] == 0.0 {
                continue; // zero vectors have no dual direction
            }
            let (x, y) = &samples[i];
            let yf = f64::from(y.to_i8());
            let gradient = yf * x.dot_dense(&w) - 1.0;
            let alpha = alphas[i];
            let projected = if alpha == 0.0 {
                gradient.min(0.0)
            } else if alpha == config.cost {
                gradient.max(0.0)
            } else {
                gradient
            };
            max_violation = max_violation.max(projected.abs());
            if projected.abs() > 1e-12 {
                let updated = (alpha - gradient / norms[i]).clamp(0.0, config.cost);
                let delta = updated - alpha;
                if delta != 0.0 {
                    for (f, v) in x.iter() {
                        w[f as usize] += delta * yf * v;
                    }
                    alphas[i] = updated;
                }
            }
        }
        if max_violation < config.tolerance {
            break;
        }
    }

    Ok(BatchModel { w, single_class })
}
