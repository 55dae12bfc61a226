//! Confidence-weighted linear classification with a diagonal Gaussian over
//! the weights.
//!
//! The model keeps a per-feature mean `mu` and variance `sigma` (the diagonal
//! of the covariance). An update moves the distribution as little as possible
//! (KL divergence) subject to the margin constraint
//!
//! ```text
//!     y (mu' . x)  >=  phi * sqrt(x' Sigma' x),    phi = InverseNormalCdf(eta)
//! ```
//!
//! stated against the *updated* parameters. For diagonal covariance the
//! stationarity conditions are
//!
//! ```text
//!     mu'_j     = mu_j + alpha * y * sigma_j * x_j
//!     1/sigma'_j = 1/sigma_j + alpha * phi * x_j^2 / s,   s = sqrt(x' Sigma' x)
//! ```
//!
//! with the active constraint fixing s = (m + alpha v) / phi, where
//! m = y (mu . x) and v = x' Sigma x. Eliminating s leaves one equation in the
//! step size alpha, solved here by safeguarded bisection. The solved update
//! makes the constraint hold with equality, so variances only shrink and the
//! whole update costs O(iterations x nnz(x)).
//!
//! Note the widely used shortcut of solving the full-covariance problem in
//! closed form and then keeping only the diagonal does NOT satisfy the
//! constraint against the diagonal it returns (dropping the off-diagonal
//! terms inflates x' Sigma' x), which is why the diagonal problem is solved
//! directly. In the single-nonzero case both coincide; the tests pin that.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{check_finite, grow, LearnerError, LinearScorer, OnlineLearner, Prediction};
use crate::graph::Label;
use crate::sparse::SparseVector;

const VARIANT: &str = "stdev";

/// Confidence-weighted model: per-feature mean and variance, confidence
/// level eta in (0.5, 1), and initial variance `a` for unseen features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CwModelData", into = "CwModelData")]
pub struct CwModel {
    mu: Vec<f64>,
    sigma: Vec<f64>,
    eta: f64,
    initial_variance: f64,
    phi: f64,
}

#[derive(Serialize, Deserialize)]
struct CwModelData {
    variant: String,
    eta: f64,
    initial_variance: f64,
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl From<CwModel> for CwModelData {
    fn from(m: CwModel) -> Self {
        CwModelData {
            variant: VARIANT.to_string(),
            eta: m.eta,
            initial_variance: m.initial_variance,
            mu: m.mu,
            sigma: m.sigma,
        }
    }
}

impl TryFrom<CwModelData> for CwModel {
    type Error = String;

    fn try_from(data: CwModelData) -> Result<Self, Self::Error> {
        if data.variant != VARIANT {
            return Err(format!(
                "unsupported cw variant {:?} (expected {VARIANT:?})",
                data.variant
            ));
        }
        let mut model = CwModel::new(data.eta, data.initial_variance)
            .map_err(|e| e.to_string())?;
        model.mu = data.mu;
        model.sigma = data.sigma;
        if model.mu.len() != model.sigma.len() {
            return Err("mu and sigma lengths differ".to_string());
        }
        if model.sigma.iter().any(|&s| !(s > 0.0)) {
            return Err("variances must be strictly positive".to_string());
        }
        Ok(model)
    }
}

impl CwModel {
    pub fn new(eta: f64, initial_variance: f64) -> Result<Self, LearnerError> {
        if !(eta > 0.5 && eta < 1.0) {
            return Err(LearnerError::BadHyperparameter {
                name: "eta",
                value: eta,
            });
        }
        if !(initial_variance > 0.0 && initial_variance.is_finite()) {
            return Err(LearnerError::BadHyperparameter {
                name: "initial_variance",
                value: initial_variance,
            });
        }
        let phi = Normal::new(0.0, 1.0).unwrap().inverse_cdf(eta);
        Ok(CwModel {
            mu: Vec::new(),
            sigma: Vec::new(),
            eta,
            initial_variance,
            phi,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn initial_variance(&self) -> f64 {
        self.initial_variance
    }

    /// phi = InverseNormalCdf(eta), the margin multiplier.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Variance of one feature (`a` for features beyond the model).
    pub fn variance(&self, feature: u32) -> f64 {
        self.sigma
            .get(feature as usize)
            .copied()
            .unwrap_or(self.initial_variance)
    }

    /// x' Sigma x over the sample's nonzeros.
    pub fn margin_variance(&self, x: &SparseVector) -> f64 {
        x.iter()
            .map(|(i, v)| self.variance(i) * v * v)
            .sum()
    }

    #[cfg(test)]
    pub(crate) fn with_weights(mu: Vec<f64>, eta: f64, initial_variance: f64) -> Self {
        let mut model = CwModel::new(eta, initial_variance).unwrap();
        model.sigma = vec![initial_variance; mu.len()];
        model.mu = mu;
        model
    }
}

impl LinearScorer for CwModel {
    fn predict(&self, x: &SparseVector) -> Prediction {
        let score = x.dot_dense(&self.mu);
        let confidence = if x.is_empty() {
            f64::INFINITY
        } else {
            score / self.margin_variance(x).sqrt()
        };
        Prediction {
            label: Label::from_score(score),
            score,
            confidence,
        }
    }

    fn weight(&self, feature: u32) -> f64 {
        self.mu.get(feature as usize).copied().unwrap_or(0.0)
    }

    fn dim(&self) -> u32 {
        self.mu.len() as u32
    }
}

impl OnlineLearner for CwModel {
    fn learn(&mut self, x: &SparseVector, y: Label) -> Result<(), LearnerError> {
        check_finite(x)?;
        let Some(max_index) = x.max_index() else {
            return Ok(()); // zero vector: constraint is vacuous
        };
        let needed = max_index as usize + 1;
        grow(&mut self.mu, needed, 0.0);
        grow(&mut self.sigma, needed, self.initial_variance);

        let yf = f64::from(y.to_i8());
        let m = yf * x.dot_dense(&self.mu);
        let v: f64 = x.iter().map(|(i, xv)| self.sigma[i as usize] * xv * xv).sum();
        if m >= self.phi * v.sqrt() {
            return Ok(()); // constraint already satisfied: step size 0
        }

        let terms: Vec<f64> = x.iter().map(|(i, xv)| self.sigma[i as usize] * xv * xv).collect();
        let alpha = solve_step_size(m, v, self.phi, &terms);
        let s = (m + alpha * v) / self.phi;
        for (i, xv) in x.iter() {
            let j = i as usize;
            self.mu[j] += alpha * yf * self.sigma[j] * xv;
            self.sigma[j] = 1.0 / (1.0 / self.sigma[j] + alpha * self.phi * xv * xv / s);
        }
        Ok(())
    }

    fn kind(&self) -> &'static str {
        "cw"
    }
}

/// Residual of the step-size equation: positive below the root.
///
/// With s(alpha) = (m + alpha v)/phi (the constraint held with equality), the
/// realized post-update variance is u(alpha) = sum_j t_j * s/(s + alpha phi t_j),
/// and the root of u(alpha)/s - s = 0 is the alpha at which s really equals
/// sqrt(x' Sigma' x).
fn step_gap(alpha: f64, m: f64, v: f64, phi: f64, terms: &[f64]) -> f64 {
    let s = (m + alpha * v) / phi;
    let u_over_s: f64 = terms.iter().map(|&t| t / (s + alpha * phi * t)).sum();
    u_over_s - s
}

/// Bisection for the unique positive root of [`step_gap`]. The gap is
/// strictly decreasing in alpha, positive just above the feasibility
/// threshold max(0, -m/v), and negative for large alpha.
fn solve_step_size(m: f64, v: f64, phi: f64, terms: &[f64]) -> f64 {
    let mut lo = if m < 0.0 { -m / v } else { 0.0 };
    let mut hi = lo.max(1e-12) * 2.0 + 1e-6;
    let mut doublings = 0;
    while step_gap(hi, m, v, phi, terms) > 0.0 && doublings < 2000 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval exhausted at f64 resolution
        }
        if step_gap(mid, m, v, phi, terms) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn vec_of(pairs: &[(u32, f64)]) -> SparseVector {
        SparseVector::from_pairs(pairs.iter().copied())
    }

    fn random_sparse(rng: &mut StdRng, dim: u32, nnz: usize) -> SparseVector {
        let mut pairs = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            pairs.push((rng.random_range(0..dim), rng.random_range(1..=4) as f64));
        }
        SparseVector::from_pairs(pairs)
    }

    /// Independently coded solver: bisects on the post-update constraint
    /// residual y(mu'.x) - phi*sqrt(x'Sigma'x), evaluated by materializing the
    /// candidate updated model rather than via the reduced equation.
    fn oracle_alpha(model: &CwModel, x: &SparseVector, y: Label) -> f64 {
        let yf = f64::from(y.to_i8());
        let m: f64 = yf * x.iter().map(|(i, v)| model.weight(i) * v).sum::<f64>();
        let v: f64 = x.iter().map(|(i, xv)| model.variance(i) * xv * xv).sum();
        let phi = model.phi();
        let residual = |alpha: f64| {
            let s = (m + alpha * v) / phi;
            let u: f64 = x
                .iter()
                .map(|(i, xv)| {
                    let sigma = model.variance(i);
                    let updated = 1.0 / (1.0 / sigma + alpha * phi * xv * xv / s);
                    updated * xv * xv
                })
                .sum();
            (m + alpha * v) - phi * u.sqrt()
        };
        let mut lo = if m < 0.0 { (-m / v) * (1.0 + 1e-15) } else { 1e-15 };
        let mut hi = lo.max(1.0);
        while residual(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if residual(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn margin_and_stdev(model: &CwModel, x: &SparseVector, y: Label) -> (f64, f64) {
        let yf = f64::from(y.to_i8());
        let margin = yf * x.iter().map(|(i, v)| model.weight(i) * v).sum::<f64>();
        (margin, model.margin_variance(x).sqrt())
    }

    #[test]
    fn fresh_model_predicts_benign_on_anything() {
        let model = CwModel::new(0.9, 1.0).unwrap();
        let p = model.predict(&vec_of(&[(3, 2.0), (17, 1.0)]));
        assert_eq!(p.score, 0.0);
        assert_eq!(p.label, Label::Benign);
    }

    #[test]
    fn prediction_is_the_mean_inner_product() {
        let model = CwModel::with_weights(vec![2.0, -1.0], 0.9, 1.0);
        let p = model.predict(&vec_of(&[(0, 1.0), (1, 1.0)]));
        assert_eq!(p.score, 1.0);
        assert_eq!(p.label, Label::Malicious);
        // features unseen by the model score zero
        let q = model.predict(&vec_of(&[(5, 3.0)]));
        assert_eq!(q.score, 0.0);
        assert_eq!(q.label, Label::Benign);
    }

    #[test]
    fn zero_vector_confidence_is_infinite() {
        let model = CwModel::new(0.9, 1.0).unwrap();
        let p = model.predict(&SparseVector::empty());
        assert!(p.confidence.is_infinite());
        assert_eq!(p.label, Label::Benign);
    }

    #[test]
    fn update_makes_the_margin_constraint_tight() {
        let mut rng = StdRng::seed_from_u64(7);
        for case in 0..200 {
            let mut model = CwModel::new(0.9, 1.0).unwrap();
            let nnz = rng.random_range(1..10);
            let x = random_sparse(&mut rng, 40, nnz);
            let y = if rng.random_bool(0.5) { Label::Malicious } else { Label::Benign };
            model.learn(&x, y).unwrap();
            let (margin, stdev) = margin_and_stdev(&model, &x, y);
            assert!(
                (margin - model.phi() * stdev).abs() <= 1e-6 * (1.0 + margin.abs()),
                "case {case}: margin {margin} vs phi*stdev {}",
                model.phi() * stdev
            );
        }
    }

    #[test]
    fn update_matches_the_independent_numerical_oracle() {
        let mut rng = StdRng::seed_from_u64(11);
        let mut model = CwModel::new(0.85, 2.0).unwrap();
        for _ in 0..100 {
            let nnz = rng.random_range(1..8);
            let x = random_sparse(&mut rng, 30, nnz);
            let y = if rng.random_bool(0.5) { Label::Malicious } else { Label::Benign };
            let (m, stdev) = margin_and_stdev(&model, &x, y);
            if m >= model.phi() * stdev {
                let before = model.clone();
                model.learn(&x, y).unwrap();
                assert_eq!(model, before, "no-op expected when constraint holds");
                continue;
            }
            let alpha = oracle_alpha(&model, &x, y);
            let yf = f64::from(y.to_i8());
            let phi = model.phi();
            let v: f64 = x.iter().map(|(i, xv)| model.variance(i) * xv * xv).sum();
            let mexp: f64 = yf * x.iter().map(|(i, xv)| model.weight(i) * xv).sum::<f64>();
            let s = (mexp + alpha * v) / phi;
            let expected: Vec<(u32, f64, f64)> = x
                .iter()
                .map(|(i, xv)| {
                    let sigma = model.variance(i);
                    let mu = model.weight(i) + alpha * yf * sigma * xv;
                    let sg = 1.0 / (1.0 / sigma + alpha * phi * xv * xv / s);
                    (i, mu, sg)
                })
                .collect();
            model.learn(&x, y).unwrap();
            for (i, mu, sg) in expected {
                assert!((model.weight(i) - mu).abs() <= 1e-8 * (1.0 + mu.abs()));
                assert!((model.variance(i) - sg).abs() <= 1e-8 * (1.0 + sg.abs()));
            }
        }
    }

    #[test]
    fn single_feature_step_matches_published_closed_form() {
        // With one nonzero coordinate the diagonal and full-covariance
        // problems coincide, where the closed form is
        //   alpha = max(0, (-m*psi + sqrt(m^2 phi^4/4 + v phi^2 zeta)) / (v zeta))
        // with psi = 1 + phi^2/2 and zeta = 1 + phi^2.
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..100 {
            let mut model = CwModel::new(0.9, 1.0).unwrap();
            // pre-train a little so margins vary
            for _ in 0..rng.random_range(0..4) {
                let x = vec_of(&[(0, rng.random_range(1..4) as f64)]);
                let y = if rng.random_bool(0.5) { Label::Malicious } else { Label::Benign };
                model.learn(&x, y).unwrap();
            }
            let xv = rng.random_range(1..5) as f64;
            let x = vec_of(&[(0, xv)]);
            let y = if rng.random_bool(0.5) { Label::Malicious } else { Label::Benign };

            let yf = f64::from(y.to_i8());
            let phi = model.phi();
            let m = yf * model.weight(0) * xv;
            let v = model.variance(0) * xv * xv;
            let psi = 1.0 + phi * phi / 2.0;
            let zeta = 1.0 + phi * phi;
            let closed =
                ((-m * psi + (m * m * phi.powi(4) / 4.0 + v * phi * phi * zeta).sqrt()) / (v * zeta))
                    .max(0.0);

            let mu_before = model.weight(0);
            let sigma_before = model.variance(0);
            model.learn(&x, y).unwrap();
            let alpha_impl = if closed == 0.0 {
                assert_eq!(model.weight(0), mu_before);
                continue;
            } else {
                (model.weight(0) - mu_before) / (yf * sigma_before * xv)
            };
            assert!(
                (alpha_impl - closed).abs() <= 1e-9 * (1.0 + closed),
                "alpha {alpha_impl} vs closed form {closed}"
            );
        }
    }

    #[test]
    fn repeated_update_on_the_same_sample_converges_immediately() {
        let mut model = CwModel::new(0.9, 1.0).unwrap();
        let x = vec_of(&[(0, 1.0), (1, 2.0), (2, 1.0)]);
        model.learn(&x, Label::Malicious).unwrap();
        let snapshot = model.clone();
        for _ in 0..5 {
            model.learn(&x, Label::Malicious).unwrap();
        }
        for i in 0..3 {
            assert!((model.weight(i) - snapshot.weight(i)).abs() <= 1e-9);
            assert!((model.variance(i) - snapshot.variance(i)).abs() <= 1e-9);
        }
    }

    #[test]
    fn zero_vector_update_is_a_no_op() {
        let mut model = CwModel::new(0.9, 1.0).unwrap();
        model.learn(&vec_of(&[(0, 1.0)]), Label::Malicious).unwrap();
        let before = model.clone();
        model.learn(&SparseVector::empty(), Label::Benign).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn non_finite_samples_are_rejected_without_touching_the_model() {
        let mut model = CwModel::new(0.9, 1.0).unwrap();
        model.learn(&vec_of(&[(0, 1.0)]), Label::Malicious).unwrap();
        let before = model.clone();
        let bad = vec_of(&[(1, f64::NAN)]);
        assert!(matches!(
            model.learn(&bad, Label::Benign),
            Err(LearnerError::NonFiniteFeature { index: 1, .. })
        ));
        assert_eq!(model, before);
    }

    #[test]
    fn variances_shrink_and_untouched_coordinates_stay_put() {
        let mut rng = StdRng::seed_from_u64(23);
        let mut model = CwModel::new(0.9, 1.0).unwrap();
        for _ in 0..300 {
            let nnz = rng.random_range(1..6);
            let x = random_sparse(&mut rng, 25, nnz);
            let y = if rng.random_bool(0.5) { Label::Malicious } else { Label::Benign };
            let before = model.clone();
            model.learn(&x, y).unwrap();
            for f in 0..25u32 {
                if x.get(f) == 0.0 {
                    assert_eq!(model.weight(f), before.weight(f));
                    assert_eq!(model.variance(f), before.variance(f));
                } else {
                    assert!(model.variance(f) <= before.variance(f));
                }
                assert!(model.variance(f) > 0.0);
            }
        }
    }

    #[test]
    fn hyperparameters_are_validated() {
        assert!(CwModel::new(0.5, 1.0).is_err());
        assert!(CwModel::new(1.0, 1.0).is_err());
        assert!(CwModel::new(0.9, 0.0).is_err());
        assert!(CwModel::new(0.9, 1.0).is_ok());
    }
}
