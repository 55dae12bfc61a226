//! Per-prediction feature explanations and per-family aggregated reports.
//!
//! A linear score decomposes exactly into per-feature contributions
//! w_j * x_j; ranking them in the predicted direction names the features that
//! pushed the sample to its side of the boundary, decoded back to
//! human-readable contextual labels through the vocabulary.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Label;
use crate::learners::{LinearScorer, Prediction};
use crate::relabel::{CTX_SEP, LEVEL_SEPS, SET_SEP};
use crate::sparse::SparseVector;
use crate::vocab::Vocabulary;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("nu must be positive")]
    ZeroNu,
    #[error("feature index {index} is not in the vocabulary (size {size})")]
    VocabMismatch { index: u32, size: usize },
    #[error("no explanation carries family tag {family:?}")]
    UnknownFamily { family: String },
}

/// One ranked feature contribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: u32,
    /// The raw vocabulary label of the feature.
    pub label: String,
    /// Human-readable rendering: `<context> {<root> + <neighbor-list>}`.
    pub display: String,
    /// w_j * x_j, the feature's share of the prediction score.
    pub value: f64,
}

/// Ranked explanation of one prediction.
///
/// `contributions` holds the top `nu` nonzero contributions sorted toward the
/// predicted class (ties broken by lower feature index); the untruncated
/// contributions always sum exactly to `prediction.score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub sample_id: String,
    pub family: Option<String>,
    pub prediction: Prediction,
    pub nu: usize,
    pub contributions: Vec<Contribution>,
}

/// Renders a feature label like `user-unaware⊕getLatitude,writeBytes` as
/// `user-unaware {getLatitude + writeBytes}`.
pub fn render_feature_label(label: &str) -> String {
    let parts: Vec<String> = label
        .split(SET_SEP)
        .map(|part| match part.split_once(CTX_SEP) {
            Some((ctx, rest)) => format!("{ctx} {{{}}}", render_neighborhood(rest)),
            None => format!("{{{}}}", render_neighborhood(part)),
        })
        .collect();
    parts.join(" | ")
}

fn render_neighborhood(label: &str) -> String {
    match label.split_once(|c| LEVEL_SEPS.contains(&c)) {
        Some((root, rest)) if !rest.is_empty() => format!("{root} + {rest}"),
        Some((root, _)) => root.to_string(),
        None => label.to_string(),
    }
}

/// Ranks the per-feature contributions of `x` under `model`, decoding labels
/// through `vocab`. Entries with an exactly zero contribution are omitted, so
/// asking for more than nnz(x) entries returns them all without padding.
pub fn explain_prediction(
    model: &dyn LinearScorer,
    x: &SparseVector,
    vocab: &Vocabulary,
    nu: usize,
    sample_id: impl Into<String>,
    family: Option<String>,
) -> Result<Explanation, ExplainError> {
    if nu == 0 {
        return Err(ExplainError::ZeroNu);
    }
    let prediction = model.predict(x);
    let mut contributions = Vec::with_capacity(x.nnz());
    for (feature, value) in x.iter() {
        let label = vocab
            .label_of(feature)
            .ok_or(ExplainError::VocabMismatch {
                index: feature,
                size: vocab.len(),
            })?;
        let contribution = model.weight(feature) * value;
        if contribution != 0.0 {
            contributions.push(Contribution {
                feature,
                label: label.to_string(),
                display: render_feature_label(label),
                value: contribution,
            });
        }
    }
    sort_toward(&mut contributions, prediction.label);
    contributions.truncate(nu);
    Ok(Explanation {
        sample_id: sample_id.into(),
        family,
        prediction,
        nu,
        contributions,
    })
}

/// Sorts contributions with the predicted direction first, descending by
/// magnitude along it; ties go to the lower feature index.
fn sort_toward(contributions: &mut [Contribution], label: Label) {
    let direction = f64::from(label.to_i8());
    contributions.sort_by(|a, b| {
        (direction * b.value)
            .partial_cmp(&(direction * a.value))
            .unwrap()
            .then(a.feature.cmp(&b.feature))
    });
}

/// Mean per-feature contribution across every explanation tagged with
/// `family`, top `nu` in the family's aggregate predicted direction.
///
/// Features absent from a member contribute zero to its mean, so means are
/// exact when the input explanations are untruncated (nu >= nnz); generate
/// them that way for reporting.
pub fn family_report(
    explanations: &[Explanation],
    family: &str,
    nu: usize,
) -> Result<Vec<Contribution>, ExplainError> {
    if nu == 0 {
        return Err(ExplainError::ZeroNu);
    }
    let members: Vec<&Explanation> = explanations
        .iter()
        .filter(|e| e.family.as_deref() == Some(family))
        .collect();
    if members.is_empty() {
        return Err(ExplainError::UnknownFamily {
            family: family.to_string(),
        });
    }

    let mut sums: std::collections::BTreeMap<u32, (f64, &Contribution)> =
        std::collections::BTreeMap::new();
    for member in &members {
        for contribution in &member.contributions {
            sums.entry(contribution.feature)
                .and_modify(|(sum, _)| *sum += contribution.value)
                .or_insert((contribution.value, contribution));
        }
    }
    let count = members.len() as f64;
    let mut report: Vec<Contribution> = sums
        .into_values()
        .filter_map(|(sum, template)| {
            let mean = sum / count;
            (mean != 0.0).then(|| Contribution {
                value: mean,
                ..template.clone()
            })
        })
        .collect();

    let aggregate_score: f64 = members.iter().map(|e| e.prediction.score).sum();
    sort_toward(&mut report, Label::from_score(aggregate_score));
    report.truncate(nu);
    Ok(report)
}
