//! Line-delimited feature dump format: one record per graph with its sparse
//! count vector, class label, day index, and optional family tag. Written by
//! extraction, consumed by training and evaluation.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Label;
use crate::sparse::SparseVector;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("line {line}: malformed feature record: {message}")]
    Parse { line: usize, message: String },
    #[error("record {id:?}: class label must be +1 or -1, got {value}")]
    BadLabel { id: String, value: i8 },
    #[error("record {id:?}: negative or non-integer count for feature {index}")]
    BadCount { id: String, index: u32 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One extracted sample: `{id, y, t, family, features: [[index, count], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub y: Option<i8>,
    pub t: u32,
    #[serde(default)]
    pub family: Option<String>,
    pub features: Vec<(u32, u32)>,
}

impl FeatureRecord {
    pub fn new(
        id: impl Into<String>,
        label: Option<Label>,
        day: u32,
        family: Option<String>,
        vector: &SparseVector,
    ) -> Result<Self, FeatureError> {
        let id = id.into();
        let features = vector
            .iter()
            .map(|(index, value)| {
                if value < 0.0 || value.fract() != 0.0 || value > f64::from(u32::MAX) {
                    Err(FeatureError::BadCount {
                        id: id.clone(),
                        index,
                    })
                } else {
                    Ok((index, value as u32))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FeatureRecord {
            id,
            y: label.map(Label::to_i8),
            t: day,
            family,
            features,
        })
    }

    pub fn label(&self) -> Result<Option<Label>, FeatureError> {
        self.y
            .map(|v| {
                Label::from_i8(v).map_err(|_| FeatureError::BadLabel {
                    id: self.id.clone(),
                    value: v,
                })
            })
            .transpose()
    }

    pub fn vector(&self) -> SparseVector {
        SparseVector::from_counts(self.features.iter().copied())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("feature record serializes")
    }
}

/// Reads line-delimited feature records with 1-based line numbers on parse
/// errors. Blank lines are skipped; labels are validated.
pub fn read_feature_records<R: BufRead>(
    reader: R,
) -> impl Iterator<Item = Result<FeatureRecord, FeatureError>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Err(e) => Some(Err(FeatureError::Io(e))),
            Ok(text) if text.trim().is_empty() => None,
            Ok(text) => Some(
                serde_json::from_str::<FeatureRecord>(&text)
                    .map_err(|e| FeatureError::Parse {
                        line: i + 1,
                        message: e.to_string(),
                    })
                    .and_then(|record| record.label().map(|_| record)),
            ),
        })
}

pub fn write_feature_records<'a, W: Write>(
    writer: &mut W,
    records: impl IntoIterator<Item = &'a FeatureRecord>,
) -> io::Result<()> {
    for record in records {
        writeln!(writer, "{}", record.to_json_line())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_json_lines() {
        let v = SparseVector::from_counts([(0, 2), (7, 1)]);
        let record =
            FeatureRecord::new("g1", Some(Label::Malicious), 3, Some("fam".into()), &v).unwrap();
        let line = record.to_json_line();
        let parsed: Vec<_> = read_feature_records(line.as_bytes())
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(parsed, vec![record.clone()]);
        assert_eq!(parsed[0].vector(), v);
        assert_eq!(parsed[0].label().unwrap(), Some(Label::Malicious));
    }

    #[test]
    fn rejects_labels_other_than_plus_minus_one() {
        let line = r#"{"id":"g","y":3,"t":0,"family":null,"features":[]}"#;
        let result: Vec<_> = read_feature_records(line.as_bytes()).collect();
        assert!(matches!(
            result[0],
            Err(FeatureError::BadLabel { value: 3, .. })
        ));
    }

    #[test]
    fn rejects_non_count_vectors() {
        let v = SparseVector::from_pairs([(0, 1.5)]);
        assert!(matches!(
            FeatureRecord::new("g", None, 0, None, &v),
            Err(FeatureError::BadCount { index: 0, .. })
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let input = "{\"id\":\"a\",\"y\":null,\"t\":0,\"family\":null,\"features\":[]}\nbroken\n";
        let results: Vec<_> = read_feature_records(input.as_bytes()).collect();
        assert!(results[0].is_ok());
        assert!(matches!(
            &results[1],
            Err(FeatureError::Parse { line: 2, .. })
        ));
    }
}
