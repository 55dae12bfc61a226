//! Growing feature vocabulary: a bidirectional map between feature label
//! strings and dense indices, assigned in first-seen order and never
//! reassigned or removed.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::relabel::{fnv1a64, RelabelParams};

const TSV_MAGIC: &str = "# contextwl-vocab v1";

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("line {line}: malformed vocabulary row: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary::default()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Index of `label`, appending it if unseen. Indices are stable once
    /// issued.
    pub fn get_or_insert(&mut self, label: &str) -> u32 {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = u32::try_from(self.labels.len()).expect("vocabulary exceeds u32 indices");
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), i);
        i
    }

    pub fn index_of(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label_of(&self, index: u32) -> Option<&str> {
        self.labels.get(index as usize).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Stable 64-bit content hash over the ordered label list, hex encoded.
    /// Recorded in model files to detect vocabulary mismatches at load time.
    pub fn content_hash(&self) -> String {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for label in &self.labels {
            hash ^= fnv1a64(label.as_bytes());
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{hash:016x}")
    }

    /// Writes the sidecar TSV: an optional header comment recording the
    /// extraction parameters, then one `index<TAB>label` row per feature.
    pub fn save<W: Write>(&self, mut writer: W, params: Option<&RelabelParams>) -> io::Result<()> {
        if let Some(p) = params {
            writeln!(
                writer,
                "{TSV_MAGIC} h={} contextual={} compress={}",
                p.height, p.contextual, p.compress
            )?;
        }
        for (i, label) in self.labels.iter().enumerate() {
            writeln!(writer, "{i}\t{label}")?;
        }
        Ok(())
    }

    /// Reads a sidecar TSV, returning the vocabulary and the extraction
    /// parameters recorded in its header, if any.
    pub fn load<R: BufRead>(reader: R) -> Result<(Self, Option<RelabelParams>), VocabError> {
        let mut vocab = Vocabulary::new();
        let mut params = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix(TSV_MAGIC) {
                params = Some(parse_header(rest).map_err(|message| VocabError::Malformed {
                    line: lineno + 1,
                    message,
                })?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let (index, label) = line.split_once('\t').ok_or_else(|| VocabError::Malformed {
                line: lineno + 1,
                message: "expected index<TAB>label".to_string(),
            })?;
            let index: u32 = index.parse().map_err(|e| VocabError::Malformed {
                line: lineno + 1,
                message: format!("bad index: {e}"),
            })?;
            if index as usize != vocab.len() {
                return Err(VocabError::Malformed {
                    line: lineno + 1,
                    message: format!("index {index} out of order (expected {})", vocab.len()),
                });
            }
            vocab.get_or_insert(label);
        }
        Ok((vocab, params))
    }
}

fn parse_header(rest: &str) -> Result<RelabelParams, String> {
    let mut params = RelabelParams::default();
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("bad header field {field:?}"))?;
        match key {
            "h" => params.height = value.parse().map_err(|e| format!("bad h: {e}"))?,
            "contextual" => {
                params.contextual = value.parse().map_err(|e| format!("bad contextual: {e}"))?
            }
            "compress" => {
                params.compress = value.parse().map_err(|e| format!("bad compress: {e}"))?
            }
            _ => return Err(format!("unknown header field {key:?}")),
        }
    }
    Ok(params)
}
