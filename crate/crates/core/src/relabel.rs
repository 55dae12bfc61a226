//! Weisfeiler-Lehman and contextual Weisfeiler-Lehman relabeling.
//!
//! Iteration 0 prefixes each node label with the node's contexts; iteration
//! i > 0 appends the sorted multiset of the out-neighbors' previous labels to
//! the node's previous label, then prefixes contexts. The strings produced at
//! iteration i therefore encode the degree-i out-neighborhood of a node plus
//! the contexts under which it is reachable.
//!
//! Rendering: a context is joined to its label with [`CTX_SEP`]; a
//! multi-context node's prefixed strings are sorted and joined with
//! [`SET_SEP`]; iteration i joins the previous label with the sorted neighbor
//! list using `LEVEL_SEPS[i-1]`. Per-level separators keep the encoding
//! injective: a composed label at level i never contains the level-i
//! separator inside an item, so equal strings imply equal (root, neighbor
//! multiset) pairs at every level. All separators are rejected inside node
//! labels and context kinds at parse time.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ContextualGraph, Node};

/// Joins a context kind to the label it prefixes.
pub const CTX_SEP: char = '⊕';
/// Joins the context-prefixed strings of a multi-context node.
pub const SET_SEP: char = '|';
/// Per-iteration separators; iteration i uses `LEVEL_SEPS[i-1]`.
pub const LEVEL_SEPS: [char; 9] = [',', ';', ':', '^', '~', '!', '?', '%', '&'];
/// Hard upper bound on the kernel height (one separator per level).
pub const MAX_HEIGHT: u8 = LEVEL_SEPS.len() as u8;
/// Default configurable height limit.
pub const DEFAULT_MAX_HEIGHT: u8 = 5;

#[derive(Debug, Error)]
pub enum RelabelError {
    #[error("kernel height {height} exceeds maximum {max}")]
    HeightTooLarge { height: u8, max: u8 },
    #[error("label compression collision: {a:?} and {b:?} share token {token}")]
    CompressionCollision { token: String, a: String, b: String },
}

/// Parameters of the relabeling pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelabelParams {
    /// Kernel height h: number of relabeling iterations.
    pub height: u8,
    /// Prefix contexts (contextual WL) or produce plain WL labels.
    pub contextual: bool,
    /// Replace each composed label with a fixed-width collision-checked token.
    pub compress: bool,
    /// Configurable height limit (capped at [`MAX_HEIGHT`]).
    #[serde(default = "default_max_height")]
    pub max_height: u8,
}

fn default_max_height() -> u8 {
    DEFAULT_MAX_HEIGHT
}

impl Default for RelabelParams {
    fn default() -> Self {
        RelabelParams {
            height: 2,
            contextual: true,
            compress: false,
            max_height: DEFAULT_MAX_HEIGHT,
        }
    }
}

impl RelabelParams {
    pub fn with_height(height: u8) -> Self {
        RelabelParams {
            height,
            ..Default::default()
        }
    }

    /// Plain WL: same relabeling without context prefixes.
    pub fn plain(mut self) -> Self {
        self.contextual = false;
        self
    }

    pub fn compressed(mut self) -> Self {
        self.compress = true;
        self
    }

    pub fn validate(&self) -> Result<(), RelabelError> {
        let max = self.max_height.min(MAX_HEIGHT);
        if self.height > max {
            return Err(RelabelError::HeightTooLarge {
                height: self.height,
                max,
            });
        }
        Ok(())
    }
}

/// 64-bit FNV-1a. Stable across platforms and runs; used for label
/// compression tokens and vocabulary content hashes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Token table for label compression. Detects collisions of the 64-bit hash
/// against every string seen within the table's lifetime, so a table shared
/// across a batch of graphs guards the injectivity of the compression map for
/// that whole run.
#[derive(Debug, Default)]
pub struct CompressionTable {
    seen: HashMap<u64, String>,
}

impl CompressionTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fixed-width (16 hex digit) token for `label`.
    pub fn token(&mut self, label: &str) -> Result<String, RelabelError> {
        let hash = fnv1a64(label.as_bytes());
        match self.seen.get(&hash) {
            Some(existing) if existing != label => Err(RelabelError::CompressionCollision {
                token: format!("{hash:016x}"),
                a: existing.clone(),
                b: label.to_string(),
            }),
            Some(_) => Ok(format!("{hash:016x}")),
            None => {
                self.seen.insert(hash, label.to_string());
                Ok(format!("{hash:016x}"))
            }
        }
    }
}

/// Per-iteration labels of one graph: the plain neighborhood labels
/// lambda_i(n) and the contextual labels gamma_i(n), for i in 0..=h.
///
/// When the relabeling ran with `contextual = false` the contextual labels
/// are the plain ones, so downstream feature extraction is uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualLabelSequence {
    node_ids: Vec<u32>,
    plain: Vec<Vec<String>>,
    contextual: Vec<Vec<String>>,
}

impl ContextualLabelSequence {
    pub fn height(&self) -> usize {
        self.plain.len() - 1
    }

    pub fn node_ids(&self) -> &[u32] {
        &self.node_ids
    }

    fn position(&self, node_id: u32) -> Option<usize> {
        self.node_ids.binary_search(&node_id).ok()
    }

    /// Plain neighborhood label lambda_i(n).
    pub fn lambda(&self, iteration: usize, node_id: u32) -> Option<&str> {
        let p = self.position(node_id)?;
        self.plain.get(iteration).map(|labels| labels[p].as_str())
    }

    /// Contextual neighborhood label gamma_i(n).
    pub fn gamma(&self, iteration: usize, node_id: u32) -> Option<&str> {
        let p = self.position(node_id)?;
        self.contextual
            .get(iteration)
            .map(|labels| labels[p].as_str())
    }

    /// All feature labels of the graph: gamma_i(n) for every iteration and
    /// node, iterations in order.
    pub fn feature_labels(&self) -> impl Iterator<Item = &str> {
        self.contextual
            .iter()
            .flat_map(|labels| labels.iter().map(String::as_str))
    }

    /// Sorted multiset of contextual labels at one iteration.
    pub fn gamma_multiset(&self, iteration: usize) -> Vec<&str> {
        let mut labels: Vec<&str> = self.contextual[iteration]
            .iter()
            .map(String::as_str)
            .collect();
        labels.sort_unstable();
        labels
    }
}

fn gamma_for(node: &Node, label: &str, contextual: bool) -> String {
    if !contextual {
        return label.to_string();
    }
    // contexts are stored sorted and share the label suffix, so joining in
    // context order is the lexicographically sorted sequence
    let mut out = String::new();
    for (k, ctx) in node.contexts.iter().enumerate() {
        if k > 0 {
            out.push(SET_SEP);
        }
        out.push_str(ctx.as_str());
        out.push(CTX_SEP);
        out.push_str(label);
    }
    out
}

/// Runs the contextual relabeling with a caller-provided compression table,
/// so one table can guard a whole batch of graphs.
pub fn relabel_with_table(
    graph: &ContextualGraph,
    params: &RelabelParams,
    table: &mut CompressionTable,
) -> Result<ContextualLabelSequence, RelabelError> {
    params.validate()?;
    let nodes = graph.nodes();
    let n = nodes.len();
    let h = params.height as usize;

    let mut plain: Vec<Vec<String>> = Vec::with_capacity(h + 1);
    let mut contextual: Vec<Vec<String>> = Vec::with_capacity(h + 1);

    let mut current = Vec::with_capacity(n);
    for node in nodes {
        let label = if params.compress {
            table.token(&node.label)?
        } else {
            node.label.clone()
        };
        current.push(label);
    }
    contextual.push(
        nodes
            .iter()
            .zip(&current)
            .map(|(node, label)| gamma_for(node, label, params.contextual))
            .collect(),
    );
    plain.push(current);

    for i in 1..=h {
        let sep = LEVEL_SEPS[i - 1];
        let prev = &plain[i - 1];
        let mut current = Vec::with_capacity(n);
        for p in 0..n {
            let mut neighbor_labels: Vec<&str> = graph
                .out_positions(p)
                .iter()
                .map(|&q| prev[q].as_str())
                .collect();
            neighbor_labels.sort_unstable();

            let mut composed = String::with_capacity(
                prev[p].len() + 1 + neighbor_labels.iter().map(|l| l.len() + 1).sum::<usize>(),
            );
            composed.push_str(&prev[p]);
            composed.push(sep);
            for (k, label) in neighbor_labels.iter().enumerate() {
                if k > 0 {
                    composed.push(sep);
                }
                composed.push_str(label);
            }

            let label = if params.compress {
                table.token(&composed)?
            } else {
                composed
            };
            current.push(label);
        }
        contextual.push(
            nodes
                .iter()
                .zip(&current)
                .map(|(node, label)| gamma_for(node, label, params.contextual))
                .collect(),
        );
        plain.push(current);
    }

    Ok(ContextualLabelSequence {
        node_ids: nodes.iter().map(|n| n.id).collect(),
        plain,
        contextual,
    })
}

/// Runs the contextual relabeling of a single graph (fresh compression table).
pub fn relabel(
    graph: &ContextualGraph,
    params: &RelabelParams,
) -> Result<ContextualLabelSequence, RelabelError> {
    relabel_with_table(graph, params, &mut CompressionTable::new())
}

/// Replaces every distinct label of an already-computed sequence with a
/// fixed-width token; tokens are equal iff the original labels are equal
/// (collision-checked against `table`).
pub fn compress_labels_with_table(
    seq: &ContextualLabelSequence,
    table: &mut CompressionTable,
) -> Result<ContextualLabelSequence, RelabelError> {
    let map = |layers: &[Vec<String>], table: &mut CompressionTable| {
        layers
            .iter()
            .map(|labels| labels.iter().map(|l| table.token(l)).collect())
            .collect::<Result<Vec<Vec<String>>, _>>()
    };
    Ok(ContextualLabelSequence {
        node_ids: seq.node_ids.clone(),
        plain: map(&seq.plain, table)?,
        contextual: map(&seq.contextual, table)?,
    })
}

/// [`compress_labels_with_table`] with a table scoped to this one call.
pub fn compress_labels(
    seq: &ContextualLabelSequence,
) -> Result<ContextualLabelSequence, RelabelError> {
    compress_labels_with_table(seq, &mut CompressionTable::new())
}
