//! Bag-of-features vectorization and the (contextual) WL graph kernels.
//!
//! The kernel between two graphs counts pairs of equal feature labels across
//! all relabeling iterations: a label occurring `a` times in one graph and
//! `b` times in the other contributes `a * b`. That is exactly the inner
//! product of the two explicit count vectors over a shared vocabulary, which
//! is how both the pairwise kernel and the K x K kernel matrix are computed
//! here (one relabeling pass per graph, then sparse dot products — never
//! K^2 independent relabelings).

use std::collections::HashMap;

use log::warn;

use crate::graph::ContextualGraph;
use crate::relabel::{relabel_with_table, CompressionTable, RelabelError, RelabelParams};
use crate::sparse::SparseVector;
use crate::vocab::Vocabulary;

/// Streaming bag-of-features extraction session.
///
/// Holds the shared vocabulary, the compression table guarding token
/// injectivity across every graph seen by this session, and the running count
/// of features dropped under a frozen vocabulary.
pub struct BagExtractor<'v> {
    params: RelabelParams,
    vocab: &'v mut Vocabulary,
    table: CompressionTable,
    frozen: bool,
    dropped: u64,
}

impl<'v> BagExtractor<'v> {
    pub fn new(params: RelabelParams, vocab: &'v mut Vocabulary, frozen: bool) -> Self {
        BagExtractor {
            params,
            vocab,
            table: CompressionTable::new(),
            frozen,
            dropped: 0,
        }
    }

    /// Counts each contextual label occurrence across iterations 0..=h.
    /// Unseen labels grow the vocabulary, or are dropped when frozen.
    pub fn vectorize(&mut self, graph: &ContextualGraph) -> Result<SparseVector, RelabelError> {
        let seq = relabel_with_table(graph, &self.params, &mut self.table)?;
        let mut counts: HashMap<u32, u32> = HashMap::new();
        for label in seq.feature_labels() {
            let index = if self.frozen {
                match self.vocab.index_of(label) {
                    Some(i) => i,
                    None => {
                        self.dropped += 1;
                        continue;
                    }
                }
            } else {
                self.vocab.get_or_insert(label)
            };
            *counts.entry(index).or_insert(0) += 1;
        }
        Ok(SparseVector::from_counts(counts))
    }

    /// Features dropped so far because they were absent from the frozen
    /// vocabulary.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

/// One-off vectorization of a single graph against a shared vocabulary.
pub fn vectorize(
    graph: &ContextualGraph,
    params: &RelabelParams,
    vocab: &mut Vocabulary,
    frozen: bool,
) -> Result<SparseVector, RelabelError> {
    BagExtractor::new(*params, vocab, frozen).vectorize(graph)
}

fn vectors_over_shared_vocab(
    graphs: &[&ContextualGraph],
    params: &RelabelParams,
) -> Result<Vec<SparseVector>, RelabelError> {
    let mut vocab = Vocabulary::new();
    let mut extractor = BagExtractor::new(*params, &mut vocab, false);
    graphs.iter().map(|g| extractor.vectorize(g)).collect()
}

/// Vectorizes a graph set over a local shared vocabulary; a compression
/// collision falls back to uncompressed labels, which yield the same values.
fn vectors_with_fallback(
    graphs: &[&ContextualGraph],
    params: &RelabelParams,
) -> Result<Vec<SparseVector>, RelabelError> {
    match vectors_over_shared_vocab(graphs, params) {
        Err(RelabelError::CompressionCollision { token, a, b }) => {
            warn!("label compression collision on token {token} ({a:?} vs {b:?}); recomputing with full labels");
            let mut uncompressed = *params;
            uncompressed.compress = false;
            vectors_over_shared_vocab(graphs, &uncompressed)
        }
        other => other,
    }
}

/// Kernel value between two graphs: the number of matching feature-label
/// pairs across iterations 0..=h.
pub fn kernel(
    g1: &ContextualGraph,
    g2: &ContextualGraph,
    params: &RelabelParams,
) -> Result<u64, RelabelError> {
    let vectors = vectors_with_fallback(&[g1, g2], params)?;
    Ok(vectors[0].dot(&vectors[1]) as u64)
}

/// K x K symmetric kernel matrix, computed via the shared-vocabulary
/// bag-of-features optimization.
pub fn kernel_matrix(
    graphs: &[ContextualGraph],
    params: &RelabelParams,
) -> Result<Vec<Vec<u64>>, RelabelError> {
    let refs: Vec<&ContextualGraph> = graphs.iter().collect();
    let vectors = vectors_with_fallback(&refs, params)?;
    let k = vectors.len();
    let mut matrix = vec![vec![0u64; k]; k];
    for i in 0..k {
        for j in i..k {
            let value = vectors[i].dot(&vectors[j]) as u64;
            matrix[i][j] = value;
            matrix[j][i] = value;
        }
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::test_fixtures::{geinimi_fragment, yahoo_weather_fragment};
    use crate::graph::{Context, GraphBuilder, GraphMeta};

    fn h1() -> RelabelParams {
        RelabelParams::with_height(1)
    }

    #[test]
    fn contextual_vectorization_of_the_leak_fragment() {
        let g = geinimi_fragment();
        let mut vocab = Vocabulary::new();
        let v = vectorize(&g, &h1(), &mut vocab, false).unwrap();
        // 3 nodes x 2 iterations, all labels distinct
        assert_eq!(v.nnz(), 6);
        assert!(v.iter().all(|(_, c)| c == 1.0));
        assert_eq!(vocab.len(), 6);
        assert_eq!(v.sum(), 6.0);
    }

    #[test]
    fn vectorizing_twice_is_idempotent() {
        let g = geinimi_fragment();
        let mut vocab = Vocabulary::new();
        let v1 = vectorize(&g, &h1(), &mut vocab, false).unwrap();
        let before = vocab.len();
        let v2 = vectorize(&g, &h1(), &mut vocab, false).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(vocab.len(), before);
    }

    #[test]
    fn empty_graph_vectorizes_to_the_empty_vector() {
        let g = GraphBuilder::new(GraphMeta::new("empty")).build().unwrap();
        let mut vocab = Vocabulary::new();
        let v = vectorize(&g, &h1(), &mut vocab, false).unwrap();
        assert!(v.is_empty());
        assert!(vocab.is_empty());
    }

    #[test]
    fn frozen_vocabulary_drops_unseen_labels() {
        let gein = geinimi_fragment();
        let yahoo = yahoo_weather_fragment();
        let mut vocab = Vocabulary::new();
        vectorize(&gein, &h1(), &mut vocab, false).unwrap();

        let mut extractor = BagExtractor::new(h1(), &mut vocab, true);
        let v = extractor.vectorize(&yahoo).unwrap();
        // every label differs by context prefix, so everything is dropped
        assert!(v.is_empty());
        assert_eq!(extractor.dropped(), 6);
    }

    #[test]
    fn discriminating_pair_contextual_vs_plain() {
        let gein = geinimi_fragment();
        let yahoo = yahoo_weather_fragment();
        assert_eq!(kernel(&gein, &yahoo, &h1()).unwrap(), 0);
        assert_eq!(kernel(&gein, &yahoo, &h1().plain()).unwrap(), 6);
    }

    #[test]
    fn self_kernel_is_at_least_label_count() {
        let g = geinimi_fragment();
        let k = kernel(&g, &g, &h1()).unwrap();
        // all 6 labels distinct: exactly |N| * (h+1)
        assert_eq!(k, 6);
    }

    #[test]
    fn single_node_identical_graphs_match_once_at_height_zero() {
        let make = |id: &str| {
            GraphBuilder::new(GraphMeta::new(id))
                .node(0, "sendTextMessage", [Context::UserUnaware])
                .build()
                .unwrap()
        };
        let k = kernel(&make("a"), &make("b"), &RelabelParams::with_height(0)).unwrap();
        assert_eq!(k, 1);
    }

    #[test]
    fn kernel_matrix_matches_pairwise_kernels_and_is_symmetric() {
        let graphs = vec![
            geinimi_fragment(),
            yahoo_weather_fragment(),
            geinimi_fragment(),
        ];
        let params = h1();
        let m = kernel_matrix(&graphs, &params).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
                assert_eq!(
                    m[i][j],
                    kernel(&graphs[i], &graphs[j], &params).unwrap(),
                    "entry ({i},{j})"
                );
            }
        }
        // duplicate graph: identical rows
        assert_eq!(m[0], m[2]);
        // 1x1 case
        let single = kernel_matrix(&graphs[..1], &params).unwrap();
        assert_eq!(single, vec![vec![m[0][0]]]);
    }

    #[test]
    fn compression_does_not_change_kernel_values() {
        let gein = geinimi_fragment();
        let yahoo = yahoo_weather_fragment();
        for (a, b) in [(&gein, &yahoo), (&gein, &gein)] {
            let plain = kernel(a, b, &RelabelParams::with_height(2)).unwrap();
            let packed = kernel(a, b, &RelabelParams::with_height(2).compressed()).unwrap();
            assert_eq!(plain, packed);
        }
    }
}
