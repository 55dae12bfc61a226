//! Context-annotated dependency graphs and their line-delimited file format.
//!
//! A [`ContextualGraph`] is a directed, node-labeled graph in which every node
//! carries a non-empty set of reachability [`Context`]s (user-aware,
//! user-unaware, unresolved, or producer-defined kinds). Graphs arrive one per
//! line as UTF-8 JSON records and are validated on ingestion; values are
//! immutable after construction and safe to share across threads.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Characters with structural meaning in relabeled feature strings.
///
/// Node labels and context kinds must not contain any of them; rejecting them
/// at parse time keeps every composed neighborhood label unambiguous.
pub const RESERVED_CHARS: &[char] = &[
    '⊕', '|', ',', ';', ':', '^', '~', '!', '?', '%', '&', '\t', '\n', '\r',
];

/// Errors raised while parsing or validating graphs.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: malformed graph record: {message}")]
    Parse { line: usize, message: String },
    #[error("graph {graph:?}: record has no nodes")]
    EmptyGraph { graph: String },
    #[error("graph {graph:?}: duplicate node id {node}")]
    DuplicateNode { graph: String, node: u32 },
    #[error("graph {graph:?}: node {node} has an empty label")]
    EmptyNodeLabel { graph: String, node: u32 },
    #[error("graph {graph:?}: node {node} has an empty context set")]
    EmptyContexts { graph: String, node: u32 },
    #[error("graph {graph:?}: edge endpoint references missing node id {node}")]
    DanglingEdge { graph: String, node: u32 },
    #[error("graph {graph:?}: duplicate edge ({src}, {dst})")]
    DuplicateEdge { graph: String, src: u32, dst: u32 },
    #[error("graph {graph:?}: self-loop on node {node}")]
    SelfLoop { graph: String, node: u32 },
    #[error("{what} {value:?} contains reserved character {ch:?}")]
    ReservedChar {
        what: &'static str,
        value: String,
        ch: char,
    },
    #[error("empty context kind")]
    EmptyContext,
    #[error("unknown node id {node}")]
    UnknownNode { node: u32 },
    #[error("class label must be +1 or -1, got {value}")]
    BadLabel { value: i8 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Binary class label: +1 malicious, -1 benign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Malicious,
    Benign,
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_i8(self.to_i8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = i8::deserialize(deserializer)?;
        Label::from_i8(value).map_err(serde::de::Error::custom)
    }
}

impl Label {
    pub fn from_i8(value: i8) -> Result<Self, GraphError> {
        match value {
            1 => Ok(Label::Malicious),
            -1 => Ok(Label::Benign),
            _ => Err(GraphError::BadLabel { value }),
        }
    }

    pub fn to_i8(self) -> i8 {
        match self {
            Label::Malicious => 1,
            Label::Benign => -1,
        }
    }

    /// Sign of a decision score; a score of exactly 0 resolves to benign.
    pub fn from_score(score: f64) -> Self {
        if score > 0.0 {
            Label::Malicious
        } else {
            Label::Benign
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Malicious => Label::Benign,
            Label::Benign => Label::Malicious,
        }
    }
}

/// Reachability context of a node: the kind of trigger through which the
/// node's API call site can be reached.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Context {
    /// Reached through interaction with the app's UI.
    UserAware,
    /// Reached through system or background events.
    UserUnaware,
    /// Entry point not traceable by the producer's analysis.
    Unresolved,
    /// Producer-defined context kind, treated as an opaque distinct context.
    Other(String),
}

impl Context {
    /// Parses a context kind, canonicalizing the three built-in kinds.
    pub fn parse(kind: &str) -> Result<Self, GraphError> {
        if kind.is_empty() {
            return Err(GraphError::EmptyContext);
        }
        if let Some(ch) = kind.chars().find(|c| RESERVED_CHARS.contains(c)) {
            return Err(GraphError::ReservedChar {
                what: "context kind",
                value: kind.to_string(),
                ch,
            });
        }
        Ok(match kind {
            "user-aware" => Context::UserAware,
            "user-unaware" => Context::UserUnaware,
            "unresolved" => Context::Unresolved,
            _ => Context::Other(kind.to_string()),
        })
    }

    pub fn as_str(&self) -> &str {
        match self {
            Context::UserAware => "user-aware",
            Context::UserUnaware => "user-unaware",
            Context::Unresolved => "unresolved",
            Context::Other(kind) => kind,
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl PartialOrd for Context {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Context {
    /// Lexicographic on the context kind string; the canonical ordering used
    /// when stringifying multi-context nodes.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.as_str().cmp(other.as_str())
    }
}

/// A node: unique id within its graph, a security-sensitive API label, and a
/// non-empty, deduplicated, sorted set of contexts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: u32,
    pub label: String,
    pub contexts: Vec<Context>,
}

/// Graph-level metadata carried by each stream record.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMeta {
    pub id: String,
    /// +1 malicious, -1 benign, `None` unlabeled.
    pub label: Option<Label>,
    /// Day index relative to stream start (day 0).
    pub day: u32,
    pub family: Option<String>,
}

impl GraphMeta {
    pub fn new(id: impl Into<String>) -> Self {
        GraphMeta {
            id: id.into(),
            label: None,
            day: 0,
            family: None,
        }
    }
}

/// A validated context-annotated dependency graph.
///
/// Nodes are held sorted by id and edges sorted lexicographically, so two
/// graphs with the same node records and edge set compare equal regardless of
/// input order.
#[derive(Debug, Clone)]
pub struct ContextualGraph {
    meta: GraphMeta,
    nodes: Vec<Node>,
    edges: Vec<(u32, u32)>,
    out: Vec<Vec<usize>>,
    pos: HashMap<u32, usize>,
}

impl PartialEq for ContextualGraph {
    fn eq(&self, other: &Self) -> bool {
        self.meta == other.meta && self.nodes == other.nodes && self.edges == other.edges
    }
}

impl ContextualGraph {
    pub fn meta(&self) -> &GraphMeta {
        &self.meta
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: u32) -> Option<&Node> {
        self.pos.get(&id).map(|&p| &self.nodes[p])
    }

    /// Out-neighbors of `id` (successors along directed edges), sorted by id.
    pub fn neighbors(&self, id: u32) -> Result<Vec<u32>, GraphError> {
        let &p = self
            .pos
            .get(&id)
            .ok_or(GraphError::UnknownNode { node: id })?;
        Ok(self.out[p].iter().map(|&q| self.nodes[q].id).collect())
    }

    /// Out-neighbor positions of the node at `position`, sorted by node id.
    pub(crate) fn out_positions(&self, position: usize) -> &[usize] {
        &self.out[position]
    }

    /// Serializes to the canonical single-line JSON record.
    pub fn to_json_line(&self) -> String {
        let raw = RawGraph {
            id: self.meta.id.clone(),
            y: self.meta.label.map(Label::to_i8),
            t: self.meta.day,
            family: self.meta.family.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| RawNode {
                    id: n.id,
                    label: n.label.clone(),
                    ctx: n.contexts.iter().map(|c| c.as_str().to_string()).collect(),
                })
                .collect(),
            edges: self.edges.clone(),
        };
        serde_json::to_string(&raw).expect("graph record serializes")
    }
}

/// Incremental construction of a validated [`ContextualGraph`].
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    meta: GraphMeta,
    nodes: Vec<Node>,
    edges: Vec<(u32, u32)>,
}

impl GraphBuilder {
    pub fn new(meta: GraphMeta) -> Self {
        GraphBuilder {
            meta,
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn node(
        mut self,
        id: u32,
        label: impl Into<String>,
        contexts: impl IntoIterator<Item = Context>,
    ) -> Self {
        self.nodes.push(Node {
            id,
            label: label.into(),
            contexts: contexts.into_iter().collect(),
        });
        self
    }

    pub fn edge(mut self, src: u32, dst: u32) -> Self {
        self.edges.push((src, dst));
        self
    }

    pub fn build(self) -> Result<ContextualGraph, GraphError> {
        let GraphBuilder {
            meta,
            mut nodes,
            mut edges,
        } = self;
        let graph = meta.id.clone();

        nodes.sort_by_key(|n| n.id);
        let mut pos = HashMap::with_capacity(nodes.len());
        for (p, node) in nodes.iter_mut().enumerate() {
            if pos.insert(node.id, p).is_some() {
                return Err(GraphError::DuplicateNode { graph, node: node.id });
            }
            if node.label.is_empty() {
                return Err(GraphError::EmptyNodeLabel { graph, node: node.id });
            }
            if let Some(ch) = node.label.chars().find(|c| RESERVED_CHARS.contains(c)) {
                return Err(GraphError::ReservedChar {
                    what: "node label",
                    value: node.label.clone(),
                    ch,
                });
            }
            node.contexts.sort();
            node.contexts.dedup();
            if node.contexts.is_empty() {
                return Err(GraphError::EmptyContexts { graph, node: node.id });
            }
        }

        edges.sort_unstable();
        let mut out = vec![Vec::new(); nodes.len()];
        let mut prev: Option<(u32, u32)> = None;
        for &(src, dst) in &edges {
            if prev == Some((src, dst)) {
                return Err(GraphError::DuplicateEdge { graph, src, dst });
            }
            prev = Some((src, dst));
            if src == dst {
                return Err(GraphError::SelfLoop { graph, node: src });
            }
            let &sp = pos
                .get(&src)
                .ok_or(GraphError::DanglingEdge {
                    graph: graph.clone(),
                    node: src,
                })?;
            let &dp = pos
                .get(&dst)
                .ok_or(GraphError::DanglingEdge {
                    graph: graph.clone(),
                    node: dst,
                })?;
            out[sp].push(dp);
        }
        // nodes are sorted by id, so sorting positions sorts neighbors by id
        for adj in &mut out {
            adj.sort_unstable();
        }

        Ok(ContextualGraph {
            meta,
            nodes,
            edges,
            out,
            pos,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct RawNode {
    id: u32,
    label: String,
    ctx: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    id: String,
    y: Option<i8>,
    t: u32,
    family: Option<String>,
    nodes: Vec<RawNode>,
    edges: Vec<(u32, u32)>,
}

/// Parses a single graph record (one line of the graph file format).
pub fn parse_graph(record: &str) -> Result<ContextualGraph, GraphError> {
    let raw: RawGraph = serde_json::from_str(record).map_err(|e| GraphError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if raw.nodes.is_empty() {
        return Err(GraphError::EmptyGraph { graph: raw.id });
    }
    let label = raw.y.map(Label::from_i8).transpose()?;
    let mut builder = GraphBuilder::new(GraphMeta {
        id: raw.id,
        label,
        day: raw.t,
        family: raw.family,
    });
    for node in raw.nodes {
        let contexts = node
            .ctx
            .iter()
            .map(|k| Context::parse(k))
            .collect::<Result<Vec<_>, _>>()?;
        builder = builder.node(node.id, node.label, contexts);
    }
    for (src, dst) in raw.edges {
        builder = builder.edge(src, dst);
    }
    builder.build()
}

/// Reads line-delimited graph records, attaching 1-based line numbers to
/// parse errors. Blank lines are skipped.
pub fn read_graphs<R: BufRead>(reader: R) -> impl Iterator<Item = Result<ContextualGraph, GraphError>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Err(e) => Some(Err(GraphError::Io(e))),
            Ok(text) if text.trim().is_empty() => None,
            Ok(text) => Some(parse_graph(&text).map_err(move |e| match e {
                GraphError::Parse { message, .. } => GraphError::Parse {
                    line: i + 1,
                    message,
                },
                other => other,
            })),
        })
}

/// Writes graphs one record per line.
pub fn write_graphs<'a, W: Write>(
    writer: &mut W,
    graphs: impl IntoIterator<Item = &'a ContextualGraph>,
) -> io::Result<()> {
    for g in graphs {
        writeln!(writer, "{}", g.to_json_line())?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod test_fixtures {
    use super::*;

    /// The location-leak fragment reached in the user-unaware context:
    /// getLatitude -> writeBytes, getLongitude -> writeBytes.
    pub fn geinimi_fragment() -> ContextualGraph {
        leak_fragment("geinimi", Context::UserUnaware)
    }

    /// The same fragment reached through the UI (user-aware context).
    pub fn yahoo_weather_fragment() -> ContextualGraph {
        leak_fragment("yahoo-weather", Context::UserAware)
    }

    fn leak_fragment(id: &str, ctx: Context) -> ContextualGraph {
        GraphBuilder::new(GraphMeta::new(id))
            .node(0, "getLatitude", [ctx.clone()])
            .node(1, "getLongitude", [ctx.clone()])
            .node(2, "writeBytes", [ctx])
            .edge(0, 2)
            .edge(1, 2)
            .build()
            .unwrap()
    }
}
