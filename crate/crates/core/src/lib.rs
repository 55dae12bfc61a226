//! Contextual Weisfeiler-Lehman feature extraction and online learning over
//! drifting streams of context-annotated dependency graphs.
//!
//! The pipeline, end to end:
//!
//! 1. [`graph`] — the data model and line-delimited file format for directed,
//!    node-labeled graphs whose nodes carry reachability contexts.
//! 2. [`relabel`] / [`kernel`] — WL and contextual-WL relabeling, explicit
//!    bag-of-features vectors over a growing [`vocab::Vocabulary`], pairwise
//!    kernels and the K x K kernel matrix.
//! 3. [`learners`] — confidence-weighted, perceptron, passive-aggressive and
//!    logistic-SGD online classifiers plus a batch max-margin baseline, all
//!    over sparse vectors with growing dimension.
//! 4. [`explain`] — ranked per-prediction feature contributions and
//!    per-family aggregated reports.
//! 5. [`harness`] — prequential (predict-then-update) evaluation and
//!    sliding-window batch retraining regimens with cumulative-error,
//!    vocabulary-growth and feature-weight curves.
//! 6. [`synthgen`] — seeded generator of drifting labeled graph streams with
//!    family lifecycles, for regimen comparisons at desk scale.

pub mod explain;
pub mod features;
pub mod graph;
pub mod harness;
pub mod kernel;
pub mod learners;
pub mod relabel;
pub mod sparse;
pub mod synthgen;
pub mod vocab;

pub use explain::{explain_prediction, family_report, Contribution, ExplainError, Explanation};
pub use features::{read_feature_records, write_feature_records, FeatureError, FeatureRecord};
pub use graph::{
    parse_graph, read_graphs, write_graphs, Context, ContextualGraph, GraphBuilder, GraphError,
    GraphMeta, Label, Node,
};
pub use harness::{
    run_batch_regimen, run_online, BatchRegimen, BatchRunConfig, DayStats, HarnessError,
    OnlineRunConfig, Payload, RegimenKind, RunReport, StreamSample, WatchKey,
};
pub use kernel::{kernel, kernel_matrix, vectorize, BagExtractor};
pub use learners::{
    batch_train, load_model, save_model, BatchModel, BatchTrainConfig, CwModel, LearnerError,
    LearnerKind, LearnerSpec, LinearScorer, LrSgdModel, OnlineLearner, OnlineModel, PaModel,
    PerceptronModel, Prediction, SavedModel,
};
pub use relabel::{
    compress_labels, relabel, CompressionTable, ContextualLabelSequence, RelabelError,
    RelabelParams,
};
pub use sparse::SparseVector;
pub use synthgen::{generate, flip_scenario, FamilySpec, GraphFragment, ScenarioConfig, ScenarioError};
pub use vocab::{VocabError, Vocabulary};
