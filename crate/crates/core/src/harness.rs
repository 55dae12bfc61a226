//! Streaming evaluation engine.
//!
//! Runs a labeled, day-indexed sample stream through either a prequential
//! online learner (predict, record, then update, per sample) or a
//! sliding-window batch retraining regimen, producing per-day cumulative
//! error curves, feature-space growth, optional feature-weight time series,
//! and precision/recall/F-measure over the run.
//!
//! Prequential soundness is structural: a sample's label reaches the learner
//! only through `learn`, which is always called after its prediction was
//! recorded. Scoring starts after each regimen's initial training window
//! (day 1 for once/daily, day `window` for the multi variants, day 1 for
//! online when first-day seeding is on), and cumulative error at day d counts
//! mistakes over all scored samples with t <= d.

use std::collections::HashSet;
use std::ops::Range;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureRecord;
use crate::graph::{ContextualGraph, Label};
use crate::kernel::BagExtractor;
use crate::learners::{
    batch_train, BatchModel, BatchTrainConfig, LearnerError, LinearScorer, OnlineLearner,
};
use crate::relabel::{RelabelError, RelabelParams};
use crate::sparse::SparseVector;
use crate::vocab::Vocabulary;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("record {index} (id {id:?}): stream not sorted by day ({day} after {previous})")]
    UnsortedStream {
        index: usize,
        id: String,
        day: u32,
        previous: u32,
    },
    #[error("record {id:?} is unlabeled; evaluation streams need class labels")]
    Unlabeled { id: String },
    #[error("window of {window} days exceeds the stream span of {span} days")]
    WindowExceedsSpan { window: u32, span: u32 },
    #[error("window-days must be at least 1")]
    ZeroWindow,
    #[error("empty stream")]
    EmptyStream,
    #[error(transparent)]
    Relabel(#[from] RelabelError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// A sample's payload: either a raw graph (vectorized by the harness with a
/// growing vocabulary) or an already-extracted sparse vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Graph(ContextualGraph),
    Vector(SparseVector),
}

/// One unit of the evaluation stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSample {
    pub id: String,
    pub label: Label,
    pub day: u32,
    pub family: Option<String>,
    pub payload: Payload,
}

impl StreamSample {
    pub fn from_graph(graph: ContextualGraph) -> Result<Self, HarnessError> {
        let meta = graph.meta().clone();
        let label = meta.label.ok_or(HarnessError::Unlabeled {
            id: meta.id.clone(),
        })?;
        Ok(StreamSample {
            id: meta.id,
            label,
            day: meta.day,
            family: meta.family,
            payload: Payload::Graph(graph),
        })
    }

    pub fn from_features(record: &FeatureRecord) -> Result<Self, HarnessError> {
        let label = record
            .label()
            .ok()
            .flatten()
            .ok_or(HarnessError::Unlabeled {
                id: record.id.clone(),
            })?;
        Ok(StreamSample {
            id: record.id.clone(),
            label,
            day: record.t,
            family: record.family.clone(),
            payload: Payload::Vector(record.vector()),
        })
    }
}

/// Training/evaluation regimens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimenKind {
    Online,
    Once,
    Daily,
    MultiOnce,
    MultiDaily,
}

impl RegimenKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimenKind::Online => "online",
            RegimenKind::Once => "once",
            RegimenKind::Daily => "daily",
            RegimenKind::MultiOnce => "multi-once",
            RegimenKind::MultiDaily => "multi-daily",
        }
    }

    pub fn batch(self) -> Option<BatchRegimen> {
        match self {
            RegimenKind::Online => None,
            RegimenKind::Once => Some(BatchRegimen::Once),
            RegimenKind::Daily => Some(BatchRegimen::Daily),
            RegimenKind::MultiOnce => Some(BatchRegimen::MultiOnce),
            RegimenKind::MultiDaily => Some(BatchRegimen::MultiDaily),
        }
    }
}

impl std::str::FromStr for RegimenKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "online" => Ok(RegimenKind::Online),
            "once" => Ok(RegimenKind::Once),
            "daily" => Ok(RegimenKind::Daily),
            "multi-once" => Ok(RegimenKind::MultiOnce),
            "multi-daily" => Ok(RegimenKind::MultiDaily),
            other => Err(format!("unknown regimen {other:?}")),
        }
    }
}

/// The four batch retraining variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchRegimen {
    /// Train once on day 0, never retrain.
    Once,
    /// Before scoring day d, retrain from scratch on day d-1.
    Daily,
    /// Train once on days 0..window, never retrain.
    MultiOnce,
    /// Before scoring day d, retrain from scratch on days d-window..d.
    MultiDaily,
}

impl BatchRegimen {
    pub fn kind(self) -> RegimenKind {
        match self {
            BatchRegimen::Once => RegimenKind::Once,
            BatchRegimen::Daily => RegimenKind::Daily,
            BatchRegimen::MultiOnce => RegimenKind::MultiOnce,
            BatchRegimen::MultiDaily => RegimenKind::MultiDaily,
        }
    }

    fn retrains(self) -> bool {
        matches!(self, BatchRegimen::Daily | BatchRegimen::MultiDaily)
    }

    /// First day that gets scored (everything earlier is initial training
    /// data).
    pub fn scoring_start(self, window: u32) -> u32 {
        match self {
            BatchRegimen::Once | BatchRegimen::Daily => 1,
            BatchRegimen::MultiOnce | BatchRegimen::MultiDaily => window,
        }
    }

    /// Day range this regimen trains on in order to score day `d`.
    pub fn training_window(self, window: u32, d: u32) -> Range<u32> {
        match self {
            BatchRegimen::Once => 0..1,
            BatchRegimen::MultiOnce => 0..window,
            BatchRegimen::Daily => d.saturating_sub(1)..d,
            BatchRegimen::MultiDaily => d.saturating_sub(window)..d,
        }
    }
}

/// A feature to track over time, addressed by vocabulary label or raw index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum WatchKey {
    Label(String),
    Index(u32),
}

impl WatchKey {
    fn display(&self) -> String {
        match self {
            WatchKey::Label(l) => l.clone(),
            WatchKey::Index(i) => format!("#{i}"),
        }
    }

    fn resolve(&self, vocab: &Vocabulary) -> Option<u32> {
        match self {
            WatchKey::Label(l) => vocab.index_of(l),
            WatchKey::Index(i) => Some(*i),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineRunConfig {
    /// Relabeling parameters for graph payloads.
    pub relabel: RelabelParams,
    /// Consume day-0 samples as model seed material, excluded from scoring.
    pub seed_first_day: bool,
    pub watch: Vec<WatchKey>,
}

impl Default for OnlineRunConfig {
    fn default() -> Self {
        OnlineRunConfig {
            relabel: RelabelParams::default(),
            seed_first_day: false,
            watch: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRunConfig {
    pub regimen: BatchRegimen,
    pub window_days: u32,
    pub relabel: RelabelParams,
    pub watch: Vec<WatchKey>,
    pub train: BatchTrainConfig,
}

impl BatchRunConfig {
    pub fn new(regimen: BatchRegimen) -> Self {
        BatchRunConfig {
            regimen,
            window_days: 10,
            relabel: RelabelParams::default(),
            watch: Vec::new(),
            train: BatchTrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayStats {
    pub day: u32,
    /// Samples scored this day.
    pub scored: u64,
    /// Mistakes this day.
    pub mistakes: u64,
    /// Mistakes / scored over all samples with t <= day; `None` before
    /// scoring starts.
    pub cumulative_error: Option<f64>,
    /// Cumulative count of distinct features observed in the stream.
    pub vocab_size: u64,
}

/// Per-day wall-clock, separated from the deterministic report body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunTimings {
    pub train_secs: Vec<f64>,
    pub predict_secs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatchSeries {
    pub key: String,
    /// Mean weight of the feature at each day boundary (index = day).
    pub weights: Vec<f64>,
}

/// Outcome of one regimen run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub regimen: String,
    pub scored: u64,
    pub mistakes: u64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub days: Vec<DayStats>,
    pub weight_series: Vec<WatchSeries>,
    /// Wall-clock; everything else in the report is deterministic for a
    /// given (stream, config, seed).
    pub timings: RunTimings,
}

impl RunReport {
    pub fn final_error(&self) -> Option<f64> {
        if self.scored == 0 {
            None
        } else {
            Some(self.mistakes as f64 / self.scored as f64)
        }
    }

    pub fn weights_for(&self, key: &str) -> Option<&[f64]> {
        self.weight_series
            .iter()
            .find(|s| s.key == key)
            .map(|s| s.weights.as_slice())
    }

    /// Equality of everything except wall-clock.
    pub fn deterministic_eq(&self, other: &RunReport) -> bool {
        self.regimen == other.regimen
            && self.scored == other.scored
            && self.mistakes == other.mistakes
            && self.precision == other.precision
            && self.recall == other.recall
            && self.f_measure == other.f_measure
            && self.days == other.days
            && self.weight_series == other.weight_series
    }
}

/// Stream after validation and vectorization, ready to replay by day.
struct Prepared {
    xs: Vec<SparseVector>,
    ys: Vec<Label>,
    max_day: u32,
    /// Sample index range of each day 0..=max_day (empty for silent days).
    day_ranges: Vec<Range<usize>>,
    /// Cumulative distinct feature indices observed by the end of each day.
    vocab_by_day: Vec<u64>,
}

fn prepare(
    stream: &[StreamSample],
    relabel: &RelabelParams,
    vocab: &mut Vocabulary,
) -> Result<Prepared, HarnessError> {
    if stream.is_empty() {
        return Err(HarnessError::EmptyStream);
    }
    for (index, sample) in stream.iter().enumerate() {
        if index > 0 && sample.day < stream[index - 1].day {
            return Err(HarnessError::UnsortedStream {
                index,
                id: sample.id.clone(),
                day: sample.day,
                previous: stream[index - 1].day,
            });
        }
    }

    let max_day = stream.last().map(|s| s.day).unwrap_or(0);
    let mut extractor = BagExtractor::new(*relabel, vocab, false);
    let mut xs = Vec::with_capacity(stream.len());
    let mut ys = Vec::with_capacity(stream.len());
    let mut seen: HashSet<u32> = HashSet::new();
    let mut vocab_by_day = vec![0u64; max_day as usize + 1];
    let mut day_ranges = vec![0..0; max_day as usize + 1];

    let mut current_day = 0u32;
    let mut day_start = 0usize;
    for (index, sample) in stream.iter().enumerate() {
        while current_day < sample.day {
            day_ranges[current_day as usize] = day_start..index;
            vocab_by_day[current_day as usize] = seen.len() as u64;
            current_day += 1;
            day_start = index;
        }
        let x = match &sample.payload {
            Payload::Graph(g) => extractor.vectorize(g)?,
            Payload::Vector(v) => v.clone(),
        };
        for (i, _) in x.iter() {
            seen.insert(i);
        }
        xs.push(x);
        ys.push(sample.label);
    }
    day_ranges[current_day as usize] = day_start..stream.len();
    vocab_by_day[current_day as usize] = seen.len() as u64;

    Ok(Prepared {
        xs,
        ys,
        max_day,
        day_ranges,
        vocab_by_day,
    })
}

#[derive(Default)]
struct Tally {
    scored: u64,
    mistakes: u64,
    tp: u64,
    fp: u64,
    fn_: u64,
}

impl Tally {
    fn record(&mut self, predicted: Label, actual: Label) {
        self.scored += 1;
        if predicted != actual {
            self.mistakes += 1;
        }
        match (predicted, actual) {
            (Label::Malicious, Label::Malicious) => self.tp += 1,
            (Label::Malicious, Label::Benign) => self.fp += 1,
            (Label::Benign, Label::Malicious) => self.fn_ += 1,
            (Label::Benign, Label::Benign) => {}
        }
    }

    fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    fn f_measure(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

struct CurveBuilder {
    days: Vec<DayStats>,
    series: Vec<(WatchKey, Vec<f64>)>,
}

impl CurveBuilder {
    fn new(watch: &[WatchKey], day_count: usize) -> Self {
        CurveBuilder {
            days: Vec::with_capacity(day_count),
            series: watch
                .iter()
                .map(|k| (k.clone(), Vec::with_capacity(day_count)))
                .collect(),
        }
    }

    fn close_day(
        &mut self,
        day: u32,
        day_scored: u64,
        day_mistakes: u64,
        tally: &Tally,
        vocab_size: u64,
        vocab: &Vocabulary,
        weight_of: impl Fn(u32) -> f64,
    ) {
        self.days.push(DayStats {
            day,
            scored: day_scored,
            mistakes: day_mistakes,
            cumulative_error: (tally.scored > 0)
                .then(|| tally.mistakes as f64 / tally.scored as f64),
            vocab_size,
        });
        for (key, weights) in &mut self.series {
            let weight = key.resolve(vocab).map_or(0.0, &weight_of);
            weights.push(weight);
        }
    }

    fn finish(self, regimen: RegimenKind, tally: &Tally, timings: RunTimings) -> RunReport {
        RunReport {
            regimen: regimen.as_str().to_string(),
            scored: tally.scored,
            mistakes: tally.mistakes,
            precision: tally.precision(),
            recall: tally.recall(),
            f_measure: tally.f_measure(),
            days: self.days,
            weight_series: self
                .series
                .into_iter()
                .map(|(key, weights)| WatchSeries {
                    key: key.display(),
                    weights,
                })
                .collect(),
            timings,
        }
    }
}

/// Prequential online run: per sample, vectorize (growing vocabulary),
/// predict, record correctness, then update. With `seed_first_day`, day-0
/// samples train the model without being scored.
pub fn run_online<L: OnlineLearner>(
    stream: &[StreamSample],
    learner: &mut L,
    vocab: &mut Vocabulary,
    cfg: &OnlineRunConfig,
) -> Result<RunReport, HarnessError> {
    let prepared = prepare(stream, &cfg.relabel, vocab)?;
    let day_count = prepared.max_day as usize + 1;
    let mut timings = RunTimings {
        train_secs: vec![0.0; day_count],
        predict_secs: vec![0.0; day_count],
    };
    let mut tally = Tally::default();
    let mut curves = CurveBuilder::new(&cfg.watch, day_count);

    for day in 0..=prepared.max_day {
        let d = day as usize;
        let range = prepared.day_ranges[d].clone();
        let (mut day_scored, mut day_mistakes) = (0u64, 0u64);
        for i in range {
            let (x, y) = (&prepared.xs[i], prepared.ys[i]);
            if day == 0 && cfg.seed_first_day {
                let t = Instant::now();
                learner.learn(x, y)?;
                timings.train_secs[d] += t.elapsed().as_secs_f64();
                continue;
            }
            let t = Instant::now();
            let prediction = learner.predict(x);
            timings.predict_secs[d] += t.elapsed().as_secs_f64();
            tally.record(prediction.label, y);
            day_scored += 1;
            if prediction.label != y {
                day_mistakes += 1;
            }
            let t = Instant::now();
            learner.learn(x, y)?;
            timings.train_secs[d] += t.elapsed().as_secs_f64();
        }
        curves.close_day(
            day,
            day_scored,
            day_mistakes,
            &tally,
            prepared.vocab_by_day[d],
            vocab,
            |f| learner.weight(f),
        );
    }

    Ok(curves.finish(RegimenKind::Online, &tally, timings))
}

/// Sliding-window batch run: (re)train a batch model at day boundaries on the
/// regimen's training window (with the fixed feature set of that window),
/// then score the day's samples without updating.
pub fn run_batch_regimen(
    stream: &[StreamSample],
    vocab: &mut Vocabulary,
    cfg: &BatchRunConfig,
) -> Result<RunReport, HarnessError> {
    if cfg.window_days == 0 {
        return Err(HarnessError::ZeroWindow);
    }
    let prepared = prepare(stream, &cfg.relabel, vocab)?;
    let span = prepared.max_day + 1;
    if matches!(cfg.regimen, BatchRegimen::MultiOnce | BatchRegimen::MultiDaily)
        && cfg.window_days > span
    {
        return Err(HarnessError::WindowExceedsSpan {
            window: cfg.window_days,
            span,
        });
    }

    let day_count = prepared.max_day as usize + 1;
    let scoring_start = cfg.regimen.scoring_start(cfg.window_days);
    let mut timings = RunTimings {
        train_secs: vec![0.0; day_count],
        predict_secs: vec![0.0; day_count],
    };
    let mut tally = Tally::default();
    let mut curves = CurveBuilder::new(&cfg.watch, day_count);
    let mut model: Option<BatchModel> = None;

    for day in 0..=prepared.max_day {
        let d = day as usize;
        let (mut day_scored, mut day_mistakes) = (0u64, 0u64);
        if day >= scoring_start {
            if model.is_none() || cfg.regimen.retrains() {
                let window = cfg.regimen.training_window(cfg.window_days, day);
                let mut training: Vec<(SparseVector, Label)> = Vec::new();
                for train_day in window {
                    for i in prepared.day_ranges[train_day as usize].clone() {
                        training.push((prepared.xs[i].clone(), prepared.ys[i]));
                    }
                }
                if !training.is_empty() || model.is_none() {
                    // an empty window with an existing model keeps the model;
                    // without one, batch_train surfaces the empty-set error
                    let mut train_cfg = cfg.train.clone();
                    train_cfg.seed = derive_seed(cfg.train.seed, u64::from(day));
                    let t = Instant::now();
                    model = Some(batch_train(&training, &train_cfg)?);
                    timings.train_secs[d] += t.elapsed().as_secs_f64();
                }
            }
            let current = model.as_ref().expect("model exists once scoring starts");
            let t = Instant::now();
            for i in prepared.day_ranges[d].clone() {
                let prediction = current.predict(&prepared.xs[i]);
                tally.record(prediction.label, prepared.ys[i]);
                day_scored += 1;
                if prediction.label != prepared.ys[i] {
                    day_mistakes += 1;
                }
            }
            timings.predict_secs[d] += t.elapsed().as_secs_f64();
        }
        curves.close_day(
            day,
            day_scored,
            day_mistakes,
            &tally,
            prepared.vocab_by_day[d],
            vocab,
            |f| model.as_ref().map_or(0.0, |m| m.weight(f)),
        );
    }

    Ok(curves.finish(cfg.regimen.kind(), &tally, timings))
}

/// Deterministic substream seed derivation (splitmix64 over seed ^ index).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
