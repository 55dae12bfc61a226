//! Seeded generator of drifting, labeled graph streams.
//!
//! Each day emits Poisson-distributed counts of benign background graphs and,
//! per active malware family, background graphs with the family's motif
//! injected. Family rates follow a triangular ramp (emerge, flourish, fade).
//! Benign and malware backgrounds draw node labels from the same API
//! alphabet in the user-aware context, so only the motif structure and its
//! user-unaware/unresolved contexts separate the classes.
//!
//! Generation is pure in the seed: day d draws from a substream seeded by
//! `derive_seed(seed, d)`, so per-day generation is order-independent and two
//! runs with the same config are identical.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Context, ContextualGraph, GraphBuilder, GraphError, GraphMeta, Label};
use crate::harness::{derive_seed, Payload, StreamSample};
use crate::relabel::{relabel, RelabelParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("family {family:?}: invalid lifecycle: {reason}")]
    InvalidLifecycle { family: String, reason: String },
    #[error("invalid scenario: {reason}")]
    BadConfig { reason: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A graph fragment (nodes with labels and contexts, edges over node
/// positions) injected into every member of a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFragment {
    pub nodes: Vec<FragmentNode>,
    pub edges: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentNode {
    pub label: String,
    pub ctx: Vec<String>,
}

impl GraphFragment {
    pub fn new(nodes: Vec<(&str, Vec<&str>)>, edges: Vec<(u32, u32)>) -> Self {
        GraphFragment {
            nodes: nodes
                .into_iter()
                .map(|(label, ctx)| FragmentNode {
                    label: label.to_string(),
                    ctx: ctx.into_iter().map(str::to_string).collect(),
                })
                .collect(),
            edges,
        }
    }

    fn contexts(&self, node: &FragmentNode) -> Result<Vec<Context>, GraphError> {
        node.ctx.iter().map(|k| Context::parse(k)).collect()
    }

    /// Materializes the fragment as a standalone graph.
    pub fn to_graph(&self, meta: GraphMeta) -> Result<ContextualGraph, ScenarioError> {
        let mut builder = GraphBuilder::new(meta);
        for (i, node) in self.nodes.iter().enumerate() {
            builder = builder.node(i as u32, node.label.clone(), self.contexts(node)?);
        }
        for &(s, d) in &self.edges {
            builder = builder.edge(s, d);
        }
        Ok(builder.build()?)
    }

    fn validate(&self, family: &str) -> Result<(), ScenarioError> {
        if self.nodes.is_empty() {
            return Err(ScenarioError::InvalidLifecycle {
                family: family.to_string(),
                reason: "motif has no nodes".to_string(),
            });
        }
        self.to_graph(GraphMeta::new(format!("{family}-motif")))?;
        Ok(())
    }
}

/// One malware family: its motif, lifecycle, and peak emission rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub name: String,
    pub motif: GraphFragment,
    pub start_day: u32,
    pub peak_day: u32,
    pub end_day: u32,
    /// Samples per day at the lifecycle peak.
    pub peak_rate: f64,
}

impl FamilySpec {
    /// Triangular ramp: climbs from start to peak, decays from peak to end,
    /// zero outside [start, end].
    pub fn rate(&self, day: u32) -> f64 {
        if day < self.start_day || day > self.end_day {
            return 0.0;
        }
        if day <= self.peak_day {
            let len = f64::from(self.peak_day - self.start_day + 1);
            self.peak_rate * f64::from(day - self.start_day + 1) / len
        } else {
            let len = f64::from(self.end_day - self.peak_day);
            self.peak_rate * f64::from(self.end_day - day) / len
        }
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.start_day <= self.peak_day && self.peak_day <= self.end_day) {
            return Err(ScenarioError::InvalidLifecycle {
                family: self.name.clone(),
                reason: format!(
                    "start {} <= peak {} <= end {} violated",
                    self.start_day, self.peak_day, self.end_day
                ),
            });
        }
        if !(self.peak_rate >= 1.0) {
            return Err(ScenarioError::InvalidLifecycle {
                family: self.name.clone(),
                reason: format!("peak rate {} below 1", self.peak_rate),
            });
        }
        self.motif.validate(&self.name)
    }

    /// The height-0 contextual labels of the motif nodes: the features that
    /// mark this family, useful as a watch list.
    pub fn motif_feature_labels(&self) -> Vec<String> {
        let graph = self
            .motif
            .to_graph(GraphMeta::new(format!("{}-motif", self.name)))
            .expect("validated motif");
        let seq = relabel(&graph, &RelabelParams::with_height(0)).expect("height 0 is valid");
        let mut labels: Vec<String> = graph
            .nodes()
            .iter()
            .map(|n| seq.gamma(0, n.id).expect("node present").to_string())
            .collect();
        labels.sort();
        labels.dedup();
        labels
    }
}

/// Migrates one family to the benign population from a given day on: its
/// samples are labeled benign and the motif contexts switch to user-aware.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipSpec {
    pub family: String,
    pub day: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub families: Vec<FamilySpec>,
    /// Benign background samples per day (Poisson mean).
    pub benign_rate: f64,
    /// Probability a benign background sample is recorded with a flipped
    /// (+1) label.
    pub label_noise: f64,
    /// Size of the shared background API alphabet.
    pub alphabet_size: u32,
    pub days: u32,
    pub seed: u64,
    #[serde(default)]
    pub flip: Option<FlipSpec>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.days == 0 {
            return Err(ScenarioError::BadConfig {
                reason: "days must be at least 1".to_string(),
            });
        }
        if !(self.benign_rate >= 0.0) {
            return Err(ScenarioError::BadConfig {
                reason: format!("benign rate {} negative", self.benign_rate),
            });
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(ScenarioError::BadConfig {
                reason: format!("label noise {} outside [0, 1)", self.label_noise),
            });
        }
        if self.alphabet_size == 0 {
            return Err(ScenarioError::BadConfig {
                reason: "alphabet size must be at least 1".to_string(),
            });
        }
        for family in &self.families {
            family.validate()?;
        }
        if let Some(flip) = &self.flip {
            if !self.families.iter().any(|f| f.name == flip.family) {
                return Err(ScenarioError::BadConfig {
                    reason: format!("flip references unknown family {:?}", flip.family),
                });
            }
        }
        Ok(())
    }

    /// The stock three-family drift scenario: overlapping lifecycles over 60
    /// days, disjoint motifs, shared background alphabet, light benign label
    /// noise.
    pub fn default_scenario(seed: u64) -> Self {
        ScenarioConfig {
            families: vec![
                FamilySpec {
                    name: "sms-stealer".to_string(),
                    motif: GraphFragment::new(
                        vec![
                            ("getDeviceId", vec!["user-unaware"]),
                            ("sendTextMessage", vec!["user-unaware"]),
                        ],
                        vec![(0, 1)],
                    ),
                    start_day: 2,
                    peak_day: 12,
                    end_day: 28,
                    peak_rate: 50.0,
                },
                FamilySpec {
                    name: "geo-leaker".to_string(),
                    motif: GraphFragment::new(
                        vec![
                            ("getLatitude", vec!["user-unaware"]),
                            ("getLongitude", vec!["user-unaware"]),
                            ("writeBytes", vec!["user-unaware"]),
                        ],
                        vec![(0, 2), (1, 2)],
                    ),
                    start_day: 18,
                    peak_day: 32,
                    end_day: 46,
                    peak_rate: 50.0,
                },
                FamilySpec {
                    name: "dyn-loader".to_string(),
                    motif: GraphFragment::new(
                        vec![
                            ("getInstalledPackages", vec!["unresolved"]),
                            ("loadClass", vec!["unresolved"]),
                        ],
                        vec![(0, 1)],
                    ),
                    start_day: 34,
                    peak_day: 48,
                    end_day: 59,
                    peak_rate: 50.0,
                },
            ],
            benign_rate: 60.0,
            label_noise: 0.03,
            alphabet_size: 40,
            days: 60,
            seed,
            flip: None,
        }
    }
}

/// Returns a copy of the scenario in which the family active at `flip_day`
/// (falling back to the first family) migrates to the benign population from
/// that day on.
pub fn flip_scenario(config: &ScenarioConfig, flip_day: u32) -> ScenarioConfig {
    let family = config
        .families
        .iter()
        .find(|f| f.start_day <= flip_day && flip_day <= f.end_day)
        .or_else(|| config.families.first())
        .map(|f| f.name.clone());
    let mut flipped = config.clone();
    flipped.flip = family.map(|family| FlipSpec {
        family,
        day: flip_day,
    });
    flipped
}

fn poisson_count(rng: &mut StdRng, rate: f64) -> usize {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng) as usize
}

/// Random sparse background graph in the user-aware context, labels drawn
/// from the shared API alphabet.
fn background(rng: &mut StdRng, alphabet_size: u32) -> Vec<(String, Vec<u32>)> {
    let n = rng.random_range(4..=9u32);
    let mut nodes = Vec::with_capacity(n as usize);
    for i in 0..n {
        let label = format!("api{}", rng.random_range(0..alphabet_size));
        let degree = rng.random_range(0..=2u32);
        let mut targets = Vec::new();
        for _ in 0..degree {
            let t = rng.random_range(0..n);
            if t != i && !targets.contains(&t) {
                targets.push(t);
            }
        }
        nodes.push((label, targets));
    }
    nodes
}

fn build_sample(
    id: String,
    day: u32,
    label: Label,
    family: Option<&str>,
    rng: &mut StdRng,
    config: &ScenarioConfig,
    motif: Option<(&GraphFragment, bool)>,
) -> Result<StreamSample, ScenarioError> {
    let mut builder = GraphBuilder::new(GraphMeta {
        id: id.clone(),
        label: Some(label),
        day,
        family: family.map(str::to_string),
    });
    let bg = background(rng, config.alphabet_size);
    let offset = bg.len() as u32;
    for (i, (node_label, targets)) in bg.iter().enumerate() {
        builder = builder.node(i as u32, node_label.clone(), [Context::UserAware]);
        for &t in targets {
            builder = builder.edge(i as u32, t);
        }
    }
    if let Some((fragment, user_aware)) = motif {
        for (i, node) in fragment.nodes.iter().enumerate() {
            let contexts = if user_aware {
                vec![Context::UserAware]
            } else {
                fragment.contexts(node)?
            };
            builder = builder.node(offset + i as u32, node.label.clone(), contexts);
        }
        for &(s, d) in &fragment.edges {
            builder = builder.edge(offset + s, offset + d);
        }
    }
    let graph = builder.build()?;
    Ok(StreamSample {
        id,
        label,
        day,
        family: family.map(str::to_string),
        payload: Payload::Graph(graph),
    })
}

/// Generates the full stream: per day, Poisson counts of benign background
/// graphs and per-family motif-injected graphs, shuffled within the day.
pub fn generate(config: &ScenarioConfig) -> Result<Vec<StreamSample>, ScenarioError> {
    config.validate()?;
    let mut stream = Vec::new();
    for day in 0..config.days {
        let mut rng = StdRng::seed_from_u64(derive_seed(config.seed, u64::from(day)));
        let mut day_samples = Vec::new();
        let mut serial = 0u32;
        let next_id = |serial: &mut u32| {
            let id = format!("s{}-d{day:03}-{serial:04}", config.seed);
            *serial += 1;
            id
        };

        for _ in 0..poisson_count(&mut rng, config.benign_rate) {
            let noisy = config.label_noise > 0.0 && rng.random_bool(config.label_noise);
            let label = if noisy { Label::Malicious } else { Label::Benign };
            day_samples.push(build_sample(
                next_id(&mut serial),
                day,
                label,
                None,
                &mut rng,
                config,
                None,
            )?);
        }

        for family in &config.families {
            let flipped = config
                .flip
                .as_ref()
                .is_some_and(|f| f.family == family.name && day >= f.day);
            for _ in 0..poisson_count(&mut rng, family.rate(day)) {
                let label = if flipped { Label::Benign } else { Label::Malicious };
                day_samples.push(build_sample(
                    next_id(&mut serial),
                    day,
                    label,
                    Some(&family.name),
                    &mut rng,
                    config,
                    Some((&family.motif, flipped)),
                )?);
            }
        }

        day_samples.shuffle(&mut rng);
        stream.extend(day_samples);
    }
    Ok(stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::BagExtractor;
    use crate::learners::{batch_train, BatchTrainConfig, LinearScorer};
    use crate::vocab::Vocabulary;

    fn single_family_config() -> ScenarioConfig {
        ScenarioConfig {
            families: vec![FamilySpec {
                name: "fam".to_string(),
                motif: GraphFragment::new(
                    vec![("leak", vec!["user-unaware"])],
                    vec![],
                ),
                start_day: 0,
                peak_day: 5,
                end_day: 10,
                peak_rate: 8.0,
            }],
            benign_rate: 0.0,
            label_noise: 0.0,
            alphabet_size: 10,
            days: 11,
            seed: 1,
            flip: None,
        }
    }

    #[test]
    fn benign_rate_zero_yields_only_motif_carrying_malware() {
        let stream = generate(&single_family_config()).unwrap();
        assert!(!stream.is_empty());
        for sample in &stream {
            assert_eq!(sample.label, Label::Malicious);
            let Payload::Graph(g) = &sample.payload else {
                panic!("generator emits graphs")
            };
            assert!(
                g.nodes().iter().any(|n| n.label == "leak"),
                "motif injected into every member"
            );
        }
    }

    #[test]
    fn benign_only_scenario_has_no_user_unaware_contexts() {
        let mut config = single_family_config();
        config.families.clear();
        config.benign_rate = 12.0;
        let stream = generate(&config).unwrap();
        assert!(!stream.is_empty());
        for sample in &stream {
            let Payload::Graph(g) = &sample.payload else { unreachable!() };
            for node in g.nodes() {
                assert_eq!(node.contexts, vec![Context::UserAware]);
            }
        }
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let config = ScenarioConfig::default_scenario(7);
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a, b);
        let c = generate(&ScenarioConfig::default_scenario(8)).unwrap();
        assert_ne!(
            a.iter().map(|s| &s.id).collect::<Vec<_>>(),
            c.iter().map(|s| &s.id).collect::<Vec<_>>()
        );
    }

    #[test]
    fn realized_daily_rates_stay_within_three_sigma() {
        let mut config = ScenarioConfig::default_scenario(42);
        config.label_noise = 0.0;
        let stream = generate(&config).unwrap();
        let mut benign_per_day = vec![0f64; config.days as usize];
        for s in &stream {
            if s.family.is_none() {
                benign_per_day[s.day as usize] += 1.0;
            }
        }
        let mean = config.benign_rate;
        let sigma = mean.sqrt();
        for (day, &count) in benign_per_day.iter().enumerate() {
            assert!(
                (count - mean).abs() <= 3.0 * sigma,
                "day {day}: benign count {count} vs mean {mean}"
            );
        }
    }

    #[test]
    fn motif_document_frequency_is_confined_to_the_activity_window() {
        let config = ScenarioConfig::default_scenario(5);
        let stream = generate(&config).unwrap();
        for family in &config.families {
            let markers = family.motif_feature_labels();
            for sample in &stream {
                let Payload::Graph(g) = &sample.payload else { unreachable!() };
                let seq = relabel(g, &RelabelParams::with_height(0)).unwrap();
                let has_marker = seq.feature_labels().any(|l| markers.iter().any(|m| m == l));
                if has_marker {
                    assert!(
                        (family.start_day..=family.end_day).contains(&sample.day),
                        "{} marker outside its window on day {}",
                        family.name,
                        sample.day
                    );
                }
            }
        }
    }

    #[test]
    fn clean_windows_are_linearly_separable_at_height_zero() {
        let mut config = ScenarioConfig::default_scenario(13);
        config.label_noise = 0.0;
        config.days = 12;
        let stream = generate(&config).unwrap();
        let mut vocab = Vocabulary::new();
        let params = RelabelParams::with_height(0);
        let mut extractor = BagExtractor::new(params, &mut vocab, false);
        let samples: Vec<_> = stream
            .iter()
            .map(|s| {
                let Payload::Graph(g) = &s.payload else { unreachable!() };
                (extractor.vectorize(g).unwrap(), s.label)
            })
            .collect();
        let model = batch_train(&samples, &BatchTrainConfig::default()).unwrap();
        let correct = samples
            .iter()
            .filter(|(x, y)| model.predict(x).label == *y)
            .count();
        assert_eq!(correct, samples.len(), "motif context features separate");
    }

    #[test]
    fn flip_day_zero_makes_the_family_benign_throughout() {
        let config = single_family_config();
        let flipped = flip_scenario(&config, 0);
        let stream = generate(&flipped).unwrap();
        assert!(!stream.is_empty());
        for sample in &stream {
            assert_eq!(sample.label, Label::Benign);
            let Payload::Graph(g) = &sample.payload else { unreachable!() };
            for node in g.nodes() {
                assert_eq!(node.contexts, vec![Context::UserAware], "context migrated");
            }
        }
    }

    #[test]
    fn flip_beyond_stream_length_changes_nothing() {
        let config = single_family_config();
        let flipped = flip_scenario(&config, 99);
        assert_eq!(generate(&config).unwrap(), generate(&flipped).unwrap());
    }

    #[test]
    fn invalid_lifecycles_are_rejected() {
        let mut config = single_family_config();
        config.families[0].peak_day = 20; // peak after end
        assert!(matches!(
            generate(&config),
            Err(ScenarioError::InvalidLifecycle { .. })
        ));
        let mut config = single_family_config();
        config.families[0].peak_rate = 0.5;
        assert!(generate(&config).is_err());
        let mut config = single_family_config();
        config.label_noise = 1.0;
        assert!(matches!(
            generate(&config),
            Err(ScenarioError::BadConfig { .. })
        ));
    }

    #[test]
    fn motif_feature_labels_are_the_height_zero_context_features() {
        let config = ScenarioConfig::default_scenario(1);
        let labels = config.families[0].motif_feature_labels();
        assert_eq!(
            labels,
            vec![
                "user-unaware⊕getDeviceId".to_string(),
                "user-unaware⊕sendTextMessage".to_string()
            ]
        );
    }
}
