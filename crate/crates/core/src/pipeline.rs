//! End-to-end model: preprocessing, first-layer map, ordered patterns,
//! second-layer map and labeling layer.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::growing_grid::{resolve_lambda, GridConfig, GrowingGrid, GrowthReport, Phase};
use crate::label::{ClassScores, LabelConfig, LabelError, LabelReport, LabelingLayer};
use crate::lattice::{Lattice, NetError, NeuronMap, WinnerResult};
use crate::ordered::{
    compute_kmax, dedup_consecutive, fit_to_kmax, trace_sequence, OrderedPattern, PatternError,
};
use crate::persist::{push_json, push_reals, DocReader, ModelError};
use crate::preprocess::{
    build_canonical, preprocess_sequence, AttentionOutput, CanonicalSkeleton, PreprocessConfig,
    PreprocessError,
};
use crate::scalar::Real;
use crate::skeleton::{Dataset, JointMap, SkeletonSequence};
use crate::som::{SomConfig, SomNet};

pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Gg,
    Som,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Gg => "gg",
            Backend::Som => "som",
        }
    }
}

/// Map configuration of one layer; the variant selects the backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Real")]
pub enum LayerConfig<T> {
    Gg(GridConfig<T>),
    Som(SomConfig<T>),
}

impl<T: Real> LayerConfig<T> {
    pub fn backend(&self) -> Backend {
        match self {
            LayerConfig::Gg(_) => Backend::Gg,
            LayerConfig::Som(_) => Backend::Som,
        }
    }

    pub fn softmax_exp(&self) -> T {
        match self {
            LayerConfig::Gg(c) => c.softmax_exp,
            LayerConfig::Som(c) => c.softmax_exp,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        match self {
            LayerConfig::Gg(c) => c.validate(),
            LayerConfig::Som(c) => c.validate(),
        }
    }
}

/// What the labeling layer sees for one sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelInput {
    /// Contrast-adjusted second-layer activities of all neurons, unit sum.
    #[default]
    ActivityMap,
    /// One-hot vector of the second-layer winner.
    WinnerOnehot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct PipelineConfig<T> {
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    pub layer1: LayerConfig<T>,
    pub layer2: LayerConfig<T>,
    #[serde(default)]
    pub label: LabelConfig<T>,
    #[serde(default)]
    pub label_input: LabelInput,
    /// Epoch budget of each map layer. A growing grid spends what its growth
    /// phase needs and fine-tunes for the rest (at least one epoch); a SOM
    /// trains for all of it.
    pub layer1_epochs: usize,
    pub layer2_epochs: usize,
    /// Seed of the per-epoch presentation order.
    #[serde(default)]
    pub seed: u64,
}

impl<T: Real> PipelineConfig<T> {
    pub fn backend(&self) -> Backend {
        self.layer1.backend()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let invalid = |m: String| Err(PipelineError::Config(m));
        if self.layer1.backend() != self.layer2.backend() {
            return invalid("both map layers must use the same backend".into());
        }
        if self.layer1_epochs == 0 || self.layer2_epochs == 0 {
            return invalid("layer epoch budgets must be positive".into());
        }
        if !(0.0..1.0).contains(&self.preprocess.max_dropped_fraction) {
            return invalid("max_dropped_fraction must lie in [0, 1)".into());
        }
        self.layer1
            .validate()
            .map_err(|e| PipelineError::Config(format!("layer1: {e}")))?;
        self.layer2
            .validate()
            .map_err(|e| PipelineError::Config(format!("layer2: {e}")))?;
        if !(self.label.beta > T::zero() && self.label.beta.is_finite()) {
            return invalid(format!(
                "label beta must be positive, got {}",
                self.label.beta
            ));
        }
        if self.label.epochs == 0 {
            return invalid("label epochs must be positive".into());
        }
        Ok(())
    }

    /// Preprocessing as run inside the pipeline: attention keeps every
    /// joint slot (masked) so all sequences share one input dimension.
    fn effective_preprocess(&self) -> PreprocessConfig {
        let mut p = self.preprocess.clone();
        p.attention_output = AttentionOutput::Masked;
        p
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("training set: {0}")]
    Data(String),
    #[error("preprocessing sequence {index}: {source}")]
    Preprocess {
        index: usize,
        #[source]
        source: PreprocessError,
    },
    #[error("canonical skeleton: {0}")]
    Canonical(#[source] PreprocessError),
    #[error("layer 1: {0}")]
    Layer1(#[source] NetError),
    #[error("ordered patterns: {0}")]
    Pattern(#[source] PatternError),
    #[error("layer 2: {0}")]
    Layer2(#[source] NetError),
    #[error("labeling layer: {0}")]
    Label(#[source] LabelError),
    #[error("sequence does not match the model: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A trained map of either backend.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerNet<T> {
    Gg(GrowingGrid<T>),
    Som(SomNet<T>),
}

impl<T: Real> NeuronMap<T> for LayerNet<T> {
    fn lattice(&self) -> &Lattice<T> {
        match self {
            LayerNet::Gg(n) => n.lattice(),
            LayerNet::Som(n) => n.lattice(),
        }
    }

    fn sigma(&self) -> T {
        match self {
            LayerNet::Gg(n) => n.sigma(),
            LayerNet::Som(n) => n.sigma(),
        }
    }
}

impl<T: Real> LayerNet<T> {
    pub fn backend(&self) -> Backend {
        match self {
            LayerNet::Gg(_) => Backend::Gg,
            LayerNet::Som(_) => Backend::Som,
        }
    }

    pub fn softmax_exp(&self) -> T {
        match self {
            LayerNet::Gg(n) => n.config.softmax_exp,
            LayerNet::Som(n) => n.config.softmax_exp,
        }
    }

    /// Appends this net as a `net` record: header, config echo, then one
    /// row of weights per neuron in row-major order.
    pub(crate) fn write_record(&self, out: &mut String, layer: usize) {
        let l = self.lattice();
        let state = match self {
            LayerNet::Gg(n) => n.phase().name(),
            LayerNet::Som(n) if n.is_trained() => "trained",
            LayerNet::Som(_) => "untrained",
        };
        writeln!(
            out,
            "net layer={layer} backend={} rows={} cols={} dim={} state={state}",
            self.backend().name(),
            l.rows(),
            l.cols(),
            l.dim()
        )
        .unwrap();
        match self {
            LayerNet::Gg(n) => push_json(out, "netconfig", &n.config),
            LayerNet::Som(n) => push_json(out, "netconfig", &n.config),
        }
        for w in l.weights().chunks_exact(l.dim()) {
            push_reals(out, w);
        }
    }

    pub(crate) fn read_record(r: &mut DocReader<'_>, layer: usize) -> Result<Self, ModelError> {
        let f = r.fields("net")?;
        let line = f.line();
        if f.get::<usize>("layer")? != layer {
            return Err(r.error(line, format!("expected the layer {layer} net")));
        }
        let rows: usize = f.get("rows")?;
        let cols: usize = f.get("cols")?;
        let dim: usize = f.get("dim")?;
        let backend = f.raw("backend")?;
        let state = f.raw("state")?;
        if rows == 0 || cols == 0 || dim == 0 {
            return Err(r.error(line, "empty lattice"));
        }
        let net = match backend {
            "gg" => {
                let config: GridConfig<T> = r.json("netconfig")?;
                let phase = Phase::from_name(state)
                    .ok_or_else(|| r.error(line, format!("unknown state {state:?}")))?;
                let lattice = read_lattice(r, rows, cols, dim)?;
                LayerNet::Gg(
                    GrowingGrid::from_parts(config, lattice, phase)
                        .map_err(|e| r.error(line, e.to_string()))?,
                )
            }
            "som" => {
                let config: SomConfig<T> = r.json("netconfig")?;
                let trained = match state {
                    "trained" => true,
                    "untrained" => false,
                    _ => return Err(r.error(line, format!("unknown state {state:?}"))),
                };
                let lattice = read_lattice(r, rows, cols, dim)?;
                LayerNet::Som(
                    SomNet::from_parts(config, lattice, trained)
                        .map_err(|e| r.error(line, e.to_string()))?,
                )
            }
            other => return Err(r.error(line, format!("unknown backend {other:?}"))),
        };
        Ok(net)
    }
}

fn read_lattice<T: Real>(
    r: &mut DocReader<'_>,
    rows: usize,
    cols: usize,
    dim: usize,
) -> Result<Lattice<T>, ModelError> {
    let mut weights = Vec::with_capacity(rows * cols * dim);
    for i in 0..rows * cols {
        weights.extend(r.reals::<T>(dim, &format!("weight row {i}"))?);
    }
    Lattice::from_weights(rows, cols, dim, weights).map_err(|e| ModelError::Invalid(e.to_string()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerReport<T> {
    pub backend: Backend,
    pub growth: Option<GrowthReport>,
    /// Epochs begun during growth (a partial epoch counts as one).
    pub growth_epochs: usize,
    /// Fine-tune epochs for a growing grid; all epochs for a SOM.
    pub tuning_epochs: usize,
    pub quantization_error: Vec<T>,
    pub seconds: f64,
}

impl<T> LayerReport<T> {
    pub fn epochs(&self) -> usize {
        self.growth_epochs + self.tuning_epochs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport<T> {
    pub preprocess_seconds: f64,
    pub dropped_frames: usize,
    pub layer1: LayerReport<T>,
    pub k_max: usize,
    pub layer2: LayerReport<T>,
    pub label: LabelReport<T>,
    pub label_seconds: f64,
    /// Second-layer winner of every training sequence, in dataset order.
    pub clusters: Vec<(usize, usize)>,
}

impl<T> TrainReport<T> {
    pub fn total_epochs(&self) -> usize {
        self.layer1.epochs() + self.layer2.epochs()
    }

    pub fn total_seconds(&self) -> f64 {
        self.preprocess_seconds + self.layer1.seconds + self.layer2.seconds + self.label_seconds
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineModel<T> {
    pub config: PipelineConfig<T>,
    pub layout: String,
    pub canon: CanonicalSkeleton<T>,
    pub layer1: LayerNet<T>,
    pub k_max: usize,
    pub layer2: LayerNet<T>,
    pub label: LabelingLayer<T>,
    pub category_names: Vec<String>,
}

/// Intermediate representations of one sequence under a trained model.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoded<T> {
    pub pattern: OrderedPattern<T>,
    pub winner: WinnerResult<T>,
    pub label_input: Vec<T>,
}

/// Presentation order of sequence groups for one epoch of one layer.
fn epoch_order(n: usize, seed: u64, layer: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((layer << 40) | epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Trains one map on groups of vectors. Groups are shuffled every epoch;
/// vectors inside a group keep their order. Schedules span `epochs`, but
/// training stops after `stop` of them (growth always completes).
fn train_layer<T: Real>(
    config: &LayerConfig<T>,
    epochs: usize,
    stop: usize,
    groups: &[&[Vec<T>]],
    seed: u64,
    layer: u64,
) -> Result<(LayerNet<T>, LayerReport<T>), NetError> {
    let start = Instant::now();
    let epoch_size: usize = groups.iter().map(|g| g.len()).sum();
    let dim = groups
        .iter()
        .flat_map(|g| g.iter())
        .next()
        .ok_or(NetError::EmptyInput)?
        .len();
    let stream = move |e: usize| {
        epoch_order(groups.len(), seed, layer, e)
            .into_iter()
            .flat_map(move |g| groups[g].iter())
    };
    match config {
        LayerConfig::Gg(cfg) => {
            let mut net = GrowingGrid::init(cfg.clone(), dim)?;
            net.set_lambda(resolve_lambda(cfg.lambda, epoch_size));
            // Growth always ends (every interval inserts a line until the cap), so
            // it may run past the budget; fine-tuning gets what is left.
            let growth = net.run_growth_phase((0..).flat_map(stream), epoch_size)?;
            let growth_epochs = growth.signals.div_ceil(epoch_size);
            let horizon = epochs.saturating_sub(growth_epochs).max(1);
            let tuning_epochs = stop.saturating_sub(growth_epochs).clamp(1, horizon);
            let ft = net.run_finetune_stopped(tuning_epochs, horizon, epoch_size, |e| {
                stream(growth_epochs + e)
            })?;
            let report = LayerReport {
                backend: Backend::Gg,
                growth: Some(growth),
                growth_epochs,
                tuning_epochs,
                quantization_error: ft.quantization_error,
                seconds: start.elapsed().as_secs_f64(),
            };
            Ok((LayerNet::Gg(net), report))
        }
        LayerConfig::Som(cfg) => {
            let mut cfg = cfg.clone();
            cfg.epochs = epochs;
            let mut net = SomNet::init(cfg, dim)?;
            let tuning_epochs = stop.clamp(1, epochs);
            let r = net.train_stopped(tuning_epochs, epoch_size, stream)?;
            let report = LayerReport {
                backend: Backend::Som,
                growth: None,
                growth_epochs: 0,
                tuning_epochs,
                quantization_error: r.quantization_error,
                seconds: start.elapsed().as_secs_f64(),
            };
            Ok((LayerNet::Som(net), report))
        }
    }
}

fn label_vector<T: Real>(
    net: &LayerNet<T>,
    mode: LabelInput,
    x: &[T],
) -> Result<(WinnerResult<T>, Vec<T>), NetError> {
    let winner = net.find_winner(x)?;
    let v = match mode {
        LabelInput::ActivityMap => net.contrast_activities(x, net.softmax_exp())?,
        LabelInput::WinnerOnehot => {
            let mut v = vec![T::zero(); net.lattice().len()];
            v[net.lattice().index(winner.row, winner.col)] = T::one();
            v
        }
    };
    Ok((winner, v))
}

pub fn train_pipeline<T: Real>(
    config: &PipelineConfig<T>,
    train: &Dataset<T>,
) -> Result<PipelineModel<T>, PipelineError> {
    train_pipeline_with_report(config, train).map(|(m, _)| m)
}

pub fn train_pipeline_with_report<T: Real>(
    config: &PipelineConfig<T>,
    train: &Dataset<T>,
) -> Result<(PipelineModel<T>, TrainReport<T>), PipelineError> {
    train_pipeline_stopped(config, train, 1.0)
}

/// Trains with every schedule laid out over the configured budgets but
/// stops each map layer after `fraction` of its budget, as a snapshot of a
/// full run part-way through.
pub fn train_pipeline_stopped<T: Real>(
    config: &PipelineConfig<T>,
    train: &Dataset<T>,
    fraction: f64,
) -> Result<(PipelineModel<T>, TrainReport<T>), PipelineError> {
    config.validate()?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(PipelineError::Config(format!(
            "stop fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let stop = |e: usize| ((e as f64 * fraction).round() as usize).max(1);
    if train.is_empty() {
        return Err(PipelineError::Data("no training sequences".into()));
    }
    let mut labels: Vec<usize> = train.sequences.iter().map(|s| s.label).collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() < 2 || train.category_names.len() < 2 {
        return Err(PipelineError::Data(format!(
            "the labeling layer needs at least 2 classes, training set has {}",
            labels.len()
        )));
    }

    let t0 = Instant::now();
    let canon = build_canonical(&train.sequences).map_err(PipelineError::Canonical)?;
    let pre_cfg = config.effective_preprocess();
    let pre = train
        .sequences
        .par_iter()
        .enumerate()
        .map(|(index, s)| {
            preprocess_sequence(s, &pre_cfg, &canon)
                .map_err(|source| PipelineError::Preprocess { index, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let dropped_frames = pre.iter().map(|p| p.dropped_frames).sum();
    let frames: Vec<Vec<Vec<T>>> = pre.into_iter().map(|p| p.vectors).collect();
    let preprocess_seconds = t0.elapsed().as_secs_f64();

    let groups: Vec<&[Vec<T>]> = frames.iter().map(|f| f.as_slice()).collect();
    let (net1, rep1) = train_layer(
        &config.layer1,
        config.layer1_epochs,
        stop(config.layer1_epochs),
        &groups,
        config.seed,
        1,
    )
    .map_err(PipelineError::Layer1)?;

    let traces = frames
        .par_iter()
        .enumerate()
        .map(|(i, f)| trace_sequence(&net1, f, i).map(|p| dedup_consecutive(&p)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(PipelineError::Pattern)?;
    let k_max = compute_kmax(&traces)
        .map_err(PipelineError::Pattern)?
        .max(2);
    let patterns: Vec<Vec<T>> = traces
        .par_iter()
        .map(|t| fit_to_kmax(t, k_max).map(|p| p.flatten()))
        .collect::<Result<_, _>>()
        .map_err(PipelineError::Pattern)?;

    let groups2: Vec<&[Vec<T>]> = patterns.chunks(1).collect();
    let (net2, rep2) = train_layer(
        &config.layer2,
        config.layer2_epochs,
        stop(config.layer2_epochs),
        &groups2,
        config.seed,
        2,
    )
    .map_err(PipelineError::Layer2)?;

    let t3 = Instant::now();
    let encoded = patterns
        .iter()
        .map(|x| label_vector(&net2, config.label_input, x))
        .collect::<Result<Vec<_>, _>>()
        .map_err(PipelineError::Layer2)?;
    let clusters = encoded.iter().map(|(w, _)| (w.row, w.col)).collect();
    let mut examples: Vec<(Vec<T>, usize)> = encoded
        .into_iter()
        .zip(&train.sequences)
        .map(|((_, v), s)| (v, s.label))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(3 << 40);
    examples.shuffle(&mut rng);
    let mut label = LabelingLayer::init(
        train.category_names.clone(),
        net2.lattice().len(),
        &config.label,
    )
    .map_err(PipelineError::Label)?;
    let label_report = label
        .train_supervised(&examples, config.label.epochs)
        .map_err(PipelineError::Label)?;
    let label_seconds = t3.elapsed().as_secs_f64();

    let model = PipelineModel {
        config: config.clone(),
        layout: train.sequences[0].joint_map.name.clone(),
        canon,
        layer1: net1,
        k_max,
        layer2: net2,
        label,
        category_names: train.category_names.clone(),
    };
    let report = TrainReport {
        preprocess_seconds,
        dropped_frames,
        layer1: rep1,
        k_max,
        layer2: rep2,
        label: label_report,
        label_seconds,
        clusters,
    };
    Ok((model, report))
}

impl<T: Real> PipelineModel<T> {
    pub fn check_sequence(&self, seq: &SkeletonSequence<T>) -> Result<(), PipelineError> {
        if seq.joint_map.name != self.layout || seq.joint_count() != self.canon.links.len() + 1 {
            return Err(PipelineError::Incompatible(format!(
                "sequence uses layout {} with {} joints, model expects {} with {}",
                seq.joint_map.name,
                seq.joint_count(),
                self.layout,
                self.canon.links.len() + 1
            )));
        }
        if seq.frames.is_empty() {
            return Err(PipelineError::Incompatible("empty sequence".into()));
        }
        Ok(())
    }

    /// Runs a sequence through every layer up to the labeling input.
    pub fn encode(&self, seq: &SkeletonSequence<T>) -> Result<Encoded<T>, PipelineError> {
        self.check_sequence(seq)?;
        let pre = preprocess_sequence(seq, &self.config.effective_preprocess(), &self.canon)
            .map_err(|source| PipelineError::Preprocess { index: 0, source })?;
        let trace =
            trace_sequence(&self.layer1, &pre.vectors, 0).map_err(PipelineError::Pattern)?;
        let pattern =
            fit_to_kmax(&dedup_consecutive(&trace), self.k_max).map_err(PipelineError::Pattern)?;
        let (winner, label_input) =
            label_vector(&self.layer2, self.config.label_input, &pattern.flatten())
                .map_err(PipelineError::Layer2)?;
        Ok(Encoded {
            pattern,
            winner,
            label_input,
        })
    }

    pub fn predict(&self, seq: &SkeletonSequence<T>) -> Result<ClassScores<T>, PipelineError> {
        let e = self.encode(seq)?;
        self.label
            .score(&e.label_input)
            .map_err(PipelineError::Label)
    }

    /// Second-layer winner of every sequence as `sequence,label,row,col`.
    pub fn cluster_csv(&self, dataset: &Dataset<T>) -> Result<String, PipelineError> {
        let winners = dataset
            .sequences
            .par_iter()
            .map(|s| self.encode(s).map(|e| (s.label, e.winner)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut out = String::from("sequence,label,row,col\n");
        for (i, (label, w)) in winners.iter().enumerate() {
            writeln!(out, "{i},{label},{},{}", w.row, w.col).unwrap();
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Invalid(m));
        if self.k_max < 2 {
            return bad(format!("K_max must be at least 2, got {}", self.k_max));
        }
        if self.layer2.input_dim() != 2 * self.k_max {
            return bad(format!(
                "layer 2 expects {} inputs, patterns have {}",
                self.layer2.input_dim(),
                2 * self.k_max
            ));
        }
        if self.label.input_dim() != self.layer2.lattice().len() {
            return bad("labeling layer width differs from the layer 2 neuron count".into());
        }
        if self.label.class_count() != self.category_names.len() {
            return bad("labeling layer class count differs from the category list".into());
        }
        self.canon
            .validate()
            .map_err(|e| ModelError::Invalid(e.to_string()))?;
        let map = JointMap::by_name(&self.layout)
            .ok_or_else(|| ModelError::Invalid(format!("unknown layout {}", self.layout)))?;
        self.canon
            .check_against(&map)
            .map_err(|e| ModelError::Invalid(e.to_string()))
    }

    pub fn to_document(&self) -> String {
        let mut out = String::from("# gridact pipeline model\n");
        writeln!(out, "model version={MODEL_VERSION} scalar={}", T::NAME).unwrap();
        writeln!(
            out,
            "layout name={} joints={}",
            self.layout,
            self.canon.links.len() + 1
        )
        .unwrap();
        push_json(&mut out, "categories", &self.category_names);
        push_json(&mut out, "config", &self.config);
        writeln!(
            out,
            "canon root={} links={}",
            self.canon.root,
            self.canon.links.len()
        )
        .unwrap();
        for &(p, c, len) in &self.canon.links {
            writeln!(out, "{p} {c} {}", crate::scalar::fmt_exact(len)).unwrap();
        }
        writeln!(out, "kmax value={}", self.k_max).unwrap();
        self.layer1.write_record(&mut out, 1);
        self.layer2.write_record(&mut out, 2);
        writeln!(
            out,
            "label classes={} dim={} beta={} reversed_sign={}",
            self.label.class_count(),
            self.label.input_dim(),
            crate::scalar::fmt_exact(self.label.beta),
            self.label.reversed_sign
        )
        .unwrap();
        for w in &self.label.weights {
            push_reals(&mut out, w);
        }
        out.push_str("end\n");
        out
    }

    pub fn from_document(text: &str, origin: &str) -> Result<Self, ModelError> {
        let mut r = DocReader::new(text, origin);
        let head = r.fields("model")?;
        let version = head.raw("version")?;
        if version != MODEL_VERSION.to_string() {
            return Err(ModelError::Version {
                origin: r.origin().to_string(),
                found: version.to_string(),
                expected: MODEL_VERSION,
            });
        }
        let scalar = head.raw("scalar")?;
        if scalar != T::NAME {
            return Err(r.error(
                head.line(),
                format!("model stores {scalar} weights, loader expects {}", T::NAME),
            ));
        }
        let layout = r.fields("layout")?;
        let layout_name = layout.raw("name")?.to_string();
        let joints: usize = layout.get("joints")?;
        let category_names: Vec<String> = r.json("categories")?;
        let config: PipelineConfig<T> = r.json("config")?;
        let canon_head = r.fields("canon")?;
        let root: usize = canon_head.get("root")?;
        let n_links: usize = canon_head.get("links")?;
        if n_links + 1 != joints {
            return Err(r.error(
                canon_head.line(),
                format!("{n_links} links for {joints} joints"),
            ));
        }
        let mut links = Vec::with_capacity(n_links);
        for i in 0..n_links {
            let v = r.reals::<T>(3, &format!("canonical link {i}"))?;
            let idx = |x: T| x.to_usize().filter(|&k| T::from_usize_lossy(k) == x);
            match (idx(v[0]), idx(v[1])) {
                (Some(p), Some(c)) => links.push((p, c, v[2])),
                _ => {
                    return Err(ModelError::Invalid(format!(
                        "canonical link {i} has non-integer joint indices"
                    )))
                }
            }
        }
        let canon = CanonicalSkeleton { root, links };
        let k_max: usize = r.fields("kmax")?.get("value")?;
        let layer1 = LayerNet::read_record(&mut r, 1)?;
        let layer2 = LayerNet::read_record(&mut r, 2)?;
        let lh = r.fields("label")?;
        let classes: usize = lh.get("classes")?;
        let dim: usize = lh.get("dim")?;
        let beta: T = lh.get("beta")?;
        let reversed_sign: bool = lh.get("reversed_sign")?;
        let mut weights = Vec::with_capacity(classes);
        for i in 0..classes {
            weights.push(r.reals::<T>(dim, &format!("label weight row {i}"))?);
        }
        r.expect_end()?;
        let model = PipelineModel {
            config,
            layout: layout_name,
            canon,
            layer1,
            k_max,
            layer2,
            label: LabelingLayer {
                weights,
                class_names: category_names.clone(),
                beta,
                reversed_sign,
            },
            category_names,
        };
        model.validate()?;
        Ok(model)
    }
}

pub fn save_model<T: Real>(model: &PipelineModel<T>, path: &Path) -> Result<(), ModelError> {
    fs::write(path, model.to_document()).map_err(|e| ModelError::io(path, e))
}

pub fn load_model<T: Real>(path: &Path) -> Result<PipelineModel<T>, ModelError> {
    let text = fs::read_to_string(path).map_err(|e| ModelError::io(path, e))?;
    PipelineModel::from_document(&text, &path.display().to_string())
}

pub fn predict<T: Real>(
    model: &PipelineModel<T>,
    seq: &SkeletonSequence<T>,
) -> Result<ClassScores<T>, PipelineError> {
    model.predict(seq)
}
