//! Evaluation protocols: holdout and k-fold splits, confusion matrices,
//! cross-validation and the growing-grid versus SOM benchmark.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::growing_grid::{GridConfig, LambdaMode};
use crate::label::LabelConfig;
use crate::lattice::{Decay, NeuronMap};
use crate::pipeline::{
    train_pipeline_stopped, train_pipeline_with_report, Backend, LabelInput, LayerConfig,
    PipelineConfig, PipelineError, PipelineModel, TrainReport,
};
use crate::preprocess::PreprocessConfig;
use crate::scalar::Real;
use crate::skeleton::{
    generate_synthetic, load_florence3d, load_msr_action3d, load_utkinect, DataError, Dataset,
    SyntheticSpec,
};
use crate::som::SomConfig;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid split: {0}")]
    Split(String),
    #[error("empty test set")]
    EmptyTestSet,
    #[error("categories differ: {0}")]
    Categories(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("preset {preset} needs {what}")]
    MissingData {
        preset: &'static str,
        what: &'static str,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    RandomHoldout { test_fraction: f64 },
    KFold { k: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub mode: SplitMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub stratified: bool,
}

fn default_true() -> bool {
    true
}

impl SplitSpec {
    pub fn holdout(test_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            mode: SplitMode::RandomHoldout { test_fraction },
            seed,
            stratified: true,
        }
    }

    pub fn kfold(k: usize, seed: u64) -> Self {
        SplitSpec {
            mode: SplitMode::KFold { k },
            seed,
            stratified: true,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        match self.mode {
            SplitMode::RandomHoldout { test_fraction }
                if !(test_fraction > 0.0 && test_fraction < 1.0) =>
            {
                Err(EvalError::Split(format!(
                    "test fraction must lie in (0, 1), got {test_fraction}"
                )))
            }
            SplitMode::KFold { k } if k < 2 => {
                Err(EvalError::Split(format!("k must be at least 2, got {k}")))
            }
            _ => Ok(()),
        }
    }
}

/// Indices of one train/test partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_members(labels: &[usize], rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    for m in &mut members {
        m.shuffle(rng);
    }
    members.retain(|m| !m.is_empty());
    members
}

/// Partitions sequence indices, given their class labels, by `spec`.
pub fn split_indices(labels: &[usize], spec: &SplitSpec) -> Result<Vec<Fold>, EvalError> {
    spec.validate()?;
    let n = labels.len();
    if n < 2 {
        return Err(EvalError::Split(format!(
            "need at least 2 sequences, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let members = class_members(labels, &mut rng);
    if spec.stratified {
        if let Some(m) = members.iter().find(|m| m.len() < 2) {
            return Err(EvalError::Split(format!(
                "class {} has {} sequence, stratification needs at least 2",
                labels[m[0]],
                m.len()
            )));
        }
    }
    let mut folds = match spec.mode {
        SplitMode::RandomHoldout { test_fraction } => {
            let test = if spec.stratified {
                stratified_holdout(&members, test_fraction)
            } else {
                let mut all: Vec<usize> = (0..n).collect();
                all.shuffle(&mut rng);
                let t = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
                all.truncate(t);
                all
            };
            vec![complement(n, test)]
        }
        SplitMode::KFold { k } => {
            let order: Vec<usize> = if spec.stratified {
                let smallest = members.iter().map(Vec::len).min().unwrap_or(0);
                if k > smallest {
                    return Err(EvalError::Split(format!(
                        "k = {k} exceeds the smallest class count {smallest}"
                    )));
                }
                members.concat()
            } else {
                if k > n {
                    return Err(EvalError::Split(format!(
                        "k = {k} exceeds the {n} sequences"
                    )));
                }
                let mut all: Vec<usize> = (0..n).collect();
                all.shuffle(&mut rng);
                all
            };
            let mut tests = vec![Vec::new(); k];
            for (pos, idx) in order.into_iter().enumerate() {
                tests[pos % k].push(idx);
            }
            tests.into_iter().map(|t| complement(n, t)).collect()
        }
    };
    for f in &mut folds {
        f.train.sort_unstable();
        f.test.sort_unstable();
    }
    Ok(folds)
}

/// Largest-remainder allocation of `round(n·f)` test slots over classes,
/// so every class gets `⌊n_c·f⌋` or `⌈n_c·f⌉` and keeps a training member.
fn stratified_holdout(members: &[Vec<usize>], f: f64) -> Vec<usize> {
    let n: usize = members.iter().map(Vec::len).sum();
    let target = (n as f64 * f).round() as usize;
    let exact: Vec<f64> = members.iter().map(|m| m.len() as f64 * f).collect();
    let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut by_rem: Vec<usize> = (0..members.len()).collect();
    by_rem.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = target.saturating_sub(take.iter().sum());
    for &c in &by_rem {
        if left == 0 {
            break;
        }
        if take[c] < exact[c].ceil() as usize {
            take[c] += 1;
            left -= 1;
        }
    }
    members
        .iter()
        .zip(take)
        .flat_map(|(m, t)| m[..t.min(m.len() - 1)].iter().copied())
        .collect()
}

fn complement(n: usize, test: Vec<usize>) -> Fold {
    let mut is_test = vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    Fold {
        train: (0..n).filter(|&i| !is_test[i]).collect(),
        test,
    }
}

pub type TrainTest<T> = (Dataset<T>, Dataset<T>);

/// Train/test dataset pairs for `spec`.
pub fn split<T: Real>(
    dataset: &Dataset<T>,
    spec: &SplitSpec,
) -> Result<Vec<TrainTest<T>>, EvalError> {
    let labels: Vec<usize> = dataset.sequences.iter().map(|s| s.label).collect();
    Ok(split_indices(&labels, spec)?
        .into_iter()
        .map(|f| (dataset.subset(&f.train), dataset.subset(&f.test)))
        .collect())
}

/// Counts with rows indexed by true class and columns by predicted class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub category_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(category_names: Vec<String>) -> Self {
        let n = category_names.len();
        ConfusionMatrix {
            category_names,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    /// Diagonal over row sum; `None` for classes absent from the test set.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n: u64 = row.iter().sum();
                (n > 0).then(|| row[i] as f64 / n as f64)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for name in &self.category_names {
            write!(out, ",{}", csv_field(name)).unwrap();
        }
        out.push('\n');
        for (name, row) in self.category_names.iter().zip(&self.counts) {
            out.push_str(&csv_field(name));
            for c in row {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("confusion matrix serializes")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub per_class_accuracy: Vec<Option<f64>>,
    /// Predicted class of every test sequence, in dataset order.
    pub predictions: Vec<usize>,
}

impl Evaluation {
    fn from_confusion(confusion: ConfusionMatrix, predictions: Vec<usize>) -> Self {
        Evaluation {
            accuracy: confusion.accuracy(),
            per_class_accuracy: confusion.per_class_accuracy(),
            confusion,
            predictions,
        }
    }
}

pub fn check_categories(model: &[String], data: &[String]) -> Result<(), EvalError> {
    if model == data {
        return Ok(());
    }
    let missing: Vec<&String> = data.iter().filter(|c| !model.contains(c)).collect();
    let extra: Vec<&String> = model.iter().filter(|c| !data.contains(c)).collect();
    Err(EvalError::Categories(
        if missing.is_empty() && extra.is_empty() {
            "same names in a different order".to_string()
        } else {
            format!("dataset only: {missing:?}; model only: {extra:?}")
        },
    ))
}

pub fn evaluate<T: Real>(
    model: &PipelineModel<T>,
    test: &Dataset<T>,
) -> Result<Evaluation, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    check_categories(&model.category_names, &test.category_names)?;
    let predictions = test
        .sequences
        .par_iter()
        .map(|s| model.predict(s).map(|c| c.predicted))
        .collect::<Result<Vec<_>, _>>()?;
    let mut confusion = ConfusionMatrix::new(model.category_names.clone());
    for (s, &p) in test.sequences.iter().zip(&predictions) {
        confusion.record(s.label, p);
    }
    Ok(Evaluation::from_confusion(confusion, predictions))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossValidation {
    /// Pooled correct over total across all folds.
    pub accuracy: f64,
    pub fold_accuracy: Vec<f64>,
    pub confusion: ConfusionMatrix,
    pub per_class_accuracy: Vec<Option<f64>>,
}

/// Trains and tests one pipeline per fold; folds run in parallel.
pub fn cross_validate<T: Real>(
    config: &PipelineConfig<T>,
    dataset: &Dataset<T>,
    spec: &SplitSpec,
) -> Result<CrossValidation, EvalError> {
    let pairs = split(dataset, spec)?;
    let evals = pairs
        .par_iter()
        .map(|(train, test)| {
            let (model, _) = train_pipeline_with_report(config, train)?;
            evaluate(&model, test)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut confusion = ConfusionMatrix::new(dataset.category_names.clone());
    for e in &evals {
        confusion.merge(&e.confusion);
    }
    Ok(CrossValidation {
        accuracy: confusion.accuracy(),
        fold_accuracy: evals.iter().map(|e| e.accuracy).collect(),
        per_class_accuracy: confusion.per_class_accuracy(),
        confusion,
    })
}

/// Test accuracy of a training run stopped after a fraction of its budget.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderPoint {
    pub budget_fraction: f64,
    pub epochs: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BackendBench {
    pub backend: Backend,
    pub layer1_neurons: usize,
    pub layer2_neurons: usize,
    /// Test accuracy at the full budget.
    pub accuracy: f64,
    pub train_accuracy: f64,
    /// Epochs of both map layers at the full budget.
    pub epochs: usize,
    /// Fewest epochs on the ladder whose accuracy is within the tolerance
    /// of the full-budget accuracy.
    pub epochs_to_criterion: usize,
    pub ladder: Vec<LadderPoint>,
    /// Single-thread wall clock of the full-budget training run.
    pub seconds: f64,
    /// Share of the pair's combined wall clock.
    pub relative_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub split: SplitSpec,
    pub criterion_tolerance: f64,
    pub gg: BackendBench,
    pub som: BackendBench,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bench report serializes")
    }
}

/// Budget fractions tried when searching for the epochs-to-criterion.
pub const BENCH_LADDER: [f64; 7] = [0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0];

/// Accuracy drop from the full-budget result still counted as converged.
pub const CRITERION_TOLERANCE: f64 = 0.02;

fn train_accuracy(report: &TrainReport<f64>) -> f64 {
    report
        .label
        .accuracy
        .last()
        .copied()
        .unwrap_or(report.label.initial_accuracy)
}

fn bench_backend(
    config: &PipelineConfig<f64>,
    train: &Dataset<f64>,
    test: &Dataset<f64>,
) -> Result<BackendBench, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| EvalError::Split(format!("cannot build the timing thread pool: {e}")))?;
    let start = Instant::now();
    let (model, report) = pool.install(|| train_pipeline_with_report(config, train))?;
    let seconds = start.elapsed().as_secs_f64();
    let accuracy = evaluate(&model, test)?.accuracy;
    let mut ladder = Vec::with_capacity(BENCH_LADDER.len());
    for &f in &BENCH_LADDER[..BENCH_LADDER.len() - 1] {
        let (m, r) = train_pipeline_stopped(config, train, f)?;
        ladder.push(LadderPoint {
            budget_fraction: f,
            epochs: r.total_epochs(),
            accuracy: evaluate(&m, test)?.accuracy,
        });
    }
    ladder.push(LadderPoint {
        budget_fraction: 1.0,
        epochs: report.total_epochs(),
        accuracy,
    });
    let epochs_to_criterion = ladder
        .iter()
        .find(|p| p.accuracy >= accuracy - CRITERION_TOLERANCE - 1e-12)
        .map_or(report.total_epochs(), |p| p.epochs);
    Ok(BackendBench {
        backend: config.backend(),
        layer1_neurons: model.layer1.lattice().len(),
        layer2_neurons: model.layer2.lattice().len(),
        accuracy,
        train_accuracy: train_accuracy(&report),
        epochs: report.total_epochs(),
        epochs_to_criterion,
        ladder,
        seconds,
        relative_time: 0.0,
    })
}

/// Trains both backends on the same holdout split and compares accuracy,
/// epochs to criterion and wall clock.
pub fn benchmark_backends(
    dataset: &Dataset<f64>,
    gg_config: &PipelineConfig<f64>,
    som_config: &PipelineConfig<f64>,
    spec: &SplitSpec,
) -> Result<BenchReport, EvalError> {
    if gg_config.backend() != Backend::Gg || som_config.backend() != Backend::Som {
        return Err(EvalError::Pipeline(PipelineError::Config(
            "benchmark needs a growing-grid and a SOM configuration".into(),
        )));
    }
    let (train, test) = split(dataset, spec)?.swap_remove(0);
    let mut gg = bench_backend(gg_config, &train, &test)?;
    let mut som = bench_backend(som_config, &train, &test)?;
    let total = gg.seconds + som.seconds;
    if total > 0.0 {
        gg.relative_time = gg.seconds / total;
        som.relative_time = 1.0 - gg.relative_time;
    } else {
        gg.relative_time = 0.5;
        som.relative_time = 0.5;
    }
    Ok(BenchReport {
        split: *spec,
        criterion_tolerance: CRITERION_TOLERANCE,
        gg,
        som,
    })
}

/// Where a preset's sequences come from.
#[derive(Clone, Debug, PartialEq)]
pub enum PresetData {
    Synthetic(SyntheticSpec),
    /// MSRAction3D restricted to the listed 1-based action ids (empty: all).
    MsrAction3d(Vec<usize>),
    UtKinect,
    Florence3d,
}

/// A ready-to-run experiment: data source, both backends' configurations
/// at matched neuron counts and the evaluation protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub data: PresetData,
    pub gg: PipelineConfig<f64>,
    pub som: PipelineConfig<f64>,
    pub split: SplitSpec,
}

impl Preset {
    pub fn config(&self, backend: Backend) -> &PipelineConfig<f64> {
        match backend {
            Backend::Gg => &self.gg,
            Backend::Som => &self.som,
        }
    }

    /// What `load` expects as its path, or `None` for generated data.
    pub fn data_hint(&self) -> Option<&'static str> {
        match self.data {
            PresetData::Synthetic(_) => None,
            PresetData::MsrAction3d(_) => Some("the MSRAction3D skeleton directory"),
            PresetData::UtKinect => Some("the UTKinect-Action3D root directory"),
            PresetData::Florence3d => Some("the Florence3DActions world-coordinates file"),
        }
    }

    /// Generates or loads the preset's sequences.
    pub fn load(&self, path: Option<&Path>) -> Result<Dataset<f64>, EvalError> {
        let need = |path: Option<&Path>| {
            path.ok_or(EvalError::MissingData {
                preset: self.name,
                what: self.data_hint().unwrap_or("data"),
            })
            .map(Path::to_path_buf)
        };
        Ok(match &self.data {
            PresetData::Synthetic(spec) => generate_synthetic(spec)?,
            PresetData::MsrAction3d(subset) => load_msr_action3d(&need(path)?, subset, &[])?,
            PresetData::UtKinect => load_utkinect(&need(path)?)?,
            PresetData::Florence3d => load_florence3d(&need(path)?)?,
        })
    }
}

pub const PRESET_NAMES: [&str; 5] = ["synthetic", "msr10", "msr20", "utkinect", "florence"];

struct Sizes {
    side1: usize,
    side2: usize,
    gg_epochs: (usize, usize),
    som_epochs: (usize, usize),
}

fn configs(s: Sizes, seed: u64) -> (PipelineConfig<f64>, PipelineConfig<f64>) {
    let grid = |side: usize, sigma: f64, seed: u64| GridConfig {
        sigma,
        alpha0: 0.1,
        lambda: LambdaMode::Middle,
        gamma: side * side,
        finetune_alpha: Decay {
            start: 0.1,
            end: 0.001,
        },
        softmax_exp: 10.0,
        seed,
        ..Default::default()
    };
    let som = |side: usize, sigma: f64, seed: u64| SomConfig {
        rows: side,
        cols: side,
        sigma,
        alpha: Decay {
            start: 0.1,
            end: 0.001,
        },
        radius: None,
        softmax_exp: 10.0,
        seed,
        ..Default::default()
    };
    let base = |l1, l2, epochs: (usize, usize)| PipelineConfig {
        preprocess: PreprocessConfig::default(),
        layer1: l1,
        layer2: l2,
        label: LabelConfig {
            seed,
            ..Default::default()
        },
        label_input: LabelInput::ActivityMap,
        layer1_epochs: epochs.0,
        layer2_epochs: epochs.1,
        seed,
    };
    (
        base(
            LayerConfig::Gg(grid(s.side1, 1.0e6, seed)),
            LayerConfig::Gg(grid(s.side2, 1.0e3, seed + 1)),
            s.gg_epochs,
        ),
        base(
            LayerConfig::Som(som(s.side1, 1.0e6, seed)),
            LayerConfig::Som(som(s.side2, 1.0e3, seed + 1)),
            s.som_epochs,
        ),
    )
}

/// Looks up a named preset. `seed` drives the networks, the split and, for
/// the synthetic preset, the generated data.
pub fn preset(name: &str, seed: u64) -> Result<Preset, EvalError> {
    let (data, sizes, split) = match name {
        "synthetic" => (
            PresetData::Synthetic(SyntheticSpec {
                n_classes: 5,
                n_per_class: 40,
                n_joints: 20,
                frame_range: (30, 60),
                noise_sigma: 0.01,
                seed,
            }),
            Sizes {
                side1: 10,
                side2: 8,
                gg_epochs: (50, 100),
                som_epochs: (325, 650),
            },
            SplitSpec::holdout(0.25, seed),
        ),
        "msr10" => (
            PresetData::MsrAction3d(crate::skeleton::MSR_SUBSET_P1.to_vec()),
            Sizes {
                side1: 30,
                side2: 40,
                gg_epochs: (200, 200),
                som_epochs: (1300, 1300),
            },
            SplitSpec::holdout(0.25, seed),
        ),
        "msr20" => (
            PresetData::MsrAction3d(Vec::new()),
            Sizes {
                side1: 50,
                side2: 50,
                gg_epochs: (250, 250),
                som_epochs: (1600, 1600),
            },
            SplitSpec::holdout(0.25, seed),
        ),
        "utkinect" => (
            PresetData::UtKinect,
            Sizes {
                side1: 30,
                side2: 40,
                gg_epochs: (300, 300),
                som_epochs: (1600, 1600),
            },
            SplitSpec::kfold(10, seed),
        ),
        "florence" => (
            PresetData::Florence3d,
            Sizes {
                side1: 30,
                side2: 40,
                gg_epochs: (300, 300),
                som_epochs: (1600, 1600),
            },
            SplitSpec::kfold(10, seed),
        ),
        other => return Err(EvalError::UnknownPreset(other.to_string())),
    };
    let (gg, som) = configs(sizes, seed);
    Ok(Preset {
        name: PRESET_NAMES.iter().find(|n| **n == name).unwrap(),
        data,
        gg,
        som,
        split,
    })
}
