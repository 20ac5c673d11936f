use std::fmt::Write as _;
use std::fs;
use std::path::{Component, Path, PathBuf};

use gridact::eval::{
    benchmark_backends, check_categories, cross_validate, evaluate, split, ConfusionMatrix,
    EvalError, SplitMode,
};
use gridact::growing_grid::GrowthReport;
use gridact::pipeline::{
    train_pipeline_with_report, LayerReport, PipelineError, PipelineModel, TrainReport,
};
use gridact::preprocess::{
    build_canonical, dominant_part, normalize_frames, part_energies, CanonicalSkeleton,
};
use gridact::skeleton::{to_interchange_string, BodyPart, Dataset, SkeletonSequence};
use gridact::ModelError;
use log::{info, warn};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{echo, RunConfig};

pub const MODEL_FILE: &str = "model.gridact";

/// A failed command with its exit code: 1 for usage, configuration and
/// incompatible inputs, 2 for runtime failures.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 1,
            error: error.into(),
        }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            error: error.into(),
        }
    }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Config(_)
        | PipelineError::Data(_)
        | PipelineError::Incompatible(_)
        | PipelineError::Model(_) => Failure::usage(e),
        _ => Failure::runtime(e),
    }
}

fn eval_failure(e: EvalError) -> Failure {
    match e {
        EvalError::Data(_) => Failure::runtime(e),
        EvalError::Pipeline(p) => pipeline_failure(p),
        _ => Failure::usage(e),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Files produced by a command, written only once it has succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, String)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<PathBuf>, contents: String) {
        self.files.push((name.into(), contents));
    }

    fn commit(self, dir: &Path) -> Result<(), Failure> {
        for (name, contents) in &self.files {
            // Relative names without `..` keep every write inside `dir`.
            assert!(name.components().all(|c| matches!(c, Component::Normal(_))));
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)
                    .map_err(|e| Failure::runtime(anyhow::anyhow!("{}: {e}", parent.display())))?;
            }
            fs::write(&path, contents)
                .map_err(|e| Failure::runtime(anyhow::anyhow!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn load_data(cfg: &RunConfig) -> Result<Dataset<f64>, Failure> {
    info!("loading {}", cfg.data.describe());
    cfg.data.load().map_err(Failure::runtime)
}

fn load_model(path: &Path) -> Result<PipelineModel<f64>, Failure> {
    gridact::pipeline::load_model(path).map_err(|e: ModelError| Failure::usage(e))
}

/// Training and test sets of the first fold, or everything for both when
/// the protocol is k-fold.
fn first_split(
    cfg: &RunConfig,
    data: &Dataset<f64>,
) -> Result<(Dataset<f64>, Dataset<f64>), Failure> {
    match cfg.split.mode {
        SplitMode::RandomHoldout { .. } => Ok(split(data, &cfg.split)
            .map_err(eval_failure)?
            .swap_remove(0)),
        SplitMode::KFold { .. } => Ok((data.clone(), data.clone())),
    }
}

fn growth_csv(report: &TrainReport<f64>) -> String {
    let mut out = String::from("layer,interval,max_counter,rows,cols,inserted\n");
    let rows = |layer: usize, g: &Option<GrowthReport>, out: &mut String| {
        for r in g.iter().flat_map(|g| &g.intervals) {
            writeln!(
                out,
                "{layer},{},{},{},{},{}",
                r.interval, r.max_counter, r.rows, r.cols, r.inserted
            )
            .unwrap();
        }
    };
    rows(1, &report.layer1.growth, &mut out);
    rows(2, &report.layer2.growth, &mut out);
    out
}

fn layer_log(out: &mut String, name: &str, layer: &LayerReport<f64>, neurons: (usize, usize)) {
    writeln!(
        out,
        "{name}: backend={} lattice={}x{} growth_epochs={} tuning_epochs={} quantization_error={:.17e}",
        layer.backend.name(),
        neurons.0,
        neurons.1,
        layer.growth_epochs,
        layer.tuning_epochs,
        layer.quantization_error.last().copied().unwrap_or(f64::NAN)
    )
    .unwrap();
}

pub fn train(cfg: &RunConfig) -> Result<(), Failure> {
    let data = load_data(cfg)?;
    let (train, test) = first_split(cfg, &data)?;
    if matches!(cfg.split.mode, SplitMode::KFold { .. }) {
        info!("k-fold protocol: training on all {} sequences", data.len());
    }
    let (model, report) =
        train_pipeline_with_report(cfg.pipeline(), &train).map_err(pipeline_failure)?;
    info!(
        "trained in {:.2}s (preprocess {:.2}s, layer 1 {:.2}s, layer 2 {:.2}s, label {:.2}s)",
        report.total_seconds(),
        report.preprocess_seconds,
        report.layer1.seconds,
        report.layer2.seconds,
        report.label_seconds
    );
    let train_eval = evaluate(&model, &train).map_err(eval_failure)?;

    let mut log = String::new();
    writeln!(log, "data: {}", cfg.data.describe()).unwrap();
    writeln!(
        log,
        "sequences: {} total, {} training, {} held out",
        data.len(),
        train.len(),
        if train.len() == data.len() {
            0
        } else {
            test.len()
        }
    )
    .unwrap();
    writeln!(log, "dropped_frames: {}", report.dropped_frames).unwrap();
    let shape = |n: &dyn gridact::lattice::NeuronMap<f64>| (n.lattice().rows(), n.lattice().cols());
    layer_log(&mut log, "layer1", &report.layer1, shape(&model.layer1));
    writeln!(log, "k_max: {}", model.k_max).unwrap();
    layer_log(&mut log, "layer2", &report.layer2, shape(&model.layer2));
    writeln!(log, "epochs: {}", report.total_epochs()).unwrap();
    writeln!(log, "train_accuracy: {:.6}", train_eval.accuracy).unwrap();

    let mut out = Outputs::default();
    out.add(MODEL_FILE, model.to_document());
    out.add("growth.csv", growth_csv(&report));
    out.add("train.log", log);
    out.add("run.toml", echo(cfg));
    out.commit(&cfg.output_dir)?;
    println!("model={}", cfg.output_dir.join(MODEL_FILE).display());
    println!("train_accuracy={:.6}", train_eval.accuracy);
    Ok(())
}

fn report_json(
    protocol: &str,
    accuracy: f64,
    confusion: &ConfusionMatrix,
    per_class: &[Option<f64>],
    folds: Option<&[f64]>,
    predictions: Option<&[usize]>,
) -> String {
    let v = json!({
        "protocol": protocol,
        "accuracy": accuracy,
        "sequences": confusion.total(),
        "correct": confusion.correct(),
        "categories": confusion.category_names,
        "per_class_accuracy": per_class,
        "confusion": confusion.counts,
        "fold_accuracy": folds,
        "predictions": predictions,
    });
    serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
}

/// Evaluates a saved model on the held-out part of the configured split
/// (or on every sequence), or, without a model, runs the configured
/// protocol end to end.
pub fn eval(
    cfg: &RunConfig,
    model_path: Option<&Path>,
    all: bool,
    format: Format,
) -> Result<(), Failure> {
    let data = load_data(cfg)?;
    let report = match model_path {
        Some(path) => {
            let model = load_model(path)?;
            check_categories(&model.category_names, &data.category_names).map_err(eval_failure)?;
            if let Some(s) = data
                .sequences
                .iter()
                .find(|s| model.check_sequence(s).is_err())
            {
                return Err(pipeline_failure(model.check_sequence(s).unwrap_err()));
            }
            let (protocol, test) = if all {
                ("model_all", data)
            } else {
                match cfg.split.mode {
                    SplitMode::RandomHoldout { .. } => {
                        ("model_holdout", first_split(cfg, &data)?.1)
                    }
                    SplitMode::KFold { .. } => {
                        warn!("k-fold protocol with a saved model: evaluating every sequence");
                        ("model_all", data)
                    }
                }
            };
            let e = evaluate(&model, &test).map_err(eval_failure)?;
            (
                report_json(
                    protocol,
                    e.accuracy,
                    &e.confusion,
                    &e.per_class_accuracy,
                    None,
                    Some(&e.predictions),
                ),
                e.accuracy,
                e.confusion,
            )
        }
        None => match cfg.split.mode {
            SplitMode::RandomHoldout { .. } => {
                if all {
                    return Err(Failure::usage(anyhow::anyhow!("--all needs --model")));
                }
                let (train, test) = first_split(cfg, &data)?;
                let (model, _) =
                    train_pipeline_with_report(cfg.pipeline(), &train).map_err(pipeline_failure)?;
                let e = evaluate(&model, &test).map_err(eval_failure)?;
                (
                    report_json(
                        "holdout",
                        e.accuracy,
                        &e.confusion,
                        &e.per_class_accuracy,
                        None,
                        Some(&e.predictions),
                    ),
                    e.accuracy,
                    e.confusion,
                )
            }
            SplitMode::KFold { .. } => {
                if all {
                    return Err(Failure::usage(anyhow::anyhow!("--all needs --model")));
                }
                let cv = cross_validate(cfg.pipeline(), &data, &cfg.split).map_err(eval_failure)?;
                (
                    report_json(
                        "kfold",
                        cv.accuracy,
                        &cv.confusion,
                        &cv.per_class_accuracy,
                        Some(&cv.fold_accuracy),
                        None,
                    ),
                    cv.accuracy,
                    cv.confusion,
                )
            }
        },
    };
    let (json_report, accuracy, confusion) = report;
    let mut out = Outputs::default();
    out.add("confusion.csv", confusion.to_csv());
    out.add("confusion.json", confusion.to_json() + "\n");
    out.add("eval.json", json_report.clone());
    out.commit(&cfg.output_dir)?;
    match format {
        Format::Csv => println!("accuracy={accuracy:.6}"),
        Format::Json => print!("{json_report}"),
    }
    Ok(())
}

pub fn bench(cfg: &RunConfig, format: Format) -> Result<(), Failure> {
    let data = load_data(cfg)?;
    let report = benchmark_backends(&data, &cfg.gg, &cfg.som, &cfg.split).map_err(eval_failure)?;
    let text = report.to_json() + "\n";
    let mut out = Outputs::default();
    out.add("bench.json", text.clone());
    out.commit(&cfg.output_dir)?;
    match format {
        Format::Csv => {
            println!("backend,neurons,accuracy,epochs,epochs_to_criterion,seconds,relative_time");
            for b in [&report.gg, &report.som] {
                println!(
                    "{},{}/{},{:.6},{},{},{:.3},{:.4}",
                    b.backend.name(),
                    b.layer1_neurons,
                    b.layer2_neurons,
                    b.accuracy,
                    b.epochs,
                    b.epochs_to_criterion,
                    b.seconds,
                    b.relative_time
                );
            }
        }
        Format::Json => print!("{text}"),
    }
    Ok(())
}

/// Writes every sequence's fixed-length ordered pattern and the
/// second-layer cluster of each sequence.
pub fn export_patterns(cfg: &RunConfig, model_path: &Path) -> Result<(), Failure> {
    let data = load_data(cfg)?;
    let model = load_model(model_path)?;
    check_categories(&model.category_names, &data.category_names).map_err(eval_failure)?;
    let patterns = data
        .sequences
        .par_iter()
        .map(|s| model.encode(s).map(|e| e.pattern))
        .collect::<Result<Vec<_>, _>>()
        .map_err(pipeline_failure)?;
    let mut out = Outputs::default();
    for (i, p) in patterns.iter().enumerate() {
        out.add(format!("patterns/seq_{i:05}.csv"), p.to_csv(i));
    }
    out.add(
        "clusters.csv",
        model.cluster_csv(&data).map_err(pipeline_failure)?,
    );
    out.commit(&cfg.output_dir)?;
    println!("patterns={} k_max={}", patterns.len(), model.k_max);
    Ok(())
}

fn normalize_all(
    cfg: &RunConfig,
    data: &Dataset<f64>,
    canon: &CanonicalSkeleton<f64>,
) -> Result<Vec<(SkeletonSequence<f64>, usize)>, Failure> {
    let preprocess = &cfg.pipeline().preprocess;
    data.sequences
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let (frames, dropped) = normalize_frames(s, preprocess, canon)
                .map_err(|e| Failure::runtime(anyhow::anyhow!("sequence {i}: {e}")))?;
            Ok((
                SkeletonSequence {
                    frames,
                    ..s.clone()
                },
                dropped,
            ))
        })
        .collect()
}

/// Writes the normalized (ego-centred, canonically scaled) dataset, the
/// canonical link lengths and per-sequence body-part motion energies.
pub fn preprocess(cfg: &RunConfig) -> Result<(), Failure> {
    let data = load_data(cfg)?;
    let canon = build_canonical(&data.sequences).map_err(Failure::runtime)?;
    let normalized = normalize_all(cfg, &data, &canon)?;
    let mut parts = String::from("sequence,label,frames,dropped_frames");
    for p in BodyPart::ALL {
        write!(parts, ",{}", p.name()).unwrap();
    }
    parts.push_str(",dominant\n");
    for (i, (s, dropped)) in normalized.iter().enumerate() {
        let partition = cfg
            .pipeline()
            .preprocess
            .partition
            .as_ref()
            .unwrap_or(&s.joint_map.partition);
        let energy = part_energies(&s.frames, partition);
        write!(parts, "{i},{},{},{dropped}", s.label, s.frames.len()).unwrap();
        for e in energy {
            write!(parts, ",{e:.17e}").unwrap();
        }
        writeln!(parts, ",{}", dominant_part(&energy).name()).unwrap();
    }
    let mut links = String::from("parent,child,length\n");
    for (p, c, len) in &canon.links {
        writeln!(links, "{p},{c},{len:.17e}").unwrap();
    }
    let dataset = Dataset::new(
        normalized.into_iter().map(|(s, _)| s).collect(),
        data.category_names.clone(),
    )
    .map_err(Failure::runtime)?;
    let mut out = Outputs::default();
    out.add(
        "normalized.txt",
        to_interchange_string(&dataset).map_err(Failure::runtime)?,
    );
    out.add("canonical.csv", links);
    out.add("parts.csv", parts);
    out.commit(&cfg.output_dir)?;
    println!("sequences={}", dataset.len());
    Ok(())
}

/// Prints a summary of the configured dataset; writes nothing.
pub fn inspect(cfg: &RunConfig, format: Format) -> Result<(), Failure> {
    let data = load_data(cfg)?;
    let mut lengths: Vec<usize> = data.sequences.iter().map(|s| s.frames.len()).collect();
    lengths.sort_unstable();
    let mut per_class = vec![0usize; data.category_names.len()];
    for s in &data.sequences {
        per_class[s.label] += 1;
    }
    let mut subjects: Vec<u32> = data.sequences.iter().map(|s| s.subject_id).collect();
    subjects.sort_unstable();
    subjects.dedup();
    let layout = data
        .sequences
        .first()
        .map(|s| s.joint_map.name.clone())
        .unwrap_or_default();
    let frames = |q: usize| lengths.get(q).copied().unwrap_or(0);
    let v = json!({
        "source": cfg.data.describe(),
        "sequences": data.len(),
        "layout": layout,
        "joints": data.joint_count(),
        "subjects": subjects.len(),
        "frames": {
            "min": frames(0),
            "median": frames(lengths.len() / 2),
            "max": lengths.last().copied().unwrap_or(0),
        },
        "categories": data.category_names.iter().zip(&per_class)
            .map(|(n, c)| json!({"name": n, "sequences": c}))
            .collect::<Vec<_>>(),
    });
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&v).unwrap()),
        Format::Csv => {
            println!("source={}", cfg.data.describe());
            println!("sequences={}", data.len());
            println!("layout={layout}");
            println!("joints={}", data.joint_count().unwrap_or(0));
            println!("subjects={}", subjects.len());
            println!(
                "frames_min={} frames_median={} frames_max={}",
                frames(0),
                frames(lengths.len() / 2),
                lengths.last().copied().unwrap_or(0)
            );
            println!("category,sequences");
            for (n, c) in data.category_names.iter().zip(&per_class) {
                println!("{n},{c}");
            }
        }
    }
    Ok(())
}
