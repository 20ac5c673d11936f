//! Run configuration: a TOML file layered over a named preset, then
//! command-line overrides.
//!
//! ```toml
//! preset = "synthetic"        # base parameters; default "synthetic"
//! seed = 7                    # drives networks, split and generated data
//! backend = "gg"              # "gg" or "som"
//! output_dir = "runs/synth"
//! threads = 1
//!
//! [data]
//! source = "synthetic"        # synthetic | msr_action3d | utkinect | florence3d | interchange
//! path = "..."                # required for every source but synthetic
//! actions = [10, 11, 12]      # msr_action3d only: 1-based action ids to keep
//! exclude = ["a01_s01_e01"]   # msr_action3d only: file stems to skip
//! n_classes = 5               # synthetic only, with n_per_class, n_joints,
//! n_per_class = 40            #   min_frames, max_frames, noise_sigma
//!
//! [split]
//! mode = "holdout"            # or "kfold"
//! test_fraction = 0.25        # holdout only
//! k = 10                      # kfold only
//! stratified = true
//!
//! [gg]                        # any subset of the pipeline configuration,
//! layer1_epochs = 40          # merged over the preset's growing-grid setup
//! [gg.layer1.gg]
//! gamma = 81
//!
//! [som]                       # likewise for the SOM setup
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use gridact::eval::{preset, Preset, PresetData, SplitMode, SplitSpec, PRESET_NAMES};
use gridact::pipeline::{Backend, PipelineConfig};
use gridact::skeleton::{
    load_florence3d, load_msr_action3d, load_utkinect, read_interchange, Dataset, SyntheticSpec,
};
use serde::Deserialize;

pub const DEFAULT_OUTPUT_DIR: &str = "gridact-out";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub backend: Option<Backend>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub data: DataFile,
    #[serde(default)]
    pub split: SplitFile,
    pub gg: Option<toml::Table>,
    pub som: Option<toml::Table>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Synthetic,
    MsrAction3d,
    Utkinect,
    Florence3d,
    Interchange,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFile {
    pub source: Option<SourceKind>,
    pub path: Option<PathBuf>,
    pub actions: Option<Vec<usize>>,
    #[serde(default)]
    pub exclude: Vec<String>,
    pub n_classes: Option<usize>,
    pub n_per_class: Option<usize>,
    pub n_joints: Option<usize>,
    pub min_frames: Option<usize>,
    pub max_frames: Option<usize>,
    pub noise_sigma: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Holdout,
    Kfold,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFile {
    pub mode: Option<ModeKind>,
    pub test_fraction: Option<f64>,
    pub k: Option<usize>,
    pub stratified: Option<bool>,
    pub seed: Option<u64>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub backend: Option<Backend>,
    pub data: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub no_stratify: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    MsrAction3d {
        path: PathBuf,
        actions: Vec<usize>,
        exclude: Vec<String>,
    },
    Utkinect(PathBuf),
    Florence3d(PathBuf),
    Interchange(PathBuf),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset<f64>, gridact::skeleton::DataError> {
        match self {
            DataSource::Synthetic(spec) => gridact::skeleton::generate_synthetic(spec),
            DataSource::MsrAction3d {
                path,
                actions,
                exclude,
            } => load_msr_action3d(path, actions, exclude),
            DataSource::Utkinect(p) => load_utkinect(p),
            DataSource::Florence3d(p) => load_florence3d(p),
            DataSource::Interchange(p) => read_interchange(p),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DataSource::Synthetic(s) => format!(
                "synthetic {}x{} joints={} frames={}..{} noise={} seed={}",
                s.n_classes,
                s.n_per_class,
                s.n_joints,
                s.frame_range.0,
                s.frame_range.1,
                s.noise_sigma,
                s.seed
            ),
            DataSource::MsrAction3d { path, actions, .. } => {
                format!("msr_action3d {} actions={actions:?}", path.display())
            }
            DataSource::Utkinect(p) => format!("utkinect {}", p.display()),
            DataSource::Florence3d(p) => format!("florence3d {}", p.display()),
            DataSource::Interchange(p) => format!("interchange {}", p.display()),
        }
    }
}

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub seed: u64,
    pub backend: Backend,
    pub data: DataSource,
    pub split: SplitSpec,
    pub gg: PipelineConfig<f64>,
    pub som: PipelineConfig<f64>,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn pipeline(&self) -> &PipelineConfig<f64> {
        match self.backend {
            Backend::Gg => &self.gg,
            Backend::Som => &self.som,
        }
    }
}

/// Every problem found while resolving a configuration.
#[derive(Debug)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Where to get each public dataset once it is missing.
pub fn download_hint(kind: SourceKind) -> &'static str {
    match kind {
        SourceKind::MsrAction3d => {
            "download the MSRAction3D skeleton archive (the per-sequence \
             aAA_sSS_eEE_skeleton*.txt files) from its public distribution, unpack it \
             and pass the directory with --data or [data] path"
        }
        SourceKind::Utkinect => {
            "download UTKinect-Action3D (joints_sSS_eEE.txt files and actionLabel.txt) \
             from its public distribution, unpack it and pass the root directory with \
             --data or [data] path"
        }
        SourceKind::Florence3d => {
            "download Florence3DActions from its public distribution and pass its \
             world-coordinates file with --data or [data] path"
        }
        SourceKind::Interchange => "pass an interchange dataset file with --data",
        SourceKind::Synthetic => "",
    }
}

pub fn read_run_file(path: &Path) -> Result<RunFile, ConfigErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![format!("{}: {e}", path.display())]))?;
    toml::from_str(&text).map_err(|e| ConfigErrors(vec![format!("{}: {e}", path.display())]))
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn overlay(
    base: &PipelineConfig<f64>,
    patch: Option<&toml::Table>,
    name: &str,
    errors: &mut Vec<String>,
) -> PipelineConfig<f64> {
    let Some(patch) = patch else {
        return base.clone();
    };
    let mut value = serde_json::to_value(base).expect("pipeline configs serialize");
    let patch = match serde_json::to_value(patch) {
        Ok(p) => p,
        Err(e) => {
            errors.push(format!("[{name}]: {e}"));
            return base.clone();
        }
    };
    merge(&mut value, patch);
    match serde_json::from_value(value) {
        Ok(c) => c,
        Err(e) => {
            errors.push(format!("[{name}]: {e}"));
            base.clone()
        }
    }
}

fn existing(path: &Option<PathBuf>, kind: SourceKind, errors: &mut Vec<String>) -> PathBuf {
    match path {
        Some(p) if p.exists() => p.clone(),
        Some(p) => {
            errors.push(format!(
                "dataset path {} does not exist; {}",
                p.display(),
                download_hint(kind)
            ));
            p.clone()
        }
        None => {
            errors.push(format!("no dataset path given; {}", download_hint(kind)));
            PathBuf::new()
        }
    }
}

fn resolve_data(
    file: &DataFile,
    base: &Preset,
    path: Option<PathBuf>,
    errors: &mut Vec<String>,
) -> DataSource {
    let kind = file.source.unwrap_or(match base.data {
        PresetData::Synthetic(_) => SourceKind::Synthetic,
        PresetData::MsrAction3d(_) => SourceKind::MsrAction3d,
        PresetData::UtKinect => SourceKind::Utkinect,
        PresetData::Florence3d => SourceKind::Florence3d,
    });
    let path = path.or_else(|| file.path.clone());
    let synthetic_keys = [
        file.n_classes.is_some(),
        file.n_per_class.is_some(),
        file.n_joints.is_some(),
        file.min_frames.is_some(),
        file.max_frames.is_some(),
        file.noise_sigma.is_some(),
    ];
    if kind != SourceKind::Synthetic && synthetic_keys.iter().any(|&k| k) {
        errors.push("[data] synthetic parameters given for a non-synthetic source".into());
    }
    if kind != SourceKind::MsrAction3d && (file.actions.is_some() || !file.exclude.is_empty()) {
        errors.push("[data] actions/exclude only apply to msr_action3d".into());
    }
    match kind {
        SourceKind::Synthetic => {
            if path.is_some() {
                errors.push("synthetic data takes no dataset path".into());
            }
            let mut spec = match &base.data {
                PresetData::Synthetic(s) => s.clone(),
                _ => match preset("synthetic", 0) {
                    Ok(Preset {
                        data: PresetData::Synthetic(s),
                        ..
                    }) => SyntheticSpec {
                        seed: base.split.seed,
                        ..s
                    },
                    _ => unreachable!("the synthetic preset generates data"),
                },
            };
            spec.n_classes = file.n_classes.unwrap_or(spec.n_classes);
            spec.n_per_class = file.n_per_class.unwrap_or(spec.n_per_class);
            spec.n_joints = file.n_joints.unwrap_or(spec.n_joints);
            spec.frame_range = (
                file.min_frames.unwrap_or(spec.frame_range.0),
                file.max_frames.unwrap_or(spec.frame_range.1),
            );
            spec.noise_sigma = file.noise_sigma.unwrap_or(spec.noise_sigma);
            if spec.n_classes < 2 || spec.n_per_class == 0 {
                errors
                    .push("[data] synthetic data needs n_classes >= 2 and n_per_class >= 1".into());
            }
            if spec.n_joints != 20 && spec.n_joints != 15 {
                errors.push(format!(
                    "[data] n_joints must be 20 or 15, got {}",
                    spec.n_joints
                ));
            }
            let (lo, hi) = spec.frame_range;
            if !(10 <= lo && lo <= hi && hi <= 200) {
                errors.push(format!(
                    "[data] frame range {lo}..{hi} must lie within 10..200"
                ));
            }
            if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
                errors.push("[data] noise_sigma must be finite and non-negative".into());
            }
            DataSource::Synthetic(spec)
        }
        SourceKind::MsrAction3d => {
            let actions = file.actions.clone().unwrap_or(match &base.data {
                PresetData::MsrAction3d(a) => a.clone(),
                _ => Vec::new(),
            });
            if let Some(a) = actions.iter().find(|&&a| !(1..=20).contains(&a)) {
                errors.push(format!("[data] action id {a} outside 1..20"));
            }
            DataSource::MsrAction3d {
                path: existing(&path, kind, errors),
                actions,
                exclude: file.exclude.clone(),
            }
        }
        SourceKind::Utkinect => DataSource::Utkinect(existing(&path, kind, errors)),
        SourceKind::Florence3d => DataSource::Florence3d(existing(&path, kind, errors)),
        SourceKind::Interchange => DataSource::Interchange(existing(&path, kind, errors)),
    }
}

fn resolve_split(
    file: &SplitFile,
    base: SplitSpec,
    no_stratify: bool,
    errors: &mut Vec<String>,
) -> SplitSpec {
    let mode = match file.mode {
        None => base.mode,
        Some(ModeKind::Holdout) => SplitMode::RandomHoldout {
            test_fraction: match base.mode {
                SplitMode::RandomHoldout { test_fraction } => test_fraction,
                SplitMode::KFold { .. } => 0.25,
            },
        },
        Some(ModeKind::Kfold) => SplitMode::KFold {
            k: match base.mode {
                SplitMode::KFold { k } => k,
                SplitMode::RandomHoldout { .. } => 10,
            },
        },
    };
    let mode = match mode {
        SplitMode::RandomHoldout { test_fraction } => {
            if file.k.is_some() {
                errors.push("[split] k only applies to kfold".into());
            }
            SplitMode::RandomHoldout {
                test_fraction: file.test_fraction.unwrap_or(test_fraction),
            }
        }
        SplitMode::KFold { k } => {
            if file.test_fraction.is_some() {
                errors.push("[split] test_fraction only applies to holdout".into());
            }
            SplitMode::KFold {
                k: file.k.unwrap_or(k),
            }
        }
    };
    let spec = SplitSpec {
        mode,
        seed: file.seed.unwrap_or(base.seed),
        stratified: !no_stratify && file.stratified.unwrap_or(base.stratified),
    };
    if let Err(e) = spec.validate() {
        errors.push(format!("[split] {e}"));
    }
    spec
}

/// Resolves a run file plus overrides into a validated configuration.
/// Collects every problem instead of stopping at the first.
pub fn resolve(file: RunFile, over: Overrides) -> Result<RunConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let name = over
        .preset
        .or(file.preset)
        .unwrap_or_else(|| "synthetic".to_string());
    let seed = over.seed.or(file.seed).unwrap_or(0);
    if seed > i64::MAX as u64 {
        errors.push(format!("seed {seed} exceeds {}", i64::MAX));
    }
    let base = match preset(&name, seed) {
        Ok(p) => p,
        Err(_) => {
            return Err(ConfigErrors(vec![format!(
                "unknown preset {name:?}; expected one of {}",
                PRESET_NAMES.join(", ")
            )]))
        }
    };
    let backend = over.backend.or(file.backend).unwrap_or(Backend::Gg);
    let data = resolve_data(&file.data, &base, over.data, &mut errors);
    let split = resolve_split(&file.split, base.split, over.no_stratify, &mut errors);
    let gg = overlay(&base.gg, file.gg.as_ref(), "gg", &mut errors);
    let som = overlay(&base.som, file.som.as_ref(), "som", &mut errors);
    for (cfg, want, table) in [(&gg, Backend::Gg, "gg"), (&som, Backend::Som, "som")] {
        if cfg.backend() != want {
            errors.push(format!(
                "[{table}] layers must use the {} backend",
                want.name()
            ));
        }
        if let Err(e) = cfg.validate() {
            errors.push(format!("[{table}] {e}"));
        }
    }
    let threads = over.threads.or(file.threads);
    if threads == Some(0) {
        errors.push("threads must be at least 1".into());
    }
    let output_dir = over
        .output_dir
        .or(file.output_dir)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    if output_dir.is_file() {
        errors.push(format!("output dir {} is a file", output_dir.display()));
    }
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    Ok(RunConfig {
        preset: name,
        seed,
        backend,
        data,
        split,
        gg,
        som,
        output_dir,
        threads,
    })
}

/// TOML has no null; absent optional fields are simply left out.
fn strip_nulls(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.retain(|_, x| !x.is_null());
            m.values_mut().for_each(strip_nulls);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_nulls),
        _ => {}
    }
}

/// The resolved configuration as a run file that reproduces it.
pub fn echo(cfg: &RunConfig) -> String {
    let mut root = toml::Table::new();
    root.insert("preset".into(), cfg.preset.clone().into());
    root.insert("seed".into(), toml::Value::Integer(cfg.seed as i64));
    root.insert("backend".into(), cfg.backend.name().into());
    let mut data = toml::Table::new();
    let path = |p: &Path| toml::Value::String(p.display().to_string());
    match &cfg.data {
        DataSource::Synthetic(s) => {
            data.insert("source".into(), "synthetic".into());
            data.insert("n_classes".into(), (s.n_classes as i64).into());
            data.insert("n_per_class".into(), (s.n_per_class as i64).into());
            data.insert("n_joints".into(), (s.n_joints as i64).into());
            data.insert("min_frames".into(), (s.frame_range.0 as i64).into());
            data.insert("max_frames".into(), (s.frame_range.1 as i64).into());
            data.insert("noise_sigma".into(), s.noise_sigma.into());
        }
        DataSource::MsrAction3d {
            path: p,
            actions,
            exclude,
        } => {
            data.insert("source".into(), "msr_action3d".into());
            data.insert("path".into(), path(p));
            data.insert(
                "actions".into(),
                toml::Value::Array(
                    actions
                        .iter()
                        .map(|&a| toml::Value::Integer(a as i64))
                        .collect(),
                ),
            );
            data.insert(
                "exclude".into(),
                toml::Value::Array(exclude.iter().cloned().map(toml::Value::from).collect()),
            );
        }
        DataSource::Utkinect(p) => {
            data.insert("source".into(), "utkinect".into());
            data.insert("path".into(), path(p));
        }
        DataSource::Florence3d(p) => {
            data.insert("source".into(), "florence3d".into());
            data.insert("path".into(), path(p));
        }
        DataSource::Interchange(p) => {
            data.insert("source".into(), "interchange".into());
            data.insert("path".into(), path(p));
        }
    }
    root.insert("data".into(), data.into());
    let mut split = toml::Table::new();
    match cfg.split.mode {
        SplitMode::RandomHoldout { test_fraction } => {
            split.insert("mode".into(), "holdout".into());
            split.insert("test_fraction".into(), test_fraction.into());
        }
        SplitMode::KFold { k } => {
            split.insert("mode".into(), "kfold".into());
            split.insert("k".into(), (k as i64).into());
        }
    }
    split.insert("stratified".into(), cfg.split.stratified.into());
    split.insert("seed".into(), (cfg.split.seed as i64).into());
    root.insert("split".into(), split.into());
    for (name, c) in [("gg", &cfg.gg), ("som", &cfg.som)] {
        let mut json = serde_json::to_value(c).expect("pipeline configs serialize");
        strip_nulls(&mut json);
        let v: toml::Value =
            serde_json::from_value(json).expect("pipeline configs convert to TOML");
        root.insert(name.into(), v);
    }
    toml::to_string(&root).expect("TOML serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> RunFile {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn defaults_to_synthetic_preset() {
        let c = resolve(RunFile::default(), Overrides::default()).unwrap();
        let p = preset("synthetic", 0).unwrap();
        assert_eq!(c.gg, p.gg);
        assert_eq!(c.split, p.split);
        assert_eq!(c.backend, Backend::Gg);
        assert_eq!(c.output_dir, PathBuf::from(DEFAULT_OUTPUT_DIR));
    }

    #[test]
    fn overrides_win_over_file() {
        let file = parse("seed = 3\nbackend = \"gg\"\n[split]\nstratified = true\n");
        let over = Overrides {
            seed: Some(9),
            backend: Some(Backend::Som),
            no_stratify: true,
            ..Default::default()
        };
        let c = resolve(file, over).unwrap();
        assert_eq!(
            (c.seed, c.backend, c.split.stratified),
            (9, Backend::Som, false)
        );
        assert_eq!(c.gg.seed, 9);
        let DataSource::Synthetic(s) = &c.data else {
            panic!()
        };
        assert_eq!(s.seed, 9);
    }

    #[test]
    fn partial_pipeline_tables_merge() {
        let file =
            parse("[gg]\nlayer1_epochs = 7\n[gg.layer1.gg]\ngamma = 49\n[gg.label]\nepochs = 5\n");
        let c = resolve(file, Overrides::default()).unwrap();
        assert_eq!(c.gg.layer1_epochs, 7);
        assert_eq!(c.gg.label.epochs, 5);
        let gridact::pipeline::LayerConfig::Gg(l1) = &c.gg.layer1 else {
            panic!()
        };
        assert_eq!(l1.gamma, 49);
        assert_eq!(c.gg.layer2, preset("synthetic", 0).unwrap().gg.layer2);
    }

    #[test]
    fn reports_every_problem() {
        let file = parse(
            "threads = 0\n[data]\nn_joints = 17\nmin_frames = 5\n[split]\ntest_fraction = 1.5\n\
             [gg]\nlayer1_epochs = 0\n[som]\nbogus = 1\n",
        );
        let e = resolve(file, Overrides::default()).unwrap_err();
        let text = e.to_string();
        for needle in [
            "threads",
            "n_joints",
            "frame range",
            "[split]",
            "[gg]",
            "bogus",
        ] {
            assert!(text.contains(needle), "{needle} missing from {text}");
        }
        assert_eq!(e.0.len(), 6);
    }

    #[test]
    fn missing_dataset_path_explains_download() {
        let e = resolve(parse("preset = \"msr10\""), Overrides::default()).unwrap_err();
        assert!(e.to_string().contains("MSRAction3D"));
        let over = Overrides {
            data: Some("/nonexistent/utk".into()),
            ..Default::default()
        };
        let e = resolve(parse("preset = \"utkinect\""), over).unwrap_err();
        assert!(e.to_string().contains("/nonexistent/utk does not exist"));
    }

    #[test]
    fn rejects_unknown_keys_and_presets() {
        assert!(toml::from_str::<RunFile>("colour = 1").is_err());
        assert!(toml::from_str::<RunFile>("[data]\nsorce = \"x\"").is_err());
        let e = resolve(parse("preset = \"msr30\""), Overrides::default()).unwrap_err();
        assert!(e.to_string().contains("msr10"));
    }

    #[test]
    fn backend_mismatch_in_table() {
        let file = parse("[gg.layer1]\nsom = { rows = 3, cols = 3 }\n");
        let e = resolve(file, Overrides::default()).unwrap_err();
        assert!(e.to_string().contains("[gg]"), "{e}");
    }

    #[test]
    fn echo_round_trips() {
        let file = parse(
            "seed = 5\n[split]\nmode = \"kfold\"\nk = 4\n[gg]\nlayer2_epochs = 9\n[data]\nn_per_class = 6\n",
        );
        let c = resolve(file, Overrides::default()).unwrap();
        let again = resolve(parse(&echo(&c)), Overrides::default()).unwrap();
        assert_eq!(again, c);
    }
}
