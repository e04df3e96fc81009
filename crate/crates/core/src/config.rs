//! Run configuration: one flat `key = value` namespace covering paths,
//! model settings, augmentation and the evaluation protocol.
//!
//! Values are applied in order: built-in defaults, then the config file,
//! then command-line overrides. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use crate::augment::{AugmentConfig, Centering, LayerPolicy, Method};
use crate::error::{Error, Result};
use crate::extractor::InversionConfig;
use crate::fewshot::{Classifier, LrConfig, Protocol, SvmConfig};
use crate::kv;
use crate::semantic::{Metric, SpaceKind};
use crate::synth::{files, SynthConfig};
use crate::trinet::TriNetConfig;

/// How `train` treats the extractor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainMode {
    /// Raw inputs; extractor and TriNet learn together.
    Joint,
    /// Raw inputs; the extractor comes from `extractor_checkpoint` and stays fixed.
    Frozen,
    /// The base split already holds multi-level features.
    Features,
}

impl TrainMode {
    fn as_str(self) -> &'static str {
        match self {
            TrainMode::Joint => "joint",
            TrainMode::Frozen => "frozen",
            TrainMode::Features => "features",
        }
    }
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(TrainMode::Joint),
            "frozen" => Ok(TrainMode::Frozen),
            "features" => Ok(TrainMode::Features),
            _ => Err(Error::Config(format!("bad train.mode '{s}'"))),
        }
    }
}

/// TriNet width and schedule presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Dropout 0.5, lr 1e-3 halved every 10 epochs, batch 64.
    Paper,
    /// [`TriNetConfig::small_data`].
    SmallData,
}

impl Preset {
    fn as_str(self) -> &'static str {
        match self {
            Preset::Paper => "paper",
            Preset::SmallData => "small_data",
        }
    }

    fn build(self, level_dims: Vec<usize>, semantic_dim: usize) -> TriNetConfig {
        match self {
            Preset::Paper => TriNetConfig::new(level_dims, semantic_dim),
            Preset::SmallData => TriNetConfig::small_data(level_dims, semantic_dim),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "small_data" => Ok(Preset::SmallData),
            _ => Err(Error::Config(format!("bad trinet.preset '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportKind {
    /// Multi-level features of every record.
    Features,
    /// TriNet encodings, one text line per record.
    Semantic,
}

impl std::str::FromStr for ExportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "features" => Ok(ExportKind::Features),
            "semantic" => Ok(ExportKind::Semantic),
            _ => Err(Error::Config(format!("bad export.what '{s}'"))),
        }
    }
}

/// Every file a run may read or write.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Paths {
    /// Default directory for the generated dataset files.
    pub data_dir: Option<PathBuf>,
    pub base: Option<PathBuf>,
    pub novel: Option<PathBuf>,
    pub classes: Option<PathBuf>,
    pub words: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub svd_vectors: Option<PathBuf>,
    /// Word-space model; also where `train` writes.
    pub checkpoint: Option<PathBuf>,
    pub attribute_checkpoint: Option<PathBuf>,
    pub svd_checkpoint: Option<PathBuf>,
    /// Extractor source for `train.mode = frozen`.
    pub extractor_checkpoint: Option<PathBuf>,
    /// Split augmented by `augment`; defaults to the novel split.
    pub support: Option<PathBuf>,
    /// Held-out classes for classifier selection in `eval`.
    pub validation: Option<PathBuf>,
    /// Split read by `invert` and `export`; defaults to the novel split.
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

const PATH_KEYS: [&str; 16] = [
    "data_dir",
    "base",
    "novel",
    "classes",
    "words",
    "attributes",
    "vocab",
    "svd_vectors",
    "checkpoint",
    "attribute_checkpoint",
    "svd_checkpoint",
    "extractor_checkpoint",
    "support",
    "validation",
    "input",
    "out",
];

impl Paths {
    fn slot(&mut self, key: &str) -> Option<&mut Option<PathBuf>> {
        Some(match key {
            "data_dir" => &mut self.data_dir,
            "base" => &mut self.base,
            "novel" => &mut self.novel,
            "classes" => &mut self.classes,
            "words" => &mut self.words,
            "attributes" => &mut self.attributes,
            "vocab" => &mut self.vocab,
            "svd_vectors" => &mut self.svd_vectors,
            "checkpoint" => &mut self.checkpoint,
            "attribute_checkpoint" => &mut self.attribute_checkpoint,
            "svd_checkpoint" => &mut self.svd_checkpoint,
            "extractor_checkpoint" => &mut self.extractor_checkpoint,
            "support" => &mut self.support,
            "validation" => &mut self.validation,
            "input" => &mut self.input,
            "out" => &mut self.out,
            _ => return None,
        })
    }

    fn get(&self, key: &str) -> Option<&PathBuf> {
        let p = match key {
            "data_dir" => &self.data_dir,
            "base" => &self.base,
            "novel" => &self.novel,
            "classes" => &self.classes,
            "words" => &self.words,
            "attributes" => &self.attributes,
            "vocab" => &self.vocab,
            "svd_vectors" => &self.svd_vectors,
            "checkpoint" => &self.checkpoint,
            "attribute_checkpoint" => &self.attribute_checkpoint,
            "svd_checkpoint" => &self.svd_checkpoint,
            "extractor_checkpoint" => &self.extractor_checkpoint,
            "support" => &self.support,
            "validation" => &self.validation,
            "input" => &self.input,
            "out" => &self.out,
            _ => return None,
        };
        p.as_ref()
    }

    /// An explicit path, else the generated file inside `data_dir`.
    pub fn resolve(&self, key: &str) -> Option<PathBuf> {
        if let Some(p) = self.get(key) {
            return Some(p.clone());
        }
        let file = match key {
            "base" => files::BASE,
            "novel" | "support" | "input" => files::NOVEL,
            "classes" => files::CLASSES,
            "words" => files::WORDS,
            "attributes" => files::ATTRIBUTES,
            "vocab" => files::VOCAB,
            _ => return None,
        };
        if matches!(key, "support" | "input") {
            if let Some(n) = &self.novel {
                return Some(n.clone());
            }
        }
        self.data_dir.as_ref().map(|d| d.join(file))
    }

    /// Like [`Paths::resolve`] but a missing setting is a config error.
    pub fn require(&self, key: &str) -> Result<PathBuf> {
        self.resolve(key)
            .ok_or_else(|| Error::Config(format!("no path configured for '{key}'")))
    }
}

/// Settings for `eval`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSettings {
    pub protocol: Protocol,
    pub classifier: Classifier,
    pub l2_normalize: bool,
    /// Candidate SVM λ or LR penalties tried on the validation split.
    pub grid: Vec<f64>,
    pub validation_episodes: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            protocol: Protocol::default(),
            classifier: Classifier::default(),
            l2_normalize: false,
            grid: vec![1e-3, 1e-2, 1e-1, 1.0],
            validation_episodes: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvdSettings {
    /// Space whose class cosines form the matrix.
    pub source: SpaceKind,
    /// Leave novel classes out of the matrix.
    pub base_only: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvertSettings {
    /// Target level; `None` means the last one.
    pub level: Option<usize>,
    /// Record of the input split whose features are the target.
    pub index: usize,
    pub inversion: InversionConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub workers: usize,
    pub paths: Paths,
    pub synth: SynthConfig,
    pub preset: Preset,
    pub trinet: TriNetConfig,
    pub train_mode: TrainMode,
    /// `None` disables augmentation.
    pub augment: Option<AugmentConfig>,
    /// Settings kept while augmentation is off, so counts survive a toggle.
    pub augment_settings: AugmentConfig,
    pub eval: EvalSettings,
    pub svd: SvdSettings,
    pub invert: InvertSettings,
    pub export: ExportKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        let aug = AugmentConfig::default();
        RunConfig {
            seed: None,
            workers: 1,
            paths: Paths::default(),
            synth: SynthConfig::default(),
            preset: Preset::Paper,
            trinet: TriNetConfig::new(vec![16, 24, 32, 48], 6),
            train_mode: TrainMode::Joint,
            augment: Some(aug.clone()),
            augment_settings: aug,
            eval: EvalSettings::default(),
            svd: SvdSettings {
                source: SpaceKind::Word,
                base_only: false,
            },
            invert: InvertSettings {
                level: None,
                index: 0,
                inversion: InversionConfig::default(),
            },
            export: ExportKind::Features,
        }
    }
}

fn centering_str(c: Centering) -> &'static str {
    match c {
        Centering::Encoded => "encoded",
        Centering::GroundTruth => "ground_truth",
    }
}

fn metric_str(m: Metric) -> &'static str {
    match m {
        Metric::Cosine => "cosine",
        Metric::Euclidean => "euclidean",
    }
}

impl RunConfig {
    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply(&kv::parse(text, context)?)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text, &path.display().to_string())
    }

    /// Applies pairs in order on top of the current values. A preset or
    /// a change of level dims or semantic dim rebuilds the TriNet settings
    /// first; explicit `trinet.*` keys in the same batch still win.
    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        let mut trinet_pairs = vec![];
        let mut rebuild = false;
        for (k, v) in pairs {
            if let Some(t) = k.strip_prefix("trinet.") {
                match t {
                    "preset" => {
                        self.preset = v.parse()?;
                        rebuild = true;
                    }
                    "level_dims" | "semantic_dim" => {
                        if !self.trinet.set(t, v)? {
                            unreachable!("owned trinet key");
                        }
                        rebuild = true;
                    }
                    _ => trinet_pairs.push((t.to_string(), v.clone())),
                }
                continue;
            }
            self.set(k, v)?;
        }
        if rebuild {
            let kind = self.trinet.space;
            self.trinet = self
                .preset
                .build(self.trinet.level_dims.clone(), self.trinet.semantic_dim);
            self.trinet.space = kind;
        }
        for (k, v) in &trinet_pairs {
            if !self.trinet.set(k, v)? {
                return Err(Error::Config(format!("unknown key 'trinet.{k}'")));
            }
        }
        Ok(())
    }

    fn set(&mut self, k: &str, v: &str) -> Result<()> {
        if let Some(slot) = self.paths.slot(k) {
            *slot = if v.is_empty() { None } else { Some(PathBuf::from(v)) };
            return Ok(());
        }
        if k.starts_with("synth.") {
            if !self.synth.set(k, v)? {
                return Err(Error::Config(format!("unknown key '{k}'")));
            }
            return Ok(());
        }
        let a = &mut self.augment_settings;
        match k {
            "seed" => self.seed = if v.is_empty() { None } else { Some(kv::parse_num(k, v)?) },
            "workers" => self.workers = kv::parse_num(k, v)?,
            "train.mode" => self.train_mode = v.parse()?,
            "augment.methods" => {
                if v == "none" || v.is_empty() {
                    self.augment = None;
                    return Ok(());
                }
                a.methods = v
                    .split(',')
                    .map(|m| m.trim().parse())
                    .collect::<Result<Vec<Method>>>()?;
            }
            "augment.gaussian_count" => a.gaussian_count = kv::parse_num(k, v)?,
            "augment.neighbors" => a.neighbors = kv::parse_num(k, v)?,
            "augment.noise_count" => a.noise_count = kv::parse_num(k, v)?,
            "augment.layer_policy" => a.policy = v.parse::<LayerPolicy>()?,
            "augment.centering" => {
                a.centering = match v {
                    "encoded" => Centering::Encoded,
                    "ground_truth" => Centering::GroundTruth,
                    _ => return Err(Error::Config(format!("bad augment.centering '{v}'"))),
                }
            }
            "augment.sn_metric" => a.sn_metric = v.parse()?,
            "augment.exclude_support_names" => a.exclude_support_names = kv::parse_bool(k, v)?,
            "eval.way" => self.eval.protocol.way = kv::parse_num(k, v)?,
            "eval.shot" => self.eval.protocol.shot = kv::parse_num(k, v)?,
            "eval.queries" => self.eval.protocol.queries = kv::parse_num(k, v)?,
            "eval.episodes" => self.eval.protocol.episodes = kv::parse_num(k, v)?,
            "eval.classifier" => {
                let new: Classifier = v.parse()?;
                if new.name() != self.eval.classifier.name() {
                    self.eval.classifier = new;
                }
            }
            "eval.knn_k" => match &mut self.eval.classifier {
                Classifier::Knn { k: kk } => *kk = kv::parse_num(k, v)?,
                _ => return Err(Error::Config("eval.knn_k needs eval.classifier = knn first".into())),
            },
            "eval.svm_lambda" | "eval.svm_iterations" => match &mut self.eval.classifier {
                Classifier::Svm(c) if k == "eval.svm_lambda" => c.lambda = kv::parse_num(k, v)?,
                Classifier::Svm(c) => c.iterations = kv::parse_num(k, v)?,
                _ => return Err(Error::Config(format!("{k} needs eval.classifier = svm first"))),
            },
            "eval.lr_penalty" | "eval.lr_max_iter" => match &mut self.eval.classifier {
                Classifier::Lr(c) if k == "eval.lr_penalty" => c.penalty = kv::parse_num(k, v)?,
                Classifier::Lr(c) => c.max_iter = kv::parse_num(k, v)?,
                _ => return Err(Error::Config(format!("{k} needs eval.classifier = lr first"))),
            },
            "eval.l2_normalize" => self.eval.l2_normalize = kv::parse_bool(k, v)?,
            "eval.grid" => self.eval.grid = kv::parse_list(k, v)?,
            "eval.validation_episodes" => self.eval.validation_episodes = kv::parse_num(k, v)?,
            "svd.source" => self.svd.source = v.parse()?,
            "svd.base_only" => self.svd.base_only = kv::parse_bool(k, v)?,
            "invert.level" => self.invert.level = if v == "last" { None } else { Some(kv::parse_num(k, v)?) },
            "invert.index" => self.invert.index = kv::parse_num(k, v)?,
            "invert.lambda_tv" => self.invert.inversion.lambda_tv = kv::parse_num(k, v)?,
            "invert.steps" => self.invert.inversion.steps = kv::parse_num(k, v)?,
            "invert.lr" => self.invert.inversion.lr = kv::parse_num(k, v)?,
            "export.what" => self.export = v.parse()?,
            _ => return Err(Error::Config(format!("unknown key '{k}'"))),
        }
        if k.starts_with("augment.") {
            if let Some(on) = &mut self.augment {
                *on = self.augment_settings.clone();
            }
        }
        Ok(())
    }

    /// Every setting, in an order that [`RunConfig::apply`] reproduces.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut v: Vec<(String, String)> = vec![];
        let mut put = |k: &str, val: String| v.push((k.to_string(), val));
        put("seed", self.seed.map(|s| s.to_string()).unwrap_or_default());
        put("workers", self.workers.to_string());
        for k in PATH_KEYS {
            let p = self.paths.get(k).map(|p| p.display().to_string()).unwrap_or_default();
            put(k, p);
        }
        for (k, val) in self.synth.to_kv() {
            put(&k, val);
        }
        put("trinet.preset", self.preset.as_str().to_string());
        for (k, val) in self.trinet.to_kv() {
            put(&format!("trinet.{k}"), val);
        }
        put("train.mode", self.train_mode.as_str().to_string());
        let a = &self.augment_settings;
        put("augment.methods", kv::join(&a.methods));
        put("augment.gaussian_count", a.gaussian_count.to_string());
        put("augment.neighbors", a.neighbors.to_string());
        put("augment.noise_count", a.noise_count.to_string());
        put("augment.layer_policy", a.policy.to_string());
        put("augment.centering", centering_str(a.centering).to_string());
        put("augment.sn_metric", metric_str(a.sn_metric).to_string());
        put("augment.exclude_support_names", a.exclude_support_names.to_string());
        if self.augment.is_none() {
            put("augment.methods", "none".to_string());
        }
        let p = self.eval.protocol;
        put("eval.way", p.way.to_string());
        put("eval.shot", p.shot.to_string());
        put("eval.queries", p.queries.to_string());
        put("eval.episodes", p.episodes.to_string());
        put("eval.classifier", self.eval.classifier.name().to_string());
        match &self.eval.classifier {
            Classifier::Knn { k } => put("eval.knn_k", k.to_string()),
            Classifier::Svm(SvmConfig { lambda, iterations }) => {
                put("eval.svm_lambda", lambda.to_string());
                put("eval.svm_iterations", iterations.to_string());
            }
            Classifier::Lr(LrConfig { penalty, max_iter, .. }) => {
                put("eval.lr_penalty", penalty.to_string());
                put("eval.lr_max_iter", max_iter.to_string());
            }
        }
        put("eval.l2_normalize", self.eval.l2_normalize.to_string());
        put("eval.grid", kv::join(&self.eval.grid));
        put("eval.validation_episodes", self.eval.validation_episodes.to_string());
        put("svd.source", self.svd.source.to_string());
        put("svd.base_only", self.svd.base_only.to_string());
        put(
            "invert.level",
            self.invert
                .level
                .map(|l| l.to_string())
                .unwrap_or_else(|| "last".into()),
        );
        put("invert.index", self.invert.index.to_string());
        put("invert.lambda_tv", self.invert.inversion.lambda_tv.to_string());
        put("invert.steps", self.invert.inversion.steps.to_string());
        put("invert.lr", self.invert.inversion.lr.to_string());
        put(
            "export.what",
            match self.export {
                ExportKind::Features => "features",
                ExportKind::Semantic => "semantic",
            }
            .to_string(),
        );
        v
    }

    pub fn to_text(&self) -> String {
        kv::render(&self.to_kv())
    }

    /// The seed, which every randomized command needs explicitly.
    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required (set 'seed' or pass --seed)".into()))
    }

    /// Value-level checks plus existence of the named input paths.
    pub fn validate(&self, inputs: &[&str]) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.trinet.validate()?;
        self.eval.protocol.validate()?;
        if let Some(a) = &self.augment {
            if a.methods.is_empty() {
                return Err(Error::Config("augmentation enabled with an empty method set".into()));
            }
        }
        if self.eval.grid.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::Config("eval.grid values must be positive".into()));
        }
        for key in inputs {
            let p = self.paths.require(key)?;
            if !p.exists() {
                return Err(Error::MissingInput(p));
            }
        }
        Ok(())
    }
}
