//! The command layer: each `cmd_*` loads what a [`RunConfig`] names, runs
//! one stage and writes its artifact next to a run manifest.
//!
//! A run manifest is a `key = value` file holding the command, a timestamp,
//! a content hash for every input and output, and the full config echo.
//! Hashes follow git's blob scheme with SHA-256: `sha256("blob <len>\0" ‖ bytes)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::augment::{save_augmented, AugmentedSet, Augmenter, Method, SpaceModel};
use crate::config::{ExportKind, RunConfig, TrainMode};
use crate::error::{Error, Result};
use crate::extractor::{
    invert, load_features, save_features, ClassNames, DatasetSplit, ExtractorConfig, InversionInit, SplitRole,
    ToyExtractor,
};
use crate::fewshot::{evaluate, Classifier, EvalAugmentation, EvalOptions, EvalReport};
use crate::rng::{from_seed, rng_for, stream};
use crate::semantic::{
    build_similarity, fallback_sigma, load_word_vectors, save_word_vectors, svd_space, SemanticSpace, SpaceKind,
    Vocabulary, WordVectors,
};
use crate::synth::generate;
use crate::trinet::{load_model, save_model, train, Checkpoint, Mode, Trainee, TriNetModel};

/// What a command wrote, plus a one-line summary for the terminal.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub summary: String,
}

/// Git-style blob hash of `bytes`, hex encoded.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(blob_hash(&bytes))
}

/// `path` with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

/// Manifest location for an artifact.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    sibling(artifact, ".run")
}

fn write_manifest(
    at: &Path,
    command: &str,
    cfg: &RunConfig,
    inputs: &[(&str, PathBuf)],
    outputs: &[PathBuf],
    notes: &[(String, String)],
) -> Result<()> {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut s = format!("# run manifest\ncommand = {command}\ntimestamp = {secs}\n");
    for (name, p) in inputs {
        writeln!(s, "input.{name} = {} {}", hash_file(p)?, p.display()).expect("string write");
    }
    for (i, p) in outputs.iter().enumerate() {
        writeln!(s, "output.{i} = {} {}", hash_file(p)?, p.display()).expect("string write");
    }
    for (k, v) in notes {
        writeln!(s, "note.{k} = {v}").expect("string write");
    }
    s.push_str("# config\n");
    for (k, v) in cfg.to_kv() {
        writeln!(s, "config.{k} = {v}").expect("string write");
    }
    fs::write(at, s).map_err(|e| Error::io(at, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

fn space_path_key(kind: SpaceKind) -> &'static str {
    match kind {
        SpaceKind::Word => "words",
        SpaceKind::Attribute => "attributes",
        SpaceKind::Svd => "svd_vectors",
    }
}

fn checkpoint_key(kind: SpaceKind) -> &'static str {
    match kind {
        SpaceKind::Word => "checkpoint",
        SpaceKind::Attribute => "attribute_checkpoint",
        SpaceKind::Svd => "svd_checkpoint",
    }
}

fn load_space(cfg: &RunConfig, kind: SpaceKind) -> Result<SemanticSpace> {
    load_word_vectors(cfg.paths.require(space_path_key(kind))?)?.into_space(kind)
}

/// Generates the synthetic benchmark into `out` (or `data_dir`).
pub fn cmd_gen_synth(cfg: &RunConfig) -> Result<Outcome> {
    let seed = cfg.require_seed()?;
    cfg.validate(&[])?;
    let dir = cfg
        .paths
        .out
        .clone()
        .or_else(|| cfg.paths.data_dir.clone())
        .ok_or_else(|| Error::Config("gen-synth needs 'out' or 'data_dir'".into()))?;
    let data = generate(&cfg.synth, seed)?;
    data.save(&dir)?;
    use crate::synth::files;
    let written: Vec<PathBuf> = [
        files::BASE,
        files::NOVEL,
        files::CLASSES,
        files::WORDS,
        files::ATTRIBUTES,
        files::VOCAB,
    ]
    .iter()
    .map(|f| dir.join(f))
    .collect();
    write_manifest(&dir.join("run.txt"), "gen-synth", cfg, &[], &written, &[])?;
    Ok(Outcome {
        summary: format!(
            "wrote {} base and {} novel records over {} classes to {}",
            data.base.len(),
            data.novel.len(),
            data.names.len(),
            dir.display()
        ),
        written,
    })
}

/// Trains a TriNet (and, in joint mode, the extractor) on the base split.
pub fn cmd_train(cfg: &RunConfig) -> Result<Outcome> {
    let seed = cfg.require_seed()?;
    let kind = cfg.trinet.space;
    let mut inputs = vec!["base", "classes", space_path_key(kind)];
    if cfg.train_mode == TrainMode::Frozen {
        inputs.push("extractor_checkpoint");
    }
    cfg.validate(&inputs)?;
    let out = match &cfg.paths.out {
        Some(p) => p.clone(),
        None => cfg.paths.require(checkpoint_key(kind))?,
    };
    let base = load_features(cfg.paths.require("base")?, SplitRole::Base)?;
    let names = ClassNames::load(cfg.paths.require("classes")?)?;
    let space = load_space(cfg, kind)?;
    if space.dim() != cfg.trinet.semantic_dim {
        return Err(Error::Config(format!(
            "trinet.semantic_dim is {} but the {kind} space has dimension {}",
            cfg.trinet.semantic_dim,
            space.dim()
        )));
    }
    let mut extractor = match cfg.train_mode {
        TrainMode::Joint => {
            if base.dims.len() != 1 {
                return Err(Error::Config(
                    "train.mode = joint needs a raw (one-level) base split".into(),
                ));
            }
            let ec = ExtractorConfig {
                input_dim: base.dims[0],
                level_dims: cfg.trinet.level_dims.clone(),
                n_classes: base.classes().len(),
            };
            Some(ToyExtractor::new(ec, &mut rng_for(seed, &[stream::INIT_EXTRACTOR]))?)
        }
        TrainMode::Frozen => {
            let ck = load_model(cfg.paths.require("extractor_checkpoint")?)?;
            Some(
                ck.extractor
                    .ok_or_else(|| Error::Config("extractor_checkpoint holds no extractor".into()))?,
            )
        }
        TrainMode::Features => None,
    };
    let mut trinet = TriNetModel::new(cfg.trinet.clone(), &mut rng_for(seed, &[stream::INIT_TRINET]))?;
    let mut rng = rng_for(seed, &[stream::TRAIN]);
    let report = match extractor.as_mut() {
        Some(ex) => {
            let update = cfg.train_mode == TrainMode::Joint;
            train(
                Trainee::Joint { extractor: ex, update },
                &mut trinet,
                &base,
                &names,
                &space,
                &mut rng,
            )?
        }
        None => train(Trainee::FeaturesOnly, &mut trinet, &base, &names, &space, &mut rng)?,
    };
    ensure_parent(&out)?;
    save_model(&out, &Checkpoint { trinet, extractor })?;
    let log = sibling(&out, ".log");
    fs::write(&log, report.to_log()).map_err(|e| Error::io(&log, e))?;
    let written = vec![out.clone(), log];
    let ins: Vec<(&str, PathBuf)> = inputs
        .iter()
        .map(|k| Ok((*k, cfg.paths.require(k)?)))
        .collect::<Result<_>>()?;
    let summary = match (report.epochs.first(), report.epochs.last()) {
        (Some(a), Some(b)) => format!(
            "trained {} epochs, joint loss {:.4} -> {:.4}; wrote {}",
            b.epoch,
            a.joint,
            b.joint,
            out.display()
        ),
        _ => format!("no epochs run; wrote {}", out.display()),
    };
    write_manifest(&manifest_path(&out), "train", cfg, &ins, &written, &[])?;
    Ok(Outcome { written, summary })
}

/// Builds the SVD semantic space from class cosine similarities.
pub fn cmd_svd(cfg: &RunConfig) -> Result<Outcome> {
    let src = space_path_key(cfg.svd.source);
    let mut inputs = vec!["classes", src];
    if cfg.svd.base_only {
        inputs.push("base");
    }
    cfg.validate(&inputs)?;
    let out = match &cfg.paths.out {
        Some(p) => p.clone(),
        None => cfg.paths.require("svd_vectors")?,
    };
    let names = ClassNames::load(cfg.paths.require("classes")?)?;
    let space = load_space(cfg, cfg.svd.source)?;
    let ids: Vec<u32> = if cfg.svd.base_only {
        load_features(cfg.paths.require("base")?, SplitRole::Base)?
            .classes()
            .into_iter()
            .collect()
    } else {
        names.ids().collect()
    };
    let labels = ids.iter().map(|&c| names.get(c)).collect::<Result<Vec<_>>>()?;
    let (svd_sp, svd) = svd_space(&build_similarity(&space, &labels)?)?;
    ensure_parent(&out)?;
    save_word_vectors(&out, &WordVectors::from(&svd_sp))?;
    let sv: Vec<String> = svd.sigma.iter().map(|s| format!("{s:.6}")).collect();
    let ins: Vec<(&str, PathBuf)> = inputs
        .iter()
        .map(|k| Ok((*k, cfg.paths.require(k)?)))
        .collect::<Result<_>>()?;
    write_manifest(
        &manifest_path(&out),
        "svd",
        cfg,
        &ins,
        std::slice::from_ref(&out),
        &[("singular_values".into(), sv.join(","))],
    )?;
    Ok(Outcome {
        summary: format!(
            "{} classes, {} sweeps; wrote {}",
            labels.len(),
            svd.sweeps,
            out.display()
        ),
        written: vec![out],
    })
}

/// Everything augmentation and evaluation borrow, loaded once.
pub struct Models {
    pub word: Option<Checkpoint>,
    pub attribute: Option<Checkpoint>,
    pub svd: Option<Checkpoint>,
    pub vocab: Option<Vocabulary>,
    pub names: Option<ClassNames>,
    spaces: BTreeMap<&'static str, SemanticSpace>,
    /// Files read, for the manifest.
    pub inputs: Vec<(&'static str, PathBuf)>,
}

impl Models {
    /// Loads the checkpoints, spaces and vocabulary the configured
    /// methods need. The word checkpoint is also loaded whenever it is
    /// configured, since it usually carries the extractor.
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let methods: Vec<Method> = cfg.augment.as_ref().map(|a| a.methods.clone()).unwrap_or_default();
        let needs = |kinds: &[Method]| methods.iter().any(|m| kinds.contains(m));
        let mut m = Models {
            word: None,
            attribute: None,
            svd: None,
            vocab: None,
            names: None,
            spaces: BTreeMap::new(),
            inputs: vec![],
        };
        let semantic = needs(&[Method::Sg, Method::Sn, Method::Ag, Method::Svdg]);
        if semantic {
            let p = cfg.paths.require("classes")?;
            m.names = Some(ClassNames::load(&p)?);
            m.inputs.push(("classes", p));
        }
        for (kind, wanted) in [
            (SpaceKind::Word, needs(&[Method::Sg, Method::Sn])),
            (SpaceKind::Attribute, needs(&[Method::Ag])),
            (SpaceKind::Svd, needs(&[Method::Svdg])),
        ] {
            let key = checkpoint_key(kind);
            let configured = cfg.paths.resolve(key);
            let ck = match (wanted, configured) {
                (true, None) => return Err(Error::Config(format!("{kind} augmentation needs '{key}'"))),
                (_, Some(p)) if wanted || kind == SpaceKind::Word => {
                    let ck = load_model(&p)?;
                    m.inputs.push((key, p));
                    Some(ck)
                }
                _ => None,
            };
            if wanted {
                let sk = space_path_key(kind);
                let p = cfg.paths.require(sk)?;
                m.spaces.insert(sk, load_word_vectors(&p)?.into_space(kind)?);
                m.inputs.push((sk, p));
            }
            match kind {
                SpaceKind::Word => m.word = ck,
                SpaceKind::Attribute => m.attribute = ck,
                SpaceKind::Svd => m.svd = ck,
            }
        }
        if needs(&[Method::Sn]) {
            let p = cfg.paths.require("vocab")?;
            m.vocab = Some(load_word_vectors(&p)?.into_vocabulary()?);
            m.inputs.push(("vocab", p));
        }
        m.extractor()?;
        Ok(m)
    }

    /// The shared extractor; every checkpoint that carries one must agree.
    pub fn extractor(&self) -> Result<Option<&ToyExtractor>> {
        let mut found: Option<&ToyExtractor> = None;
        for ck in [&self.word, &self.attribute, &self.svd].into_iter().flatten() {
            if let Some(ex) = &ck.extractor {
                match found {
                    Some(f) if f != ex => {
                        return Err(Error::Config("checkpoints carry different extractors".into()));
                    }
                    _ => found = Some(ex),
                }
            }
        }
        Ok(found)
    }

    fn space_model<'a>(&'a self, ck: &'a Option<Checkpoint>, kind: SpaceKind) -> Result<Option<SpaceModel<'a>>> {
        let (Some(ck), Some(space), Some(names)) = (ck, self.spaces.get(space_path_key(kind)), &self.names) else {
            return Ok(None);
        };
        let known: Vec<(u32, &str)> = names
            .ids()
            .filter_map(|c| names.get(c).ok().filter(|l| space.get(l).is_some()).map(|l| (c, l)))
            .collect();
        let labels: Vec<&str> = known.iter().map(|(_, l)| *l).collect();
        let class_vectors = known
            .iter()
            .map(|(c, l)| Ok((*c, space.require(l)?.to_vec())))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Some(SpaceModel {
            trinet: &ck.trinet,
            fallback_sigma: fallback_sigma(space, &labels).ok(),
            class_vectors: Some(class_vectors),
        }))
    }

    pub fn augmenter(&self) -> Result<Augmenter<'_>> {
        let class_tokens = match &self.names {
            Some(n) => n.ids().map(|c| Ok((c, n.get(c)?.to_string()))).collect::<Result<_>>()?,
            None => BTreeMap::new(),
        };
        Ok(Augmenter {
            extractor: self.extractor()?,
            word: self.space_model(&self.word, SpaceKind::Word)?,
            attribute: self.space_model(&self.attribute, SpaceKind::Attribute)?,
            svd: self.space_model(&self.svd, SpaceKind::Svd)?,
            vocab: self.vocab.as_ref(),
            class_tokens,
        })
    }

    /// Runs raw splits through the extractor; feature splits pass as-is.
    pub fn features(&self, split: DatasetSplit) -> Result<DatasetSplit> {
        match self.extractor()? {
            Some(ex) if split.dims == [ex.config.input_dim] && split.dims != ex.config.level_dims => {
                ex.extract_split(&split)
            }
            Some(ex) if split.dims != ex.config.level_dims => Err(Error::dim(
                "split levels",
                format!("[{}] or {:?}", ex.config.input_dim, ex.config.level_dims),
                format!("{:?}", split.dims),
            )),
            _ => Ok(split),
        }
    }
}

/// Augments every record of the support split and writes the synthesized
/// final-layer vectors plus their provenance listing.
pub fn cmd_augment(cfg: &RunConfig) -> Result<Outcome> {
    let seed = cfg.require_seed()?;
    cfg.validate(&["support"])?;
    let acfg = cfg
        .augment
        .as_ref()
        .ok_or_else(|| Error::Config("augmentation is disabled (augment.methods = none)".into()))?;
    let out = cfg.paths.require("out")?;
    let models = Models::load(cfg)?;
    let support_path = cfg.paths.require("support")?;
    let support = models.features(load_features(&support_path, SplitRole::Support)?)?;
    let aug = models.augmenter()?;
    aug.validate(acfg)?;
    let produced = aug.augment_support(&support.records, acfg, seed, 0)?;
    let dim = *support.dims.last().expect("non-empty dims");
    let mut set = AugmentedSet::new(dim, produced.features)?;
    set.notes.push(format!(
        "seed {seed} methods {} policy {}",
        crate::kv::join(&acfg.methods),
        acfg.policy
    ));
    ensure_parent(&out)?;
    let listing = sibling(&out, ".manifest");
    save_augmented(&out, &listing, &set)?;
    let mut ins = models.inputs.clone();
    ins.push(("support", support_path));
    let written = vec![out.clone(), listing];
    write_manifest(&manifest_path(&out), "augment", cfg, &ins, &written, &[])?;
    Ok(Outcome {
        summary: format!(
            "{} support records -> {} synthesized vectors; wrote {}",
            support.len(),
            set.features.len(),
            out.display()
        ),
        written,
    })
}

fn with_strength(c: &Classifier, g: f64) -> Option<Classifier> {
    match c {
        Classifier::Svm(s) => Some(Classifier::Svm(crate::fewshot::SvmConfig { lambda: g, ..*s })),
        Classifier::Lr(l) => Some(Classifier::Lr(crate::fewshot::LrConfig { penalty: g, ..*l })),
        Classifier::Knn { .. } => None,
    }
}

/// Runs the episodic evaluation and writes the report and its CSV.
///
/// With a validation split configured, the SVM λ or LR penalty is picked
/// from `eval.grid` by mean validation accuracy first.
pub fn cmd_eval(cfg: &RunConfig) -> Result<(Outcome, EvalReport)> {
    let seed = cfg.require_seed()?;
    cfg.validate(&["novel"])?;
    let out = cfg.paths.require("out")?;
    let models = Models::load(cfg)?;
    let novel_path = cfg.paths.require("novel")?;
    let novel = models.features(load_features(&novel_path, SplitRole::Novel)?)?;
    let aug = models.augmenter()?;
    let eval_aug = cfg.augment.as_ref().map(|c| EvalAugmentation {
        augmenter: &aug,
        config: c,
    });
    let mut opts = EvalOptions {
        protocol: cfg.eval.protocol,
        classifier: cfg.eval.classifier,
        l2_normalize: cfg.eval.l2_normalize,
        seed,
        workers: cfg.workers,
        extra_header: vec![],
    };
    let mut ins = models.inputs.clone();
    ins.push(("novel", novel_path));
    if let Some(vp) = &cfg.paths.validation {
        if !vp.exists() {
            return Err(Error::MissingInput(vp.clone()));
        }
        let val = models.features(load_features(vp, SplitRole::Novel)?)?;
        let mut vopts = opts.clone();
        vopts.protocol.episodes = cfg.eval.validation_episodes;
        let mut best: Option<(f64, f64, Classifier)> = None;
        for &g in &cfg.eval.grid {
            let Some(c) = with_strength(&opts.classifier, g) else {
                break;
            };
            vopts.classifier = c;
            let r = evaluate(&val, eval_aug, &vopts)?;
            if best.as_ref().is_none_or(|b| r.mean > b.0) {
                best = Some((r.mean, g, c));
            }
        }
        if let Some((m, g, c)) = best {
            opts.classifier = c;
            opts.extra_header.push(("selected_strength".into(), g.to_string()));
            opts.extra_header.push(("validation_mean".into(), format!("{m}")));
        }
        ins.push(("validation", vp.clone()));
    }
    let report = evaluate(&novel, eval_aug, &opts)?;
    ensure_parent(&out)?;
    fs::write(&out, report.to_text()).map_err(|e| Error::io(&out, e))?;
    let csv = sibling(&out, ".csv");
    fs::write(&csv, report.to_csv()).map_err(|e| Error::io(&csv, e))?;
    let written = vec![out.clone(), csv];
    write_manifest(&manifest_path(&out), "eval", cfg, &ins, &written, &[])?;
    let outcome = Outcome {
        summary: format!(
            "mean accuracy {:.4} ± {:.4} over {} episodes",
            report.mean,
            report.ci95,
            report.accuracies.len()
        ),
        written,
    };
    Ok((outcome, report))
}

/// Recovers an input whose level-`l` features match those of one record.
pub fn cmd_invert(cfg: &RunConfig) -> Result<Outcome> {
    let seed = cfg.require_seed()?;
    cfg.validate(&["checkpoint", "input"])?;
    let out = cfg.paths.require("out")?;
    let ck_path = cfg.paths.require("checkpoint")?;
    let ex = load_model(&ck_path)?
        .extractor
        .ok_or_else(|| Error::Config("checkpoint holds no extractor to invert".into()))?;
    let input_path = cfg.paths.require("input")?;
    let split = load_features(&input_path, SplitRole::Novel)?;
    if split.dims != [ex.config.input_dim] {
        return Err(Error::dim(
            "invert input",
            ex.config.input_dim,
            format!("{:?}", split.dims),
        ));
    }
    let rec = split
        .records
        .get(cfg.invert.index)
        .ok_or_else(|| Error::Config(format!("invert.index {} outside 0..{}", cfg.invert.index, split.len())))?;
    let level = cfg.invert.level.unwrap_or(ex.num_levels());
    let target = ex.extract(rec.feature.level(1))?;
    if level == 0 || level > ex.num_levels() {
        return Err(Error::Config(format!(
            "invert.level {level} outside 1..={}",
            ex.num_levels()
        )));
    }
    let mut icfg = cfg.invert.inversion.clone();
    if let InversionInit::Given(_) = icfg.init {
        return Err(Error::Config("given inversion starts are library-only".into()));
    }
    icfg.init = InversionInit::Random { scale: 1.0 };
    let inv = invert(
        &ex,
        target.level(level),
        level,
        &icfg,
        &mut rng_for(seed, &[stream::INVERT]),
    )?;
    let mut text = format!("# record {} class {} level {}\n", rec.id, rec.class, level);
    for (name, v) in [("recovered", &inv.input), ("original", &rec.feature.level(1).to_vec())] {
        text.push_str(name);
        for x in v {
            write!(text, " {x}").expect("string write");
        }
        text.push('\n');
    }
    ensure_parent(&out)?;
    fs::write(&out, text).map_err(|e| Error::io(&out, e))?;
    let trace = sibling(&out, ".trace");
    let tt: String = inv
        .trace
        .iter()
        .enumerate()
        .map(|(i, o)| format!("step {i} objective {o}\n"))
        .collect();
    fs::write(&trace, tt).map_err(|e| Error::io(&trace, e))?;
    let written = vec![out.clone(), trace];
    write_manifest(
        &manifest_path(&out),
        "invert",
        cfg,
        &[("checkpoint", ck_path), ("input", input_path)],
        &written,
        &[],
    )?;
    Ok(Outcome {
        summary: format!(
            "objective {:.6} -> {:.6} after {} steps",
            inv.initial_objective(),
            inv.objective,
            inv.trace.len() - 1
        ),
        written,
    })
}

/// Writes multi-level features or TriNet encodings of the input split.
pub fn cmd_export(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate(&["checkpoint", "input"])?;
    let out = cfg.paths.require("out")?;
    let ck_path = cfg.paths.require("checkpoint")?;
    let ck = load_model(&ck_path)?;
    let input_path = cfg.paths.require("input")?;
    let split = load_features(&input_path, SplitRole::Novel)?;
    let split = match &ck.extractor {
        Some(ex) if split.dims == [ex.config.input_dim] && split.dims != ex.config.level_dims => {
            ex.extract_split(&split)?
        }
        _ => split,
    };
    ensure_parent(&out)?;
    match cfg.export {
        ExportKind::Features => save_features(&out, &split)?,
        ExportKind::Semantic => {
            let mut rng = from_seed(0);
            let mut text = String::from("# id class vector\n");
            for r in &split.records {
                let v = ck.trinet.encode(&r.feature, Mode::Infer, &mut rng)?;
                write!(text, "{} {}", r.id, r.class).expect("string write");
                for x in v {
                    write!(text, " {x}").expect("string write");
                }
                text.push('\n');
            }
            fs::write(&out, text).map_err(|e| Error::io(&out, e))?;
        }
    }
    write_manifest(
        &manifest_path(&out),
        "export",
        cfg,
        &[("checkpoint", ck_path), ("input", input_path)],
        std::slice::from_ref(&out),
        &[],
    )?;
    Ok(Outcome {
        summary: format!("exported {} records to {}", split.len(), out.display()),
        written: vec![out],
    })
}
