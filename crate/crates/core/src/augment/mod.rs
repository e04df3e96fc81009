//! Semantic-space augmentation: draw new semantic points around an encoded
//! support instance (Gaussian or vocabulary neighbors), decode them to
//! multi-level features and push every decoded level through the rest of
//! the extractor to obtain extra final-layer training vectors.

mod io;

pub use io::{load_augmented, save_augmented, AugmentedSet, ManifestEntry};

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extractor::{MultiLevelFeature, Record, ToyExtractor};
use crate::rng::{from_seed, rng_for, stream, Rng};
use crate::semantic::{nearest_vocab_by, sigma_for, Metric, SpaceKind, Vocabulary};
use crate::trinet::{Mode, TriNetModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Gaussian around the encoding in the word space.
    Sg,
    /// Nearest vocabulary vectors to the encoding.
    Sn,
    /// Gaussian in an attribute space.
    Ag,
    /// Gaussian in the SVD class-similarity subspace.
    Svdg,
    /// Gaussian jitter of the final-layer feature itself (no semantics).
    Noise,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sg => "SG",
            Method::Sn => "SN",
            Method::Ag => "AG",
            Method::Svdg => "SVDG",
            Method::Noise => "NOISE",
        }
    }

    /// The space a TriNet must target to serve this method.
    pub fn space(self) -> Option<SpaceKind> {
        match self {
            Method::Sg | Method::Sn => Some(SpaceKind::Word),
            Method::Ag => Some(SpaceKind::Attribute),
            Method::Svdg => Some(SpaceKind::Svd),
            Method::Noise => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "").as_str() {
            "SG" => Ok(Method::Sg),
            "SN" => Ok(Method::Sn),
            "AG" => Ok(Method::Ag),
            "SVDG" => Ok(Method::Svdg),
            "NOISE" => Ok(Method::Noise),
            _ => Err(Error::Config(format!("unknown augmentation method '{s}'"))),
        }
    }
}

/// Which decoded levels become training vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerPolicy {
    /// One level (1-based).
    Single(usize),
    /// Every level ("M-L").
    Multi,
}

impl LayerPolicy {
    /// Levels the policy draws from. Without executable extractor blocks
    /// only the last level is reachable.
    pub fn levels(self, num_levels: usize, feed_through: bool) -> Result<Vec<usize>> {
        match self {
            LayerPolicy::Multi if feed_through => Ok((1..=num_levels).collect()),
            LayerPolicy::Multi => Ok(vec![num_levels]),
            LayerPolicy::Single(l) if l == num_levels => Ok(vec![l]),
            LayerPolicy::Single(l) if l >= 1 && l < num_levels && feed_through => Ok(vec![l]),
            LayerPolicy::Single(l) => Err(Error::InvalidArgument(format!(
                "layer {l} is unavailable (levels 1..={num_levels}, feed-through {})",
                if feed_through { "on" } else { "off" }
            ))),
        }
    }
}

impl fmt::Display for LayerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerPolicy::Single(l) => write!(f, "{l}"),
            LayerPolicy::Multi => f.write_str("multi"),
        }
    }
}

impl FromStr for LayerPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "multi" | "m-l" | "ml" => Ok(LayerPolicy::Multi),
            t => t
                .parse::<usize>()
                .ok()
                .filter(|&l| l > 0)
                .map(LayerPolicy::Single)
                .ok_or_else(|| Error::Config(format!("bad layer policy '{s}'"))),
        }
    }
}

/// Where Gaussian sampling is centered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Centering {
    /// The instance's encoding.
    #[default]
    Encoded,
    /// The class's own semantic vector (ablation).
    GroundTruth,
}

/// One final-layer training vector produced by augmentation.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthFeature {
    pub source: u64,
    pub label: u32,
    pub method: Method,
    /// Decoded level it came from; the last level for noise samples.
    pub level: usize,
    pub vector: Vec<f64>,
}

/// A decoded semantic point and the final-layer vectors of each level.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedSample {
    pub semantic_point: Vec<f64>,
    pub method: Method,
    pub source_instance: u64,
    pub label: u32,
    pub decoded_levels: MultiLevelFeature,
    /// `(level, final-layer vector)` for every reachable level.
    pub final_features: Vec<(usize, Vec<f64>)>,
}

impl AugmentedSample {
    pub fn new(
        source: &Record,
        label: u32,
        method: Method,
        semantic_point: Vec<f64>,
        decoded_levels: MultiLevelFeature,
        final_features: Vec<(usize, Vec<f64>)>,
    ) -> Result<Self> {
        if label != source.class {
            return Err(Error::Contract(format!(
                "augmented sample labelled {label} from instance {} of class {}",
                source.id, source.class
            )));
        }
        Ok(AugmentedSample {
            semantic_point,
            method,
            source_instance: source.id,
            label,
            decoded_levels,
            final_features,
        })
    }

    /// The vectors `policy` keeps.
    pub fn contributions(&self, policy: LayerPolicy) -> Vec<SynthFeature> {
        self.final_features
            .iter()
            .filter(|(l, _)| match policy {
                LayerPolicy::Multi => true,
                LayerPolicy::Single(p) => *l == p,
            })
            .map(|(l, v)| SynthFeature {
                source: self.source_instance,
                label: self.label,
                method: self.method,
                level: *l,
                vector: v.clone(),
            })
            .collect()
    }
}

/// `count` draws from `N(center, σ²I)`.
pub fn gaussian_points(center: &[f64], sigma: f64, count: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((0..count)
        .map(|_| center.iter().map(|c| c + normal.sample(rng)).collect())
        .collect())
}

/// Final-layer Gaussian jitter: `count` draws from `N(f_L, σ_b²I)`.
pub fn gaussian_noise_baseline(f_last: &[f64], count: usize, sigma_b: f64, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    gaussian_points(f_last, sigma_b, count, rng)
}

/// Per-support-set information for the σ rule: the encodings of every
/// support instance and a fallback for single-class sets.
#[derive(Clone, Debug)]
pub struct SupportContext {
    pub points: Vec<(u32, Vec<f64>)>,
    pub fallback_sigma: Option<f64>,
}

impl SupportContext {
    pub fn sigma(&self, center: &[f64], own: u32) -> Result<f64> {
        let others: Vec<(u32, &[f64])> = self.points.iter().map(|(c, v)| (*c, v.as_slice())).collect();
        match sigma_for(center, &own, &others) {
            Err(Error::Infeasible(msg)) => self.fallback_sigma.ok_or(Error::Infeasible(msg)),
            r => r,
        }
    }
}

fn encode_infer(trinet: &TriNetModel, f: &MultiLevelFeature) -> Result<Vec<f64>> {
    trinet.encode(f, Mode::Infer, &mut from_seed(0))
}

fn check_space(trinet: &TriNetModel, method: Method) -> Result<()> {
    match method.space() {
        Some(kind) if kind == trinet.config.space => Ok(()),
        _ => Err(Error::Contract(format!(
            "{method} needs a model trained against the {} space, got {}",
            method.space().map_or("feature", SpaceKind::as_str),
            trinet.config.space
        ))),
    }
}

fn gaussian_method(
    method: Method,
    trinet: &TriNetModel,
    f: &MultiLevelFeature,
    own: u32,
    ctx: &SupportContext,
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    check_space(trinet, method)?;
    let center = encode_infer(trinet, f)?;
    let sigma = ctx.sigma(&center, own)?;
    gaussian_points(&center, sigma, count, rng)
}

/// Semantic Gaussian: `count` draws around `encode(f)` with σ from the
/// support context.
pub fn augment_sg(
    trinet: &TriNetModel,
    f: &MultiLevelFeature,
    own: u32,
    ctx: &SupportContext,
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    gaussian_method(Method::Sg, trinet, f, own, ctx, count, rng)
}

/// [`augment_sg`] with a model trained on an attribute space.
pub fn augment_ag(
    trinet: &TriNetModel,
    f: &MultiLevelFeature,
    own: u32,
    ctx: &SupportContext,
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    gaussian_method(Method::Ag, trinet, f, own, ctx, count, rng)
}

/// [`augment_sg`] with a model trained on the SVD space.
pub fn augment_svdg(
    trinet: &TriNetModel,
    f: &MultiLevelFeature,
    own: u32,
    ctx: &SupportContext,
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    gaussian_method(Method::Svdg, trinet, f, own, ctx, count, rng)
}

/// Semantic neighborhood: the `k` vocabulary vectors nearest `encode(f)`.
pub fn augment_sn(
    trinet: &TriNetModel,
    f: &MultiLevelFeature,
    vocab: &Vocabulary,
    k: usize,
    exclude: &HashSet<String>,
    metric: Metric,
) -> Result<Vec<Vec<f64>>> {
    check_space(trinet, Method::Sn)?;
    if vocab.dim() != trinet.semantic_dim() {
        return Err(Error::dim("augment_sn vocabulary", trinet.semantic_dim(), vocab.dim()));
    }
    let center = encode_infer(trinet, f)?;
    Ok(nearest_vocab_by(&center, vocab, k, exclude, metric)?
        .into_iter()
        .map(|n| n.vector.to_vec())
        .collect())
}

/// Decodes each point and maps every reachable level to the final layer.
///
/// Without an extractor only the decoded last level is produced.
pub fn synthesize(
    points: Vec<Vec<f64>>,
    method: Method,
    source: &Record,
    trinet: &TriNetModel,
    extractor: Option<&ToyExtractor>,
) -> Result<Vec<AugmentedSample>> {
    let levels = trinet.num_levels();
    if let Some(ex) = extractor {
        if ex.level_dims() != trinet.config.level_dims {
            return Err(Error::dim(
                "synthesize",
                format!("{:?}", ex.level_dims()),
                format!("{:?}", trinet.config.level_dims),
            ));
        }
    }
    let reachable = LayerPolicy::Multi.levels(levels, extractor.is_some())?;
    points
        .into_iter()
        .map(|p| {
            let decoded = trinet.decode(&p, Mode::Infer, &mut from_seed(0))?;
            let finals = reachable
                .iter()
                .map(|&l| {
                    let v = match extractor {
                        Some(ex) if l < levels => ex.feed_through(l, decoded.level(l))?,
                        _ => decoded.level(l).to_vec(),
                    };
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Numeric(format!("non-finite synthesized feature from level {l}")));
                    }
                    Ok((l, v))
                })
                .collect::<Result<Vec<_>>>()?;
            AugmentedSample::new(source, source.class, method, p, decoded, finals)
        })
        .collect()
}

/// Counts and switches for one augmentation run.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentConfig {
    pub methods: Vec<Method>,
    /// Gaussian samples per instance (SG, AG, SVD-G).
    pub gaussian_count: usize,
    /// Neighbors per instance (SN).
    pub neighbors: usize,
    pub noise_count: usize,
    pub policy: LayerPolicy,
    pub centering: Centering,
    pub sn_metric: Metric,
    /// Leave the support classes' own names out of SN neighbor sets.
    pub exclude_support_names: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            methods: vec![Method::Sg, Method::Sn],
            gaussian_count: 4,
            neighbors: 4,
            noise_count: 16,
            policy: LayerPolicy::Multi,
            centering: Centering::Encoded,
            sn_metric: Metric::Cosine,
            exclude_support_names: false,
        }
    }
}

/// A TriNet plus what the Gaussian methods need in its space.
#[derive(Clone, Debug)]
pub struct SpaceModel<'a> {
    pub trinet: &'a TriNetModel,
    /// σ when a support set has a single class.
    pub fallback_sigma: Option<f64>,
    /// Class vectors by id, needed for ground-truth centering.
    pub class_vectors: Option<BTreeMap<u32, Vec<f64>>>,
}

/// Frozen models shared by every augmentation call.
#[derive(Clone, Debug, Default)]
pub struct Augmenter<'a> {
    /// Enables feed-through of non-final levels.
    pub extractor: Option<&'a ToyExtractor>,
    pub word: Option<SpaceModel<'a>>,
    pub attribute: Option<SpaceModel<'a>>,
    pub svd: Option<SpaceModel<'a>>,
    pub vocab: Option<&'a Vocabulary>,
    /// Token of each class id, for SN exclusions.
    pub class_tokens: BTreeMap<u32, String>,
}

/// Everything augmentation produced for one support set.
#[derive(Clone, Debug, Default)]
pub struct AugmentOutput {
    pub samples: Vec<AugmentedSample>,
    pub features: Vec<SynthFeature>,
}

impl<'a> Augmenter<'a> {
    fn model(&self, method: Method) -> Result<&SpaceModel<'a>> {
        let m = match method {
            Method::Sg | Method::Sn => self.word.as_ref(),
            Method::Ag => self.attribute.as_ref(),
            Method::Svdg => self.svd.as_ref(),
            Method::Noise => None,
        };
        m.ok_or_else(|| Error::Config(format!("{method} requested but no model for its space was loaded")))
    }

    /// Checks that every requested method has what it needs.
    pub fn validate(&self, cfg: &AugmentConfig) -> Result<()> {
        if cfg.methods.is_empty() {
            return Err(Error::Config("augmentation enabled with no methods".into()));
        }
        for &m in &cfg.methods {
            if m == Method::Noise {
                continue;
            }
            let sm = self.model(m)?;
            check_space(sm.trinet, m)?;
            if m == Method::Sn && self.vocab.is_none() {
                return Err(Error::Config("SN requested without a vocabulary".into()));
            }
            if cfg.centering == Centering::GroundTruth && m != Method::Sn && sm.class_vectors.is_none() {
                return Err(Error::Config(format!("{m} ground-truth centering needs class vectors")));
            }
            let levels = sm.trinet.num_levels();
            cfg.policy.levels(levels, self.extractor.is_some())?;
        }
        Ok(())
    }

    /// Augments every record of a support set. Each instance draws from
    /// its own stream `(seed, salt, instance id, method)`, so results do
    /// not depend on order or on parallel execution.
    pub fn augment_support(
        &self,
        support: &[Record],
        cfg: &AugmentConfig,
        seed: u64,
        salt: u64,
    ) -> Result<AugmentOutput> {
        self.validate(cfg)?;
        let mut contexts: BTreeMap<Method, SupportContext> = BTreeMap::new();
        for &m in &cfg.methods {
            if matches!(m, Method::Sn) || contexts.contains_key(&m) {
                continue;
            }
            let ctx = match m {
                Method::Noise => SupportContext {
                    points: support.iter().map(|r| (r.class, r.feature.last().to_vec())).collect(),
                    fallback_sigma: None,
                },
                _ => {
                    let sm = self.model(m)?;
                    SupportContext {
                        points: support
                            .iter()
                            .map(|r| Ok((r.class, encode_infer(sm.trinet, &r.feature)?)))
                            .collect::<Result<_>>()?,
                        fallback_sigma: sm.fallback_sigma,
                    }
                }
            };
            contexts.insert(m, ctx);
        }
        let exclude: HashSet<String> = if cfg.exclude_support_names {
            support
                .iter()
                .filter_map(|r| self.class_tokens.get(&r.class).cloned())
                .collect()
        } else {
            HashSet::new()
        };
        let per_instance = support
            .par_iter()
            .map(|r| {
                let mut out = AugmentOutput::default();
                for &m in &cfg.methods {
                    let mut rng = rng_for(seed, &[stream::AUGMENT, salt, r.id, m as u64]);
                    if m == Method::Noise {
                        let ctx = &contexts[&m];
                        let sigma = ctx.sigma(r.feature.last(), r.class)?;
                        let l = r.feature.num_levels();
                        for v in gaussian_noise_baseline(r.feature.last(), cfg.noise_count, sigma, &mut rng)? {
                            out.features.push(SynthFeature {
                                source: r.id,
                                label: r.class,
                                method: m,
                                level: l,
                                vector: v,
                            });
                        }
                        continue;
                    }
                    let sm = self.model(m)?;
                    let points = if m == Method::Sn {
                        let vocab = self.vocab.expect("validated");
                        augment_sn(sm.trinet, &r.feature, vocab, cfg.neighbors, &exclude, cfg.sn_metric)?
                    } else {
                        let ctx = &contexts[&m];
                        let center = match cfg.centering {
                            Centering::Encoded => encode_infer(sm.trinet, &r.feature)?,
                            Centering::GroundTruth => sm
                                .class_vectors
                                .as_ref()
                                .and_then(|cv| cv.get(&r.class))
                                .cloned()
                                .ok_or_else(|| Error::Contract(format!("class {} has no semantic vector", r.class)))?,
                        };
                        let sigma = ctx.sigma(&center, r.class)?;
                        gaussian_points(&center, sigma, cfg.gaussian_count, &mut rng)?
                    };
                    let samples = synthesize(points, m, r, sm.trinet, self.extractor)?;
                    for s in &samples {
                        out.features.extend(s.contributions(cfg.policy));
                    }
                    out.samples.extend(samples);
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut all = AugmentOutput::default();
        for o in per_instance {
            all.samples.extend(o.samples);
            all.features.extend(o.features);
        }
        Ok(all)
    }
}

/// Per-coordinate sample skewness of a set of vectors.
pub fn skewness(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = vectors.len();
    if n < 3 {
        return Err(Error::InvalidArgument("skewness needs at least 3 vectors".into()));
    }
    let d = vectors[0].len();
    (0..d)
        .map(|j| {
            let mean = vectors.iter().map(|v| v[j]).sum::<f64>() / n as f64;
            let m2 = vectors.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / n as f64;
            let m3 = vectors.iter().map(|v| (v[j] - mean).powi(3)).sum::<f64>() / n as f64;
            Ok(if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 })
        })
        .collect()
}

/// Two-standard-error band of the skewness of `n` Gaussian draws.
pub fn gaussian_skew_band(n: usize) -> f64 {
    2.0 * (6.0 / n as f64).sqrt()
}
