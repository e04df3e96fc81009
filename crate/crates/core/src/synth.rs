//! Synthetic few-shot data: every class has a semantic vector `u_z`, and
//! its inputs are drawn around `φ(u_z)` for one fixed smooth map `φ`, so
//! semantic structure carries over to input space for base and novel
//! classes alike.

use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::extractor::{save_features, ClassNames, DatasetSplit, MultiLevelFeature, Record, SplitRole};
use crate::kv;
use crate::rng::{rng_for, stream, Rng};
use crate::semantic::{euclidean, save_word_vectors, WordVectors};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub base_classes: usize,
    pub novel_classes: usize,
    pub per_class: usize,
    pub input_dim: usize,
    pub semantic_dim: usize,
    pub attribute_dim: usize,
    /// Width of the hidden layer of `φ`.
    pub map_hidden: usize,
    /// Weight of the nonlinear part of `φ` relative to the linear part.
    pub nonlinearity: f64,
    /// Shared low-rank nuisance directions in input space.
    pub nuisance_rank: usize,
    pub nuisance_scale: f64,
    pub noise: f64,
    /// Vocabulary words near each class vector.
    pub synonyms: usize,
    /// Relative spread of synonyms around their class vector.
    pub synonym_spread: f64,
    /// Unrelated vocabulary words.
    pub distractors: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            base_classes: 8,
            novel_classes: 5,
            per_class: 40,
            input_dim: 12,
            semantic_dim: 6,
            attribute_dim: 10,
            map_hidden: 16,
            nonlinearity: 0.5,
            nuisance_rank: 3,
            nuisance_scale: 0.3,
            noise: 0.2,
            synonyms: 3,
            synonym_spread: 0.15,
            distractors: 200,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("base_classes", self.base_classes),
            ("per_class", self.per_class),
            ("input_dim", self.input_dim),
            ("semantic_dim", self.semantic_dim),
            ("attribute_dim", self.attribute_dim),
            ("map_hidden", self.map_hidden),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Infeasible(format!("synthetic data: {k} must be positive")));
        }
        for (k, v) in [
            ("nonlinearity", self.nonlinearity),
            ("nuisance_scale", self.nuisance_scale),
            ("noise", self.noise),
            ("synonym_spread", self.synonym_spread),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Infeasible(format!("synthetic data: {k} = {v}")));
            }
        }
        Ok(())
    }

    pub fn to_kv(&self) -> Vec<(String, String)> {
        [
            ("synth.base_classes", self.base_classes.to_string()),
            ("synth.novel_classes", self.novel_classes.to_string()),
            ("synth.per_class", self.per_class.to_string()),
            ("synth.input_dim", self.input_dim.to_string()),
            ("synth.semantic_dim", self.semantic_dim.to_string()),
            ("synth.attribute_dim", self.attribute_dim.to_string()),
            ("synth.map_hidden", self.map_hidden.to_string()),
            ("synth.nonlinearity", self.nonlinearity.to_string()),
            ("synth.nuisance_rank", self.nuisance_rank.to_string()),
            ("synth.nuisance_scale", self.nuisance_scale.to_string()),
            ("synth.noise", self.noise.to_string()),
            ("synth.synonyms", self.synonyms.to_string()),
            ("synth.synonym_spread", self.synonym_spread.to_string()),
            ("synth.distractors", self.distractors.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Applies one `synth.*` key; `Ok(false)` if the key is not ours.
    pub fn set(&mut self, key: &str, v: &str) -> Result<bool> {
        match key {
            "synth.base_classes" => self.base_classes = kv::parse_num(key, v)?,
            "synth.novel_classes" => self.novel_classes = kv::parse_num(key, v)?,
            "synth.per_class" => self.per_class = kv::parse_num(key, v)?,
            "synth.input_dim" => self.input_dim = kv::parse_num(key, v)?,
            "synth.semantic_dim" => self.semantic_dim = kv::parse_num(key, v)?,
            "synth.attribute_dim" => self.attribute_dim = kv::parse_num(key, v)?,
            "synth.map_hidden" => self.map_hidden = kv::parse_num(key, v)?,
            "synth.nonlinearity" => self.nonlinearity = kv::parse_num(key, v)?,
            "synth.nuisance_rank" => self.nuisance_rank = kv::parse_num(key, v)?,
            "synth.nuisance_scale" => self.nuisance_scale = kv::parse_num(key, v)?,
            "synth.noise" => self.noise = kv::parse_num(key, v)?,
            "synth.synonyms" => self.synonyms = kv::parse_num(key, v)?,
            "synth.synonym_spread" => self.synonym_spread = kv::parse_num(key, v)?,
            "synth.distractors" => self.distractors = kv::parse_num(key, v)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Generated splits, names and vector files. Base classes take ids
/// `0..base_classes`, novel classes the ids after them.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    /// Raw inputs, one level.
    pub base: DatasetSplit,
    pub novel: DatasetSplit,
    pub names: ClassNames,
    /// Class word vectors for every class.
    pub words: WordVectors,
    pub attributes: WordVectors,
    /// Class words, their synonyms and distractors.
    pub vocab: WordVectors,
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| scale * normal(rng)).collect::<Vec<f64>>())
        .collect()
}

fn mat_vec(x: &[f64], m: &[Vec<f64>]) -> Vec<f64> {
    let cols = m[0].len();
    (0..cols)
        .map(|j| x.iter().zip(m).map(|(a, row)| a * row[j]).sum())
        .collect()
}

pub fn class_label(id: usize) -> String {
    format!("class{id:03}")
}

pub fn generate(cfg: &SynthConfig, seed: u64) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = rng_for(seed, &[stream::SYNTH]);
    let s = cfg.semantic_dim;
    let total = cfg.base_classes + cfg.novel_classes;
    let u = gaussian(total, s, 1.0, &mut rng);
    for i in 0..total {
        for j in 0..i {
            if euclidean(&u[i], &u[j]) == 0.0 {
                return Err(Error::Numeric("coincident class vectors".into()));
            }
        }
    }
    let w1 = gaussian(s, cfg.map_hidden, (1.0 / s as f64).sqrt(), &mut rng);
    let w2 = gaussian(
        cfg.map_hidden,
        cfg.input_dim,
        cfg.nonlinearity * (1.0 / cfg.map_hidden as f64).sqrt(),
        &mut rng,
    );
    let lin = gaussian(s, cfg.input_dim, (1.0 / s as f64).sqrt(), &mut rng);
    let nuisance = gaussian(cfg.nuisance_rank, cfg.input_dim, cfg.nuisance_scale, &mut rng);
    let att_map = gaussian(s, cfg.attribute_dim, (2.0 / s as f64).sqrt(), &mut rng);

    let phi = |x: &[f64]| -> Vec<f64> {
        let h: Vec<f64> = mat_vec(x, &w1).into_iter().map(f64::tanh).collect();
        mat_vec(&h, &w2)
            .into_iter()
            .zip(mat_vec(x, &lin))
            .map(|(a, b)| a + b)
            .collect()
    };
    let means: Vec<Vec<f64>> = u.iter().map(|x| phi(x)).collect();

    let mut base = vec![];
    let mut novel = vec![];
    let mut next_id = 0u64;
    for (z, mean) in means.iter().enumerate() {
        for _ in 0..cfg.per_class {
            let mut x = mean.clone();
            for dir in &nuisance {
                let c = normal(&mut rng);
                x.iter_mut().zip(dir).for_each(|(xi, di)| *xi += c * di);
            }
            for xi in &mut x {
                *xi += cfg.noise * normal(&mut rng);
            }
            let rec = Record {
                id: next_id,
                class: z as u32,
                feature: MultiLevelFeature::new(vec![x])?,
            };
            next_id += 1;
            if z < cfg.base_classes {
                base.push(rec);
            } else {
                novel.push(rec);
            }
        }
    }

    let labels: Vec<String> = (0..total).map(class_label).collect();
    let names = ClassNames::new(labels.iter().enumerate().map(|(i, l)| (i as u32, l.clone())))?;
    let words = WordVectors {
        dim: s,
        entries: labels.iter().cloned().zip(u.iter().cloned()).collect(),
    };
    let attributes = WordVectors {
        dim: cfg.attribute_dim,
        entries: labels
            .iter()
            .zip(&u)
            .map(|(l, x)| {
                (
                    l.clone(),
                    mat_vec(x, &att_map)
                        .into_iter()
                        .map(|a| 1.0 / (1.0 + (-a).exp()))
                        .collect(),
                )
            })
            .collect(),
    };
    let mut vocab = words.entries.clone();
    for (l, x) in labels.iter().zip(&u) {
        let r = crate::semantic::norm(x) * cfg.synonym_spread / (s as f64).sqrt();
        for k in 0..cfg.synonyms {
            let v = x.iter().map(|xi| xi + r * normal(&mut rng)).collect();
            vocab.push((format!("{l}_syn{k}"), v));
        }
    }
    for k in 0..cfg.distractors {
        let mut v: Vec<f64> = (0..s).map(|_| normal(&mut rng)).collect();
        if crate::semantic::norm(&v) == 0.0 {
            v[0] = 1.0;
        }
        vocab.push((format!("word{k:05}"), v));
    }
    Ok(SynthData {
        base: DatasetSplit::new(SplitRole::Base, vec![cfg.input_dim], base)?,
        novel: DatasetSplit::new(SplitRole::Novel, vec![cfg.input_dim], novel)?,
        names,
        words,
        attributes,
        vocab: WordVectors { dim: s, entries: vocab },
    })
}

/// File names written by [`SynthData::save`].
pub mod files {
    pub const BASE: &str = "base.mlfa";
    pub const NOVEL: &str = "novel.mlfa";
    pub const CLASSES: &str = "classes.txt";
    pub const WORDS: &str = "words.txt";
    pub const ATTRIBUTES: &str = "attributes.txt";
    pub const VOCAB: &str = "vocab.txt";
}

impl SynthData {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_features(dir.join(files::BASE), &self.base)?;
        save_features(dir.join(files::NOVEL), &self.novel)?;
        self.names.save(dir.join(files::CLASSES))?;
        save_word_vectors(dir.join(files::WORDS), &self.words)?;
        save_word_vectors(dir.join(files::ATTRIBUTES), &self.attributes)?;
        save_word_vectors(dir.join(files::VOCAB), &self.vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_ids() {
        let cfg = SynthConfig::default();
        let d = generate(&cfg, 3).unwrap();
        assert_eq!(d.base.len(), 8 * 40);
        assert_eq!(d.novel.len(), 5 * 40);
        assert_eq!(d.base.classes().len(), 8);
        assert_eq!(d.novel.classes().len(), 5);
        assert!(d.base.classes().is_disjoint(&d.novel.classes()));
        assert!(d.base.ids().is_disjoint(&d.novel.ids()));
        assert_eq!(d.words.entries.len(), 13);
        assert_eq!(d.vocab.entries.len(), 13 * 4 + 200);
        for (i, (_, a)) in d.words.entries.iter().enumerate() {
            for (_, b) in &d.words.entries[..i] {
                assert!(euclidean(a, b) > 0.0);
            }
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg, 9).unwrap();
        assert_eq!(a, generate(&cfg, 9).unwrap());
        assert_ne!(a.base, generate(&cfg, 10).unwrap().base);
    }

    #[test]
    fn zero_classes_infeasible() {
        let cfg = SynthConfig {
            base_classes: 0,
            ..Default::default()
        };
        assert!(matches!(generate(&cfg, 0), Err(Error::Infeasible(_))));
    }
}
