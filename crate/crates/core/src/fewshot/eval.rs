use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::classifiers::Classifier;
use super::episode::{sample_episode, Protocol};
use crate::augment::{gaussian_skew_band, skewness, AugmentConfig, Augmenter};
use crate::error::{Error, Result};
use crate::extractor::DatasetSplit;
use crate::rng::{rng_for, stream};

/// Half-width of the 95% interval: `1.96 · s / √E` with `s` the sample
/// standard deviation (`E - 1` denominator). A single episode gives 0.
pub fn ci95(accuracies: &[f64]) -> f64 {
    let n = accuracies.len();
    if n < 2 {
        return 0.0;
    }
    let mean = accuracies.iter().sum::<f64>() / n as f64;
    let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    1.96 * var.sqrt() / (n as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Config echo, in output order.
    pub header: Vec<(String, String)>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub ci95: f64,
}

impl EvalReport {
    pub fn new(header: Vec<(String, String)>, accuracies: Vec<f64>) -> Result<Self> {
        if accuracies.is_empty() {
            return Err(Error::InvalidArgument("report without episodes".into()));
        }
        if accuracies.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidArgument("accuracy outside [0, 1]".into()));
        }
        let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
        let ci95 = ci95(&accuracies);
        Ok(EvalReport {
            header,
            accuracies,
            mean,
            ci95,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "{k} = {v}");
        }
        for (i, a) in self.accuracies.iter().enumerate() {
            let _ = writeln!(out, "episode {i} acc {a}");
        }
        let _ = writeln!(out, "mean {} ci95 {}", self.mean, self.ci95);
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,accuracy\n");
        for (i, a) in self.accuracies.iter().enumerate() {
            let _ = writeln!(out, "{i},{a}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |n: usize, m: &str| Error::format("eval report", format!("line {n}: {m}"));
        let mut header = vec![];
        let mut acc = vec![];
        let mut summary = None;
        for (n, line) in text.lines().enumerate().map(|(n, l)| (n + 1, l.trim())) {
            if line.is_empty() {
                continue;
            }
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() == 4 && t[0] == "episode" && t[2] == "acc" {
                if t[1].parse::<usize>().ok() != Some(acc.len()) {
                    return Err(bad(n, "episode out of order"));
                }
                acc.push(t[3].parse::<f64>().map_err(|_| bad(n, "bad accuracy"))?);
            } else if t.len() == 4 && t[0] == "mean" && t[2] == "ci95" {
                let m = t[1].parse::<f64>().map_err(|_| bad(n, "bad mean"))?;
                let c = t[3].parse::<f64>().map_err(|_| bad(n, "bad ci95"))?;
                summary = Some((m, c));
            } else if let Some((k, v)) = line.split_once(" = ") {
                header.push((k.trim().to_string(), v.trim().to_string()));
            } else {
                return Err(bad(n, "unrecognized line"));
            }
        }
        let report = EvalReport::new(header, acc)?;
        match summary {
            Some((m, c)) if m == report.mean && c == report.ci95 => Ok(report),
            Some(_) => Err(Error::format("eval report", "summary line disagrees with episodes")),
            None => Err(Error::format("eval report", "missing summary line")),
        }
    }
}

/// Support-set augmentation for evaluation.
#[derive(Clone, Copy, Debug)]
pub struct EvalAugmentation<'a, 'b> {
    pub augmenter: &'a Augmenter<'b>,
    pub config: &'a AugmentConfig,
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub protocol: Protocol,
    pub classifier: Classifier,
    pub l2_normalize: bool,
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    pub workers: usize,
    /// Extra header lines appended after the standard echo.
    pub extra_header: Vec<(String, String)>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            protocol: Protocol::default(),
            classifier: Classifier::default(),
            l2_normalize: false,
            seed: 0,
            workers: 1,
            extra_header: vec![],
        }
    }
}

fn l2_normalized(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter().map(|x| x / n).collect()
    } else {
        v.to_vec()
    }
}

struct EpisodeResult {
    accuracy: f64,
    synthesized: Vec<Vec<f64>>,
}

fn run_episode(
    novel: &DatasetSplit,
    aug: Option<EvalAugmentation<'_, '_>>,
    opts: &EvalOptions,
    index: usize,
) -> Result<EpisodeResult> {
    let p = opts.protocol;
    let mut rng = rng_for(opts.seed, &[stream::EPISODE, index as u64]);
    let ep = sample_episode(novel, p.way, p.shot, p.queries, &mut rng)?;
    let mut train_x: Vec<Vec<f64>> = ep.support.iter().map(|r| r.feature.last().to_vec()).collect();
    let mut train_y: Vec<u32> = ep.support.iter().map(|r| r.class).collect();
    let mut synthesized = vec![];
    if let Some(a) = aug {
        let out = a
            .augmenter
            .augment_support(&ep.support, a.config, opts.seed, index as u64)?;
        let support_ids: BTreeSet<u64> = ep.support.iter().map(|r| r.id).collect();
        for f in out.features {
            if !support_ids.contains(&f.source) {
                return Err(Error::Contract(format!(
                    "synthesized feature from non-support instance {}",
                    f.source
                )));
            }
            train_y.push(f.label);
            synthesized.push(f.vector.clone());
            train_x.push(f.vector);
        }
    }
    let mut queries: Vec<Vec<f64>> = ep.query.iter().map(|r| r.feature.last().to_vec()).collect();
    if opts.l2_normalize {
        train_x = train_x.iter().map(|v| l2_normalized(v)).collect();
        queries = queries.iter().map(|v| l2_normalized(v)).collect();
    }
    let mut crng = rng_for(opts.seed, &[stream::CLASSIFIER, index as u64]);
    let pred = opts.classifier.fit_predict(&train_x, &train_y, &queries, &mut crng)?;
    let correct = pred.iter().zip(&ep.query).filter(|(p, r)| **p == r.class).count();
    Ok(EpisodeResult {
        accuracy: correct as f64 / ep.query.len() as f64,
        synthesized,
    })
}

/// Runs `protocol.episodes` episodes: augment the support set only, train
/// the classifier on original plus synthesized final-layer vectors, and
/// score raw query vectors. Episode `i` draws from streams derived from
/// `(seed, i)`, so any worker count gives the same report.
pub fn evaluate(novel: &DatasetSplit, aug: Option<EvalAugmentation<'_, '_>>, opts: &EvalOptions) -> Result<EvalReport> {
    let p = opts.protocol;
    p.check_feasible(novel)?;
    if let Some(a) = aug {
        a.augmenter.validate(a.config)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results = pool.install(|| {
        (0..p.episodes)
            .into_par_iter()
            .map(|i| run_episode(novel, aug, opts, i))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut header: Vec<(String, String)> = vec![
        ("way".into(), p.way.to_string()),
        ("shot".into(), p.shot.to_string()),
        ("queries".into(), p.queries.to_string()),
        ("episodes".into(), p.episodes.to_string()),
        ("classifier".into(), opts.classifier.name().into()),
    ];
    match aug {
        Some(a) => {
            let methods: Vec<&str> = a.config.methods.iter().map(|m| m.as_str()).collect();
            header.push(("methods".into(), methods.join(",")));
            header.push(("layer_policy".into(), a.config.policy.to_string()));
            if a.augmenter.extractor.is_none() {
                header.push(("feed_through".into(), "off (last layer only)".into()));
            }
        }
        None => header.push(("methods".into(), "none".into())),
    }
    header.push(("l2_normalize".into(), opts.l2_normalize.to_string()));
    header.push(("seed".into(), opts.seed.to_string()));
    if let Some(first) = results.first().filter(|r| r.synthesized.len() >= 3) {
        let s = skewness(&first.synthesized)?;
        let mean_abs = s.iter().map(|v| v.abs()).sum::<f64>() / s.len() as f64;
        header.push(("synth_abs_skew".into(), format!("{mean_abs:.4}")));
        header.push((
            "gaussian_skew_band".into(),
            format!("{:.4}", gaussian_skew_band(first.synthesized.len())),
        ));
    }
    header.extend(opts.extra_header.iter().cloned());
    EvalReport::new(header, results.into_iter().map(|r| r.accuracy).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::{MultiLevelFeature, Record, SplitRole};

    #[test]
    fn ci_hand_computed() {
        // mean 0.6, sample variance 0.01, std 0.1
        let c = ci95(&[0.5, 0.6, 0.7]);
        assert!((c - 1.96 * 0.1 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(ci95(&[0.4]), 0.0);
    }

    #[test]
    fn text_round_trip() {
        let r = EvalReport::new(vec![("way".into(), "5".into())], vec![0.5, 0.25, 1.0]).unwrap();
        let back = EvalReport::parse(&r.to_text()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_csv().starts_with("episode,accuracy\n0,0.5\n"));
        assert!(EvalReport::parse(&r.to_text().replace("episode 1", "episode 7")).is_err());
        assert!(EvalReport::parse(&r.to_text().replace("ci95", "ci")).is_err());
    }

    fn split() -> DatasetSplit {
        let records = (0..6u64)
            .map(|i| Record {
                id: i,
                class: (i % 3) as u32,
                feature: MultiLevelFeature::new(vec![vec![(i % 3) as f64 * 10.0 + i as f64 * 0.01]]).unwrap(),
            })
            .collect();
        DatasetSplit::new(SplitRole::Novel, vec![1], records).unwrap()
    }

    #[test]
    fn one_way_is_perfect_and_worker_count_irrelevant() {
        let opts = EvalOptions {
            protocol: Protocol {
                way: 1,
                shot: 1,
                queries: 1,
                episodes: 4,
            },
            ..Default::default()
        };
        let r = evaluate(&split(), None, &opts).unwrap();
        assert!(r.accuracies.iter().all(|&a| a == 1.0));
        assert_eq!(r.ci95, 0.0);
        let many = EvalOptions {
            protocol: Protocol {
                way: 3,
                shot: 1,
                queries: 1,
                episodes: 20,
            },
            ..Default::default()
        };
        let a = evaluate(&split(), None, &many).unwrap();
        let b = evaluate(
            &split(),
            None,
            &EvalOptions {
                workers: 4,
                ..many.clone()
            },
        )
        .unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a.get("way"), Some("3"));
        assert_eq!(a.get("methods"), Some("none"));
    }
}
