//! KNN, one-vs-rest Pegasos SVM and multinomial logistic regression over
//! final-layer vectors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::semantic::euclidean;

fn check_training(features: &[Vec<f64>], labels: &[u32]) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::dim("classifier labels", features.len(), labels.len()));
    }
    let d = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != d) {
        return Err(Error::dim("classifier features", d, f.len()));
    }
    Ok(d)
}

/// Majority vote among the `k` nearest support points (Euclidean; equal
/// distances keep support order). Tied votes go to the class with the
/// smallest summed distance, then to the lowest class id.
pub fn knn_classify(features: &[Vec<f64>], labels: &[u32], query: &[f64], k: usize) -> Result<u32> {
    let d = check_training(features, labels)?;
    if query.len() != d {
        return Err(Error::dim("knn query", d, query.len()));
    }
    if k == 0 || k > features.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} with {} support points",
            features.len()
        )));
    }
    let mut dist: Vec<(f64, usize)> = features
        .iter()
        .enumerate()
        .map(|(i, f)| (euclidean(f, query), i))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut tally: BTreeMap<u32, (usize, f64)> = BTreeMap::new();
    for &(dd, i) in &dist[..k] {
        let e = tally.entry(labels[i]).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += dd;
    }
    let best = tally
        .iter()
        .min_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.total_cmp(&b.1 .1)).then(a.0.cmp(b.0)))
        .expect("k >= 1");
    Ok(*best.0)
}

/// Per-class weight rows over `[x, 1]`; prediction is the argmax score,
/// ties to the lowest class id.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    /// Sorted.
    pub classes: Vec<u32>,
    pub weights: Vec<Vec<f64>>,
}

impl LinearModel {
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.weights[0].len() - 1;
        if x.len() != d {
            return Err(Error::dim("linear model input", d, x.len()));
        }
        Ok(self.weights.iter().map(|w| dot_bias(w, x)).collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<u32> {
        let s = self.scores(x)?;
        let mut best = 0;
        for (i, &v) in s.iter().enumerate() {
            if v > s[best] {
                best = i;
            }
        }
        Ok(self.classes[best])
    }
}

fn dot_bias(w: &[f64], x: &[f64]) -> f64 {
    w[..x.len()].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[x.len()]
}

fn class_index(labels: &[u32]) -> Result<(Vec<u32>, Vec<usize>)> {
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidArgument(
            "a linear classifier needs at least two classes".into(),
        ));
    }
    let idx = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("present"))
        .collect();
    Ok((classes, idx))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmConfig {
    pub lambda: f64,
    /// Total steps, independent of the training-set size.
    pub iterations: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-2,
            iterations: 5000,
        }
    }
}

/// One-vs-rest hinge loss, Pegasos steps `η_t = 1/(λt)` with the
/// `1/√λ` ball projection. Each step uses one uniformly drawn example,
/// shared by every class.
pub fn svm_train(features: &[Vec<f64>], labels: &[u32], cfg: &SvmConfig, rng: &mut Rng) -> Result<LinearModel> {
    let d = check_training(features, labels)?;
    if !(cfg.lambda > 0.0) || cfg.iterations == 0 {
        return Err(Error::InvalidArgument(format!("bad SVM config {cfg:?}")));
    }
    let (classes, idx) = class_index(labels)?;
    let n = features.len();
    let mut weights = vec![vec![0.0; d + 1]; classes.len()];
    let mut avg = vec![vec![0.0; d + 1]; classes.len()];
    let burn_in = cfg.iterations / 2;
    let radius = 1.0 / cfg.lambda.sqrt();
    for t in 1..=cfg.iterations {
        let i = rng.random_range(0..n);
        let eta = 1.0 / (cfg.lambda * t as f64);
        let x = &features[i];
        for (c, w) in weights.iter_mut().enumerate() {
            let y = if idx[i] == c { 1.0 } else { -1.0 };
            let margin = y * dot_bias(w, x);
            let shrink = 1.0 - eta * cfg.lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(x) {
                    *wj += eta * y * xj;
                }
                w[d] += eta * y;
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                w.iter_mut().for_each(|v| *v *= radius / norm);
            }
        }
        if t > burn_in {
            for (a, w) in avg.iter_mut().zip(&weights) {
                a.iter_mut().zip(w).for_each(|(a, w)| *a += w);
            }
        }
    }
    let kept = (cfg.iterations - burn_in) as f64;
    let weights: Vec<Vec<f64>> = avg
        .into_iter()
        .map(|a| a.into_iter().map(|v| v / kept).collect())
        .collect();
    if weights.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("SVM weights diverged".into()));
    }
    Ok(LinearModel { classes, weights })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrConfig {
    /// L2 weight on the non-bias weights.
    pub penalty: f64,
    pub max_iter: usize,
    /// Stop when the gradient max-norm falls below this.
    pub tol: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            penalty: 1e-3,
            max_iter: 1000,
            tol: 1e-5,
        }
    }
}

/// Mean softmax cross-entropy plus `penalty/2 · ‖W‖²` (bias excluded) and
/// its gradient. `w` is row-major `[classes, d+1]`; `y` holds class
/// indices.
pub fn lr_objective(w: &[f64], features: &[Vec<f64>], y: &[usize], classes: usize, penalty: f64) -> (f64, Vec<f64>) {
    let d = features[0].len();
    let n = features.len() as f64;
    let mut grad = vec![0.0; w.len()];
    let mut loss = 0.0;
    let mut z = vec![0.0; classes];
    for (x, &yi) in features.iter().zip(y) {
        for c in 0..classes {
            z[c] = dot_bias(&w[c * (d + 1)..(c + 1) * (d + 1)], x);
        }
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - m).exp()).sum();
        loss += m + sum.ln() - z[yi];
        for c in 0..classes {
            let p = (z[c] - m).exp() / sum - if c == yi { 1.0 } else { 0.0 };
            let row = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
            for (g, xj) in row.iter_mut().zip(x) {
                *g += p * xj / n;
            }
            row[d] += p / n;
        }
    }
    loss /= n;
    for c in 0..classes {
        for j in 0..d {
            let v = w[c * (d + 1) + j];
            loss += 0.5 * penalty * v * v;
            grad[c * (d + 1) + j] += penalty * v;
        }
    }
    (loss, grad)
}

/// Full-batch gradient descent with step `1/L`, `L` a bound on the
/// curvature of the objective.
pub fn lr_train(features: &[Vec<f64>], labels: &[u32], cfg: &LrConfig) -> Result<LinearModel> {
    let d = check_training(features, labels)?;
    if !(cfg.penalty >= 0.0) || cfg.max_iter == 0 {
        return Err(Error::InvalidArgument(format!("bad LR config {cfg:?}")));
    }
    let (classes, idx) = class_index(labels)?;
    let k = classes.len();
    let max_sq = features
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>() + 1.0)
        .fold(0.0, f64::max);
    let step = 1.0 / (0.5 * max_sq + cfg.penalty);
    let mut w = vec![0.0; k * (d + 1)];
    for _ in 0..cfg.max_iter {
        let (_, g) = lr_objective(&w, features, &idx, k, cfg.penalty);
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < cfg.tol {
            break;
        }
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= step * gi;
        }
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("logistic regression diverged".into()));
    }
    Ok(LinearModel {
        classes,
        weights: w.chunks(d + 1).map(<[f64]>::to_vec).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Classifier {
    Knn { k: usize },
    Svm(SvmConfig),
    Lr(LrConfig),
}

impl Default for Classifier {
    fn default() -> Self {
        Classifier::Svm(SvmConfig::default())
    }
}

impl Classifier {
    pub fn name(&self) -> &'static str {
        match self {
            Classifier::Knn { .. } => "knn",
            Classifier::Svm(_) => "svm",
            Classifier::Lr(_) => "lr",
        }
    }

    /// Trains on `(features, labels)` and labels every query. A training set
    /// with one class predicts that class.
    pub fn fit_predict(
        &self,
        features: &[Vec<f64>],
        labels: &[u32],
        queries: &[Vec<f64>],
        rng: &mut Rng,
    ) -> Result<Vec<u32>> {
        check_training(features, labels)?;
        if labels.iter().all(|&l| l == labels[0]) && !matches!(self, Classifier::Knn { .. }) {
            return Ok(vec![labels[0]; queries.len()]);
        }
        match self {
            Classifier::Knn { k } => queries.iter().map(|q| knn_classify(features, labels, q, *k)).collect(),
            Classifier::Svm(cfg) => {
                let m = svm_train(features, labels, cfg, rng)?;
                queries.iter().map(|q| m.predict(q)).collect()
            }
            Classifier::Lr(cfg) => {
                let m = lr_train(features, labels, cfg)?;
                queries.iter().map(|q| m.predict(q)).collect()
            }
        }
    }
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Classifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "knn" => Ok(Classifier::Knn { k: 1 }),
            "svm" => Ok(Classifier::Svm(SvmConfig::default())),
            "lr" => Ok(Classifier::Lr(LrConfig::default())),
            _ => Err(Error::Config(format!("unknown classifier '{s}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    fn blobs(rng: &mut Rng) -> (Vec<Vec<f64>>, Vec<u32>) {
        let mut x = vec![];
        let mut y = vec![];
        for i in 0..40 {
            let c = (i % 2) as u32;
            let cx = if c == 0 { -2.0 } else { 2.0 };
            x.push(vec![cx + rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)]);
            y.push(c + 3);
        }
        (x, y)
    }

    fn accuracy(pred: &[u32], y: &[u32]) -> f64 {
        pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }

    #[test]
    fn separable_blobs() {
        let mut rng = from_seed(3);
        let (x, y) = blobs(&mut rng);
        for c in [
            Classifier::Knn { k: 1 },
            Classifier::Knn { k: 5 },
            Classifier::Svm(SvmConfig::default()),
            Classifier::Lr(LrConfig::default()),
        ] {
            let p = c.fit_predict(&x, &y, &x, &mut from_seed(1)).unwrap();
            assert_eq!(accuracy(&p, &y), 1.0, "{c}");
        }
    }

    #[test]
    fn knn_exact_match_and_tie_rule() {
        let x = vec![vec![0.0], vec![1.0], vec![3.0], vec![4.0]];
        let y = vec![7, 7, 2, 2];
        assert_eq!(knn_classify(&x, &y, &[3.0], 1).unwrap(), 2);
        // k = 4: two votes each; class 7 is closer in total
        assert_eq!(knn_classify(&x, &y, &[1.5], 4).unwrap(), 7);
        // equal totals fall to the lower id
        assert_eq!(knn_classify(&x, &y, &[2.0], 4).unwrap(), 2);
        assert!(knn_classify(&x, &y, &[2.0], 5).is_err());
        assert!(knn_classify(&[], &[], &[2.0], 1).is_err());
    }

    #[test]
    fn heavy_regularization_shrinks_svm() {
        let (x, y) = blobs(&mut from_seed(4));
        let m = svm_train(
            &x,
            &y,
            &SvmConfig {
                lambda: 1e9,
                iterations: 50,
            },
            &mut from_seed(0),
        )
        .unwrap();
        assert!(m.weights.iter().flatten().all(|v| v.abs() < 1e-8));
        let zero = LinearModel {
            classes: vec![3, 4],
            weights: vec![vec![0.0; 3]; 2],
        };
        assert_eq!(zero.predict(&[1.0, 1.0]).unwrap(), 3);
    }

    #[test]
    fn xor_is_not_linearly_fit() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = vec![0, 0, 1, 1];
        let m = svm_train(&x, &y, &SvmConfig::default(), &mut from_seed(2)).unwrap();
        let p: Vec<u32> = x.iter().map(|q| m.predict(q).unwrap()).collect();
        assert!(accuracy(&p, &y) <= 0.75);
    }

    #[test]
    fn single_class_rules() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(svm_train(&x, &[1, 1], &SvmConfig::default(), &mut from_seed(0)).is_err());
        assert!(lr_train(&x, &[1, 1], &LrConfig::default()).is_err());
        let p = Classifier::default()
            .fit_predict(&x, &[1, 1], &[vec![9.0]], &mut from_seed(0))
            .unwrap();
        assert_eq!(p, vec![1]);
    }

    #[test]
    fn lr_starts_uniform() {
        let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let (loss, _) = lr_objective(&[0.0; 9], &x, &[0, 1, 2, 0], 3, 1e-3);
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn lr_gradient_matches_differences() {
        let mut rng = from_seed(9);
        let x: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y = [0, 1, 2, 1, 0, 2];
        let w: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, g) = lr_objective(&w, &x, &y, 3, 0.1);
        let h = 1e-6;
        for i in 0..w.len() {
            let mut p = w.clone();
            p[i] += h;
            let mut m = w.clone();
            m[i] -= h;
            let fd = (lr_objective(&p, &x, &y, 3, 0.1).0 - lr_objective(&m, &x, &y, 3, 0.1).0) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-4 * fd.abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
        }
    }
}
