use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// Fraction of the nearest other-class distance used as the Gaussian
/// standard deviation.
pub const SIGMA_FRACTION: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    Word,
    Attribute,
    Svd,
}

impl SpaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpaceKind::Word => "word",
            SpaceKind::Attribute => "attribute",
            SpaceKind::Svd => "svd",
        }
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" => Ok(SpaceKind::Word),
            "attribute" => Ok(SpaceKind::Attribute),
            "svd" => Ok(SpaceKind::Svd),
            other => Err(Error::Config(format!("unknown semantic space kind '{other}'"))),
        }
    }
}

/// Distance or similarity used to compare semantic vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Cosine,
    Euclidean,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        })
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn euclidean(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn cosine_with_norms(u: &[f64], v: &[f64], nu: f64, nv: f64) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    (dot / (nu * nv)).clamp(-1.0, 1.0)
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::dim("cosine", u.len(), v.len()));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::InvalidArgument(
            "cosine similarity of a zero vector is undefined".into(),
        ));
    }
    Ok(cosine_with_norms(u, v, nu, nv))
}

fn check_vectors(dim: usize, labels: &[String], vectors: &[Vec<f64>]) -> Result<HashMap<String, usize>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("semantic dim must be positive".into()));
    }
    let mut index = HashMap::with_capacity(labels.len());
    for (i, (l, v)) in labels.iter().zip(vectors).enumerate() {
        if v.len() != dim {
            return Err(Error::dim("semantic vector", dim, v.len()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite semantic vector for '{l}'")));
        }
        if index.insert(l.clone(), i).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate label '{l}'")));
        }
    }
    Ok(index)
}

/// Label-keyed vectors in one semantic space. Vectors are stored raw.
#[derive(Clone, Debug)]
pub struct SemanticSpace {
    kind: SpaceKind,
    dim: usize,
    labels: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl PartialEq for SemanticSpace {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.labels == other.labels && self.vectors == other.vectors
    }
}

impl SemanticSpace {
    pub fn new(kind: SpaceKind, entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dim = entries.first().map_or(0, |e| e.1.len());
        let (labels, vectors): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let index = check_vectors(dim, &labels, &vectors)?;
        Ok(SemanticSpace {
            kind,
            dim,
            labels,
            vectors,
            index,
        })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, label: &str) -> Option<&[f64]> {
        self.index.get(label).map(|&i| self.vectors[i].as_slice())
    }

    pub fn require(&self, label: &str) -> Result<&[f64]> {
        self.get(label)
            .ok_or_else(|| Error::Contract(format!("no {} vector for class '{label}'", self.kind)))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(self.vectors.iter().map(Vec::as_slice))
    }

    /// Restricts the space to the given labels, in that order.
    pub fn subset(&self, labels: &[&str]) -> Result<SemanticSpace> {
        let entries = labels
            .iter()
            .map(|l| Ok((l.to_string(), self.require(l)?.to_vec())))
            .collect::<Result<Vec<_>>>()?;
        SemanticSpace::new(self.kind, entries)
    }
}

/// Vocabulary for neighborhood search. Every vector must be nonzero.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    dim: usize,
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl Vocabulary {
    pub fn new(entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dim = entries.first().map_or(0, |e| e.1.len());
        let (tokens, vectors): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        check_vectors(dim, &tokens, &vectors)?;
        let norms: Vec<f64> = vectors.iter().map(|v| norm(v)).collect();
        if let Some(i) = norms.iter().position(|&n| n == 0.0) {
            return Err(Error::InvalidArgument(format!(
                "vocabulary token '{}' has a zero vector",
                tokens[i]
            )));
        }
        Ok(Vocabulary {
            dim,
            tokens,
            vectors,
            norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor<'a> {
    pub token: &'a str,
    pub vector: &'a [f64],
    /// Cosine similarity, or negated Euclidean distance.
    pub score: f64,
}

/// The `k` vocabulary entries closest to `query` by cosine similarity.
pub fn nearest_vocab<'a>(
    query: &[f64],
    vocab: &'a Vocabulary,
    k: usize,
    exclude: &HashSet<String>,
) -> Result<Vec<Neighbor<'a>>> {
    nearest_vocab_by(query, vocab, k, exclude, Metric::Cosine)
}

/// Neighbor search under either metric. Ties go to the lexicographically
/// smaller token; results come sorted best first.
pub fn nearest_vocab_by<'a>(
    query: &[f64],
    vocab: &'a Vocabulary,
    k: usize,
    exclude: &HashSet<String>,
    metric: Metric,
) -> Result<Vec<Neighbor<'a>>> {
    if query.len() != vocab.dim {
        return Err(Error::dim("nearest_vocab", vocab.dim, query.len()));
    }
    let qn = norm(query);
    if qn == 0.0 && metric == Metric::Cosine {
        return Err(Error::InvalidArgument("zero query vector".into()));
    }
    let mut cand: Vec<(f64, usize)> = (0..vocab.len())
        .filter(|&i| !exclude.contains(&vocab.tokens[i]))
        .map(|i| {
            let v = &vocab.vectors[i];
            let score = match metric {
                Metric::Cosine => cosine_with_norms(query, v, qn, vocab.norms[i]),
                Metric::Euclidean => -euclidean(query, v),
            };
            (score, i)
        })
        .collect();
    if k > cand.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} available vocabulary entries",
            cand.len()
        )));
    }
    let order = |a: &(f64, usize), b: &(f64, usize)| {
        b.0.total_cmp(&a.0)
            .then_with(|| vocab.tokens[a.1].cmp(&vocab.tokens[b.1]))
    };
    if k < cand.len() && k > 0 {
        cand.select_nth_unstable_by(k - 1, order);
    }
    cand.truncate(k);
    cand.sort_by(order);
    Ok(cand
        .into_iter()
        .map(|(score, i)| Neighbor {
            token: &vocab.tokens[i],
            vector: &vocab.vectors[i],
            score,
        })
        .collect())
}

/// Symmetric class-by-class cosine matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassSimilarityMatrix {
    pub labels: Vec<String>,
    /// Row-major `C×C`.
    pub values: Vec<f64>,
}

impl ClassSimilarityMatrix {
    pub fn order(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.order() + j]
    }

    /// Checks symmetry, unit diagonal and range.
    pub fn validate(&self) -> Result<()> {
        let c = self.order();
        if self.values.len() != c * c || c == 0 {
            return Err(Error::dim("ClassSimilarityMatrix", c * c, self.values.len()));
        }
        for i in 0..c {
            if (self.get(i, i) - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "diagonal entry {i} is {}",
                    self.get(i, i)
                )));
            }
            for j in 0..c {
                let v = self.get(i, j);
                if !(-1.0..=1.0).contains(&v) || (v - self.get(j, i)).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!("entry ({i},{j}) = {v} invalid")));
                }
            }
        }
        Ok(())
    }
}

pub fn build_similarity(space: &SemanticSpace, classes: &[&str]) -> Result<ClassSimilarityMatrix> {
    let vecs = classes.iter().map(|c| space.require(c)).collect::<Result<Vec<_>>>()?;
    let c = classes.len();
    let mut values = vec![0.0; c * c];
    for i in 0..c {
        for j in i..c {
            let s = cosine(vecs[i], vecs[j])?;
            values[i * c + j] = s;
            values[j * c + i] = s;
        }
    }
    Ok(ClassSimilarityMatrix {
        labels: classes.iter().map(|s| s.to_string()).collect(),
        values,
    })
}

/// `SIGMA_FRACTION` × the smallest Euclidean distance from `encoded` to a
/// vector of another class.
pub fn sigma_for<L: PartialEq>(encoded: &[f64], own_class: &L, others: &[(L, &[f64])]) -> Result<f64> {
    sigma_for_by(encoded, own_class, others, Metric::Euclidean)
}

pub fn sigma_for_by<L: PartialEq>(
    encoded: &[f64],
    own_class: &L,
    others: &[(L, &[f64])],
    metric: Metric,
) -> Result<f64> {
    let mut nearest = f64::INFINITY;
    for (label, v) in others {
        if label == own_class {
            continue;
        }
        if v.len() != encoded.len() {
            return Err(Error::dim("sigma_for", encoded.len(), v.len()));
        }
        let d = match metric {
            Metric::Euclidean => euclidean(encoded, v),
            Metric::Cosine => 1.0 - cosine(encoded, v)?,
        };
        nearest = nearest.min(d);
    }
    if nearest == f64::INFINITY {
        return Err(Error::Infeasible("no other-class vector to set sigma from".into()));
    }
    let sigma = SIGMA_FRACTION * nearest;
    if sigma > 0.0 {
        Ok(sigma)
    } else {
        Err(Error::Numeric(
            "sigma is zero: another class sits on the encoded point".into(),
        ))
    }
}

/// `SIGMA_FRACTION` × the mean pairwise Euclidean distance among the given
/// class vectors; used when a support set has only one class.
pub fn fallback_sigma(space: &SemanticSpace, classes: &[&str]) -> Result<f64> {
    let vecs = classes.iter().map(|c| space.require(c)).collect::<Result<Vec<_>>>()?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..vecs.len() {
        for j in i + 1..vecs.len() {
            sum += euclidean(vecs[i], vecs[j]);
            n += 1;
        }
    }
    if n == 0 || sum == 0.0 {
        return Err(Error::Infeasible(
            "fallback sigma needs two distinct class vectors".into(),
        ));
    }
    Ok(SIGMA_FRACTION * sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(entries: &[(&str, &[f64])]) -> SemanticSpace {
        SemanticSpace::new(
            SpaceKind::Word,
            entries.iter().map(|(l, v)| (l.to_string(), v.to_vec())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn cosine_cases() {
        let v = [0.3, -1.2, 4.0];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1., 0.], &[0., 1.]).unwrap(), 0.0);
        assert!((cosine(&[1., 1.], &[1., 0.]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(cosine(&[0., 0.], &[1., 0.]).is_err());
    }

    #[test]
    fn similarity_extremes() {
        let s = space(&[("a", &[1., 2.]), ("b", &[1., 2.]), ("c", &[1., 2.])]);
        let m = build_similarity(&s, &["a", "b", "c"]).unwrap();
        assert!(m.values.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        m.validate().unwrap();
        let s = space(&[("x", &[2., 0., 0.]), ("y", &[0., 3., 0.]), ("z", &[0., 0., 0.5])]);
        let m = build_similarity(&s, &["x", "y", "z"]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        assert!(build_similarity(&s, &["x", "w"]).is_err());
    }

    #[test]
    fn sigma_examples() {
        let e = [0.0, 0.0];
        let far: &[f64] = &[6.0, 8.0];
        assert!((sigma_for(&e, &0, &[(1, far)]).unwrap() - 1.5).abs() < 1e-15);
        let a: &[f64] = &[2.0, 0.0];
        let b: &[f64] = &[0.0, 8.0];
        let own: &[f64] = &[0.1, 0.0];
        assert!((sigma_for(&e, &0, &[(1, a), (2, b), (0, own)]).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(sigma_for(&e, &0, &[(0, own)]), Err(Error::Infeasible(_))));
    }

    #[test]
    fn fallback_is_mean_pairwise() {
        let s = space(&[("a", &[0., 0.]), ("b", &[3., 4.]), ("c", &[0., 4.])]);
        let f = fallback_sigma(&s, &["a", "b", "c"]).unwrap();
        assert!((f - 0.15 * (5.0 + 4.0 + 3.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn vocab_basics() {
        let vocab = Vocabulary::new(vec![
            ("cat".into(), vec![1.0, 0.1]),
            ("dog".into(), vec![0.9, 0.3]),
            ("car".into(), vec![-1.0, 0.5]),
        ])
        .unwrap();
        let none = HashSet::new();
        let n = nearest_vocab(&[0.9, 0.3], &vocab, 1, &none).unwrap();
        assert_eq!(n[0].token, "dog");
        let all = nearest_vocab(&[1.0, 0.0], &vocab, 3, &none).unwrap();
        let toks: Vec<_> = all.iter().map(|n| n.token).collect();
        assert_eq!(toks, ["cat", "dog", "car"]);
        let ex: HashSet<String> = ["cat".to_string()].into();
        assert!(nearest_vocab(&[1.0, 0.0], &vocab, 3, &ex).is_err());
        assert_eq!(nearest_vocab(&[1.0, 0.0], &vocab, 1, &ex).unwrap()[0].token, "dog");
        assert!(nearest_vocab(&[0.0, 0.0], &vocab, 1, &none).is_err());
    }

    #[test]
    fn vocab_ties_break_lexicographically() {
        let vocab = Vocabulary::new(vec![
            ("zeta".into(), vec![1.0, 0.0]),
            ("alpha".into(), vec![2.0, 0.0]),
            ("mid".into(), vec![0.0, 1.0]),
        ])
        .unwrap();
        let n = nearest_vocab(&[1.0, 0.0], &vocab, 2, &HashSet::new()).unwrap();
        assert_eq!(n[0].token, "alpha");
        assert_eq!(n[1].token, "zeta");
    }

    #[test]
    fn duplicate_labels_rejected() {
        let r = SemanticSpace::new(SpaceKind::Word, vec![("a".into(), vec![1.0]), ("a".into(), vec![2.0])]);
        assert!(r.is_err());
    }
}
