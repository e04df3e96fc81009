//! The multi-level feature source: a small trainable stack of affine+ReLU
//! blocks whose per-block outputs form the feature levels, plus a linear
//! classification head over the last level.

mod features;
mod invert;

pub use features::{
    check_disjoint_classes, check_support_test, load_features, save_features, ClassNames, DatasetSplit,
    MultiLevelFeature, Record, SplitRole, MLFA_MAGIC, MLFA_VERSION,
};
pub use invert::{invert, Inversion, InversionConfig, InversionInit};

use crate::autodiff::{Graph, Linear, LinearVars, Parameterized, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractorConfig {
    pub input_dim: usize,
    /// `d_1..d_L`.
    pub level_dims: Vec<usize>,
    pub n_classes: usize,
}

impl ExtractorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.level_dims.is_empty() || self.level_dims.contains(&0) || self.n_classes == 0 {
            return Err(Error::Config(format!("invalid extractor config {self:?}")));
        }
        Ok(())
    }

    pub fn num_levels(&self) -> usize {
        self.level_dims.len()
    }

    pub fn final_dim(&self) -> usize {
        *self.level_dims.last().expect("validated")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyExtractor {
    pub config: ExtractorConfig,
    pub blocks: Vec<Linear>,
    pub head: Linear,
}

/// An extractor's parameters placed on a graph.
#[derive(Clone, Debug)]
pub struct BoundExtractor {
    blocks: Vec<LinearVars>,
    head: LinearVars,
}

impl BoundExtractor {
    /// Applies block `l` (1-based) to `[batch, d_{l-1}]`.
    pub fn block(&self, g: &mut Graph, l: usize, x: Var) -> Result<Var> {
        let pre = self.blocks[l - 1].apply(g, x)?;
        g.relu(pre)
    }

    pub fn levels(&self, g: &mut Graph, x: Var) -> Result<Vec<Var>> {
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut h = x;
        for l in 1..=self.blocks.len() {
            h = self.block(g, l, h)?;
            out.push(h);
        }
        Ok(out)
    }

    /// Runs blocks `l+1..L` on a level-`l` batch.
    pub fn feed_through(&self, g: &mut Graph, l: usize, f: Var) -> Result<Var> {
        (l + 1..=self.blocks.len()).try_fold(f, |h, k| self.block(g, k, h))
    }

    pub fn logits(&self, g: &mut Graph, f_last: Var) -> Result<Var> {
        self.head.apply(g, f_last)
    }

    pub fn vars(&self) -> Vec<Var> {
        self.blocks
            .iter()
            .chain(std::iter::once(&self.head))
            .flat_map(|l| l.vars())
            .collect()
    }
}

fn row_matrix(x: &[f64]) -> Tensor {
    Tensor::new(vec![1, x.len()], x.to_vec()).expect("row shape")
}

impl ToyExtractor {
    pub fn new(config: ExtractorConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut blocks = Vec::with_capacity(config.num_levels());
        let mut prev = config.input_dim;
        for &d in &config.level_dims {
            blocks.push(Linear::init(prev, d, rng)?);
            prev = d;
        }
        let head = Linear::init(prev, config.n_classes, rng)?;
        Ok(ToyExtractor { config, blocks, head })
    }

    pub fn zeros(config: ExtractorConfig) -> Result<Self> {
        config.validate()?;
        let mut prev = config.input_dim;
        let blocks = config
            .level_dims
            .iter()
            .map(|&d| {
                let b = Linear::zeros(prev, d);
                prev = d;
                b
            })
            .collect();
        let head = Linear::zeros(prev, config.n_classes);
        Ok(ToyExtractor { config, blocks, head })
    }

    pub fn num_levels(&self) -> usize {
        self.config.num_levels()
    }

    pub fn level_dims(&self) -> &[usize] {
        &self.config.level_dims
    }

    pub fn bind(&self, g: &mut Graph, tracked: bool) -> BoundExtractor {
        BoundExtractor {
            blocks: self.blocks.iter().map(|b| b.bind(g, tracked)).collect(),
            head: self.head.bind(g, tracked),
        }
    }

    fn check_level(&self, l: usize, len: usize) -> Result<()> {
        if l == 0 || l > self.num_levels() {
            return Err(Error::InvalidArgument(format!(
                "level {l} outside 1..={}",
                self.num_levels()
            )));
        }
        let d = self.config.level_dims[l - 1];
        if len != d {
            return Err(Error::dim("feed_through", d, len));
        }
        Ok(())
    }

    /// Multi-level features of one input vector.
    pub fn extract(&self, x: &[f64]) -> Result<MultiLevelFeature> {
        if x.len() != self.config.input_dim {
            return Err(Error::dim("extract", self.config.input_dim, x.len()));
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let xv = g.constant(row_matrix(x));
        let levels = bound.levels(&mut g, xv)?;
        MultiLevelFeature::new(levels.iter().map(|&v| g.value(v).data().to_vec()).collect())
    }

    /// Per-level `[batch, d_l]` matrices for a `[batch, input_dim]` matrix.
    pub fn extract_batch(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        if x.rank() != 2 || x.cols() != self.config.input_dim {
            return Err(Error::dim(
                "extract_batch",
                self.config.input_dim,
                format!("{:?}", x.shape()),
            ));
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let levels = bound.levels(&mut g, xv)?;
        Ok(levels.iter().map(|&v| g.value(v).clone()).collect())
    }

    /// Pushes a level-`l` vector (1-based) through blocks `l+1..L`.
    pub fn feed_through(&self, l: usize, f: &[f64]) -> Result<Vec<f64>> {
        self.check_level(l, f.len())?;
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let fv = g.constant(row_matrix(f));
        let out = bound.feed_through(&mut g, l, fv)?;
        Ok(g.value(out).data().to_vec())
    }

    pub fn classify_logits(&self, f_last: &[f64]) -> Result<Vec<f64>> {
        let d = self.config.final_dim();
        if f_last.len() != d {
            return Err(Error::dim("classify_logits", d, f_last.len()));
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let fv = g.constant(row_matrix(f_last));
        let out = bound.logits(&mut g, fv)?;
        Ok(g.value(out).data().to_vec())
    }

    /// Converts a raw-input split into a multi-level feature split.
    pub fn extract_split(&self, split: &DatasetSplit) -> Result<DatasetSplit> {
        if split.dims != [self.config.input_dim] {
            return Err(Error::dim(
                "extract_split",
                self.config.input_dim,
                format!("{:?}", split.dims),
            ));
        }
        let records = split
            .records
            .iter()
            .map(|r| {
                Ok(Record {
                    id: r.id,
                    class: r.class,
                    feature: self.extract(r.feature.level(1))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DatasetSplit::new(split.role, self.config.level_dims.clone(), records)
    }
}

impl Parameterized for ToyExtractor {
    fn params(&self) -> Vec<&Tensor> {
        self.blocks
            .iter()
            .chain(std::iter::once(&self.head))
            .flat_map(|l| l.tensors())
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.blocks
            .iter_mut()
            .chain(std::iter::once(&mut self.head))
            .flat_map(|l| l.tensors_mut())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    fn config(levels: Vec<usize>) -> ExtractorConfig {
        ExtractorConfig {
            input_dim: 5,
            level_dims: levels,
            n_classes: 3,
        }
    }

    #[test]
    fn zero_model_gives_zero_levels() {
        let ex = ToyExtractor::zeros(config(vec![4, 6])).unwrap();
        let f = ex.extract(&[1.0, -2.0, 3.0, 0.5, 0.0]).unwrap();
        assert!(f.levels().iter().flatten().all(|&x| x == 0.0));
        assert_eq!(f.dims(), vec![4, 6]);
        let logits = ex.classify_logits(f.last()).unwrap();
        assert!(logits.iter().all(|&z| z == logits[0]));
    }

    #[test]
    fn single_level_is_one_affine_relu() {
        let ex = ToyExtractor::new(config(vec![3]), &mut from_seed(2)).unwrap();
        let x = [0.3, -0.1, 0.8, 1.0, -0.6];
        let f = ex.extract(&x).unwrap();
        let b = &ex.blocks[0];
        for j in 0..3 {
            let pre: f64 = (0..5).map(|i| x[i] * b.weight.data()[i * 3 + j]).sum::<f64>() + b.bias.data()[j];
            assert!((f.level(1)[j] - pre.max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn feed_through_composes_exactly() {
        let ex = ToyExtractor::new(config(vec![4, 6, 3, 7]), &mut from_seed(11)).unwrap();
        let x = [0.9, -0.4, 0.2, 1.1, -1.3];
        let f = ex.extract(&x).unwrap();
        for l in 1..=4 {
            assert_eq!(ex.feed_through(l, f.level(l)).unwrap(), f.last());
        }
        assert_eq!(ex.feed_through(4, &[1.0; 7]).unwrap(), vec![1.0; 7]);
        assert!(ex.feed_through(0, &[1.0; 4]).is_err());
        assert!(ex.feed_through(5, &[1.0; 4]).is_err());
        assert!(ex.feed_through(2, &[1.0; 4]).is_err());
        assert!(ex.extract(&[1.0; 4]).is_err());
    }

    #[test]
    fn head_row_selects_coordinate() {
        let mut ex = ToyExtractor::zeros(config(vec![4])).unwrap();
        // class 1 reads feature 2
        ex.head.weight.data_mut()[2 * 3 + 1] = 1.0;
        let logits = ex.classify_logits(&[0.1, 0.2, 0.7, 0.4]).unwrap();
        assert_eq!(logits, vec![0.0, 0.7, 0.0]);
    }

    #[test]
    fn batch_matches_single() {
        let ex = ToyExtractor::new(config(vec![4, 6]), &mut from_seed(5)).unwrap();
        let rows = vec![vec![0.1, 0.2, 0.3, 0.4, 0.5], vec![-1.0, 0.0, 1.0, 2.0, -0.5]];
        let batch = ex.extract_batch(&Tensor::from_rows(&rows).unwrap()).unwrap();
        for (i, r) in rows.iter().enumerate() {
            let f = ex.extract(r).unwrap();
            assert_eq!(batch[1].row(i), f.level(2));
        }
    }
}
