use super::config::{Reduction, TriNetConfig};
use crate::autodiff::{Graph, Linear, LinearVars, Parameterized, Tensor, Var};
use crate::error::{Error, Result};
use crate::extractor::MultiLevelFeature;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Encoder/decoder pair between the feature levels and a semantic space.
///
/// Encoder: `h_1 = relu(A_1 f_1 + b_1)`, `h_l = relu(A_l [h_{l-1}, f_l] + b_l)`,
/// output `= head(h_L)`.
///
/// Decoder: `e_L = relu(expand(v))`; for `l = L..2` the affine map `unmerge_l`
/// splits into the next hidden state `e_{l-1}` (ReLU) and the linear
/// reconstruction of level `l`; `unmerge_1` emits level 1 only.
#[derive(Clone, Debug, PartialEq)]
pub struct TriNetModel {
    pub config: TriNetConfig,
    pub merges: Vec<Linear>,
    pub enc_head: Linear,
    pub expand: Linear,
    /// Indexed by level, `unmerge[l-1]`.
    pub unmerge: Vec<Linear>,
}

#[derive(Clone, Debug)]
pub struct BoundTriNet {
    merges: Vec<LinearVars>,
    enc_head: LinearVars,
    expand: LinearVars,
    unmerge: Vec<LinearVars>,
    dropout: f64,
    hidden: Vec<usize>,
    level_dims: Vec<usize>,
}

/// Scalar loss components, all on the same graph. `data` is
/// reconstruction + semantic, without the parameter penalty.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub reconstruction: Var,
    pub semantic: Var,
    pub data: Var,
}

/// `(fan_in, fan_out)` of one linear layer.
type Shape = (usize, usize);

impl TriNetModel {
    /// Merges, encoder head, expansion and un-merge layer shapes.
    fn shapes(cfg: &TriNetConfig) -> (Vec<Shape>, Shape, Shape, Vec<Shape>) {
        let (d, w, s) = (&cfg.level_dims, &cfg.hidden, cfg.semantic_dim);
        let l = d.len();
        let merges = (0..l)
            .map(|i| if i == 0 { (d[0], w[0]) } else { (w[i - 1] + d[i], w[i]) })
            .collect();
        let unmerge = (0..l)
            .map(|i| if i == 0 { (w[0], d[0]) } else { (w[i], w[i - 1] + d[i]) })
            .collect();
        (merges, (w[l - 1], s), (s, w[l - 1]), unmerge)
    }

    fn build(config: TriNetConfig, mut make: impl FnMut(usize, usize) -> Result<Linear>) -> Result<Self> {
        config.validate()?;
        let (m, h, e, u) = Self::shapes(&config);
        Ok(TriNetModel {
            merges: m.iter().map(|&(a, b)| make(a, b)).collect::<Result<_>>()?,
            enc_head: make(h.0, h.1)?,
            expand: make(e.0, e.1)?,
            unmerge: u.iter().map(|&(a, b)| make(a, b)).collect::<Result<_>>()?,
            config,
        })
    }

    pub fn new(config: TriNetConfig, rng: &mut Rng) -> Result<Self> {
        Self::build(config, |a, b| Linear::init(a, b, rng))
    }

    pub fn zeros(config: TriNetConfig) -> Result<Self> {
        Self::build(config, |a, b| Ok(Linear::zeros(a, b)))
    }

    /// Shapes of the parameter tensors in [`Parameterized::params`] order.
    pub fn param_shapes(config: &TriNetConfig) -> Vec<Vec<usize>> {
        let (m, h, e, u) = Self::shapes(config);
        m.iter()
            .chain([&h, &e])
            .chain(u.iter())
            .flat_map(|&(a, b)| [vec![a, b], vec![b]])
            .collect()
    }

    pub fn semantic_dim(&self) -> usize {
        self.config.semantic_dim
    }

    pub fn num_levels(&self) -> usize {
        self.config.num_levels()
    }

    pub fn bind(&self, g: &mut Graph, tracked: bool) -> BoundTriNet {
        BoundTriNet {
            merges: self.merges.iter().map(|l| l.bind(g, tracked)).collect(),
            enc_head: self.enc_head.bind(g, tracked),
            expand: self.expand.bind(g, tracked),
            unmerge: self.unmerge.iter().map(|l| l.bind(g, tracked)).collect(),
            dropout: self.config.dropout,
            hidden: self.config.hidden.clone(),
            level_dims: self.config.level_dims.clone(),
        }
    }

    fn check_levels(&self, f: &MultiLevelFeature) -> Result<()> {
        f.check_dims(&self.config.level_dims)
    }

    /// Semantic vector for one multi-level feature.
    pub fn encode(&self, f: &MultiLevelFeature, mode: Mode, rng: &mut Rng) -> Result<Vec<f64>> {
        self.check_levels(f)?;
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let levels: Vec<Var> = f
            .levels()
            .iter()
            .map(|l| g.constant(Tensor::new(vec![1, l.len()], l.clone()).expect("row")))
            .collect();
        let out = bound.encode(&mut g, &levels, mode, rng)?;
        Ok(g.value(out).data().to_vec())
    }

    /// Encodes a batch given as per-level `[batch, d_l]` matrices.
    pub fn encode_batch(&self, levels: &[Tensor], rng: &mut Rng) -> Result<Tensor> {
        if levels.len() != self.num_levels() {
            return Err(Error::dim("encode_batch", self.num_levels(), levels.len()));
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let vars: Vec<Var> = levels.iter().map(|t| g.constant(t.clone())).collect();
        let out = bound.encode(&mut g, &vars, Mode::Infer, rng)?;
        Ok(g.value(out).clone())
    }

    pub fn decode(&self, v: &[f64], mode: Mode, rng: &mut Rng) -> Result<MultiLevelFeature> {
        if v.len() != self.semantic_dim() {
            return Err(Error::dim("decode", self.semantic_dim(), v.len()));
        }
        let batch = self.decode_batch(&Tensor::new(vec![1, v.len()], v.to_vec())?, mode, rng)?;
        MultiLevelFeature::new(batch.into_iter().map(Tensor::into_data).collect())
    }

    /// Decodes `[batch, s]` into per-level `[batch, d_l]` matrices.
    pub fn decode_batch(&self, v: &Tensor, mode: Mode, rng: &mut Rng) -> Result<Vec<Tensor>> {
        if v.rank() != 2 || v.cols() != self.semantic_dim() {
            return Err(Error::dim(
                "decode_batch",
                self.semantic_dim(),
                format!("{:?}", v.shape()),
            ));
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let vv = g.constant(v.clone());
        let out = bound.decode(&mut g, vv, mode, rng)?;
        Ok(out.iter().map(|&o| g.value(o).clone()).collect())
    }

    /// Eval-mode TriNet loss over `(feature, semantic target)` pairs.
    pub fn loss(&self, batch: &[(MultiLevelFeature, Vec<f64>)], rng: &mut Rng) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let mut levels = vec![];
        for l in 1..=self.num_levels() {
            let rows: Vec<Vec<f64>> = batch
                .iter()
                .map(|(f, _)| {
                    self.check_levels(f)?;
                    Ok(f.level(l).to_vec())
                })
                .collect::<Result<_>>()?;
            levels.push(g.constant(Tensor::from_rows(&rows)?));
        }
        let targets: Vec<Vec<f64>> = batch.iter().map(|(_, u)| u.clone()).collect();
        if targets.iter().any(|u| u.len() != self.semantic_dim()) {
            return Err(Error::dim("trinet_loss target", self.semantic_dim(), "other"));
        }
        let u = g.constant(Tensor::from_rows(&targets)?);
        let penalty = self.l2();
        let lv = bound.loss(&mut g, &levels, u, Mode::Infer, rng, self.config.reduction)?;
        Ok(g.value(lv.data).item() + self.config.lambda_reg * penalty)
    }
}

impl BoundTriNet {
    fn drop(&self, g: &mut Graph, h: Var, mode: Mode, rng: &mut Rng) -> Result<Var> {
        g.dropout(h, self.dropout, rng, mode == Mode::Train)
    }

    pub fn encode(&self, g: &mut Graph, levels: &[Var], mode: Mode, rng: &mut Rng) -> Result<Var> {
        if levels.len() != self.merges.len() {
            return Err(Error::dim("encode", self.merges.len(), levels.len()));
        }
        for (i, &l) in levels.iter().enumerate() {
            if g.value(l).cols() != self.level_dims[i] {
                return Err(Error::dim("encode level", self.level_dims[i], g.value(l).cols()));
            }
        }
        let mut h = None;
        for (i, &f) in levels.iter().enumerate() {
            let input = match h {
                None => f,
                Some(prev) => g.concat(prev, f)?,
            };
            let pre = self.merges[i].apply(g, input)?;
            let act = g.relu(pre)?;
            h = Some(self.drop(g, act, mode, rng)?);
        }
        self.enc_head.apply(g, h.expect("at least one level"))
    }

    pub fn decode(&self, g: &mut Graph, v: Var, mode: Mode, rng: &mut Rng) -> Result<Vec<Var>> {
        let nl = self.unmerge.len();
        let pre = self.expand.apply(g, v)?;
        let act = g.relu(pre)?;
        let mut e = self.drop(g, act, mode, rng)?;
        let mut out = vec![None; nl];
        for i in (0..nl).rev() {
            let z = self.unmerge[i].apply(g, e)?;
            if i == 0 {
                out[0] = Some(z);
            } else {
                let w = self.hidden[i - 1];
                out[i] = Some(g.slice(z, w, self.level_dims[i])?);
                let next = g.slice(z, 0, w)?;
                let act = g.relu(next)?;
                e = self.drop(g, act, mode, rng)?;
            }
        }
        Ok(out.into_iter().map(|o| o.expect("filled")).collect())
    }

    pub fn loss(
        &self,
        g: &mut Graph,
        levels: &[Var],
        u: Var,
        mode: Mode,
        rng: &mut Rng,
        reduction: Reduction,
    ) -> Result<LossVars> {
        let batch = g.value(u).rows() as f64;
        let err = |g: &mut Graph, a: Var, b: Var| -> Result<Var> {
            match reduction {
                Reduction::Mean => g.mse(a, b),
                Reduction::Sum => {
                    let s = g.sse(a, b)?;
                    g.scale(s, 1.0 / batch)
                }
            }
        };
        let u_hat = self.encode(g, levels, mode, rng)?;
        let f_hat = self.decode(g, u_hat, mode, rng)?;
        let mut terms = Vec::with_capacity(levels.len());
        for (&f, &fh) in levels.iter().zip(&f_hat) {
            terms.push(err(g, fh, f)?);
        }
        let reconstruction = g.add_all(&terms)?;
        let semantic = err(g, u_hat, u)?;
        let data = g.add(reconstruction, semantic)?;
        Ok(LossVars {
            reconstruction,
            semantic,
            data,
        })
    }

    /// `Σ ‖θ‖²` over every bound tensor.
    pub fn penalty(&self, g: &mut Graph) -> Result<Var> {
        let terms = self
            .vars()
            .into_iter()
            .map(|v| g.sum_squares(v))
            .collect::<Result<Vec<_>>>()?;
        g.add_all(&terms)
    }

    pub fn vars(&self) -> Vec<Var> {
        self.merges
            .iter()
            .chain([&self.enc_head, &self.expand])
            .chain(self.unmerge.iter())
            .flat_map(|l| l.vars())
            .collect()
    }
}

impl Parameterized for TriNetModel {
    fn params(&self) -> Vec<&Tensor> {
        self.merges
            .iter()
            .chain([&self.enc_head, &self.expand])
            .chain(self.unmerge.iter())
            .flat_map(|l| l.tensors())
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.merges
            .iter_mut()
            .chain([&mut self.enc_head, &mut self.expand])
            .chain(self.unmerge.iter_mut())
            .flat_map(|l| l.tensors_mut())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    fn feature(dims: &[usize], seed: u64) -> MultiLevelFeature {
        let mut k = seed as f64;
        MultiLevelFeature::new(
            dims.iter()
                .map(|&d| {
                    (0..d)
                        .map(|_| {
                            k += 1.0;
                            (k * 0.731).sin()
                        })
                        .collect()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_model_outputs_zero() {
        let cfg = TriNetConfig::new(vec![3, 5, 4], 2);
        let m = TriNetModel::zeros(cfg).unwrap();
        let mut rng = from_seed(0);
        let f = feature(&[3, 5, 4], 1);
        assert_eq!(m.encode(&f, Mode::Infer, &mut rng).unwrap(), vec![0.0, 0.0]);
        let d = m.decode(&[0.3, -2.0], Mode::Infer, &mut rng).unwrap();
        assert_eq!(d.dims(), vec![3, 5, 4]);
        assert!(d.levels().iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn single_level_is_two_layer_mlp() {
        let cfg = TriNetConfig::new(vec![4], 3);
        let m = TriNetModel::new(cfg, &mut from_seed(8)).unwrap();
        let f = feature(&[4], 2);
        let got = m.encode(&f, Mode::Infer, &mut from_seed(0)).unwrap();
        let h = m.merges[0]
            .weight
            .transpose()
            .matmul(&Tensor::new(vec![4, 1], f.level(1).to_vec()).unwrap())
            .unwrap();
        let h: Vec<f64> = h
            .data()
            .iter()
            .zip(m.merges[0].bias.data())
            .map(|(a, b)| (a + b).max(0.0))
            .collect();
        let w = m
            .enc_head
            .weight
            .transpose()
            .matmul(&Tensor::new(vec![h.len(), 1], h).unwrap())
            .unwrap();
        for (i, (a, b)) in w.data().iter().zip(m.enc_head.bias.data()).enumerate() {
            assert!((got[i] - (a + b)).abs() < 1e-12);
        }
    }

    #[test]
    fn decoder_can_emit_negatives() {
        let cfg = TriNetConfig::new(vec![3, 4], 2);
        let m = TriNetModel::new(cfg, &mut from_seed(3)).unwrap();
        let mut neg = false;
        for k in 0..10 {
            let d = m
                .decode(&[k as f64 - 5.0, 1.0], Mode::Infer, &mut from_seed(0))
                .unwrap();
            neg |= d.levels().iter().flatten().any(|&x| x < 0.0);
        }
        assert!(neg);
    }

    #[test]
    fn param_shapes_match_model() {
        let cfg = TriNetConfig::new(vec![3, 5, 4], 2);
        let m = TriNetModel::new(cfg.clone(), &mut from_seed(1)).unwrap();
        let shapes: Vec<Vec<usize>> = m.params().iter().map(|t| t.shape().to_vec()).collect();
        assert_eq!(shapes, TriNetModel::param_shapes(&cfg));
    }

    #[test]
    fn dim_mismatch_errors() {
        let m = TriNetModel::zeros(TriNetConfig::new(vec![3, 5], 2)).unwrap();
        let mut rng = from_seed(0);
        assert!(m.encode(&feature(&[3, 4], 0), Mode::Infer, &mut rng).is_err());
        assert!(m.decode(&[1.0], Mode::Infer, &mut rng).is_err());
    }

    #[test]
    fn loss_of_zero_model_is_target_energy() {
        let cfg = TriNetConfig {
            lambda_reg: 0.0,
            ..TriNetConfig::new(vec![2, 2], 2)
        };
        let m = TriNetModel::zeros(cfg).unwrap();
        let s = 0.5f64.sqrt();
        let f = MultiLevelFeature::new(vec![vec![s, s], vec![1.0, 0.0]]).unwrap();
        let u = vec![0.0, 1.0];
        // each unit-norm term has mean-over-dims squared norm 1/2
        let l = m.loss(&[(f, u)], &mut from_seed(0)).unwrap();
        assert!((l - 1.5).abs() < 1e-12, "{l}");
    }
}
