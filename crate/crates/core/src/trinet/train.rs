//! Joint objective and mini-batch training.

use std::fmt;

use rand::seq::SliceRandom;

use super::config::TriNetConfig;
use super::model::{BoundTriNet, Mode, TriNetModel};
use crate::autodiff::{Adam, Graph, Parameterized, Tensor, Var};
use crate::error::{Error, Result};
use crate::extractor::{BoundExtractor, ClassNames, DatasetSplit, ToyExtractor};
use crate::rng::Rng;
use crate::semantic::SemanticSpace;

#[derive(Clone, Copy, Debug)]
pub struct JointVars {
    pub j1: Var,
    pub j2: Var,
    pub total: Var,
}

/// Builds `J1 + lambda_joint · J2` on `g`.
///
/// `J1` is the mean cross-entropy of the extractor head on the last level;
/// `J2` is the TriNet loss on the extracted levels plus
/// `lambda_reg · Σ‖θ‖²` over the TriNet parameters.
#[allow(clippy::too_many_arguments)]
pub fn joint_loss_graph(
    g: &mut Graph,
    extractor: &BoundExtractor,
    trinet: &BoundTriNet,
    cfg: &TriNetConfig,
    inputs: Var,
    head_labels: &[usize],
    targets: Var,
    mode: Mode,
    rng: &mut Rng,
) -> Result<JointVars> {
    let levels = extractor.levels(g, inputs)?;
    let logits = extractor.logits(g, *levels.last().expect("levels"))?;
    let j1 = g.cross_entropy(logits, head_labels)?;
    let levels = if cfg.stop_extractor_grad {
        levels.iter().map(|&l| g.detach(l)).collect()
    } else {
        levels
    };
    let j2 = trinet_loss_graph(g, trinet, cfg, &levels, targets, mode, rng)?;
    let weighted = g.scale(j2, cfg.lambda_joint)?;
    let total = g.add(j1, weighted)?;
    Ok(JointVars { j1, j2, total })
}

/// TriNet data terms plus the weighted parameter penalty.
pub fn trinet_loss_graph(
    g: &mut Graph,
    trinet: &BoundTriNet,
    cfg: &TriNetConfig,
    levels: &[Var],
    targets: Var,
    mode: Mode,
    rng: &mut Rng,
) -> Result<Var> {
    let terms = trinet.loss(g, levels, targets, mode, rng, cfg.reduction)?;
    if cfg.lambda_reg == 0.0 {
        return Ok(terms.data);
    }
    let p = trinet.penalty(g)?;
    let reg = g.scale(p, cfg.lambda_reg)?;
    g.add(terms.data, reg)
}

/// Maps base class ids onto extractor head rows (sorted id order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseClasses(Vec<u32>);

impl BaseClasses {
    pub fn new(mut ids: Vec<u32>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        BaseClasses(ids)
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn head_index(&self, class: u32) -> Result<usize> {
        self.0
            .binary_search(&class)
            .map_err(|_| Error::Contract(format!("class {class} is not a base class")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointLoss {
    pub j1: f64,
    pub j2: f64,
    pub total: f64,
}

/// Inference-mode joint loss over `(input, class id, semantic target)`.
pub fn joint_loss(
    extractor: &ToyExtractor,
    trinet: &TriNetModel,
    batch: &[(Vec<f64>, u32, Vec<f64>)],
    base: &BaseClasses,
    rng: &mut Rng,
) -> Result<JointLoss> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let labels = batch.iter().map(|b| base.head_index(b.1)).collect::<Result<Vec<_>>>()?;
    let inputs: Vec<Vec<f64>> = batch.iter().map(|b| b.0.clone()).collect();
    let targets: Vec<Vec<f64>> = batch.iter().map(|b| b.2.clone()).collect();
    let mut g = Graph::new();
    let ex = extractor.bind(&mut g, false);
    let tn = trinet.bind(&mut g, false);
    let x = g.constant(Tensor::from_rows(&inputs)?);
    let u = g.constant(Tensor::from_rows(&targets)?);
    let v = joint_loss_graph(&mut g, &ex, &tn, &trinet.config, x, &labels, u, Mode::Infer, rng)?;
    Ok(JointLoss {
        j1: g.value(v.j1).item(),
        j2: g.value(v.j2).item(),
        total: g.value(v.total).item(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub joint: f64,
    pub j1: f64,
    pub j2: f64,
    pub lr: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {} joint {} j1 {} j2 {} lr {}",
            self.epoch, self.joint, self.j1, self.j2, self.lr
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
}

impl TrainReport {
    pub fn to_log(&self) -> String {
        self.epochs.iter().map(|e| format!("{e}\n")).collect()
    }
}

/// What the optimizer may touch.
pub enum Trainee<'a> {
    /// Raw inputs: the extractor produces the levels. With `update` false the
    /// extractor is frozen and only the TriNet learns.
    Joint {
        extractor: &'a mut ToyExtractor,
        update: bool,
    },
    /// Records already hold multi-level features; only the TriNet learns and
    /// the objective is the TriNet loss alone.
    FeaturesOnly,
}

fn semantic_targets(split: &DatasetSplit, names: &ClassNames, space: &SemanticSpace) -> Result<Vec<Vec<f64>>> {
    for c in split.classes() {
        let label = names.get(c)?;
        space
            .get(label)
            .ok_or_else(|| Error::Contract(format!("base class {c} ('{label}') has no semantic vector")))?;
    }
    split
        .records
        .iter()
        .map(|r| Ok(space.require(names.get(r.class)?)?.to_vec()))
        .collect()
}

/// Mini-batch Adam on the joint objective over the base split.
///
/// The learning rate halves every `lr_halving_period` epochs and the
/// per-epoch shuffle draws from `rng`. Parameters are rounded to `f32`
/// precision after the last epoch so checkpoints reproduce them exactly.
pub fn train(
    mut trainee: Trainee<'_>,
    trinet: &mut TriNetModel,
    base: &DatasetSplit,
    names: &ClassNames,
    space: &SemanticSpace,
    rng: &mut Rng,
) -> Result<TrainReport> {
    let cfg = trinet.config.clone();
    cfg.validate()?;
    if base.is_empty() {
        return Err(Error::InvalidArgument("empty base split".into()));
    }
    if space.dim() != cfg.semantic_dim {
        return Err(Error::dim("train semantic dim", cfg.semantic_dim, space.dim()));
    }
    let targets = semantic_targets(base, names, space)?;
    let classes = BaseClasses::new(base.classes().into_iter().collect());
    let head_labels = base
        .records
        .iter()
        .map(|r| classes.head_index(r.class))
        .collect::<Result<Vec<_>>>()?;
    match &trainee {
        Trainee::Joint { extractor, .. } => {
            if base.dims != [extractor.config.input_dim] {
                return Err(Error::dim(
                    "train inputs",
                    extractor.config.input_dim,
                    format!("{:?}", base.dims),
                ));
            }
            if extractor.config.n_classes != classes.len() {
                return Err(Error::dim("extractor head", classes.len(), extractor.config.n_classes));
            }
            if extractor.config.level_dims != cfg.level_dims {
                return Err(Error::dim(
                    "level dims",
                    format!("{:?}", cfg.level_dims),
                    format!("{:?}", extractor.config.level_dims),
                ));
            }
        }
        Trainee::FeaturesOnly => {
            if base.dims != cfg.level_dims {
                return Err(Error::dim(
                    "train features",
                    format!("{:?}", cfg.level_dims),
                    format!("{:?}", base.dims),
                ));
            }
        }
    }

    let mut shapes: Vec<Vec<usize>> = vec![];
    if let Trainee::Joint {
        extractor,
        update: true,
    } = &trainee
    {
        shapes.extend(extractor.params().iter().map(|t| t.shape().to_vec()));
    }
    shapes.extend(trinet.params().iter().map(|t| t.shape().to_vec()));
    let mut adam = Adam::new(shapes.iter().map(Vec::as_slice), cfg.lr);

    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..base.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        adam.set_lr(lr);
        order.shuffle(rng);
        let (mut sj, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let mut g = Graph::new();
            let tn = trinet.bind(&mut g, true);
            let rows_t: Vec<Vec<f64>> = chunk.iter().map(|&i| targets[i].clone()).collect();
            let u = g.constant(Tensor::from_rows(&rows_t)?);
            let (vars, ex_vars) = match &trainee {
                Trainee::Joint { extractor, update } => {
                    let ex = extractor.bind(&mut g, *update);
                    let rows: Vec<Vec<f64>> = chunk
                        .iter()
                        .map(|&i| base.records[i].feature.level(1).to_vec())
                        .collect();
                    let x = g.constant(Tensor::from_rows(&rows)?);
                    let labels: Vec<usize> = chunk.iter().map(|&i| head_labels[i]).collect();
                    let v = joint_loss_graph(&mut g, &ex, &tn, &cfg, x, &labels, u, Mode::Train, rng)?;
                    (v, if *update { ex.vars() } else { vec![] })
                }
                Trainee::FeaturesOnly => {
                    let mut levels = vec![];
                    for l in 1..=cfg.num_levels() {
                        let rows: Vec<Vec<f64>> = chunk
                            .iter()
                            .map(|&i| base.records[i].feature.level(l).to_vec())
                            .collect();
                        levels.push(g.constant(Tensor::from_rows(&rows)?));
                    }
                    let j2 = trinet_loss_graph(&mut g, &tn, &cfg, &levels, u, Mode::Train, rng)?;
                    let zero = g.constant(Tensor::scalar(0.0));
                    (
                        JointVars {
                            j1: zero,
                            j2,
                            total: j2,
                        },
                        vec![],
                    )
                }
            };
            g.backward(vars.total)?;
            let w = chunk.len() as f64;
            sj += w * g.value(vars.total).item();
            s1 += w * g.value(vars.j1).item();
            s2 += w * g.value(vars.j2).item();

            let grads: Vec<Tensor> = ex_vars
                .iter()
                .chain(tn.vars().iter())
                .map(|&v| g.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(g.value(v).shape())))
                .collect();
            let mut params: Vec<&mut Tensor> = vec![];
            if let Trainee::Joint {
                extractor,
                update: true,
            } = &mut trainee
            {
                params.extend(extractor.params_mut());
            }
            params.extend(trinet.params_mut());
            adam.step(&mut params, &grads)?;
        }
        let n = base.len() as f64;
        report.epochs.push(EpochLog {
            epoch: epoch + 1,
            joint: sj / n,
            j1: s1 / n,
            j2: s2 / n,
            lr,
        });
    }
    if cfg.epochs > 0 {
        trinet.freeze();
        if let Trainee::Joint {
            extractor,
            update: true,
        } = &mut trainee
        {
            extractor.freeze();
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::{ExtractorConfig, MultiLevelFeature, Record, SplitRole};
    use crate::rng::from_seed;
    use crate::semantic::SpaceKind;

    fn tiny() -> (ToyExtractor, TriNetModel, DatasetSplit, ClassNames, SemanticSpace) {
        let ex = ToyExtractor::new(
            ExtractorConfig {
                input_dim: 3,
                level_dims: vec![4, 3],
                n_classes: 2,
            },
            &mut from_seed(1),
        )
        .unwrap();
        let tn = TriNetModel::new(TriNetConfig::new(vec![4, 3], 2), &mut from_seed(2)).unwrap();
        let records = (0..6)
            .map(|i| Record {
                id: i,
                class: (i % 2) as u32 + 10,
                feature: MultiLevelFeature::new(vec![vec![i as f64 * 0.1, 1.0, -0.5]]).unwrap(),
            })
            .collect();
        let split = DatasetSplit::new(SplitRole::Base, vec![3], records).unwrap();
        let names = ClassNames::new([(10, "a".to_string()), (11, "b".to_string())]).unwrap();
        let space = SemanticSpace::new(
            SpaceKind::Word,
            vec![("a".into(), vec![1.0, 0.0]), ("b".into(), vec![0.0, 1.0])],
        )
        .unwrap();
        (ex, tn, split, names, space)
    }

    #[test]
    fn zero_epochs_leaves_models() {
        let (mut ex, mut tn, split, names, space) = tiny();
        tn.config.epochs = 0;
        let (ex0, tn0) = (ex.clone(), tn.clone());
        let r = train(
            Trainee::Joint {
                extractor: &mut ex,
                update: true,
            },
            &mut tn,
            &split,
            &names,
            &space,
            &mut from_seed(0),
        )
        .unwrap();
        assert!(r.epochs.is_empty());
        assert_eq!(ex, ex0);
        assert_eq!(tn, tn0);
    }

    #[test]
    fn lambda_joint_zero_is_j1() {
        let (ex, mut tn, split, _, space) = tiny();
        tn.config.lambda_joint = 0.0;
        let batch: Vec<_> = split
            .records
            .iter()
            .map(|r| {
                let u = space.get(if r.class == 10 { "a" } else { "b" }).unwrap().to_vec();
                (r.feature.level(1).to_vec(), r.class, u)
            })
            .collect();
        let l = joint_loss(&ex, &tn, &batch, &BaseClasses::new(vec![10, 11]), &mut from_seed(0)).unwrap();
        assert_eq!(l.total, l.j1);
        assert!(l.j2 > 0.0);
        let err = joint_loss(&ex, &tn, &batch, &BaseClasses::new(vec![10]), &mut from_seed(0));
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn missing_semantic_vector_is_reported() {
        let (mut ex, mut tn, split, _, space) = tiny();
        let names = ClassNames::new([(10, "a".to_string()), (11, "zzz".to_string())]).unwrap();
        let r = train(
            Trainee::Joint {
                extractor: &mut ex,
                update: true,
            },
            &mut tn,
            &split,
            &names,
            &space,
            &mut from_seed(0),
        );
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn log_line_format() {
        let e = EpochLog {
            epoch: 3,
            joint: 1.5,
            j1: 1.0,
            j2: 0.5,
            lr: 0.001,
        };
        assert_eq!(e.to_string(), "epoch 3 joint 1.5 j1 1 j2 0.5 lr 0.001");
    }
}
