#![allow(dead_code)]

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use semaug::autodiff::{Graph, Parameterized, Tensor, Var};
use semaug::extractor::{ExtractorConfig, ToyExtractor};
use semaug::rng::{rng_for, Rng};
use semaug::trinet::{joint_loss_graph, Mode, Reduction, TriNetConfig, TriNetModel};
use semaug::Result;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Gradients below this magnitude are compared absolutely.
pub const FD_FLOOR: f64 = 1e-3;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

pub fn randn(shape: &[usize], rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Largest relative error between tape gradients and central differences
/// of `build` with respect to every input tensor.
pub fn fd_check<F>(inputs: &[Tensor], build: F) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = build(&mut g, &vars).unwrap();
    g.backward(out).unwrap();
    let grads: Vec<Tensor> = vars
        .iter()
        .map(|&v| g.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(g.value(v).shape())))
        .collect();
    let eval = |ts: &[Tensor]| {
        let mut g = Graph::new();
        let vs: Vec<Var> = ts.iter().map(|t| g.constant(t.clone())).collect();
        let o = build(&mut g, &vs).unwrap();
        g.value(o).item()
    };
    let mut worst: f64 = 0.0;
    for (i, t) in inputs.iter().enumerate() {
        for j in 0..t.len() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(grads[i].data()[j], numeric));
        }
    }
    worst
}

/// A miniature joint problem: extractor, TriNet, inputs, labels, targets.
pub struct MiniJoint {
    pub ex: ToyExtractor,
    pub tn: TriNetModel,
    pub x: Tensor,
    pub labels: Vec<usize>,
    pub u: Tensor,
}

pub fn mini_joint(seed: u64, reduction: Reduction, stop_grad: bool) -> MiniJoint {
    let mut rng = rng_for(seed, &[]);
    let level_dims = vec![3, 4, 5, 6];
    let ex = ToyExtractor::new(
        ExtractorConfig {
            input_dim: 5,
            level_dims: level_dims.clone(),
            n_classes: 3,
        },
        &mut rng,
    )
    .unwrap();
    let mut cfg = TriNetConfig::new(level_dims, 3);
    cfg.hidden = vec![4, 3, 5, 4];
    cfg.lambda_reg = 1e-2;
    cfg.lambda_joint = 0.7;
    cfg.dropout = 0.3;
    cfg.reduction = reduction;
    cfg.stop_extractor_grad = stop_grad;
    let mut tn = TriNetModel::new(cfg, &mut rng).unwrap();
    // Biases off zero keep every ReLU away from its kink.
    for p in tn.params_mut() {
        if p.rank() == 1 {
            p.data_mut()
                .iter_mut()
                .for_each(|b| *b = 0.1 + rng.random_range(0.0..0.1));
        }
    }
    let x = randn(&[4, 5], &mut rng);
    let u = randn(&[4, 3], &mut rng);
    MiniJoint {
        ex,
        tn,
        x,
        labels: vec![0, 2, 1, 2],
        u,
    }
}

fn joint_value(m: &MiniJoint, mode: Mode, tracked: bool, dropout_seed: u64) -> (f64, Vec<Tensor>) {
    let mut g = Graph::new();
    let ex = m.ex.bind(&mut g, tracked);
    let tn = m.tn.bind(&mut g, tracked);
    let x = g.constant(m.x.clone());
    let u = g.constant(m.u.clone());
    let mut rng = rng_for(dropout_seed, &[]);
    let v = joint_loss_graph(&mut g, &ex, &tn, &m.tn.config, x, &m.labels, u, mode, &mut rng).unwrap();
    let value = g.value(v.total).item();
    if !tracked {
        return (value, vec![]);
    }
    g.backward(v.total).unwrap();
    let grads = ex
        .vars()
        .into_iter()
        .chain(tn.vars())
        .map(|v| g.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(g.value(v).shape())))
        .collect();
    (value, grads)
}

/// Worst relative error over every extractor and TriNet parameter of the
/// joint loss. Dropout masks are replayed from the same seed each time.
pub fn joint_fd_worst(m: &MiniJoint, mode: Mode) -> f64 {
    let (_, grads) = joint_value(m, mode, true, 99);
    let n_ex = m.ex.params().len();
    let mut worst: f64 = 0.0;
    let total = n_ex + m.tn.params().len();
    for (pi, grad) in grads.iter().enumerate().take(total) {
        for j in 0..grad.len() {
            let bump = |delta: f64| {
                let mut mm = MiniJoint {
                    ex: m.ex.clone(),
                    tn: m.tn.clone(),
                    x: m.x.clone(),
                    labels: m.labels.clone(),
                    u: m.u.clone(),
                };
                if pi < n_ex {
                    mm.ex.params_mut()[pi].data_mut()[j] += delta;
                } else {
                    mm.tn.params_mut()[pi - n_ex].data_mut()[j] += delta;
                }
                joint_value(&mm, mode, false, 99).0
            };
            let numeric = (bump(FD_STEP) - bump(-FD_STEP)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(grad.data()[j], numeric));
        }
    }
    worst
}

pub type Build = Box<dyn Fn(&mut Graph, &[Var]) -> Result<Var>>;

/// Every differentiable graph operation, each wrapped to a scalar.
pub fn op_cases() -> Vec<(&'static str, Vec<Tensor>, Build)> {
    let mut rng = rng_for(42, &[]);
    let mut r = |s: &[usize]| randn(s, &mut rng);
    let w = r(&[3, 4]);
    vec![
        (
            "matmul",
            vec![r(&[2, 3]), w.clone()],
            Box::new(|g: &mut Graph, v: &[Var]| {
                let m = g.matmul(v[0], v[1])?;
                g.sum_squares(m)
            }),
        ),
        (
            "add_row",
            vec![r(&[2, 4]), r(&[4])],
            Box::new(|g: &mut Graph, v: &[Var]| {
                let m = g.add_row(v[0], v[1])?;
                g.sum_squares(m)
            }),
        ),
        (
            "add",
            vec![r(&[2, 3]), r(&[2, 3])],
            Box::new(|g: &mut Graph, v: &[Var]| {
                let m = g.add(v[0], v[1])?;
                g.sum_squares(m)
            }),
        ),
        (
            "sub",
            vec![r(&[2, 3]), r(&[2, 3])],
            Box::new(|g: &mut Graph, v: &[Var]| {
                let m = g.sub(v[0], v[1])?;
                g.sum_squares(m)
            }),
        ),
        (
            "mul",
            vec![r(&[2, 3]), r(&[2, 3])],
            Box::new(|g: &mut Graph, v: &[Var]| {
                let m = g.mul(v[0], v[1])?;
                g.sum(m)
            }),
        ),
        (
            "scale",
            vec![r(&[5])],
            Box::new(|g: &mut Graph, v: &[Var]| {
                let m = g.scale(v[0], -1.7)?;
                g.sum_squares(m)
            }),
        ),
        (
            "relu",
            vec![r(&[3, 3])],
            Box::new(|g: &mut Graph, v: &[Var]| {
                let m = g.relu(v[0])?;
                g.sum_squares(m)
            }),
        ),
        (
            "concat",
            vec![r(&[2, 3]), r(&[2, 2])],
            Box::new(|g: &mut Graph, v: &[Var]| {
                let m = g.concat(v[0], v[1])?;
                let k = g.constant(Tensor::new(vec![2, 5], (0..10).map(|i| i as f64 - 4.5).collect())?);
                let p = g.mul(m, k)?;
                g.sum(p)
            }),
        ),
        (
            "slice",
            vec![r(&[2, 6])],
            Box::new(|g: &mut Graph, v: &[Var]| {
                let m = g.slice(v[0], 2, 3)?;
                g.sum_squares(m)
            }),
        ),
        (
            "mse",
            vec![r(&[3, 2]), r(&[3, 2])],
            Box::new(|g: &mut Graph, v: &[Var]| g.mse(v[0], v[1])),
        ),
        (
            "sse",
            vec![r(&[3, 2]), r(&[3, 2])],
            Box::new(|g: &mut Graph, v: &[Var]| g.sse(v[0], v[1])),
        ),
        (
            "cross_entropy",
            vec![r(&[3, 4])],
            Box::new(|g: &mut Graph, v: &[Var]| g.cross_entropy(v[0], &[1, 3, 0])),
        ),
        (
            "sum_squares",
            vec![r(&[4])],
            Box::new(|g: &mut Graph, v: &[Var]| g.sum_squares(v[0])),
        ),
        (
            "sum",
            vec![r(&[2, 2])],
            Box::new(|g: &mut Graph, v: &[Var]| {
                let m = g.mul(v[0], v[0])?;
                g.sum(m)
            }),
        ),
        (
            "dropout",
            vec![r(&[3, 4])],
            Box::new(|g: &mut Graph, v: &[Var]| {
                let mut rng = rng_for(5, &[]);
                let m = g.dropout(v[0], 0.4, &mut rng, true)?;
                g.sum_squares(m)
            }),
        ),
        (
            "total_variation",
            vec![r(&[2, 6])],
            Box::new(|g: &mut Graph, v: &[Var]| g.total_variation(v[0], 1e-8)),
        ),
        (
            "add_all",
            vec![r(&[3]), r(&[3])],
            Box::new(|g: &mut Graph, v: &[Var]| {
                let a = g.sum_squares(v[0])?;
                let b = g.sum(v[1])?;
                let c = g.scale(a, 0.5)?;
                g.add_all(&[a, b, c])
            }),
        ),
    ]
}
