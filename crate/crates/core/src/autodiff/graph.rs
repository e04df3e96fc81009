//! Reverse-mode differentiation over an append-only tape.
//!
//! Nodes are pushed in evaluation order, so the arena index order is already a
//! topological order and `backward` simply walks it in reverse.

use super::init::dropout_mask;
use super::tensor::{matmul_nt, matmul_tn, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Concat(Var, Var),
    Slice {
        src: Var,
        start: usize,
        len: usize,
    },
    Mse(Var, Var),
    Sse(Var, Var),
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Tensor,
    },
    SumSquares(Var),
    Sum(Var),
    Mask(Var, Tensor),
    TotalVariation {
        src: Var,
        eps: f64,
    },
}

impl Op {
    pub fn parents(&self) -> Vec<Var> {
        match *self {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::AddRow(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Concat(a, b)
            | Op::Mse(a, b)
            | Op::Sse(a, b) => vec![a, b],
            Op::Scale(a, _) | Op::Relu(a) | Op::SumSquares(a) | Op::Sum(a) | Op::Mask(a, _) => vec![a],
            Op::Slice { src, .. } | Op::TotalVariation { src, .. } => vec![src],
            Op::CrossEntropy { logits, .. } => vec![logits],
        }
    }
}

#[derive(Clone, Debug)]
pub struct TapeNode {
    pub value: Tensor,
    pub grad: Option<Tensor>,
    pub op: Op,
    pub tracked: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<TapeNode>,
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(op, format!("{:?}", a.shape()), format!("{:?}", b.shape())));
    }
    Ok(())
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, v: Var) -> &TapeNode {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    /// Untracked leaf: gradients never accumulate on it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t, false)
    }

    /// Tracked leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.leaf(t, true)
    }

    fn leaf(&mut self, value: Tensor, tracked: bool) -> Var {
        self.nodes.push(TapeNode {
            value,
            grad: None,
            op: Op::Leaf,
            tracked,
        });
        Var(self.nodes.len() - 1)
    }

    /// Copies a value as a fresh constant, cutting gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.value(v).clone();
        self.constant(t)
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::Numeric(format!("non-finite output from {op:?}")));
        }
        let tracked = op.parents().iter().any(|p| self.nodes[p.0].tracked);
        self.nodes.push(TapeNode {
            value,
            grad: None,
            op,
            tracked,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push(out, Op::MatMul(a, b))
    }

    /// Adds a vector to every row of a matrix (or to a vector).
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rank() != 1 || xv.cols() != bv.len() || xv.rank() == 0 {
            return Err(Error::dim(
                "add_row",
                format!("bias of len {}", xv.cols()),
                format!("{:?}", bv.shape()),
            ));
        }
        let c = bv.len();
        let mut out = xv.clone();
        for (i, o) in out.data_mut().iter_mut().enumerate() {
            *o += bv.data()[i % c];
        }
        self.push(out, Op::AddRow(x, bias))
    }

    fn zip(&mut self, a: Var, b: Var, name: &'static str, f: fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        same_shape(name, av, bv)?;
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(av.shape().to_vec(), data)?;
        self.push(out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x * c);
        self.push(out, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(out, Op::Relu(a))
    }

    /// Joins along the last axis. Both operands must be vectors, or matrices
    /// with the same row count.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rank() != bv.rank() || av.rank() == 0 || av.rank() > 2 {
            return Err(Error::dim(
                "concat",
                format!("rank {}", av.rank()),
                format!("rank {}", bv.rank()),
            ));
        }
        if av.rows() != bv.rows() {
            return Err(Error::dim("concat", av.rows(), bv.rows()));
        }
        let (rows, ca, cb) = (av.rows(), av.cols(), bv.cols());
        let mut data = Vec::with_capacity(rows * (ca + cb));
        for r in 0..rows {
            data.extend_from_slice(av.row(r));
            data.extend_from_slice(bv.row(r));
        }
        let shape = if av.rank() == 1 {
            vec![ca + cb]
        } else {
            vec![rows, ca + cb]
        };
        let out = Tensor::new(shape, data)?;
        self.push(out, Op::Concat(a, b))
    }

    /// Columns `start..start+len` of the last axis.
    pub fn slice(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let sv = self.value(src);
        if sv.rank() == 0 || sv.rank() > 2 || start + len > sv.cols() {
            return Err(Error::dim("slice", format!("range within {}", sv.cols()), start + len));
        }
        let rows = sv.rows();
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&sv.row(r)[start..start + len]);
        }
        let shape = if sv.rank() == 1 { vec![len] } else { vec![rows, len] };
        let out = Tensor::new(shape, data)?;
        self.push(out, Op::Slice { src, start, len })
    }

    /// Mean of squared elementwise differences.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        same_shape("mse", av, bv)?;
        let n = av.len().max(1) as f64;
        let s: f64 = av.data().iter().zip(bv.data()).map(|(x, y)| (x - y) * (x - y)).sum();
        self.push(Tensor::scalar(s / n), Op::Mse(a, b))
    }

    /// Sum of squared elementwise differences.
    pub fn sse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        same_shape("sse", av, bv)?;
        let s: f64 = av.data().iter().zip(bv.data()).map(|(x, y)| (x - y) * (x - y)).sum();
        self.push(Tensor::scalar(s), Op::Sse(a, b))
    }

    /// Mean softmax cross-entropy. `logits` is a vector with one label or a
    /// `[batch, classes]` matrix with one label per row.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rank() == 0 || lv.rank() > 2 || lv.rows() != labels.len() {
            return Err(Error::dim(
                "cross_entropy",
                format!("{} rows", labels.len()),
                format!("{:?}", lv.shape()),
            ));
        }
        let c = lv.cols();
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {c} classes"
            )));
        }
        let mut probs = lv.clone();
        let mut total = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let row = &mut probs.data_mut()[r * c..(r + 1) * c];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                z += *x;
            }
            let shifted = lv.row(r)[label] - max;
            total += z.ln() - shifted;
            for x in row.iter_mut() {
                *x /= z;
            }
        }
        let loss = total / labels.len() as f64;
        self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        )
    }

    pub fn sum_squares(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).sum_squares();
        self.push(Tensor::scalar(s), Op::SumSquares(a))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Inverted dropout: zeroes each element with probability `rate` and
    /// scales survivors by `1/(1-rate)`. Identity outside training.
    pub fn dropout(&mut self, x: Var, rate: f64, rng: &mut Rng, training: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("dropout rate {rate} not in [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let shape = self.value(x).shape().to_vec();
        let mask = dropout_mask(&shape, rate, rng);
        let data = self
            .value(x)
            .data()
            .iter()
            .zip(mask.data())
            .map(|(a, m)| a * m)
            .collect();
        let out = Tensor::new(shape, data)?;
        self.push(out, Op::Mask(x, mask))
    }

    /// Smoothed total variation along the last axis:
    /// `Σ sqrt((x[i+1]-x[i])² + eps)`, summed over rows.
    pub fn total_variation(&mut self, src: Var, eps: f64) -> Result<Var> {
        let sv = self.value(src);
        let (rows, c) = (sv.rows(), sv.cols());
        let mut s = 0.0;
        for r in 0..rows {
            let row = sv.row(r);
            for i in 1..c {
                let d = row[i] - row[i - 1];
                s += (d * d + eps).sqrt();
            }
        }
        self.push(Tensor::scalar(s), Op::TotalVariation { src, eps })
    }

    /// Sums a list of scalars.
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var> {
        let (&first, rest) = terms
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("add_all of nothing".into()))?;
        rest.iter().try_fold(first, |acc, &t| self.add(acc, t))
    }

    /// Accumulates `d root / d node` into every tracked node.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if !self.value(root).is_scalar() {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar root, got shape {:?}",
                self.value(root).shape()
            )));
        }
        for n in &mut self.nodes {
            n.grad = None;
        }
        if !self.nodes[root.0].tracked {
            return Ok(());
        }
        self.nodes[root.0].grad = Some(Tensor::full(self.value(root).shape(), 1.0));
        for i in (0..=root.0).rev() {
            if !self.nodes[i].tracked {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
            let contributions = self.local_grads(i, &op, &g);
            self.nodes[i].op = op;
            self.nodes[i].grad = Some(g);
            for (p, pg) in contributions {
                if !self.nodes[p.0].tracked {
                    continue;
                }
                match &mut self.nodes[p.0].grad {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(pg.data()) {
                            *a += b;
                        }
                    }
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        Ok(())
    }

    fn local_grads(&self, i: usize, op: &Op, g: &Tensor) -> Vec<(Var, Tensor)> {
        let val = |v: Var| &self.nodes[v.0].value;
        let tracked = |v: Var| self.nodes[v.0].tracked;
        let like = |v: Var, data: Vec<f64>| Tensor::new(val(v).shape().to_vec(), data).expect("grad shape");
        let gs = g.data()[0];
        match op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                let mut out = vec![];
                if tracked(*a) {
                    out.push((*a, like(*a, matmul_nt(g.data(), bv.data(), m, n, k))));
                }
                if tracked(*b) {
                    out.push((*b, like(*b, matmul_tn(av.data(), g.data(), m, k, n))));
                }
                out
            }
            Op::AddRow(x, bias) => {
                let c = val(*bias).len();
                let mut gb = vec![0.0; c];
                for (j, v) in g.data().iter().enumerate() {
                    gb[j % c] += v;
                }
                vec![(*x, g.clone()), (*bias, like(*bias, gb))]
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.map(|x| -x))],
            Op::Mul(a, b) => {
                let ga = g.data().iter().zip(val(*b).data()).map(|(x, y)| x * y).collect();
                let gb = g.data().iter().zip(val(*a).data()).map(|(x, y)| x * y).collect();
                vec![(*a, like(*a, ga)), (*b, like(*b, gb))]
            }
            Op::Scale(a, c) => vec![(*a, g.map(|x| x * c))],
            Op::Relu(a) => {
                let ga = g
                    .data()
                    .iter()
                    .zip(val(*a).data())
                    .map(|(gv, &x)| if x > 0.0 { *gv } else { 0.0 })
                    .collect();
                vec![(*a, like(*a, ga))]
            }
            Op::Concat(a, b) => {
                let (ca, cb) = (val(*a).cols(), val(*b).cols());
                let rows = val(*a).rows();
                let mut ga = Vec::with_capacity(rows * ca);
                let mut gb = Vec::with_capacity(rows * cb);
                for r in 0..rows {
                    let row = &g.data()[r * (ca + cb)..(r + 1) * (ca + cb)];
                    ga.extend_from_slice(&row[..ca]);
                    gb.extend_from_slice(&row[ca..]);
                }
                vec![(*a, like(*a, ga)), (*b, like(*b, gb))]
            }
            Op::Slice { src, start, len } => {
                let sv = val(*src);
                let c = sv.cols();
                let mut gsrc = vec![0.0; sv.len()];
                for r in 0..sv.rows() {
                    gsrc[r * c + start..r * c + start + len].copy_from_slice(&g.data()[r * len..(r + 1) * len]);
                }
                vec![(*src, like(*src, gsrc))]
            }
            Op::Mse(a, b) | Op::Sse(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let scale = match op {
                    Op::Mse(..) => 2.0 * gs / av.len().max(1) as f64,
                    _ => 2.0 * gs,
                };
                let ga: Vec<f64> = av.data().iter().zip(bv.data()).map(|(x, y)| scale * (x - y)).collect();
                let gb = ga.iter().map(|x| -x).collect();
                vec![(*a, like(*a, ga)), (*b, like(*b, gb))]
            }
            Op::CrossEntropy { logits, labels, probs } => {
                let c = probs.cols();
                let scale = gs / labels.len() as f64;
                let mut gl = probs.data().to_vec();
                for (r, &l) in labels.iter().enumerate() {
                    gl[r * c + l] -= 1.0;
                }
                for x in &mut gl {
                    *x *= scale;
                }
                vec![(*logits, like(*logits, gl))]
            }
            Op::SumSquares(a) => vec![(*a, val(*a).map(|x| 2.0 * gs * x))],
            Op::Sum(a) => vec![(*a, val(*a).map(|_| gs))],
            Op::Mask(a, mask) => {
                let ga = g.data().iter().zip(mask.data()).map(|(x, m)| x * m).collect();
                vec![(*a, like(*a, ga))]
            }
            Op::TotalVariation { src, eps } => {
                let sv = val(*src);
                let c = sv.cols();
                let mut gsrc = vec![0.0; sv.len()];
                for r in 0..sv.rows() {
                    let row = sv.row(r);
                    for j in 1..c {
                        let d = row[j] - row[j - 1];
                        let t = gs * d / (d * d + eps).sqrt();
                        gsrc[r * c + j] += t;
                        gsrc[r * c + j - 1] -= t;
                    }
                }
                vec![(*src, like(*src, gsrc))]
            }
        }
        .into_iter()
        .inspect(|(p, t)| debug_assert_eq!(val(*p).shape(), t.shape(), "grad shape at node {i}"))
        .collect()
    }
}
