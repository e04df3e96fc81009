use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Per-parameter Adam moments and hyperparameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(shape: &[usize], lr: f64) -> Self {
        AdamState {
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0
            && self.lr > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad Adam hyperparameters {self:?}")))
        }
    }
}

/// One bias-corrected Adam update of `param` in place.
pub fn adam_step(param: &mut Tensor, grad: &Tensor, state: &mut AdamState) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != state.m.shape() {
        return Err(Error::dim(
            "adam_step",
            format!("{:?}", param.shape()),
            format!("grad {:?}, state {:?}", grad.shape(), state.m.shape()),
        ));
    }
    state.validate()?;
    state.t += 1;
    let c1 = 1.0 - state.beta1.powi(state.t as i32);
    let c2 = 1.0 - state.beta2.powi(state.t as i32);
    let (b1, b2, eps, lr) = (state.beta1, state.beta2, state.eps, state.lr);
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for (i, (p, &g)) in param.data_mut().iter_mut().zip(grad.data()).enumerate() {
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let mh = m[i] / c1;
        let vh = v[i] / c2;
        *p -= lr * mh / (vh.sqrt() + eps);
    }
    Ok(())
}

/// Adam over a fixed list of parameter tensors sharing one learning rate.
#[derive(Clone, Debug)]
pub struct Adam {
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new<'a>(shapes: impl IntoIterator<Item = &'a [usize]>, lr: f64) -> Self {
        Adam {
            states: shapes.into_iter().map(|s| AdamState::new(s, lr)).collect(),
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        for s in &mut self.states {
            s.lr = lr;
        }
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.states.len() || grads.len() != self.states.len() {
            return Err(Error::dim("Adam::step", self.states.len(), params.len()));
        }
        for ((p, g), s) in params.iter_mut().zip(grads).zip(&mut self.states) {
            adam_step(p, g, s)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_param() {
        let mut p = Tensor::vector(vec![0.5, -1.0]);
        let mut s = AdamState::new(&[2], 1e-3);
        for _ in 0..5 {
            adam_step(&mut p, &Tensor::zeros(&[2]), &mut s).unwrap();
        }
        assert_eq!(p.data(), &[0.5, -1.0]);
        assert_eq!(s.m.data(), &[0.0, 0.0]);
        assert_eq!(s.v.data(), &[0.0, 0.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Tensor::vector(vec![1.0, 1.0]);
        let mut s = AdamState::new(&[2], 0.01);
        adam_step(&mut p, &Tensor::vector(vec![3.0, -0.2]), &mut s).unwrap();
        assert!((p.data()[0] - 0.99).abs() < 1e-8);
        assert!((p.data()[1] - 1.01).abs() < 1e-8);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn quadratic_reference_run() {
        // Scalar reference run of the same recurrence, computed offline:
        // after 50 steps w = -0.004818223222661105.
        let mut w = Tensor::scalar(1.0);
        let mut s = AdamState::new(&[], 0.1);
        for _ in 0..50 {
            let g = Tensor::scalar(2.0 * w.item());
            adam_step(&mut w, &g, &mut s).unwrap();
        }
        assert!(w.item().abs() < 1e-2);
        assert!((w.item() + 0.004818223222661105).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Tensor::vector(vec![1.0]);
        let mut s = AdamState::new(&[1], 0.1);
        assert!(adam_step(&mut p, &Tensor::vector(vec![1.0, 2.0]), &mut s).is_err());
    }
}
