//! Recovers an extractor input whose level-`l` features match a target,
//! minimizing `½‖f_l(x) − target‖² + λ·TV(x)` with Adam.

use rand::Rng as _;

use super::ToyExtractor;
use crate::autodiff::{adam_step, AdamState, Graph, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub enum InversionInit {
    /// Uniform in `±scale` per coordinate.
    Random {
        scale: f64,
    },
    Given(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InversionConfig {
    pub lambda_tv: f64,
    pub steps: usize,
    pub lr: f64,
    /// Smoothing inside the TV square root.
    pub tv_eps: f64,
    pub init: InversionInit,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            lambda_tv: 1e-2,
            steps: 500,
            lr: 1e-2,
            tv_eps: 1e-8,
            init: InversionInit::Random { scale: 1.0 },
        }
    }
}

#[derive(Clone, Debug)]
pub struct Inversion {
    /// The iterate with the lowest objective seen.
    pub input: Vec<f64>,
    pub objective: f64,
    /// Objective at each evaluated iterate; entry 0 is the initial point.
    pub trace: Vec<f64>,
}

impl Inversion {
    pub fn initial_objective(&self) -> f64 {
        self.trace[0]
    }
}

fn objective_and_grad(
    ex: &ToyExtractor,
    x: &[f64],
    target: &Tensor,
    level: usize,
    cfg: &InversionConfig,
) -> Result<(f64, Tensor)> {
    let mut g = Graph::new();
    let bound = ex.bind(&mut g, false);
    let xv = g.param(Tensor::new(vec![1, x.len()], x.to_vec())?);
    let mut h = xv;
    for l in 1..=level {
        h = bound.block(&mut g, l, h)?;
    }
    let t = g.constant(target.clone());
    let sse = g.sse(h, t)?;
    let fit = g.scale(sse, 0.5)?;
    let total = if cfg.lambda_tv > 0.0 {
        let tv = g.total_variation(xv, cfg.tv_eps)?;
        let reg = g.scale(tv, cfg.lambda_tv)?;
        g.add(fit, reg)?
    } else {
        fit
    };
    g.backward(total)?;
    let value = g.value(total).item();
    let grad = g.grad(xv).cloned().unwrap_or_else(|| Tensor::zeros(&[1, x.len()]));
    Ok((value, grad))
}

/// Runs `cfg.steps` Adam steps from the configured start and returns the
/// best iterate.
pub fn invert(
    ex: &ToyExtractor,
    target: &[f64],
    level: usize,
    cfg: &InversionConfig,
    rng: &mut Rng,
) -> Result<Inversion> {
    if level == 0 || level > ex.num_levels() {
        return Err(Error::InvalidArgument(format!(
            "level {level} outside 1..={}",
            ex.num_levels()
        )));
    }
    let d = ex.level_dims()[level - 1];
    if target.len() != d {
        return Err(Error::dim("invert target", d, target.len()));
    }
    if !(cfg.lambda_tv >= 0.0) || !(cfg.lr > 0.0) || !(cfg.tv_eps > 0.0) {
        return Err(Error::InvalidArgument(format!("bad inversion config {cfg:?}")));
    }
    let n = ex.config.input_dim;
    let mut x = match &cfg.init {
        InversionInit::Random { scale } => {
            Tensor::new(vec![1, n], (0..n).map(|_| rng.random_range(-scale..=*scale)).collect())?
        }
        InversionInit::Given(x0) => {
            if x0.len() != n {
                return Err(Error::dim("invert init", n, x0.len()));
            }
            Tensor::new(vec![1, n], x0.clone())?
        }
    };
    let target = Tensor::new(vec![1, d], target.to_vec())?;
    let mut state = AdamState::new(&[1, n], cfg.lr);
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let mut best = (f64::INFINITY, x.clone());
    for step in 0..=cfg.steps {
        let (obj, grad) = objective_and_grad(ex, x.data(), &target, level, cfg)
            .map_err(|e| Error::Numeric(format!("inversion step {step}: {e}")))?;
        if !obj.is_finite() {
            return Err(Error::Numeric(format!("inversion objective {obj} at step {step}")));
        }
        trace.push(obj);
        if obj < best.0 {
            best = (obj, x.clone());
        }
        if step < cfg.steps {
            adam_step(&mut x, &grad, &mut state)?;
        }
    }
    Ok(Inversion {
        input: best.1.into_data(),
        objective: best.0,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::ExtractorConfig;
    use crate::rng::from_seed;

    fn extractor() -> ToyExtractor {
        let cfg = ExtractorConfig {
            input_dim: 8,
            level_dims: vec![12, 10],
            n_classes: 2,
        };
        ToyExtractor::new(cfg, &mut from_seed(4)).unwrap()
    }

    #[test]
    fn exact_start_stays_put() {
        let ex = extractor();
        let x0: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        let target = ex.extract(&x0).unwrap().level(2).to_vec();
        let cfg = InversionConfig {
            lambda_tv: 0.0,
            steps: 20,
            init: InversionInit::Given(x0.clone()),
            ..Default::default()
        };
        let inv = invert(&ex, &target, 2, &cfg, &mut from_seed(0)).unwrap();
        assert_eq!(inv.objective, 0.0);
        assert_eq!(inv.input, x0);
    }

    #[test]
    fn heavy_tv_flattens_input() {
        let ex = extractor();
        let target = vec![1.0; 12];
        let cfg = InversionConfig {
            lambda_tv: 1e3,
            steps: 800,
            lr: 5e-2,
            ..Default::default()
        };
        let inv = invert(&ex, &target, 1, &cfg, &mut from_seed(3)).unwrap();
        let spread = inv.input.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - inv.input.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 0.05, "spread {spread}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let ex = extractor();
        let cfg = InversionConfig::default();
        assert!(invert(&ex, &[0.0; 12], 3, &cfg, &mut from_seed(0)).is_err());
        assert!(invert(&ex, &[0.0; 11], 1, &cfg, &mut from_seed(0)).is_err());
        let neg = InversionConfig {
            lambda_tv: -1.0,
            ..Default::default()
        };
        assert!(invert(&ex, &[0.0; 12], 1, &neg, &mut from_seed(0)).is_err());
    }
}
