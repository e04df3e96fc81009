use crate::error::{Error, Result};
use crate::kv;
use crate::semantic::SpaceKind;

/// How squared-error terms are reduced over feature dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    /// Mean over dimensions, then over the batch.
    Mean,
    /// Sum over dimensions, mean over the batch.
    Sum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriNetConfig {
    pub level_dims: Vec<usize>,
    pub semantic_dim: usize,
    /// Encoder cascade widths `w_1..w_L`; the decoder mirrors them.
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub lr: f64,
    pub lr_halving_period: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight of the TriNet loss in the joint objective.
    pub lambda_joint: f64,
    /// Weight of the squared-parameter penalty inside the TriNet loss.
    pub lambda_reg: f64,
    pub reduction: Reduction,
    /// Blocks TriNet-loss gradients from reaching the extractor.
    pub stop_extractor_grad: bool,
    pub space: SpaceKind,
}

/// `round(sqrt(d_l · s))`, at least 1.
pub fn default_hidden(level_dims: &[usize], semantic_dim: usize) -> Vec<usize> {
    level_dims
        .iter()
        .map(|&d| ((d as f64 * semantic_dim as f64).sqrt().round() as usize).max(1))
        .collect()
}

impl TriNetConfig {
    pub fn new(level_dims: Vec<usize>, semantic_dim: usize) -> Self {
        let hidden = default_hidden(&level_dims, semantic_dim);
        TriNetConfig {
            level_dims,
            semantic_dim,
            hidden,
            dropout: 0.5,
            lr: 1e-3,
            lr_halving_period: 10,
            epochs: 100,
            batch_size: 64,
            lambda_joint: 1.0,
            lambda_reg: 1e-4,
            reduction: Reduction::Mean,
            stop_extractor_grad: false,
            space: SpaceKind::Word,
        }
    }

    /// Settings for base sets of a few hundred instances, where an epoch is
    /// only a handful of steps: wide hidden layers, a faster start and a
    /// slower decay.
    pub fn small_data(level_dims: Vec<usize>, semantic_dim: usize) -> Self {
        let n = level_dims.len();
        TriNetConfig {
            hidden: vec![128; n],
            lr: 3e-3,
            lr_halving_period: 25,
            batch_size: 16,
            ..TriNetConfig::new(level_dims, semantic_dim)
        }
    }

    pub fn num_levels(&self) -> usize {
        self.level_dims.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("trinet: {m}")));
        if self.level_dims.is_empty() || self.level_dims.contains(&0) || self.semantic_dim == 0 {
            return bad("dims must be positive");
        }
        if self.hidden.len() != self.level_dims.len() || self.hidden.contains(&0) {
            return bad("one positive hidden width per level required");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.lambda_reg >= 0.0) || !(self.lambda_joint >= 0.0) {
            return bad("lambdas must be non-negative");
        }
        if !(self.lr > 0.0) || self.batch_size == 0 || self.lr_halving_period == 0 {
            return bad("lr, batch size and halving period must be positive");
        }
        Ok(())
    }

    /// Learning rate for a 0-based epoch index.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr / 2f64.powi((epoch / self.lr_halving_period) as i32)
    }

    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut v = vec![
            ("level_dims", kv::join(&self.level_dims)),
            ("semantic_dim", self.semantic_dim.to_string()),
            ("hidden", kv::join(&self.hidden)),
            ("dropout", self.dropout.to_string()),
            ("lr", self.lr.to_string()),
            ("lr_halving_period", self.lr_halving_period.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("lambda_joint", self.lambda_joint.to_string()),
            ("lambda_reg", self.lambda_reg.to_string()),
            (
                "reduction",
                match self.reduction {
                    Reduction::Mean => "mean",
                    Reduction::Sum => "sum",
                }
                .to_string(),
            ),
            ("stop_extractor_grad", self.stop_extractor_grad.to_string()),
            ("space", self.space.to_string()),
        ];
        v.drain(..).map(|(k, val)| (k.to_string(), val)).collect()
    }

    /// Applies one key; returns `false` for keys this config does not own.
    pub fn set(&mut self, key: &str, v: &str) -> Result<bool> {
        match key {
            "level_dims" => self.level_dims = kv::parse_list(key, v)?,
            "semantic_dim" => self.semantic_dim = kv::parse_num(key, v)?,
            "hidden" => self.hidden = kv::parse_list(key, v)?,
            "dropout" => self.dropout = kv::parse_num(key, v)?,
            "lr" => self.lr = kv::parse_num(key, v)?,
            "lr_halving_period" => self.lr_halving_period = kv::parse_num(key, v)?,
            "epochs" => self.epochs = kv::parse_num(key, v)?,
            "batch_size" => self.batch_size = kv::parse_num(key, v)?,
            "lambda_joint" => self.lambda_joint = kv::parse_num(key, v)?,
            "lambda_reg" => self.lambda_reg = kv::parse_num(key, v)?,
            "reduction" => {
                self.reduction = match v {
                    "mean" => Reduction::Mean,
                    "sum" => Reduction::Sum,
                    _ => return Err(Error::Config(format!("bad reduction '{v}'"))),
                }
            }
            "stop_extractor_grad" => self.stop_extractor_grad = kv::parse_bool(key, v)?,
            "space" => self.space = v.parse()?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn from_kv(pairs: &[(String, String)]) -> Result<Self> {
        let mut cfg = TriNetConfig::new(vec![1], 1);
        let mut hidden_set = false;
        for (k, v) in pairs {
            hidden_set |= k == "hidden";
            if !cfg.set(k, v)? {
                return Err(Error::Config(format!("unknown trinet key '{k}'")));
            }
        }
        if !hidden_set {
            cfg.hidden = default_hidden(&cfg.level_dims, cfg.semantic_dim);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
