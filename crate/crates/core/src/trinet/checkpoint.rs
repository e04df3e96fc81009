//! `TRIN` checkpoints.
//!
//! ```text
//! magic "TRIN" | version u32 | config length u32 | config (UTF-8 key = value)
//! | tensor count u32 | per tensor: rank u32, dims u32 each, data f32
//! ```
//!
//! Tensors follow a fixed order: extractor blocks then head (weight, bias
//! each) when an extractor is present, then the TriNet merges, encoder
//! head, expansion and per-level un-merge maps. Values are stored as `f32`;
//! trained models are already rounded to `f32` so a save/load round trip
//! reproduces them exactly.

use std::fs;
use std::path::Path;

use super::config::TriNetConfig;
use super::model::TriNetModel;
use crate::autodiff::{Parameterized, Tensor};
use crate::error::{Error, Result};
use crate::extractor::{ExtractorConfig, ToyExtractor};
use crate::kv;

pub const TRIN_MAGIC: &[u8; 4] = b"TRIN";
pub const TRIN_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub trinet: TriNetModel,
    pub extractor: Option<ToyExtractor>,
}

impl Checkpoint {
    fn config_text(&self) -> String {
        let mut pairs = self.trinet.config.to_kv();
        if let Some(ex) = &self.extractor {
            pairs.push(("extractor.input_dim".into(), ex.config.input_dim.to_string()));
            pairs.push(("extractor.level_dims".into(), kv::join(&ex.config.level_dims)));
            pairs.push(("extractor.n_classes".into(), ex.config.n_classes.to_string()));
        }
        kv::render(&pairs)
    }

    pub fn encode(&self) -> Vec<u8> {
        let cfg = self.config_text();
        let mut out = Vec::new();
        out.extend_from_slice(TRIN_MAGIC);
        out.extend_from_slice(&TRIN_VERSION.to_le_bytes());
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(cfg.as_bytes());
        let tensors: Vec<&Tensor> = self
            .extractor
            .iter()
            .flat_map(|e| e.params())
            .chain(self.trinet.params())
            .collect();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for t in tensors {
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &x in t.data() {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let fmt_err = |m: String| Error::format("TRIN", m);
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = pos + n;
            if end > bytes.len() {
                return Err(Error::format("TRIN", format!("truncated at byte {pos}")));
            }
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        if take(4)? != TRIN_MAGIC {
            return Err(fmt_err("bad magic".into()));
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes"));
        let version = u32_at(take(4)?);
        if version != TRIN_VERSION {
            return Err(fmt_err(format!("unsupported version {version}")));
        }
        let clen = u32_at(take(4)?) as usize;
        let text = std::str::from_utf8(take(clen)?).map_err(|_| fmt_err("config is not UTF-8".into()))?;
        let pairs = kv::parse(text, "TRIN config")?;
        let (ex_pairs, tn_pairs): (Vec<_>, Vec<_>) = pairs.into_iter().partition(|(k, _)| k.starts_with("extractor."));
        let tn_cfg = TriNetConfig::from_kv(&tn_pairs)?;
        let ex_cfg = if ex_pairs.is_empty() {
            None
        } else {
            let get = |key: &str| {
                ex_pairs
                    .iter()
                    .find(|(k, _)| k == key)
                    .map(|(_, v)| v.as_str())
                    .ok_or_else(|| Error::format("TRIN", format!("missing {key}")))
            };
            let cfg = ExtractorConfig {
                input_dim: kv::parse_num("extractor.input_dim", get("extractor.input_dim")?)?,
                level_dims: kv::parse_list("extractor.level_dims", get("extractor.level_dims")?)?,
                n_classes: kv::parse_num("extractor.n_classes", get("extractor.n_classes")?)?,
            };
            cfg.validate()?;
            Some(cfg)
        };
        let mut extractor = ex_cfg.map(ToyExtractor::zeros).transpose()?;
        let mut trinet = TriNetModel::zeros(tn_cfg)?;
        let count = u32_at(take(4)?) as usize;
        let mut targets: Vec<&mut Tensor> = extractor
            .iter_mut()
            .flat_map(|e| e.params_mut())
            .chain(trinet.params_mut())
            .collect();
        if count != targets.len() {
            return Err(fmt_err(format!("expected {} tensors, found {count}", targets.len())));
        }
        for (i, t) in targets.iter_mut().enumerate() {
            let rank = u32_at(take(4)?) as usize;
            let dims = (0..rank)
                .map(|_| take(4).map(|s| u32_at(s) as usize))
                .collect::<Result<Vec<_>>>()?;
            if dims != t.shape() {
                return Err(fmt_err(format!(
                    "tensor {i}: shape {dims:?} does not match config {:?}",
                    t.shape()
                )));
            }
            let n = t.len();
            let raw = take(4 * n)?;
            for (dst, chunk) in t.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
                let x = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
                if !x.is_finite() {
                    return Err(fmt_err(format!("tensor {i}: non-finite value")));
                }
                *dst = f64::from(x);
            }
        }
        if pos != bytes.len() {
            return Err(fmt_err(format!("{} trailing bytes", bytes.len() - pos)));
        }
        Ok(Checkpoint { trinet, extractor })
    }
}

pub fn save_model(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ck.encode()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::decode(&bytes)
}
