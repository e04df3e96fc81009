//! Augmented sets on disk: an MLFA container holding only final-layer
//! vectors plus a text manifest with one line per record:
//!
//! ```text
//! # id source method level
//! 0 17 SG 2
//! ```

use std::fs;
use std::path::Path;

use super::{Method, SynthFeature};
use crate::error::{Error, Result};
use crate::extractor::{load_features, save_features, DatasetSplit, MultiLevelFeature, Record, SplitRole};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: u64,
    pub source: u64,
    pub method: Method,
    pub level: usize,
}

/// Synthesized final-layer vectors of one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedSet {
    pub dim: usize,
    pub features: Vec<SynthFeature>,
    /// Free-form `# ` lines written at the top of the manifest.
    pub notes: Vec<String>,
}

impl AugmentedSet {
    pub fn new(dim: usize, features: Vec<SynthFeature>) -> Result<Self> {
        if let Some(f) = features.iter().find(|f| f.vector.len() != dim) {
            return Err(Error::dim("AugmentedSet", dim, f.vector.len()));
        }
        Ok(AugmentedSet {
            dim,
            features,
            notes: vec![],
        })
    }

    /// Records get ids `0..n` in order.
    pub fn to_split(&self) -> Result<DatasetSplit> {
        let records = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                Ok(Record {
                    id: i as u64,
                    class: f.label,
                    feature: MultiLevelFeature::new(vec![f.vector.clone()])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DatasetSplit::new(SplitRole::Support, vec![self.dim], records)
    }

    pub fn manifest_text(&self) -> String {
        let mut out = String::new();
        for n in &self.notes {
            out.push_str(&format!("# {n}\n"));
        }
        out.push_str("# id source method level\n");
        for (i, f) in self.features.iter().enumerate() {
            out.push_str(&format!("{i} {} {} {}\n", f.source, f.method, f.level));
        }
        out
    }

    pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
        let bad = |n: usize, m: &str| Error::format("augmentation manifest", format!("line {n}: {m}"));
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|(n, l)| {
                let t: Vec<&str> = l.split_whitespace().collect();
                if t.len() != 4 {
                    return Err(bad(n + 1, "expected 4 fields"));
                }
                Ok(ManifestEntry {
                    id: t[0].parse().map_err(|_| bad(n + 1, "bad id"))?,
                    source: t[1].parse().map_err(|_| bad(n + 1, "bad source id"))?,
                    method: t[2].parse().map_err(|_| bad(n + 1, "bad method"))?,
                    level: t[3].parse().map_err(|_| bad(n + 1, "bad level"))?,
                })
            })
            .collect()
    }
}

pub fn save_augmented(
    features_path: impl AsRef<Path>,
    manifest_path: impl AsRef<Path>,
    set: &AugmentedSet,
) -> Result<()> {
    save_features(features_path, &set.to_split()?)?;
    let mp = manifest_path.as_ref();
    fs::write(mp, set.manifest_text()).map_err(|e| Error::io(mp, e))
}

/// Reads a set back; vectors come back at `f32` precision.
pub fn load_augmented(features_path: impl AsRef<Path>, manifest_path: impl AsRef<Path>) -> Result<AugmentedSet> {
    let split = load_features(features_path, SplitRole::Support)?;
    if split.dims.len() != 1 {
        return Err(Error::format(
            "augmented set",
            format!("expected one level, found {}", split.dims.len()),
        ));
    }
    let mp = manifest_path.as_ref();
    if !mp.exists() {
        return Err(Error::MissingInput(mp.to_path_buf()));
    }
    let text = fs::read_to_string(mp).map_err(|e| Error::io(mp, e))?;
    let entries = AugmentedSet::parse_manifest(&text)?;
    if entries.len() != split.len() {
        return Err(Error::format(
            "augmented set",
            format!("{} manifest lines for {} records", entries.len(), split.len()),
        ));
    }
    let features = split
        .records
        .into_iter()
        .zip(entries)
        .map(|(r, e)| {
            if r.id != e.id {
                return Err(Error::format(
                    "augmented set",
                    format!("record {} paired with manifest id {}", r.id, e.id),
                ));
            }
            Ok(SynthFeature {
                source: e.source,
                label: r.class,
                method: e.method,
                level: e.level,
                vector: r.feature.into_levels().pop().expect("one level"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let notes = text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter(|l| *l != "id source method level")
        .map(String::from)
        .collect();
    Ok(AugmentedSet {
        dim: split.dims[0],
        features,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let feats = vec![
            SynthFeature {
                source: 4,
                label: 2,
                method: Method::Sg,
                level: 1,
                vector: vec![0.5, -1.25],
            },
            SynthFeature {
                source: 4,
                label: 2,
                method: Method::Noise,
                level: 4,
                vector: vec![2.0, 0.0],
            },
        ];
        let mut set = AugmentedSet::new(2, feats).unwrap();
        set.notes.push("layers 1..=4".into());
        let (f, m) = (dir.path().join("a.mlfa"), dir.path().join("a.manifest"));
        save_augmented(&f, &m, &set).unwrap();
        assert_eq!(load_augmented(&f, &m).unwrap(), set);
        fs::write(&m, "0 4 SG 1\n").unwrap();
        assert!(matches!(load_augmented(&f, &m), Err(Error::Format { .. })));
    }
}
