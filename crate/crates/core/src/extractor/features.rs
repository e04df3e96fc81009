//! Multi-level feature records and the `MLFA` binary container.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "MLFA" | version u32 | L u32 | d_1..d_L u32 | count u64 |
//! count × ( instance-id u64 | class-id u32 | Σd_l × f32 )
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MLFA_MAGIC: &[u8; 4] = b"MLFA";
pub const MLFA_VERSION: u32 = 1;

/// Per-level feature vectors of one instance, level 1 first.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiLevelFeature {
    levels: Vec<Vec<f64>>,
}

impl MultiLevelFeature {
    pub fn new(levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument(
                "a multi-level feature needs at least one level".into(),
            ));
        }
        if levels.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite feature value".into()));
        }
        Ok(MultiLevelFeature { levels })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Level `l`, counted from 1.
    pub fn level(&self, l: usize) -> &[f64] {
        &self.levels[l - 1]
    }

    pub fn last(&self) -> &[f64] {
        self.levels.last().expect("non-empty")
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn into_levels(self) -> Vec<Vec<f64>> {
        self.levels
    }

    pub fn dims(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    pub fn check_dims(&self, dims: &[usize]) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::dim(
                "MultiLevelFeature",
                format!("{dims:?}"),
                format!("{:?}", self.dims()),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub id: u64,
    pub class: u32,
    pub feature: MultiLevelFeature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitRole {
    Base,
    Novel,
    Support,
    Test,
}

/// A labelled set of records sharing one per-level shape.
///
/// In raw-input mode the records hold a single level: the extractor input.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub role: SplitRole,
    pub dims: Vec<usize>,
    pub records: Vec<Record>,
}

impl DatasetSplit {
    pub fn new(role: SplitRole, dims: Vec<usize>, records: Vec<Record>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidArgument("split needs at least one level".into()));
        }
        for r in &records {
            r.feature.check_dims(&dims)?;
        }
        Ok(DatasetSplit { role, dims, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn classes(&self) -> BTreeSet<u32> {
        self.records.iter().map(|r| r.class).collect()
    }

    pub fn ids(&self) -> BTreeSet<u64> {
        self.records.iter().map(|r| r.id).collect()
    }

    pub fn with_role(mut self, role: SplitRole) -> Self {
        self.role = role;
        self
    }

    /// Records of one class in file order.
    pub fn of_class(&self, class: u32) -> Vec<&Record> {
        self.records.iter().filter(|r| r.class == class).collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let width: usize = self.dims.iter().sum();
        let mut out = Vec::with_capacity(24 + self.records.len() * (12 + 4 * width));
        out.extend_from_slice(MLFA_MAGIC);
        out.extend_from_slice(&MLFA_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&r.id.to_le_bytes());
            out.extend_from_slice(&r.class.to_le_bytes());
            for x in r.feature.levels.iter().flatten() {
                out.extend_from_slice(&(*x as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], role: SplitRole) -> Result<Self> {
        let mut rd = Reader { bytes, pos: 0 };
        if rd.take(4)? != MLFA_MAGIC {
            return Err(Error::format("MLFA", "bad magic"));
        }
        let version = rd.u32()?;
        if version != MLFA_VERSION {
            return Err(Error::format("MLFA", format!("unsupported version {version}")));
        }
        let l = rd.u32()? as usize;
        if l == 0 {
            return Err(Error::format("MLFA", "zero levels"));
        }
        let dims = (0..l)
            .map(|_| rd.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if dims.contains(&0) {
            return Err(Error::format("MLFA", "zero-width level"));
        }
        let count = rd.u64()?;
        let width: usize = dims.iter().sum();
        let needed = count
            .checked_mul(12 + 4 * width as u64)
            .ok_or_else(|| Error::format("MLFA", "record count overflows"))?;
        if (bytes.len() - rd.pos) as u64 != needed {
            return Err(Error::format(
                "MLFA",
                format!(
                    "expected {needed} payload bytes for {count} records, found {}",
                    bytes.len() - rd.pos
                ),
            ));
        }
        let mut records = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let id = rd.u64()?;
            let class = rd.u32()?;
            let mut levels = Vec::with_capacity(l);
            for &d in &dims {
                let v = (0..d).map(|_| rd.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
                levels.push(v);
            }
            let feature =
                MultiLevelFeature::new(levels).map_err(|e| Error::format("MLFA", format!("record {id}: {e}")))?;
            records.push(Record { id, class, feature });
        }
        Ok(DatasetSplit { role, dims, records })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::format("MLFA", format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn save_features(path: impl AsRef<Path>, split: &DatasetSplit) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, split.encode()).map_err(|e| Error::io(path, e))
}

pub fn load_features(path: impl AsRef<Path>, role: SplitRole) -> Result<DatasetSplit> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    DatasetSplit::decode(&bytes, role).map_err(|e| match e {
        Error::Format { message, .. } => Error::format(path.display().to_string(), message),
        other => other,
    })
}

/// Base and novel class sets must not overlap.
pub fn check_disjoint_classes(base: &DatasetSplit, novel: &DatasetSplit) -> Result<()> {
    let shared: Vec<_> = base.classes().intersection(&novel.classes()).copied().collect();
    if shared.is_empty() {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "base and novel splits share classes {shared:?}"
        )))
    }
}

/// Support and test share their class set and no instance id.
pub fn check_support_test(support: &DatasetSplit, test: &DatasetSplit) -> Result<()> {
    if support.classes() != test.classes() {
        return Err(Error::Contract("support and test class sets differ".into()));
    }
    if support.ids().intersection(&test.ids()).next().is_some() {
        return Err(Error::Contract("support and test share instance ids".into()));
    }
    Ok(())
}


/// Class-id to semantic label map, stored as `<class-id> <label>` lines.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClassNames {
    map: std::collections::BTreeMap<u32, String>,
}

impl ClassNames {
    pub fn new(pairs: impl IntoIterator<Item = (u32, String)>) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        let mut seen = BTreeSet::new();
        for (id, name) in pairs {
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!(
                    "class label '{name}' must be a single token"
                )));
            }
            if !seen.insert(name.clone()) || map.insert(id, name).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate class id or label at id {id}"
                )));
            }
        }
        Ok(ClassNames { map })
    }

    pub fn get(&self, id: u32) -> Result<&str> {
        self.map
            .get(&id)
            .map(String::as_str)
            .ok_or_else(|| Error::Contract(format!("class id {id} has no label")))
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.map.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.map.iter().map(|(id, n)| format!("{id} {n}\n")).collect()
    }

    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut pairs = vec![];
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(id), Some(name), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::format(
                    context,
                    format!("line {}: expected '<id> <label>'", n + 1),
                ));
            };
            let id = id
                .parse::<u32>()
                .map_err(|_| Error::format(context, format!("line {}: bad class id '{id}'", n + 1)))?;
            pairs.push((id, name.to_string()));
        }
        ClassNames::new(pairs).map_err(|e| Error::format(context, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
