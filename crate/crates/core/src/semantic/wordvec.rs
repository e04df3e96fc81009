//! Whitespace-separated text vectors: `token v_1 ... v_dim` per line, with
//! an optional leading `count dim` header.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::space::{SemanticSpace, SpaceKind, Vocabulary};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct WordVectors {
    pub dim: usize,
    pub entries: Vec<(String, Vec<f64>)>,
}

impl WordVectors {
    pub fn into_space(self, kind: SpaceKind) -> Result<SemanticSpace> {
        SemanticSpace::new(kind, self.entries)
    }

    pub fn into_vocabulary(self) -> Result<Vocabulary> {
        Vocabulary::new(self.entries)
    }

    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .peekable();
        let mut header = None;
        if let Some((_, first)) = lines.peek() {
            let f: Vec<&str> = first.split_whitespace().collect();
            if let [a, b] = f.as_slice() {
                if let (Ok(count), Ok(dim)) = (a.parse::<usize>(), b.parse::<usize>()) {
                    header = Some((count, dim));
                    lines.next();
                }
            }
        }
        let mut dim = header.map(|h| h.1);
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for (n, line) in lines {
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-empty line").to_string();
            let values = fields
                .map(|s| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::format(context, format!("line {}: cannot parse '{s}' as a real", n + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::format(
                        context,
                        format!(
                            "line {}: token '{token}' has {} values, expected {d}",
                            n + 1,
                            values.len()
                        ),
                    ))
                }
                _ => {}
            }
            if !seen.insert(token.clone()) {
                return Err(Error::format(context, format!("duplicate token '{token}'")));
            }
            entries.push((token, values));
        }
        let dim = dim.unwrap_or(0);
        if dim == 0 {
            return Err(Error::format(context, "no vector entries"));
        }
        if let Some((count, _)) = header {
            if count != entries.len() {
                return Err(Error::format(
                    context,
                    format!("header says {count} entries, found {}", entries.len()),
                ));
            }
        }
        Ok(WordVectors { dim, entries })
    }

    /// Text form with a `count dim` header. Values use shortest round-trip
    /// formatting.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.entries.len(), self.dim);
        for (t, v) in &self.entries {
            s.push_str(t);
            for x in v {
                write!(s, " {x}").expect("string write");
            }
            s.push('\n');
        }
        s
    }
}

pub fn load_word_vectors(path: impl AsRef<Path>) -> Result<WordVectors> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    WordVectors::parse(&text, &path.display().to_string())
}

pub fn save_word_vectors(path: impl AsRef<Path>, wv: &WordVectors) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, wv.to_text()).map_err(|e| Error::io(path, e))
}

impl From<&SemanticSpace> for WordVectors {
    fn from(s: &SemanticSpace) -> Self {
        WordVectors {
            dim: s.dim(),
            entries: s.entries().map(|(l, v)| (l.to_string(), v.to_vec())).collect(),
        }
    }
}
