//! Flat `key = value` text with `#` comments.

use crate::error::{Error, Result};

pub fn parse(text: &str, context: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{context}:{}: expected 'key = value'", n + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("{context}:{}: empty key", n + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn render(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value '{v}' for '{key}'")))
}

pub fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.is_empty() {
        return Ok(vec![]);
    }
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

pub fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean '{v}' for '{key}'"))),
    }
}

pub fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blanks() {
        let p = parse("# header\n a = 1 \n\nb=x # trailing\n", "t").unwrap();
        assert_eq!(p, vec![("a".into(), "1".into()), ("b".into(), "x".into())]);
        assert!(parse("novalue\n", "t").is_err());
        assert_eq!(parse(&render(&p), "t").unwrap(), p);
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<usize>("k", "1, 2,3").unwrap(), vec![1, 2, 3]);
        assert!(parse_list::<usize>("k", "1,x").is_err());
    }
}
