//! Line-oriented text documents used for model files.
//!
//! Each record is one line: a tag followed by `key=value` fields, a tag
//! followed by a JSON value, or a row of space-separated reals. Reals are
//! written with enough digits to parse back bit-exactly.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::scalar::{fmt_exact, Real};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}: {msg}")]
    Parse {
        origin: String,
        line: usize,
        msg: String,
    },
    #[error("{origin}: unsupported model format version {found}, expected {expected}")]
    Version {
        origin: String,
        found: String,
        expected: u32,
    },
    #[error("{origin}: file ends after line {line} while reading {what}")]
    Truncated {
        origin: String,
        line: usize,
        what: String,
    },
    #[error("invalid model: {0}")]
    Invalid(String),
}

impl ModelError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ModelError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub(crate) fn push_reals<T: Real>(out: &mut String, values: &[T]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&fmt_exact(*v));
    }
    out.push('\n');
}

pub(crate) fn push_json<S: Serialize>(out: &mut String, tag: &str, value: &S) {
    out.push_str(tag);
    out.push(' ');
    out.push_str(&serde_json::to_string(value).expect("configuration serializes"));
    out.push('\n');
}

/// `key=value` fields of one tagged line.
pub(crate) struct Fields<'a> {
    origin: String,
    line: usize,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    pub(crate) fn line(&self) -> usize {
        self.line
    }

    pub(crate) fn raw(&self, key: &str) -> Result<&'a str, ModelError> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| ModelError::Parse {
                origin: self.origin.clone(),
                line: self.line,
                msg: format!("missing field {key}="),
            })
    }

    pub(crate) fn get<F: FromStr>(&self, key: &str) -> Result<F, ModelError> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| ModelError::Parse {
            origin: self.origin.clone(),
            line: self.line,
            msg: format!("invalid value {v:?} for {key}"),
        })
    }
}

pub(crate) struct DocReader<'a> {
    origin: String,
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> DocReader<'a> {
    pub(crate) fn new(text: &'a str, origin: &str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        DocReader {
            origin: origin.to_string(),
            lines,
            pos: 0,
        }
    }

    pub(crate) fn origin(&self) -> &str {
        &self.origin
    }

    pub(crate) fn error(&self, line: usize, msg: impl Into<String>) -> ModelError {
        ModelError::Parse {
            origin: self.origin.clone(),
            line,
            msg: msg.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), ModelError> {
        match self.lines.get(self.pos) {
            Some(&l) => {
                self.pos += 1;
                Ok(l)
            }
            None => Err(ModelError::Truncated {
                origin: self.origin.clone(),
                line: self.lines.last().map_or(0, |l| l.0),
                what: what.to_string(),
            }),
        }
    }

    fn split_tag(&mut self, tag: &str) -> Result<(usize, &'a str), ModelError> {
        let (line, text) = self.next(tag)?;
        let rest = text
            .strip_prefix(tag)
            .filter(|r| r.is_empty() || r.starts_with(char::is_whitespace))
            .ok_or_else(|| self.error(line, format!("expected a {tag} line")))?;
        Ok((line, rest.trim()))
    }

    pub(crate) fn fields(&mut self, tag: &str) -> Result<Fields<'a>, ModelError> {
        let (line, rest) = self.split_tag(tag)?;
        let mut pairs = Vec::new();
        for tok in rest.split_whitespace() {
            let kv = tok
                .split_once('=')
                .ok_or_else(|| self.error(line, format!("expected key=value, found {tok:?}")))?;
            pairs.push(kv);
        }
        Ok(Fields {
            origin: self.origin.clone(),
            line,
            pairs,
        })
    }

    pub(crate) fn json<D: DeserializeOwned>(&mut self, tag: &str) -> Result<D, ModelError> {
        let (line, rest) = self.split_tag(tag)?;
        serde_json::from_str(rest).map_err(|e| self.error(line, format!("invalid {tag}: {e}")))
    }

    /// One row of exactly `n` finite reals.
    pub(crate) fn reals<T: Real>(&mut self, n: usize, what: &str) -> Result<Vec<T>, ModelError> {
        let (line, text) = self.next(what)?;
        let mut out = Vec::with_capacity(n);
        for (k, tok) in text.split_whitespace().enumerate() {
            let v = tok
                .parse::<T>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    self.error(
                        line,
                        format!("{what}: value {k} ({tok:?}) is not a finite number"),
                    )
                })?;
            out.push(v);
        }
        if out.len() != n {
            return Err(self.error(
                line,
                format!("{what}: expected {n} values, found {}", out.len()),
            ));
        }
        Ok(out)
    }

    pub(crate) fn expect_end(&mut self) -> Result<(), ModelError> {
        let (line, text) = self.next("end marker")?;
        if text != "end" {
            return Err(self.error(line, "expected end marker"));
        }
        if let Some(&(line, _)) = self.lines.get(self.pos) {
            return Err(self.error(line, "content after end marker"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_and_errors() {
        let mut s = String::new();
        push_reals(&mut s, &[0.1f64, -1.0 / 3.0]);
        let text = format!("# c\nrow a=1 b=x\n{s}1 2 nan\n");
        let mut r = DocReader::new(&text, "doc");
        let f = r.fields("row").unwrap();
        assert_eq!(f.get::<u32>("a").unwrap(), 1);
        assert!(f.get::<u32>("b").is_err());
        assert!(f.raw("c").is_err());
        assert_eq!(r.reals::<f64>(2, "w").unwrap(), vec![0.1, -1.0 / 3.0]);
        let e = r.reals::<f64>(3, "w").unwrap_err().to_string();
        assert!(e.starts_with("doc:4:"), "{e}");
        assert!(matches!(
            r.reals::<f64>(1, "w"),
            Err(ModelError::Truncated { .. })
        ));
    }
}
