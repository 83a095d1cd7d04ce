//! Flat `key = value` experiment configuration with one nested call form
//! `name(args)` for the domain and the nonlinearity.

use std::collections::BTreeMap;

use crate::mesh::Domain;
use crate::nonlin::NonlinearitySpec;
use crate::{Error, Result};

/// A parsed right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    /// Comma-separated numbers.
    List(Vec<f64>),
    Text(String),
    Call { name: String, positional: Vec<f64>, named: Vec<(String, f64)> },
}

/// Parsed configuration, preserving source line numbers for diagnostics.
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, (Value, usize)>,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn parse_number(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| err(line, format!("expected a number, got `{}`", s.trim())))
}

fn parse_call(name: &str, args: &str, line: usize) -> Result<Value> {
    let mut positional = Vec::new();
    let mut named = Vec::new();
    for part in args.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        if let Some((k, v)) = part.split_once('=') {
            named.push((k.trim().to_string(), parse_number(v, line)?));
        } else {
            if !named.is_empty() {
                return Err(err(line, "positional argument after named argument"));
            }
            positional.push(parse_number(part, line)?);
        }
    }
    Ok(Value::Call { name: name.to_string(), positional, named })
}

fn parse_value(raw: &str, line: usize) -> Result<Value> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(err(line, "empty value"));
    }
    if let Some(open) = raw.find('(') {
        if raw.ends_with(')') {
            let name = raw[..open].trim();
            if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return parse_call(name, &raw[open + 1..raw.len() - 1], line);
            }
        }
        return Err(err(line, format!("malformed call `{raw}`")));
    }
    if raw.contains(',') {
        let nums: Result<Vec<f64>> = raw.split(',').map(|p| parse_number(p, line)).collect();
        return Ok(Value::List(nums?));
    }
    if let Ok(x) = raw.parse::<f64>() {
        return Ok(Value::Number(x));
    }
    Ok(Value::Text(raw.to_string()))
}

impl Config {
    pub fn parse(src: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in src.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(err(line, "empty key"));
            }
            // Reject `a == b` and keys that swallowed a call: a key must be
            // a bare identifier.
            if !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(err(line, format!("invalid key `{key}`")));
            }
            let v = parse_value(value, line)?;
            if entries.insert(key.to_string(), (v, line)).is_some() {
                return Err(err(line, format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key).map(|(v, _)| v)
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map(|&(_, l)| l).unwrap_or(0)
    }

    pub fn require(&self, key: &str) -> Result<&Value> {
        self.get(key).ok_or_else(|| err(0, format!("missing required key `{key}`")))
    }

    pub fn number(&self, key: &str) -> Result<f64> {
        match self.require(key)? {
            Value::Number(x) => Ok(*x),
            _ => Err(err(self.line_of(key), format!("`{key}` must be a number"))),
        }
    }

    pub fn number_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Number(x)) => Ok(*x),
            Some(_) => Err(err(self.line_of(key), format!("`{key}` must be a number"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        let x = self.number_or(key, default as f64)?;
        if x < 0.0 || x.fract() != 0.0 {
            return Err(err(self.line_of(key), format!("`{key}` must be a nonnegative integer")));
        }
        Ok(x as usize)
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        let x = self.number_or(key, default as f64)?;
        if x < 0.0 || x.fract() != 0.0 {
            return Err(err(self.line_of(key), format!("`{key}` must be a nonnegative integer")));
        }
        Ok(x as u64)
    }

    pub fn text_or(&self, key: &str, default: &str) -> Result<String> {
        match self.get(key) {
            None => Ok(default.to_string()),
            Some(Value::Text(s)) => Ok(s.clone()),
            Some(_) => Err(err(self.line_of(key), format!("`{key}` must be a word"))),
        }
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        match self.require(key)? {
            Value::List(v) => Ok(v.clone()),
            Value::Number(x) => Ok(vec![*x]),
            _ => Err(err(self.line_of(key), format!("`{key}` must be a number list"))),
        }
    }

    /// `domain = interval(a, b)` or `domain = rectangle(ax, bx, ay, by)`.
    pub fn domain(&self) -> Result<Domain<f64>> {
        let line = self.line_of("domain");
        match self.require("domain")? {
            Value::Call { name, positional, named } if named.is_empty() => match name.as_str() {
                "interval" if positional.len() == 2 => {
                    Ok(Domain::Interval { a: positional[0], b: positional[1] })
                }
                "rectangle" if positional.len() == 4 => Ok(Domain::Rectangle {
                    ax: positional[0],
                    bx: positional[1],
                    ay: positional[2],
                    by: positional[3],
                }),
                _ => Err(err(line, "domain must be interval(a,b) or rectangle(ax,bx,ay,by)")),
            },
            _ => Err(err(line, "domain must be interval(a,b) or rectangle(ax,bx,ay,by)")),
        }
    }

    /// `f = doublewell(k=...)` or `f = poly(c0, c1, ...)`; optional
    /// `beta = ...` shift override.
    pub fn nonlinearity(&self) -> Result<NonlinearitySpec<f64>> {
        let line = self.line_of("f");
        let spec = match self.require("f")? {
            Value::Call { name, positional, named } => match name.as_str() {
                "doublewell" => {
                    let k = match (positional.as_slice(), named.as_slice()) {
                        ([k], []) => *k,
                        ([], [(key, k)]) if key == "k" => *k,
                        _ => return Err(err(line, "doublewell takes a single parameter k")),
                    };
                    NonlinearitySpec::double_well(k)?
                }
                "poly" if named.is_empty() => NonlinearitySpec::poly(positional)?,
                _ => return Err(err(line, "f must be doublewell(k=...) or poly(c0, c1, ...)")),
            },
            _ => return Err(err(line, "f must be doublewell(k=...) or poly(c0, c1, ...)")),
        };
        match self.get("beta") {
            None => Ok(spec),
            Some(Value::Number(b)) => spec.with_beta(*b),
            Some(_) => Err(err(self.line_of("beta"), "`beta` must be a number")),
        }
    }
}
