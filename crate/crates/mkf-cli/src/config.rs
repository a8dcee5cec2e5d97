//! Flat key-value configuration files with `[section]` headers, plus a small
//! constant-expression evaluator so values can be written as `pi/12` or
//! `2*pi`. Keys may repeat (e.g. one `landmark` line per landmark).

use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;

#[derive(Clone, Debug, Default)]
pub struct Config {
    sections: BTreeMap<String, Vec<(String, String)>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        let mut current = String::from("");
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {}: unterminated section header", lineno + 1))?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            sections
                .entry(current.clone())
                .or_default()
                .push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(Config { sections })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Config::parse(&text)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|entries| {
            entries
                .iter()
                .rev()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
        })
    }

    pub fn get_all(&self, section: &str, key: &str) -> Vec<&str> {
        self.sections
            .get(section)
            .map(|entries| {
                entries
                    .iter()
                    .filter(|(k, _)| k == key)
                    .map(|(_, v)| v.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    /// Keys of a section in file order, first occurrence wins.
    pub fn section_keys(&self, section: &str) -> Vec<String> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        if let Some(entries) = self.sections.get(section) {
            for (k, _) in entries {
                if seen.insert(k.clone()) {
                    out.push(k.clone());
                }
            }
        }
        out
    }

    pub fn get_number(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.get(section, key)
            .map(|v| eval_number(v).with_context(|| format!("[{section}] {key} = {v}")))
            .transpose()
    }

    pub fn number_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        Ok(self.get_number(section, key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .with_context(|| format!("[{section}] {key} = {v}: expected an integer")),
        }
    }

    pub fn numbers(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(section, key)
            .map(|v| {
                v.split_whitespace()
                    .map(|tok| eval_number(tok).with_context(|| format!("[{section}] {key}")))
                    .collect()
            })
            .transpose()
    }
}

/// Evaluates a constant arithmetic expression: numbers, `pi`/`tau`/`e`,
/// `+ - * / ^`, unary minus, cos/sin, parentheses.
pub fn eval_number(text: &str) -> Result<f64> {
    let tokens: Vec<char> = text.chars().collect();
    let mut pos = 0usize;
    let value = eval_sum(&tokens, &mut pos)?;
    skip_ws(&tokens, &mut pos);
    if pos != tokens.len() {
        bail!("trailing input in numeric expression `{text}`");
    }
    if !value.is_finite() {
        bail!("numeric expression `{text}` is not finite");
    }
    Ok(value)
}

fn skip_ws(t: &[char], pos: &mut usize) {
    while *pos < t.len() && t[*pos].is_whitespace() {
        *pos += 1;
    }
}

fn eval_sum(t: &[char], pos: &mut usize) -> Result<f64> {
    let mut acc = eval_product(t, pos)?;
    loop {
        skip_ws(t, pos);
        match t.get(*pos) {
            Some('+') => {
                *pos += 1;
                acc += eval_product(t, pos)?;
            }
            Some('-') => {
                *pos += 1;
                acc -= eval_product(t, pos)?;
            }
            _ => return Ok(acc),
        }
    }
}

fn eval_product(t: &[char], pos: &mut usize) -> Result<f64> {
    let mut acc = eval_power(t, pos)?;
    loop {
        skip_ws(t, pos);
        match t.get(*pos) {
            Some('*') => {
                *pos += 1;
                acc *= eval_power(t, pos)?;
            }
            Some('/') => {
                *pos += 1;
                acc /= eval_power(t, pos)?;
            }
            _ => return Ok(acc),
        }
    }
}

fn eval_power(t: &[char], pos: &mut usize) -> Result<f64> {
    let base = eval_atom(t, pos)?;
    skip_ws(t, pos);
    if t.get(*pos) == Some(&'^') {
        *pos += 1;
        let exp = eval_atom(t, pos)?;
        return Ok(base.powf(exp));
    }
    Ok(base)
}

fn eval_atom(t: &[char], pos: &mut usize) -> Result<f64> {
    skip_ws(t, pos);
    match t.get(*pos) {
        Some('-') => {
            *pos += 1;
            Ok(-eval_atom(t, pos)?)
        }
        Some('(') => {
            *pos += 1;
            let v = eval_sum(t, pos)?;
            skip_ws(t, pos);
            if t.get(*pos) != Some(&')') {
                bail!("expected `)` in numeric expression");
            }
            *pos += 1;
            Ok(v)
        }
        Some(c) if c.is_ascii_digit() || *c == '.' => {
            let start = *pos;
            while *pos < t.len()
                && (t[*pos].is_ascii_digit()
                    || t[*pos] == '.'
                    || t[*pos] == 'e'
                    || t[*pos] == 'E'
                    || ((t[*pos] == '+' || t[*pos] == '-')
                        && *pos > start
                        && (t[*pos - 1] == 'e' || t[*pos - 1] == 'E')))
            {
                *pos += 1;
            }
            let s: String = t[start..*pos].iter().collect();
            s.parse().map_err(|_| anyhow!("invalid number `{s}`"))
        }
        Some(c) if c.is_ascii_alphabetic() => {
            let start = *pos;
            while *pos < t.len() && t[*pos].is_ascii_alphanumeric() {
                *pos += 1;
            }
            let ident: String = t[start..*pos].iter().collect();
            match ident.as_str() {
                "pi" => Ok(std::f64::consts::PI),
                "tau" => Ok(std::f64::consts::TAU),
                "e" => Ok(std::f64::consts::E),
                "cos" | "sin" => {
                    skip_ws(t, pos);
                    if t.get(*pos) != Some(&'(') {
                        bail!("expected `(` after {ident}");
                    }
                    *pos += 1;
                    let v = eval_sum(t, pos)?;
                    skip_ws(t, pos);
                    if t.get(*pos) != Some(&')') {
                        bail!("expected `)` after {ident} argument");
                    }
                    *pos += 1;
                    Ok(if ident == "cos" { v.cos() } else { v.sin() })
                }
                other => bail!("unknown constant `{other}`"),
            }
        }
        other => bail!("unexpected token {other:?} in numeric expression"),
    }
}

/// Parses a distribution description: `gaussian <mean> <variance>`,
/// `exponential <rate>`, or `uniform <lower> <upper>`.
pub fn parse_distribution(text: &str) -> Result<mkf::dist::Distribution1D> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    let nums: Result<Vec<f64>> = fields[1..].iter().map(|f| eval_number(f)).collect();
    let nums = nums?;
    let d = match (fields.first().copied(), nums.as_slice()) {
        (Some("gaussian"), [mean, var]) => mkf::dist::Distribution1D::gaussian(*mean, *var),
        (Some("exponential"), [rate]) => mkf::dist::Distribution1D::exponential(*rate),
        (Some("uniform"), [a, b]) => mkf::dist::Distribution1D::uniform(*a, *b),
        _ => bail!("invalid distribution `{text}` (expected `gaussian m v`, `exponential r`, or `uniform a b`)"),
    };
    d.map_err(|e| anyhow!("{e}"))
}
