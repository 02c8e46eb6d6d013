use std::fs;
use std::path::Path;

use clustermirror::affine_base::EigenrayDiagram;
use clustermirror::filtered::{ComplexJson, FilteredComplex};
use clustermirror::laurent::{parse_series, SeriesJson};
use clustermirror::rational::{parse_q, Point};
use clustermirror::{LatticeSeries, RationalPolygon, Q};
use thiserror::Error;

/// Problems with the inputs themselves (exit code 2).
#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {msg}")]
    Syntax { path: String, line: usize, column: usize, msg: String },
    #[error("{path}: {msg}")]
    Content { path: String, msg: String },
    #[error("{0}")]
    Argument(String),
}

pub struct Loaded<T> {
    pub value: T,
    pub bytes: Vec<u8>,
}

pub fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| InputError::Read { path: path.display().to_string(), source })
}

fn syntax(path: &Path, e: &serde_json::Error) -> InputError {
    // serde_json appends " at line L column C"; the position is reported separately.
    let full = e.to_string();
    let msg = full.rsplit_once(" at line ").map_or(full.as_str(), |(m, _)| m).to_string();
    InputError::Syntax { path: path.display().to_string(), line: e.line(), column: e.column(), msg }
}

fn content(path: &Path, msg: impl ToString) -> InputError {
    InputError::Content { path: path.display().to_string(), msg: msg.to_string() }
}

/// Parses a diagram without validating it; validation is a check, not an input error.
pub fn diagram_unchecked(path: &Path) -> Result<Loaded<EigenrayDiagram>, InputError> {
    let text = read(path)?;
    let value = serde_json::from_str(&text).map_err(|e| syntax(path, &e))?;
    Ok(Loaded { value, bytes: text.into_bytes() })
}

pub fn diagram(path: &Path) -> Result<Loaded<EigenrayDiagram>, InputError> {
    let d = diagram_unchecked(path)?;
    d.value.validate().map_err(|e| content(path, e))?;
    Ok(d)
}

/// A series in JSON form, or in text form with an optional default reference.
pub fn series(path: &Path, default_ref: Option<&RationalPolygon>) -> Result<Loaded<LatticeSeries>, InputError> {
    let text = read(path)?;
    let value = if text.trim_start().starts_with('{') {
        let j: SeriesJson = serde_json::from_str(&text).map_err(|e| syntax(path, &e))?;
        LatticeSeries::from_json(&j).map_err(|e| content(path, e))?
    } else {
        let body: String = text.lines().filter(|l| !l.trim_start().starts_with('#')).collect::<Vec<_>>().join(" ");
        parse_series(&body, default_ref).map_err(|e| content(path, e))?
    };
    Ok(Loaded { value, bytes: text.into_bytes() })
}

pub fn complex(path: &Path) -> Result<Loaded<FilteredComplex>, InputError> {
    let text = read(path)?;
    let j: ComplexJson = serde_json::from_str(&text).map_err(|e| syntax(path, &e))?;
    let value = FilteredComplex::from_json(&j).map_err(|e| content(path, e))?;
    Ok(Loaded { value, bytes: text.into_bytes() })
}

pub fn rational(s: &str) -> Result<Q, InputError> {
    parse_q(s.trim()).ok_or_else(|| InputError::Argument(format!("not a rational number: `{s}`")))
}

/// A polygon given by its vertices, `x,y;x,y;...`.
pub fn polygon(s: &str) -> Result<RationalPolygon, InputError> {
    let pts: Vec<Point> = s
        .split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.split(',').map(rational).collect::<Result<Point, _>>())
        .collect::<Result<_, _>>()?;
    RationalPolygon::convex_hull(&pts).map_err(|e| InputError::Argument(format!("polygon `{s}`: {e}")))
}

/// `--overlay` values: `Pa:k=1,a=1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Overlay {
    Pa { k: u32, a: Q },
}

pub fn overlay(s: &str) -> Result<Overlay, InputError> {
    let bad = || InputError::Argument(format!("bad overlay `{s}`; expected Pa:k=<k>,a=<a>"));
    let (kind, args) = s.split_once(':').ok_or_else(bad)?;
    if kind != "Pa" {
        return Err(bad());
    }
    let (mut k, mut a) = (None, None);
    for kv in args.split(',') {
        match kv.split_once('=').ok_or_else(bad)? {
            ("k", v) => k = Some(v.trim().parse::<u32>().map_err(|_| bad())?),
            ("a", v) => a = Some(rational(v)?),
            _ => return Err(bad()),
        }
    }
    match (k, a) {
        (Some(k), Some(a)) if k > 0 && a > Q::from_integer(0.into()) => Ok(Overlay::Pa { k, a }),
        _ => Err(bad()),
    }
}
