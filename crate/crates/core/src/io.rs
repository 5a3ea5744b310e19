//! Operator JSON and CSV exports.
//!
//! Operator files look like `{"m": 3, "P": [[[...]]]}` with `P[i][j][k]`
//! nested in that order. Positions in the nesting are 1-based species
//! labels in documentation and CLI output, 0-based in the Rust API.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{LimitKind, OmegaLimit, Orbit};
use crate::error::{QsoError, Result};
use crate::qso::{CubicMatrix, SimplexPoint};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorFile {
    m: usize,
    #[serde(rename = "P")]
    p: Vec<Vec<Vec<f64>>>,
}

/// Parses and validates an operator document.
pub fn operator_from_json(text: &str) -> Result<CubicMatrix> {
    let file: OperatorFile =
        serde_json::from_str(text).map_err(|e| QsoError::Json(e.to_string()))?;
    if file.p.len() != file.m {
        return Err(QsoError::Shape(format!(
            "\"m\" is {} but \"P\" has {} slices",
            file.m,
            file.p.len()
        )));
    }
    CubicMatrix::from_nested(&file.p)
}

/// Serializes with keys sorted and a trailing newline.
pub fn operator_to_json(v: &CubicMatrix) -> String {
    let file = OperatorFile {
        m: v.m(),
        p: v.to_nested(),
    };
    let value = serde_json::to_value(&file).expect("plain data serializes");
    let mut s = serde_json::to_string(&value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn read_operator(path: &Path) -> Result<CubicMatrix> {
    let text = std::fs::read_to_string(path).map_err(|source| QsoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    operator_from_json(&text)
}

pub fn write_operator(path: &Path, v: &CubicMatrix) -> Result<()> {
    write_text(path, &operator_to_json(v))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| QsoError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Shortest representation that parses back to the same `f64`; never more
/// than 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

fn push_coords(line: &mut String, coords: &[f64]) {
    for c in coords {
        line.push(',');
        line.push_str(&format_f64(*c));
    }
}

/// `step,x1,...,xm`, one row per iterate including the start.
pub fn orbit_csv(orbit: &Orbit) -> String {
    let m = orbit.initial().dim();
    let mut out = String::from("step");
    for k in 1..=m {
        let _ = write!(out, ",x{k}");
    }
    out.push('\n');
    for (n, p) in orbit.points.iter().enumerate() {
        let _ = write!(out, "{n}");
        push_coords(&mut out, p.coords());
        out.push('\n');
    }
    out
}

/// `x0_1,...,x0_m,limit_type,limit_1,...,limit_m`. Cycles list the
/// coordinates of every cluster representative in visiting order, so rows
/// of a cycle are longer by `m` per extra point.
pub fn portrait_csv(m: usize, rows: &[(SimplexPoint, OmegaLimit)]) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=m)
        .map(|k| format!("x0_{k}"))
        .chain(std::iter::once("limit_type".to_string()))
        .chain((1..=m).map(|k| format!("limit_{k}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (start, limit) in rows {
        let mut line: Vec<String> = start.coords().iter().map(|c| format_f64(*c)).collect();
        line.push(limit.kind.label());
        let shown: &[SimplexPoint] = match limit.kind {
            LimitKind::Unresolved | LimitKind::FixedPoint => &limit.representatives[..1],
            LimitKind::Cycle(_) => &limit.representatives,
        };
        for p in shown {
            line.extend(p.coords().iter().map(|c| format_f64(*c)));
        }
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parses `0.1,0.3,0.6` into a simplex point.
pub fn parse_point(text: &str) -> Result<SimplexPoint> {
    let coords = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| QsoError::Argument(format!("bad coordinate {t:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    SimplexPoint::new(coords)
}
