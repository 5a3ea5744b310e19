//! JSON reports for the command line and the C interface.
//!
//! Every top-level report carries `"schema": 1`. Species indices are
//! 1-based; keys come out sorted.

use nalgebra::Complex;
use serde_json::{json, Map, Value};

use crate::classify::{EllClassification, InvarianceCheck, PositivityCheck};
use crate::dynamics::{
    CycleReport, FixedContinuum, FixedPointReport, FixedPointSearch, OmegaLimit,
};
use crate::families::{FixedLineReport, M2Report, M3Report, NamedFixedPoint, SweepResult};
use crate::qso::SimplexPoint;

pub const SCHEMA_VERSION: u64 = 1;

/// Adds `"schema"` and `"kind"` to an object.
pub fn envelope(kind: &str, body: Value) -> Value {
    let mut map = match body {
        Value::Object(map) => map,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    };
    map.insert("schema".into(), json!(SCHEMA_VERSION));
    map.insert("kind".into(), json!(kind));
    Value::Object(map)
}

/// Sorted keys, two-space indentation, trailing newline.
pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

fn one_based(ix: &[usize]) -> Vec<usize> {
    ix.iter().map(|i| i + 1).collect()
}

fn point(p: &SimplexPoint) -> Value {
    json!(p.coords())
}

fn complex(z: &Complex<f64>) -> Value {
    json!({ "re": z.re, "im": z.im, "modulus": z.norm() })
}

pub fn classification(c: &EllClassification) -> Value {
    let witnesses: Map<String, Value> = c
        .witnesses
        .iter()
        .map(|(k, (i, j))| ((k + 1).to_string(), json!([i + 1, j + 1])))
        .collect();
    json!({
        "m": c.m,
        "ell": c.ell,
        "is_volterra": c.is_volterra,
        "volterra_coords": one_based(&c.volterra_coords),
        "non_prefix_volterra_coords": one_based(&c.non_prefix_volterra_coords),
        "witnesses": witnesses,
        "strictly_classified": c.strictly_classified(),
    })
}

pub fn invariance(face: &[usize], c: &InvarianceCheck) -> Value {
    json!({
        "face_zero_coords": one_based(face),
        "invariant": c.invariant,
        "tested": c.tested,
        "counterexample": c.counterexample.as_ref().map(point),
        "image": c.image.as_ref().map(point),
    })
}

pub fn positivity(set: &[usize], c: &PositivityCheck) -> Value {
    json!({
        "positive_coords": one_based(set),
        "invariant": c.check.invariant,
        "tested": c.check.tested,
        "counterexample": c.check.counterexample.as_ref().map(point),
        "image": c.check.image.as_ref().map(point),
        "outside_hypothesis": one_based(&c.outside_hypothesis),
    })
}

pub fn fixed_point(r: &FixedPointReport) -> Value {
    json!({
        "location": point(&r.location),
        "residual": r.residual,
        "eigenvalues": r.eigenvalues.iter().map(complex).collect::<Vec<_>>(),
        "type": r.kind.as_str(),
        "source": r.source,
        "unstable_directions": r.unstable_directions,
    })
}

fn continuum(c: &FixedContinuum) -> Value {
    json!({
        "dimension": c.dimension,
        "roots": c.roots.len(),
        "line_ends": c.line_ends.as_ref().map(|(a, b)| json!([point(a), point(b)])),
    })
}

pub fn fixed_point_search(s: &FixedPointSearch) -> Value {
    json!({
        "fixed_points": s.points.iter().map(fixed_point).collect::<Vec<_>>(),
        "continua": s.continua.iter().map(continuum).collect::<Vec<_>>(),
        "starts": s.starts,
        "discarded_starts": s.discarded_starts,
        "outside_simplex": s.outside_simplex,
    })
}

pub fn cycle(c: Option<&CycleReport>) -> Value {
    match c {
        None => json!({ "period": null, "points": [] }),
        Some(c) => json!({
            "period": c.period,
            "points": c.points.iter().map(point).collect::<Vec<_>>(),
            "closure_residual": c.closure_residual,
        }),
    }
}

pub fn omega_limit(o: &OmegaLimit) -> Value {
    json!({
        "type": o.kind.label(),
        "representatives": o.representatives.iter().map(point).collect::<Vec<_>>(),
    })
}

fn named(n: &NamedFixedPoint) -> Value {
    let mut v = fixed_point(&n.report);
    v["name"] = json!(n.name);
    v
}

pub fn sweep(s: &SweepResult) -> Value {
    json!({
        "starts": s.starts,
        "converged": s.converged,
        "max_steps": s.max_steps,
        "failures": s.failures.iter().map(point).collect::<Vec<_>>(),
    })
}

pub fn m2(r: &M2Report) -> Value {
    json!({
        "family": "m2",
        "params": { "a": r.params.a, "b": r.params.b(), "c": r.params.c, "d": r.params.d() },
        "fixed_points": r.fixed_points.iter().map(named).collect::<Vec<_>>(),
        "global_attractor": point(&r.global_attractor),
    })
}

fn fixed_line(f: &FixedLineReport) -> Value {
    json!({
        "sum": f.sum,
        "ends": [point(&f.ends.0), point(&f.ends.1)],
        "max_residual": f.max_residual,
        "ray_derivative": f.ray_derivative,
    })
}

pub fn m3(r: &M3Report) -> Value {
    json!({
        "family": "m3",
        "params": { "a": r.params.a, "b": r.params.b, "c": r.params.c },
        "regime": r.regime.label(),
        "contraction_factor": r.params.contraction_factor(),
        "coefficients": r.coefficients,
        "fixed_points": r.fixed_points.iter().map(named).collect::<Vec<_>>(),
        "fixed_line": r.fixed_line.as_ref().map(fixed_line),
        "invariant_sets": r.invariant_sets.iter().map(|s| json!({
            "name": s.name,
            "description": s.description,
            "verified": s.verified,
            "samples": s.samples,
        })).collect::<Vec<_>>(),
        "stable_manifolds": r.stable_manifolds.iter().map(|c| json!({
            "set": c.set,
            "fixed_point": c.fixed_point,
            "verified": c.verified,
        })).collect::<Vec<_>>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::detect_ell;
    use crate::families::{m3_analyze, m3_operator, M3SymParams};

    #[test]
    fn classification_is_one_based() {
        let v = m3_operator(&M3SymParams::new(0.5, 0.5, 0.75).unwrap());
        let j = envelope("classification", classification(&detect_ell(&v)));
        assert_eq!(j["schema"], 1);
        assert_eq!(j["ell"], 2);
        assert_eq!(j["volterra_coords"], json!([1, 2]));
        assert_eq!(j["witnesses"]["3"], json!([1, 1]));
    }

    #[test]
    fn keys_are_sorted() {
        let r = m3_analyze(&M3SymParams::new(0.5, 0.5, 0.75).unwrap(), 0.0).unwrap();
        let text = to_pretty(&envelope("m3", m3(&r)));
        let c = text.find("\"coefficients\"").unwrap();
        let f = text.find("\"family\"").unwrap();
        let s = text.find("\"schema\"").unwrap();
        assert!(c < f && f < s);
    }
}
