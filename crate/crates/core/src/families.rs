//! Explicit operator families with known dynamics.
//!
//! * cycle families: vertices outside the Volterra prefix permuted in
//!   prescribed cycles;
//! * the two-species 1-Volterra operators
//!   `x' = a x^2 + 2c xy`, `y' = b x^2 + 2d xy + y^2` with `a + b = c + d = 1`;
//! * the three-species 2-Volterra operators symmetric under swapping the
//!   first two species, parameterized by `a = P[1][1][1]`, `b = P[1][2][1]`,
//!   `c = P[1][3][1]`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::dynamics::{fixed_point_report, steps_to_reach, FixedPointReport, FixedPointSource};
use crate::error::{QsoError, Result};
use crate::qso::{CubicMatrix, SimplexPoint};
use crate::sample::allowed_rows;

/// Disjoint cycles of vertices, all outside the Volterra prefix `0..ell`.
/// Each inner vector lists one cycle in visiting order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleSpec {
    pub m: usize,
    pub ell: usize,
    pub cycles: Vec<Vec<usize>>,
}

impl CycleSpec {
    pub fn new(m: usize, ell: usize, cycles: Vec<Vec<usize>>) -> Result<Self> {
        if m < 2 {
            return Err(QsoError::TooSmall(m));
        }
        if ell > m {
            return Err(QsoError::EllOutOfRange { ell, m });
        }
        let mut seen = vec![false; m];
        for cycle in &cycles {
            if cycle.is_empty() {
                return Err(QsoError::CycleSpec("empty cycle".into()));
            }
            for &i in cycle {
                if i >= m {
                    return Err(QsoError::IndexOutOfRange { index: i, m });
                }
                if i < ell {
                    return Err(QsoError::CycleSpec(format!(
                        "vertex {} lies in the Volterra prefix 1..={ell}",
                        i + 1
                    )));
                }
                if seen[i] {
                    return Err(QsoError::CycleSpec(format!(
                        "vertex {} appears twice",
                        i + 1
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(CycleSpec { m, ell, cycles })
    }

    /// `(vertex, successor)` for every cycle edge.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cycles
            .iter()
            .flat_map(|c| (0..c.len()).map(move |t| (c[t], c[(t + 1) % c.len()])))
    }
}

/// A representative operator in which every prescribed cycle is realized
/// on vertices: column `(i, i)` of each cycle vertex `i` is the successor's
/// unit vector. Every other column spreads its mass uniformly over the rows
/// allowed by the Volterra condition on `0..ell`.
pub fn cycle_family(spec: &CycleSpec) -> Result<CubicMatrix> {
    let m = spec.m;
    let successor: BTreeMap<usize, usize> = spec.edges().collect();
    CubicMatrix::from_columns(m, |i, j| {
        let mut col = vec![0.0; m];
        match successor.get(&i) {
            Some(&next) if i == j => col[next] = 1.0,
            _ => {
                let rows = allowed_rows(m, spec.ell, i, j);
                let w = 1.0 / rows.len() as f64;
                for k in rows {
                    col[k] = w;
                }
            }
        }
        col
    })
}

/// Parameters of the two-species family; `b = 1 - a`, `d = 1 - c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M2Params {
    pub a: f64,
    pub c: f64,
}

impl M2Params {
    pub fn new(a: f64, c: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) {
            return Err(QsoError::ParamRange(format!(
                "a = {a:?} must lie in [0, 1); a = 1 is the Volterra case"
            )));
        }
        if !(0.0..=1.0).contains(&c) {
            return Err(QsoError::ParamRange(format!(
                "c = {c:?} must lie in [0, 1]"
            )));
        }
        Ok(M2Params { a, c })
    }

    pub fn b(&self) -> f64 {
        1.0 - self.a
    }

    pub fn d(&self) -> f64 {
        1.0 - self.c
    }

    /// First coordinate of the image of `(x, 1 - x)`.
    pub fn reduced(&self, x: f64) -> f64 {
        (self.a - 2.0 * self.c) * x * x + 2.0 * self.c * x
    }

    pub fn reduced_derivative(&self, x: f64) -> f64 {
        2.0 * (self.a - 2.0 * self.c) * x + 2.0 * self.c
    }

    /// The interior fixed point, present for `c > 1/2`.
    pub fn interior_fixed_point(&self) -> Option<SimplexPoint> {
        if self.c <= 0.5 {
            return None;
        }
        let den = 2.0 * self.c - self.a;
        SimplexPoint::new(vec![(2.0 * self.c - 1.0) / den, (1.0 - self.a) / den]).ok()
    }
}

pub fn m2_operator(p: &M2Params) -> CubicMatrix {
    CubicMatrix::from_columns(2, |i, j| match (i, j) {
        (0, 0) => vec![p.a, p.b()],
        (0, 1) => vec![p.c, p.d()],
        _ => vec![0.0, 1.0],
    })
    .expect("parameters in range give a stochastic matrix")
}

pub fn m2_reduced_map(p: M2Params) -> impl Fn(f64) -> f64 {
    move |x| p.reduced(x)
}

/// A closed-form fixed point with its Jacobian classification.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedFixedPoint {
    pub name: String,
    pub report: FixedPointReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct M2Report {
    pub params: M2Params,
    pub fixed_points: Vec<NamedFixedPoint>,
    /// The fixed point every orbit except the repeller tends to.
    pub global_attractor: SimplexPoint,
}

pub fn m2_analyze(p: &M2Params) -> Result<M2Report> {
    let v = m2_operator(p);
    let lambda0 = SimplexPoint::vertex(2, 1);
    let mut fixed_points = vec![NamedFixedPoint {
        name: "lambda0".into(),
        report: fixed_point_report(&v, lambda0.clone(), FixedPointSource::ClosedForm)?,
    }];
    let global_attractor = match p.interior_fixed_point() {
        Some(star) => {
            fixed_points.push(NamedFixedPoint {
                name: "lambda_star".into(),
                report: fixed_point_report(&v, star.clone(), FixedPointSource::ClosedForm)?,
            });
            star
        }
        None => lambda0,
    };
    Ok(M2Report {
        params: *p,
        fixed_points,
        global_attractor,
    })
}

/// Parameters of the symmetric three-species 2-Volterra family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M3SymParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl M3SymParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) {
            return Err(QsoError::ParamRange(format!(
                "a = {a:?} must lie in [0, 1); a = 1 is the Volterra case"
            )));
        }
        if !(0.0..=0.5).contains(&b) {
            return Err(QsoError::ParamRange(format!(
                "b = {b:?} must lie in [0, 1/2]"
            )));
        }
        if !(0.0..=1.0).contains(&c) {
            return Err(QsoError::ParamRange(format!(
                "c = {c:?} must lie in [0, 1]"
            )));
        }
        Ok(M3SymParams { a, b, c })
    }

    /// The map on `(x, y)` with `z = 1 - x - y` eliminated.
    pub fn reduced(&self, x: f64, y: f64) -> (f64, f64) {
        let M3SymParams { a, b, c } = *self;
        let g = |s: f64, t: f64| s * (2.0 * c + (a - 2.0 * c) * s + 2.0 * (b - c) * t);
        (g(x, y), g(y, x))
    }

    /// Closed-form Jacobian of [`M3SymParams::reduced`].
    pub fn reduced_jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let M3SymParams { a, b, c } = *self;
        [
            [
                2.0 * c + 2.0 * (a - 2.0 * c) * x + 2.0 * (b - c) * y,
                2.0 * (b - c) * x,
            ],
            [
                2.0 * (b - c) * y,
                2.0 * c + 2.0 * (a - 2.0 * c) * y + 2.0 * (b - c) * x,
            ],
        ]
    }

    /// `q = max{a, 2b, 2c}`, the factor bounding `x' <= q x`.
    pub fn contraction_factor(&self) -> f64 {
        self.a.max(2.0 * self.b).max(2.0 * self.c)
    }

    /// The eleven heredity coefficients of the general three-species
    /// 2-Volterra form, by name.
    pub fn coefficients(&self) -> BTreeMap<&'static str, f64> {
        let M3SymParams { a, b, c } = *self;
        BTreeMap::from([
            ("a1", a),
            ("a2", 1.0 - a),
            ("b1", b),
            ("b2", b),
            ("b3", 1.0 - 2.0 * b),
            ("c1", c),
            ("c2", 1.0 - c),
            ("d1", a),
            ("d2", 1.0 - a),
            ("e1", c),
            ("e2", 1.0 - c),
        ])
    }

    /// `x + y` on the fixed line when `a = 2b` and `c > 1/2`.
    pub fn fixed_line_sum(&self) -> f64 {
        (2.0 * self.c - 1.0) / (2.0 * (self.c - self.b))
    }

    /// The map restricted to the ray `y = nu x`, for `a = 2b`.
    pub fn ray_map(&self, nu: f64, x: f64) -> f64 {
        x * (2.0 * self.c + 2.0 * (self.b - self.c) * (1.0 + nu) * x)
    }

    /// Limit of orbits on the ray `y = nu x`, for `a = 2b` and `c > 1/2`.
    pub fn ray_limit(&self, nu: f64) -> (f64, f64) {
        let x = (2.0 * self.c - 1.0) / (2.0 * (self.c - self.b) * (1.0 + nu));
        (x, nu * x)
    }
}

pub fn m3_operator(p: &M3SymParams) -> CubicMatrix {
    let M3SymParams { a, b, c } = *p;
    CubicMatrix::from_columns(3, |i, j| match (i, j) {
        (0, 0) => vec![a, 0.0, 1.0 - a],
        (0, 1) => vec![b, b, 1.0 - 2.0 * b],
        (0, 2) => vec![c, 0.0, 1.0 - c],
        (1, 1) => vec![0.0, a, 1.0 - a],
        (1, 2) => vec![0.0, c, 1.0 - c],
        _ => vec![0.0, 0.0, 1.0],
    })
    .expect("parameters in range give a stochastic matrix")
}

pub fn m3_reduced_map(p: M3SymParams) -> impl Fn(f64, f64) -> (f64, f64) {
    move |x, y| p.reduced(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum M3Regime {
    /// `c <= 1/2`
    Contracting,
    /// `c > 1/2`, `a > 2b`
    EdgeAttracting,
    /// `c > 1/2`, `a < 2b`
    InteriorAttracting,
    /// `c > 1/2`, `a = 2b`
    FixedLine,
}

impl M3Regime {
    pub fn label(self) -> &'static str {
        match self {
            M3Regime::Contracting => "c<=1/2",
            M3Regime::EdgeAttracting => "c>1/2,a>2b",
            M3Regime::InteriorAttracting => "c>1/2,a<2b",
            M3Regime::FixedLine => "c>1/2,a=2b",
        }
    }
}

pub fn m3_regime(p: &M3SymParams, a2b_tol: f64) -> M3Regime {
    if p.c <= 0.5 {
        M3Regime::Contracting
    } else if (p.a - 2.0 * p.b).abs() <= a2b_tol {
        M3Regime::FixedLine
    } else if p.a > 2.0 * p.b {
        M3Regime::EdgeAttracting
    } else {
        M3Regime::InteriorAttracting
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedLineReport {
    /// `x + y` along the line.
    pub sum: f64,
    pub ends: (SimplexPoint, SimplexPoint),
    /// Largest `|V(x) - x|` over sampled points of the line.
    pub max_residual: f64,
    /// Derivative of the ray restriction at its limit, `2(1 - c)`.
    pub ray_derivative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSetReport {
    pub name: String,
    pub description: String,
    pub verified: bool,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldClaim {
    pub set: String,
    pub fixed_point: String,
    /// Whether sample orbits on the set reached the fixed point.
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct M3Report {
    pub params: M3SymParams,
    pub regime: M3Regime,
    pub coefficients: BTreeMap<&'static str, f64>,
    pub fixed_points: Vec<NamedFixedPoint>,
    pub fixed_line: Option<FixedLineReport>,
    pub invariant_sets: Vec<InvariantSetReport>,
    pub stable_manifolds: Vec<ManifoldClaim>,
}

impl M3Report {
    pub fn fixed_point(&self, name: &str) -> Option<&NamedFixedPoint> {
        self.fixed_points.iter().find(|f| f.name == name)
    }
}

fn lift(x: f64, y: f64) -> Result<SimplexPoint> {
    SimplexPoint::new(vec![x, y, 1.0 - x - y])
}

/// Points `(x, y)` of a triangular grid on `{x, y >= 0, x + y <= 1}`.
fn planar_grid(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 0..=n {
        for j in 0..=(n - i) {
            out.push((i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    out
}

fn invariant_sets(p: &M3SymParams, regime: M3Regime) -> Vec<InvariantSetReport> {
    let grid = planar_grid(24);
    let mut out = Vec::new();
    let mut push = |name: &str,
                    description: &str,
                    member: &dyn Fn(f64, f64) -> bool,
                    keeps: &dyn Fn(f64, f64, f64, f64) -> bool| {
        let pts: Vec<(f64, f64)> = grid
            .iter()
            .copied()
            .filter(|&(x, y)| member(x, y))
            .collect();
        let verified = pts.iter().all(|&(x, y)| {
            let (u, w) = p.reduced(x, y);
            keeps(x, y, u, w)
        });
        out.push(InvariantSetReport {
            name: name.into(),
            description: description.into(),
            verified,
            samples: pts.len(),
        });
    };
    push("M0", "x = 0", &|x, _| x == 0.0, &|_, _, u, _| u == 0.0);
    push("M1", "y = 0", &|_, y| y == 0.0, &|_, _, _, w| w == 0.0);
    push("M=", "x = y", &|x, y| x == y, &|_, _, u, w| {
        (u - w).abs() <= 1e-15
    });
    push("M<", "x < y", &|x, y| x < y, &|_, _, u, w| u < w);
    push("M>", "x > y", &|x, y| x > y, &|_, _, u, w| u > w);
    if regime == M3Regime::FixedLine {
        push("I_nu", "y = nu x", &|x, _| x > 0.0, &|x, y, u, w| {
            let nu = y / x;
            (w - nu * u).abs() <= 1e-13 * w.abs().max(u.abs()).max(1e-300)
        });
    }
    out
}

fn verify_stable_set(
    v: &CubicMatrix,
    starts: &[SimplexPoint],
    target: &SimplexPoint,
) -> Result<bool> {
    for s in starts {
        if steps_to_reach(v, s, target, 1e-8, 10_000)?.is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Closed-form fixed points, their Jacobian classification, invariant
/// sets and stable-manifold claims of the symmetric family.
///
/// `a2b_tol` widens the `a = 2b` test; pass 0 for an exact comparison.
pub fn m3_analyze(p: &M3SymParams, a2b_tol: f64) -> Result<M3Report> {
    let v = m3_operator(p);
    let regime = m3_regime(p, a2b_tol);
    let named = |name: &str, x: f64, y: f64| -> Result<NamedFixedPoint> {
        Ok(NamedFixedPoint {
            name: name.into(),
            report: fixed_point_report(&v, lift(x, y)?, FixedPointSource::ClosedForm)?,
        })
    };
    let M3SymParams { a, b, c } = *p;
    let mut fixed_points = vec![named("lambda0", 0.0, 0.0)?];
    let mut fixed_line = None;
    let mut stable_manifolds = Vec::new();
    match regime {
        M3Regime::Contracting => {}
        M3Regime::EdgeAttracting | M3Regime::InteriorAttracting => {
            let edge = (2.0 * c - 1.0) / (2.0 * c - a);
            let diag = (2.0 * c - 1.0) / (4.0 * c - a - 2.0 * b);
            fixed_points.push(named("lambda1", 0.0, edge)?);
            fixed_points.push(named("lambda2", edge, 0.0)?);
            fixed_points.push(named("lambda3", diag, diag)?);
            let l1 = lift(0.0, edge)?;
            let l2 = lift(edge, 0.0)?;
            let l3 = lift(diag, diag)?;
            let ts = [0.05, 0.2, 0.4, 0.6, 0.8, 0.95];
            if regime == M3Regime::InteriorAttracting {
                let on_m0: Vec<SimplexPoint> =
                    ts.iter().map(|&t| lift(0.0, t)).collect::<Result<_>>()?;
                let on_m1: Vec<SimplexPoint> =
                    ts.iter().map(|&t| lift(t, 0.0)).collect::<Result<_>>()?;
                stable_manifolds.push(ManifoldClaim {
                    set: "M0".into(),
                    fixed_point: "lambda1".into(),
                    verified: verify_stable_set(&v, &on_m0, &l1)?,
                });
                stable_manifolds.push(ManifoldClaim {
                    set: "M1".into(),
                    fixed_point: "lambda2".into(),
                    verified: verify_stable_set(&v, &on_m1, &l2)?,
                });
            } else {
                let on_diag: Vec<SimplexPoint> = ts
                    .iter()
                    .map(|&t| lift(t / 2.0, t / 2.0))
                    .collect::<Result<_>>()?;
                stable_manifolds.push(ManifoldClaim {
                    set: "M=".into(),
                    fixed_point: "lambda3".into(),
                    verified: verify_stable_set(&v, &on_diag, &l3)?,
                });
            }
        }
        M3Regime::FixedLine => {
            let sum = p.fixed_line_sum();
            let mut max_residual = 0.0f64;
            for t in 0..=20 {
                let x = sum * t as f64 / 20.0;
                let q = lift(x, sum - x)?;
                max_residual = max_residual.max(v.apply(&q)?.distance(&q));
            }
            fixed_line = Some(FixedLineReport {
                sum,
                ends: (lift(sum, 0.0)?, lift(0.0, sum)?),
                max_residual,
                ray_derivative: 2.0 * (1.0 - c),
            });
        }
    }
    Ok(M3Report {
        params: *p,
        regime,
        coefficients: p.coefficients(),
        fixed_points,
        fixed_line,
        invariant_sets: invariant_sets(p, regime),
        stable_manifolds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub starts: usize,
    pub converged: usize,
    pub failures: Vec<SimplexPoint>,
    /// Most steps any converging start needed.
    pub max_steps: usize,
}

/// Runs every start until it is within `tol` of `target`, in parallel.
pub fn attractor_sweep(
    v: &CubicMatrix,
    starts: &[SimplexPoint],
    target: &SimplexPoint,
    tol: f64,
    max_steps: usize,
) -> Result<SweepResult> {
    let outcomes: Vec<Option<usize>> = starts
        .par_iter()
        .map(|s| steps_to_reach(v, s, target, tol, max_steps))
        .collect::<Result<_>>()?;
    let mut failures = Vec::new();
    let mut most = 0;
    for (s, o) in starts.iter().zip(&outcomes) {
        match o {
            Some(n) => most = most.max(*n),
            None => failures.push(s.clone()),
        }
    }
    Ok(SweepResult {
        starts: starts.len(),
        converged: starts.len() - failures.len(),
        failures,
        max_steps: most,
    })
}
