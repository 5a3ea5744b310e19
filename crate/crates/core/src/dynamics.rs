//! Orbits, Jacobians, fixed points, cycles and limit sets of a QSO.
//!
//! Derivatives are taken either in the full chart (`R^m`) or in the reduced
//! chart obtained by eliminating the last coordinate with
//! `x_m = 1 - sum_{i<m} x_i`. Stability is always judged in the reduced
//! chart: in the full chart every fixed point has the spurious eigenvalue
//! 2 along the radial direction, because the map is homogeneous of degree 2.

use std::collections::HashMap;

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QsoError, Result};
use crate::qso::{sup_distance, CubicMatrix, SimplexPoint};

/// Eigenvalues closer than this to the unit circle are non-hyperbolic.
pub const HYPERBOLIC_MARGIN: f64 = 1e-9;
/// Largest accepted `|V(x) - x|` for a reported fixed point.
pub const FIXED_RESIDUAL_TOL: f64 = 1e-10;
/// Roots closer than this are the same fixed point.
pub const DEDUP_RADIUS: f64 = 1e-8;
/// Return tolerance for periodic points.
pub const CYCLE_TOL: f64 = 1e-9;
/// Clustering radius for limit-set estimates.
pub const CLUSTER_RADIUS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    /// `x^(0), ..., x^(n)`.
    pub points: Vec<SimplexPoint>,
}

impl Orbit {
    pub fn initial(&self) -> &SimplexPoint {
        &self.points[0]
    }

    pub fn last(&self) -> &SimplexPoint {
        self.points.last().expect("orbit holds its initial point")
    }

    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }
}

pub fn orbit(v: &CubicMatrix, x0: &SimplexPoint, n: usize) -> Result<Orbit> {
    let mut points = Vec::with_capacity(n + 1);
    points.push(x0.clone());
    for t in 0..n {
        let next = v.apply(&points[t])?;
        points.push(next);
    }
    Ok(Orbit { points })
}

/// Iterates from `x0` until the orbit is within `tol` of `target`.
/// Returns the number of steps, or `None` if `max_steps` is exhausted.
pub fn steps_to_reach(
    v: &CubicMatrix,
    x0: &SimplexPoint,
    target: &SimplexPoint,
    tol: f64,
    max_steps: usize,
) -> Result<Option<usize>> {
    let mut x = x0.clone();
    for step in 0..=max_steps {
        if x.distance(target) <= tol {
            return Ok(Some(step));
        }
        if step < max_steps {
            x = v.apply(&x)?;
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Chart {
    Full,
    /// Last coordinate eliminated.
    LastCoordinateEliminated,
}

/// `d x'_k / d x_i = 2 sum_j P[i][j][k] x_j`, as an `m x m` matrix with
/// rows indexed by `k`.
fn full_jacobian(v: &CubicMatrix, x: &[f64]) -> DMatrix<f64> {
    let m = v.m();
    DMatrix::from_fn(m, m, |k, i| {
        2.0 * (0..m).map(|j| v.get(i, j, k) * x[j]).sum::<f64>()
    })
}

/// Analytic Jacobian at `x` (full coordinates, length `m`). The point need
/// not lie on the simplex.
pub fn jacobian(v: &CubicMatrix, x: &[f64], chart: Chart) -> Result<DMatrix<f64>> {
    let m = v.m();
    if x.len() != m {
        return Err(QsoError::DimensionMismatch {
            expected: m,
            got: x.len(),
        });
    }
    let full = full_jacobian(v, x);
    Ok(match chart {
        Chart::Full => full,
        Chart::LastCoordinateEliminated => {
            DMatrix::from_fn(m - 1, m - 1, |k, i| full[(k, i)] - full[(k, m - 1)])
        }
    })
}

/// The operator in the reduced chart: `y -> first m-1 coordinates of
/// V(y, 1 - sum y)`.
pub fn reduced_map(v: &CubicMatrix, y: &[f64]) -> Vec<f64> {
    let mut x = y.to_vec();
    x.push(1.0 - y.iter().sum::<f64>());
    let mut out = v.eval(&x);
    out.pop();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointType {
    Attracting,
    Repelling,
    Saddle,
    NonHyperbolic,
}

impl FixedPointType {
    pub fn as_str(self) -> &'static str {
        match self {
            FixedPointType::Attracting => "attracting",
            FixedPointType::Repelling => "repelling",
            FixedPointType::Saddle => "saddle",
            FixedPointType::NonHyperbolic => "non-hyperbolic",
        }
    }
}

/// Hyperbolic type from Jacobian eigenvalues. Anything within `margin` of
/// the unit circle makes the point non-hyperbolic.
pub fn classify_eigenvalues(eigenvalues: &[Complex<f64>], margin: f64) -> FixedPointType {
    let moduli: Vec<f64> = eigenvalues.iter().map(|z| z.norm()).collect();
    if moduli.iter().any(|r| (r - 1.0).abs() <= margin) {
        FixedPointType::NonHyperbolic
    } else if moduli.iter().all(|&r| r < 1.0) {
        FixedPointType::Attracting
    } else if moduli.iter().all(|&r| r > 1.0) {
        FixedPointType::Repelling
    } else {
        FixedPointType::Saddle
    }
}

/// Eigenvalues sorted by real part, then imaginary part.
pub fn eigenvalues(j: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut e: Vec<Complex<f64>> = j.complex_eigenvalues().iter().copied().collect();
    e.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    e
}

/// Unit eigenvectors for the real eigenvalues of modulus above
/// `1 + margin`, with the largest-magnitude component made positive.
pub fn unstable_directions(j: &DMatrix<f64>, eigs: &[Complex<f64>], margin: f64) -> Vec<Vec<f64>> {
    let n = j.nrows();
    let mut out = Vec::new();
    for mu in eigs {
        if mu.im.abs() > 1e-12 || mu.re.abs() <= 1.0 + margin {
            continue;
        }
        let shifted = j - DMatrix::<f64>::identity(n, n) * mu.re;
        let svd = shifted.svd(false, true);
        let Some(v_t) = svd.v_t else { continue };
        let (idx, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty matrix");
        let mut dir: Vec<f64> = v_t.row(idx).iter().copied().collect();
        let pivot = dir
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(1.0);
        if pivot < 0.0 {
            dir.iter_mut().for_each(|x| *x = -*x);
        }
        out.push(dir);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointSource {
    VertexTest,
    Newton,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub location: SimplexPoint,
    /// `|V(x) - x|` in the sup norm.
    pub residual: f64,
    /// Reduced-chart Jacobian eigenvalues.
    pub eigenvalues: Vec<Complex<f64>>,
    pub kind: FixedPointType,
    pub source: FixedPointSource,
    /// Reduced-chart unstable eigenvectors, reported for saddles.
    pub unstable_directions: Vec<Vec<f64>>,
}

/// Residual, eigenvalues and type of a (claimed) fixed point.
pub fn fixed_point_report(
    v: &CubicMatrix,
    location: SimplexPoint,
    source: FixedPointSource,
) -> Result<FixedPointReport> {
    let image = v.apply(&location)?;
    let residual = image.distance(&location);
    let j = jacobian(v, location.coords(), Chart::LastCoordinateEliminated)?;
    let eigs = eigenvalues(&j);
    let kind = classify_eigenvalues(&eigs, HYPERBOLIC_MARGIN);
    let unstable = if kind == FixedPointType::Saddle {
        unstable_directions(&j, &eigs, HYPERBOLIC_MARGIN)
    } else {
        Vec::new()
    };
    Ok(FixedPointReport {
        location,
        residual,
        eigenvalues: eigs,
        kind,
        source,
        unstable_directions: unstable,
    })
}

/// All points `(c_1, ..., c_m) / n` with non-negative integers summing to `n`,
/// in lexicographic order of `c`.
pub fn barycentric_grid(m: usize, n: usize) -> Vec<Vec<f64>> {
    fn rec(m: usize, left: usize, n: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if prefix.len() == m - 1 {
            prefix.push(left);
            out.push(prefix.iter().map(|&c| c as f64 / n as f64).collect());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(m, left - c, n, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if m == 0 {
        return out;
    }
    if n == 0 {
        // a single point needs a non-zero denominator
        out.push(SimplexPoint::barycenter(m).into_inner());
        return out;
    }
    rec(m, n, n, &mut Vec::with_capacity(m), &mut out);
    out
}

#[derive(Debug, Clone)]
pub struct FixedPointOptions {
    pub grid_density: usize,
    pub max_newton_steps: usize,
    pub residual_tol: f64,
    pub dedup_radius: f64,
    /// Minimum number of degenerate roots before they are fitted as a
    /// continuum instead of being listed as points.
    pub continuum_min_roots: usize,
    pub continuum_tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            grid_density: 20,
            max_newton_steps: 100,
            residual_tol: FIXED_RESIDUAL_TOL,
            dedup_radius: DEDUP_RADIUS,
            continuum_min_roots: 10,
            continuum_tol: 1e-7,
        }
    }
}

/// A set of non-isolated fixed points found by the multistart search.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedContinuum {
    /// Affine dimension of the sampled roots.
    pub dimension: usize,
    pub roots: Vec<SimplexPoint>,
    /// For `dimension == 1`, the two extreme roots along the fitted line.
    pub line_ends: Option<(SimplexPoint, SimplexPoint)>,
}

#[derive(Debug, Clone)]
pub struct FixedPointSearch {
    pub points: Vec<FixedPointReport>,
    pub continua: Vec<FixedContinuum>,
    pub starts: usize,
    /// Starts where Newton did not reach the residual tolerance.
    pub discarded_starts: usize,
    /// Starts that converged to a root off the closed simplex.
    pub outside_simplex: usize,
}

enum NewtonOutcome {
    Root(SimplexPoint, f64),
    Outside,
    Failed,
}

fn newton_from(v: &CubicMatrix, start: &[f64], opts: &FixedPointOptions) -> NewtonOutcome {
    let m = v.m();
    let n = m - 1;
    let h = |y: &[f64]| -> Vec<f64> {
        reduced_map(v, y)
            .iter()
            .zip(y)
            .map(|(g, yi)| g - yi)
            .collect()
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |a, x| a.max(x.abs()));

    let mut y: Vec<f64> = start[..n].to_vec();
    let mut r = h(&y);
    let mut rn = norm(&r);
    for _ in 0..opts.max_newton_steps {
        if rn == 0.0 {
            break;
        }
        let mut x = y.clone();
        x.push(1.0 - y.iter().sum::<f64>());
        let Ok(j) = jacobian(v, &x, Chart::LastCoordinateEliminated) else {
            return NewtonOutcome::Failed;
        };
        let a = j - DMatrix::<f64>::identity(n, n);
        let scale = a.amax().max(1.0);
        let rhs = DVector::from_iterator(n, r.iter().map(|x| -x));
        let Ok(step) = a.svd(true, true).solve(&rhs, 1e-13 * scale) else {
            return NewtonOutcome::Failed;
        };
        let step_norm = step.amax();
        if !step_norm.is_finite() {
            return NewtonOutcome::Failed;
        }
        if step_norm <= 1e-15 {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t >= 1.0 / 1024.0 {
            let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            let tr = h(&trial);
            let tn = norm(&tr);
            if tn < rn || (tn == rn && t == 1.0) {
                y = trial;
                r = tr;
                rn = tn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted || y.iter().any(|c| c.abs() > 1e6) {
            break;
        }
    }
    if !rn.is_finite() || rn > opts.residual_tol {
        return NewtonOutcome::Failed;
    }
    let mut x = y.clone();
    x.push(1.0 - y.iter().sum::<f64>());
    if x.iter().any(|&c| c < -1e-10) {
        return NewtonOutcome::Outside;
    }
    x.iter_mut().for_each(|c| *c = c.max(0.0));
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|c| *c /= s);
    let Ok(p) = SimplexPoint::new(x) else {
        return NewtonOutcome::Outside;
    };
    let res = sup_distance(&v.eval(p.coords()), p.coords());
    if res > opts.residual_tol {
        return NewtonOutcome::Failed;
    }
    NewtonOutcome::Root(p, res)
}

/// Spatial hash for deduplicating roots at a fixed radius.
struct RootIndex {
    cell: f64,
    map: HashMap<Vec<i64>, Vec<usize>>,
}

impl RootIndex {
    fn new(cell: f64) -> Self {
        RootIndex {
            cell,
            map: HashMap::new(),
        }
    }

    fn key(&self, x: &[f64]) -> Vec<i64> {
        x.iter().map(|c| (c / self.cell).floor() as i64).collect()
    }

    fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let base = self.key(x);
        let mut out = Vec::new();
        let d = base.len();
        let total = 3usize.pow(d as u32);
        for code in 0..total {
            let mut c = code;
            let key: Vec<i64> = base
                .iter()
                .map(|&b| {
                    let off = (c % 3) as i64 - 1;
                    c /= 3;
                    b + off
                })
                .collect();
            if let Some(ids) = self.map.get(&key) {
                out.extend_from_slice(ids);
            }
        }
        out
    }

    fn insert(&mut self, x: &[f64], id: usize) {
        let key = self.key(x);
        self.map.entry(key).or_default().push(id);
    }
}

/// Vertex tests plus damped Newton from a barycentric grid, with
/// deduplication, classification and continuum fitting.
pub fn find_fixed_points(v: &CubicMatrix, grid_density: usize) -> Result<FixedPointSearch> {
    find_fixed_points_with(
        v,
        &FixedPointOptions {
            grid_density,
            ..FixedPointOptions::default()
        },
    )
}

pub fn find_fixed_points_with(
    v: &CubicMatrix,
    opts: &FixedPointOptions,
) -> Result<FixedPointSearch> {
    let m = v.m();
    let mut reports = Vec::new();
    for i in 0..m {
        if v.fixes_vertex(i) {
            reports.push(fixed_point_report(
                v,
                SimplexPoint::vertex(m, i),
                FixedPointSource::VertexTest,
            )?);
        }
    }

    let starts = barycentric_grid(m, opts.grid_density);
    let outcomes: Vec<NewtonOutcome> = starts.par_iter().map(|s| newton_from(v, s, opts)).collect();

    let mut discarded = 0;
    let mut outside = 0;
    let mut roots: Vec<(SimplexPoint, f64)> = Vec::new();
    let mut index = RootIndex::new(opts.dedup_radius);
    for outcome in outcomes {
        match outcome {
            NewtonOutcome::Failed => discarded += 1,
            NewtonOutcome::Outside => outside += 1,
            NewtonOutcome::Root(p, res) => {
                let near_vertex = reports
                    .iter()
                    .any(|r| r.location.distance(&p) <= opts.dedup_radius);
                if near_vertex {
                    continue;
                }
                let dup = index
                    .neighbours(p.coords())
                    .into_iter()
                    .find(|&id| roots[id].0.distance(&p) <= opts.dedup_radius);
                match dup {
                    Some(id) => {
                        if res < roots[id].1 {
                            roots[id] = (p, res);
                        }
                    }
                    None => {
                        index.insert(p.coords(), roots.len());
                        roots.push((p, res));
                    }
                }
            }
        }
    }

    let newton_reports: Vec<FixedPointReport> = roots
        .into_iter()
        .map(|(p, _)| fixed_point_report(v, p, FixedPointSource::Newton))
        .collect::<Result<_>>()?;

    let (degenerate, isolated): (Vec<_>, Vec<_>) = newton_reports.into_iter().partition(|r| {
        r.eigenvalues
            .iter()
            .any(|z| (z - Complex::new(1.0, 0.0)).norm() <= HYPERBOLIC_MARGIN)
    });

    let mut continua = Vec::new();
    reports.extend(isolated);
    if degenerate.len() >= opts.continuum_min_roots {
        let pts: Vec<SimplexPoint> = degenerate.iter().map(|r| r.location.clone()).collect();
        continua.push(fit_continuum(pts, opts.continuum_tol));
    } else {
        reports.extend(degenerate);
    }

    Ok(FixedPointSearch {
        points: reports,
        continua,
        starts: starts.len(),
        discarded_starts: discarded,
        outside_simplex: outside,
    })
}

fn fit_continuum(roots: Vec<SimplexPoint>, tol: f64) -> FixedContinuum {
    let n = roots.len();
    let m = roots[0].dim();
    let mean: Vec<f64> = (0..m)
        .map(|k| roots.iter().map(|p| p[k]).sum::<f64>() / n as f64)
        .collect();
    let centered = DMatrix::from_fn(n, m, |r, k| roots[r][k] - mean[k]);
    let svd = centered.svd(false, true);
    let rms_scale = (n as f64).sqrt();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let dimension = order
        .iter()
        .filter(|&&i| svd.singular_values[i] / rms_scale > tol)
        .count();
    let line_ends = if dimension == 1 {
        let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
        let dir = v_t.row(order[0]);
        let proj = |p: &SimplexPoint| (0..m).map(|k| (p[k] - mean[k]) * dir[k]).sum::<f64>();
        let lo = roots
            .iter()
            .min_by(|a, b| proj(a).total_cmp(&proj(b)))
            .cloned();
        let hi = roots
            .iter()
            .max_by(|a, b| proj(a).total_cmp(&proj(b)))
            .cloned();
        lo.zip(hi)
    } else {
        None
    };
    FixedContinuum {
        dimension,
        roots,
        line_ends,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub period: usize,
    pub points: Vec<SimplexPoint>,
    /// `|V(points[s-1]) - points[0]|`.
    pub closure_residual: f64,
}

/// After `burn_in` steps, looks for the least `s <= max_period` with
/// `|V^s(x) - x| <= 1e-9`. Fixed points (`s = 1`) and aperiodic orbits give
/// `None`.
pub fn detect_cycle(
    v: &CubicMatrix,
    x0: &SimplexPoint,
    burn_in: usize,
    max_period: usize,
) -> Result<Option<CycleReport>> {
    if max_period < 2 {
        return Err(QsoError::Argument(format!(
            "max_period must be at least 2, got {max_period}"
        )));
    }
    let mut x = x0.clone();
    for _ in 0..burn_in {
        x = v.apply(&x)?;
    }
    let mut points = vec![x];
    for s in 1..=max_period {
        let next = v.apply(points.last().expect("non-empty"))?;
        let back = next.distance(&points[0]);
        if back <= CYCLE_TOL {
            if s == 1 {
                return Ok(None);
            }
            return Ok(Some(CycleReport {
                period: s,
                points,
                closure_residual: back,
            }));
        }
        points.push(next);
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    FixedPoint,
    Cycle(usize),
    Unresolved,
}

impl LimitKind {
    pub fn label(self) -> String {
        match self {
            LimitKind::FixedPoint => "fixed".into(),
            LimitKind::Cycle(s) => format!("cycle-{s}"),
            LimitKind::Unresolved => "unresolved".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaLimit {
    pub kind: LimitKind,
    /// One point per cluster in order of first visit (the cluster's latest
    /// member). For unresolved orbits, the last iterate only.
    pub representatives: Vec<SimplexPoint>,
}

/// Clusters `window` iterates taken after `burn_in` steps at radius 1e-7.
pub fn omega_limit_estimate(
    v: &CubicMatrix,
    x0: &SimplexPoint,
    burn_in: usize,
    window: usize,
) -> Result<OmegaLimit> {
    if window < 2 {
        return Err(QsoError::Argument(format!(
            "window must be at least 2, got {window}"
        )));
    }
    let mut x = x0.clone();
    for _ in 0..burn_in {
        x = v.apply(&x)?;
    }
    let mut centers: Vec<SimplexPoint> = Vec::new();
    let mut latest: Vec<SimplexPoint> = Vec::new();
    let mut labels = Vec::with_capacity(window);
    for t in 0..window {
        if t > 0 {
            x = v.apply(&x)?;
        }
        let label = match centers
            .iter()
            .position(|c| c.distance(&x) <= CLUSTER_RADIUS)
        {
            Some(l) => {
                latest[l] = x.clone();
                l
            }
            None => {
                centers.push(x.clone());
                latest.push(x.clone());
                centers.len() - 1
            }
        };
        labels.push(label);
    }
    let s = centers.len();
    let periodic = s < window && (0..window - s).all(|t| labels[t + s] == labels[t]);
    let kind = match (s, periodic) {
        (1, _) => LimitKind::FixedPoint,
        (s, true) => LimitKind::Cycle(s),
        _ => LimitKind::Unresolved,
    };
    let representatives = if kind == LimitKind::Unresolved {
        vec![x]
    } else {
        latest
    };
    Ok(OmegaLimit {
        kind,
        representatives,
    })
}
