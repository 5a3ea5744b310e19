//! Quadratic stochastic operators as dense cubic heredity matrices.
//!
//! A QSO on the simplex `S^{m-1}` is the map
//! `x'_k = sum_{i,j} P[i][j][k] x_i x_j`, where each column `P[i][j][..]`
//! is a probability vector and `P[i][j][k] = P[j][i][k]`.
//!
//! The Rust API is 0-based throughout. Files, the CLI and the C ABI use
//! 1-based indices for species, matching the usual mathematical notation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QsoError, Result, Violation};
use crate::{CLAMP_TOL, COLUMN_SUM_TOL, POSITIVE_THRESHOLD, RENORMALIZE_TOL, SYMMETRY_TOL};

/// Heredity coefficients `P[i][j][k]` of one QSO, stored densely with
/// `k` varying fastest so that every column `(i, j)` is a contiguous slice.
#[derive(Clone, PartialEq)]
pub struct CubicMatrix {
    m: usize,
    p: Vec<f64>,
}

impl fmt::Debug for CubicMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CubicMatrix")
            .field("m", &self.m)
            .field("P", &self.to_nested())
            .finish()
    }
}

#[inline]
fn flat(m: usize, i: usize, j: usize, k: usize) -> usize {
    (i * m + j) * m + k
}

/// Evaluates the quadratic form `sum_{i,j} p[i][j][k] x_i x_j` for every `k`
/// on an arbitrary (not necessarily symmetric, not necessarily stochastic)
/// dense array.
pub fn quadratic_map(m: usize, p: &[f64], x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(p.len(), m * m * m);
    debug_assert_eq!(x.len(), m);
    let mut out = vec![0.0; m];
    for i in 0..m {
        if x[i] == 0.0 {
            continue;
        }
        for j in 0..m {
            let w = x[i] * x[j];
            if w == 0.0 {
                continue;
            }
            let col = &p[flat(m, i, j, 0)..flat(m, i, j, 0) + m];
            for (o, &c) in out.iter_mut().zip(col) {
                *o += c * w;
            }
        }
    }
    out
}

impl CubicMatrix {
    /// Validates a flat array laid out as `p[(i*m + j)*m + k]`.
    ///
    /// All violations are collected; symmetric pairs are averaged on
    /// success so the stored matrix is exactly symmetric.
    pub fn new(m: usize, entries: Vec<f64>) -> Result<Self> {
        if m < 2 {
            return Err(QsoError::TooSmall(m));
        }
        if entries.len() != m * m * m {
            return Err(QsoError::Shape(format!(
                "expected {} entries for m = {m}, got {}",
                m * m * m,
                entries.len()
            )));
        }
        let violations = collect_violations(m, &entries);
        if !violations.is_empty() {
            return Err(QsoError::Invalid(violations));
        }
        let mut p = entries;
        for i in 0..m {
            for j in (i + 1)..m {
                for k in 0..m {
                    let avg = 0.5 * (p[flat(m, i, j, k)] + p[flat(m, j, i, k)]);
                    p[flat(m, i, j, k)] = avg;
                    p[flat(m, j, i, k)] = avg;
                }
            }
        }
        Ok(CubicMatrix { m, p })
    }

    /// Validates a nested `P[i][j][k]` array.
    pub fn from_nested(raw: &[Vec<Vec<f64>>]) -> Result<Self> {
        let m = raw.len();
        if m < 2 {
            return Err(QsoError::TooSmall(m));
        }
        let mut entries = Vec::with_capacity(m * m * m);
        for (i, plane) in raw.iter().enumerate() {
            if plane.len() != m {
                return Err(QsoError::Shape(format!(
                    "P[{}] has {} rows, expected {m}",
                    i + 1,
                    plane.len()
                )));
            }
            for (j, col) in plane.iter().enumerate() {
                if col.len() != m {
                    return Err(QsoError::Shape(format!(
                        "P[{}][{}] has {} entries, expected {m}",
                        i + 1,
                        j + 1,
                        col.len()
                    )));
                }
                entries.extend_from_slice(col);
            }
        }
        Self::new(m, entries)
    }

    /// Builds a matrix from a generator `f(i, j, k)` and validates it.
    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(m * m * m);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    entries.push(f(i, j, k));
                }
            }
        }
        Self::new(m, entries)
    }

    /// Builds a matrix from its upper-triangular columns `(i, j)`, `i <= j`,
    /// mirroring each into `(j, i)`.
    pub fn from_columns(
        m: usize,
        mut column: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let mut entries = vec![0.0; m * m * m];
        for i in 0..m {
            for j in i..m {
                let col = column(i, j);
                if col.len() != m {
                    return Err(QsoError::Shape(format!(
                        "column ({},{}) has {} entries, expected {m}",
                        i + 1,
                        j + 1,
                        col.len()
                    )));
                }
                entries[flat(m, i, j, 0)..flat(m, i, j, 0) + m].copy_from_slice(&col);
                entries[flat(m, j, i, 0)..flat(m, j, i, 0) + m].copy_from_slice(&col);
            }
        }
        Self::new(m, entries)
    }

    /// The operator with `P[i][i][i] = 1` and `P[i][j][i] = P[i][j][j] = 1/2`,
    /// which fixes every point of the simplex.
    pub fn identity(m: usize) -> Result<Self> {
        Self::from_fn(m, |i, j, k| {
            if i == j {
                if k == i {
                    1.0
                } else {
                    0.0
                }
            } else if k == i || k == j {
                0.5
            } else {
                0.0
            }
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.p[flat(self.m, i, j, k)]
    }

    /// Column `(i, j)`: the offspring distribution of parents `i` and `j`.
    pub fn column(&self, i: usize, j: usize) -> &[f64] {
        let start = flat(self.m, i, j, 0);
        &self.p[start..start + self.m]
    }

    pub fn entries(&self) -> &[f64] {
        &self.p
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.m)
            .map(|i| (0..self.m).map(|j| self.column(i, j).to_vec()).collect())
            .collect()
    }

    /// Evaluates the quadratic map on any vector of length `m`, without
    /// simplex checks. Used for derivatives and Newton iterations.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        quadratic_map(self.m, &self.p, x)
    }

    pub fn apply(&self, x: &SimplexPoint) -> Result<SimplexPoint> {
        if x.dim() != self.m {
            return Err(QsoError::DimensionMismatch {
                expected: self.m,
                got: x.dim(),
            });
        }
        let image = self.eval(x.coords());
        debug_assert!(
            (image.iter().sum::<f64>() - 1.0).abs() <= 1e-12,
            "image left the simplex"
        );
        SimplexPoint::new(image)
    }

    /// First pair `(i, j)`, `i <= j`, with `k` outside `{i, j}` and
    /// `P[i][j][k]` strictly positive. `None` means the Volterra condition
    /// holds at coordinate `k`.
    pub fn outside_witness(&self, k: usize) -> Option<(usize, usize)> {
        for i in 0..self.m {
            if i == k {
                continue;
            }
            for j in i..self.m {
                if j != k && self.get(i, j, k) > POSITIVE_THRESHOLD {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Whether offspring of type `k` can only come from a parent of type `k`.
    pub fn volterra_at(&self, k: usize) -> bool {
        self.outside_witness(k).is_none()
    }

    /// `V(e_i) = e_i`, i.e. `P[i][i][i] = 1` up to [`COLUMN_SUM_TOL`].
    pub fn fixes_vertex(&self, i: usize) -> bool {
        (self.get(i, i, i) - 1.0).abs() <= COLUMN_SUM_TOL
    }
}

fn collect_violations(m: usize, p: &[f64]) -> Vec<Violation> {
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let v = p[flat(m, i, j, k)];
                if !v.is_finite() {
                    out.push(Violation::NonFinite { i, j, k });
                } else if v < 0.0 {
                    out.push(Violation::NegativeEntry { i, j, k });
                }
            }
        }
    }
    for i in 0..m {
        for j in (i + 1)..m {
            for k in 0..m {
                let a = p[flat(m, i, j, k)];
                let b = p[flat(m, j, i, k)];
                if a.is_finite() && b.is_finite() && (a - b).abs() > SYMMETRY_TOL {
                    out.push(Violation::Asymmetry { i, j, k });
                }
            }
        }
    }
    for i in 0..m {
        for j in i..m {
            let col = &p[flat(m, i, j, 0)..flat(m, i, j, 0) + m];
            if col.iter().all(|v| v.is_finite()) {
                let sum: f64 = col.iter().sum();
                if (sum - 1.0).abs() > COLUMN_SUM_TOL {
                    out.push(Violation::ColumnSum { i, j, sum });
                }
            }
        }
    }
    out
}

/// Validates a raw nested array, returning either the operator or every
/// violation found.
pub fn validate(raw: &[Vec<Vec<f64>>]) -> Result<CubicMatrix> {
    CubicMatrix::from_nested(raw)
}

/// A probability vector on `m` species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint {
    coords: Vec<f64>,
}

impl SimplexPoint {
    /// Accepts `coords` if it lies on the simplex up to rounding.
    ///
    /// Coordinates in `[-1e-15, 0)` are clamped to zero. A total within
    /// `1e-9` of one is renormalized; anything further off is rejected.
    pub fn new(mut coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(QsoError::NotOnSimplex("empty coordinate vector".into()));
        }
        for (idx, c) in coords.iter_mut().enumerate() {
            if !c.is_finite() {
                return Err(QsoError::NotOnSimplex(format!(
                    "coordinate {} is not finite",
                    idx + 1
                )));
            }
            if *c < 0.0 {
                if *c >= -CLAMP_TOL {
                    *c = 0.0;
                } else {
                    return Err(QsoError::NotOnSimplex(format!(
                        "coordinate {} is negative ({c:?})",
                        idx + 1
                    )));
                }
            }
        }
        let sum: f64 = coords.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOL {
            return Err(QsoError::NotOnSimplex(format!(
                "coordinates sum to {sum:?}"
            )));
        }
        if sum != 1.0 {
            for c in coords.iter_mut() {
                *c /= sum;
            }
        }
        Ok(SimplexPoint { coords })
    }

    pub fn vertex(m: usize, i: usize) -> Self {
        let mut coords = vec![0.0; m];
        coords[i] = 1.0;
        SimplexPoint { coords }
    }

    pub fn barycenter(m: usize) -> Self {
        SimplexPoint {
            coords: vec![1.0 / m as f64; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.coords
    }

    /// Sup-norm distance.
    pub fn distance(&self, other: &SimplexPoint) -> f64 {
        sup_distance(&self.coords, &other.coords)
    }

    /// Drops the last coordinate, giving the point in the reduced chart.
    pub fn reduced(&self) -> Vec<f64> {
        self.coords[..self.coords.len() - 1].to_vec()
    }

    /// Inverse of [`SimplexPoint::reduced`].
    pub fn from_reduced(y: &[f64]) -> Result<Self> {
        let mut coords = y.to_vec();
        coords.push(1.0 - y.iter().sum::<f64>());
        Self::new(coords)
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = QsoError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexPoint::new(v)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Self {
        p.coords
    }
}

impl std::ops::Index<usize> for SimplexPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// One term `coefficient * x_i * x_j` of the quadratic tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualTerm {
    pub i: usize,
    pub j: usize,
    pub coefficient: f64,
}

/// The operator rewritten as `x'_k = x_k (a_kk + sum_{i != k} a_ki x_i)`,
/// plus a quadratic tail in the other coordinates for every `k >= ell`
/// (0-based), where `a_ki = 2 P[i][k][k] - P[k][k][k]` and `a_kk = P[k][k][k]`.
///
/// The rewrite uses `x_k = 1 - sum_{i != k} x_i`, so it agrees with the
/// operator on the simplex only.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub m: usize,
    pub ell: usize,
    /// Row-major `m x m`, `a[k * m + i]`.
    pub a: Vec<f64>,
    /// Tail terms keyed by the (0-based) output coordinate `k >= ell`.
    pub residual: BTreeMap<usize, Vec<ResidualTerm>>,
}

impl CanonicalForm {
    pub fn coefficient(&self, k: usize, i: usize) -> f64 {
        self.a[k * self.m + i]
    }

    /// `0 <= a_kk <= 1` and `-a_kk <= a_ki <= 2 - a_kk` up to `tol`.
    pub fn bounds_hold(&self, tol: f64) -> bool {
        (0..self.m).all(|k| {
            let akk = self.coefficient(k, k);
            (-tol..=1.0 + tol).contains(&akk)
                && (0..self.m).filter(|&i| i != k).all(|i| {
                    let aki = self.coefficient(k, i);
                    aki >= -akk - tol && aki <= 2.0 - akk + tol
                })
        })
    }

    /// Coordinates `i < ell` with `a_ii > 0`.
    pub fn positive_diagonal_prefix(&self) -> Vec<usize> {
        (0..self.ell)
            .filter(|&i| self.coefficient(i, i) > POSITIVE_THRESHOLD)
            .collect()
    }
}

/// Rewrites `v` in canonical form with the Volterra condition assumed on
/// the first `ell` coordinates. Fails if it does not hold there.
pub fn canonical_form(v: &CubicMatrix, ell: usize) -> Result<CanonicalForm> {
    let m = v.m();
    if ell > m {
        return Err(QsoError::EllOutOfRange { ell, m });
    }
    for k in 0..ell {
        if let Some((i, j)) = v.outside_witness(k) {
            return Err(QsoError::PrefixViolation { i, j, k });
        }
    }
    let mut a = vec![0.0; m * m];
    for k in 0..m {
        let pkk = v.get(k, k, k);
        for i in 0..m {
            a[k * m + i] = if i == k {
                pkk
            } else {
                2.0 * v.get(i, k, k) - pkk
            };
        }
    }
    let mut residual = BTreeMap::new();
    for k in ell..m {
        let mut terms = Vec::new();
        for i in (0..m).filter(|&i| i != k) {
            for j in (0..m).filter(|&j| j != k) {
                let c = v.get(i, j, k);
                if c != 0.0 {
                    terms.push(ResidualTerm {
                        i,
                        j,
                        coefficient: c,
                    });
                }
            }
        }
        residual.insert(k, terms);
    }
    Ok(CanonicalForm {
        m,
        ell,
        a,
        residual,
    })
}

pub fn apply_canonical(cf: &CanonicalForm, x: &SimplexPoint) -> Result<SimplexPoint> {
    if x.dim() != cf.m {
        return Err(QsoError::DimensionMismatch {
            expected: cf.m,
            got: x.dim(),
        });
    }
    let m = cf.m;
    let xs = x.coords();
    let mut out = vec![0.0; m];
    for k in 0..m {
        let mut factor = cf.coefficient(k, k);
        for i in (0..m).filter(|&i| i != k) {
            factor += cf.coefficient(k, i) * xs[i];
        }
        let mut value = xs[k] * factor;
        if let Some(terms) = cf.residual.get(&k) {
            value += terms
                .iter()
                .map(|t| t.coefficient * xs[t.i] * xs[t.j])
                .sum::<f64>();
        }
        out[k] = value;
    }
    SimplexPoint::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity2_nested() -> Vec<Vec<Vec<f64>>> {
        vec![
            vec![vec![1.0, 0.0], vec![0.5, 0.5]],
            vec![vec![0.5, 0.5], vec![0.0, 1.0]],
        ]
    }

    #[test]
    fn identity_type_matrix_is_valid() {
        let v = validate(&identity2_nested()).unwrap();
        assert_eq!(v, CubicMatrix::identity(2).unwrap());
    }

    #[test]
    fn column_sum_error_reported() {
        let mut raw = identity2_nested();
        raw[0][1] = vec![0.6, 0.6];
        raw[1][0] = vec![0.6, 0.6];
        let Err(QsoError::Invalid(v)) = validate(&raw) else {
            panic!("expected violations")
        };
        assert_eq!(v.len(), 1);
        match v[0] {
            Violation::ColumnSum { i: 0, j: 1, sum } => assert!((sum - 1.2).abs() < 1e-15),
            ref other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn asymmetry_error_reported() {
        let mut raw = identity2_nested();
        raw[1][0] = vec![0.4, 0.6];
        let Err(QsoError::Invalid(v)) = validate(&raw) else {
            panic!("expected violations")
        };
        assert!(v.contains(&Violation::Asymmetry { i: 0, j: 1, k: 0 }));
        assert!(v.iter().all(|x| matches!(x, Violation::Asymmetry { .. })));
    }

    #[test]
    fn negative_entry_reported_with_every_other_violation() {
        let mut raw = identity2_nested();
        raw[0][0] = vec![1.5, -0.5];
        raw[1][1] = vec![0.0, 0.9];
        let Err(QsoError::Invalid(v)) = validate(&raw) else {
            panic!("expected violations")
        };
        assert!(v.contains(&Violation::NegativeEntry { i: 0, j: 0, k: 1 }));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::ColumnSum { i: 1, j: 1, .. })));
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            validate(&[vec![vec![1.0]]]),
            Err(QsoError::TooSmall(1))
        ));
        let raw = vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]];
        assert!(matches!(validate(&raw), Err(QsoError::Shape(_))));
    }

    #[test]
    fn identity_fixes_points() {
        let v2 = CubicMatrix::identity(2).unwrap();
        let x = SimplexPoint::new(vec![0.2, 0.8]).unwrap();
        assert!(v2.apply(&x).unwrap().distance(&x) < 1e-15);
        let v3 = CubicMatrix::identity(3).unwrap();
        let x = SimplexPoint::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert!(v3.apply(&x).unwrap().distance(&x) < 1e-15);
    }

    #[test]
    fn apply_rejects_dimension_mismatch() {
        let v = CubicMatrix::identity(3).unwrap();
        let x = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            v.apply(&x),
            Err(QsoError::DimensionMismatch {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn simplex_point_tolerance_policy() {
        let p = SimplexPoint::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((p.coords().iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        assert!(SimplexPoint::new(vec![0.5, 0.5 + 2e-9]).is_err());
        let p = SimplexPoint::new(vec![-1e-16, 1.0]).unwrap();
        assert_eq!(p.coords()[0], 0.0);
        assert!(SimplexPoint::new(vec![-1e-14, 1.0 + 1e-14]).is_err());
        assert!(SimplexPoint::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn identity_canonical_coefficients() {
        let cf = canonical_form(&CubicMatrix::identity(2).unwrap(), 2).unwrap();
        assert_eq!(cf.coefficient(0, 0), 1.0);
        assert_eq!(cf.coefficient(0, 1), 0.0);
        assert_eq!(cf.coefficient(1, 1), 1.0);
        assert_eq!(cf.coefficient(1, 0), 0.0);
        assert!(cf.residual.is_empty());
    }

    #[test]
    fn canonical_form_rejects_prefix_violation() {
        // column (2,2) sends mass to species 1
        let v = CubicMatrix::from_columns(2, |i, j| match (i, j) {
            (0, 0) => vec![1.0, 0.0],
            (0, 1) => vec![0.5, 0.5],
            _ => vec![0.3, 0.7],
        })
        .unwrap();
        assert!(matches!(
            canonical_form(&v, 1),
            Err(QsoError::PrefixViolation { i: 1, j: 1, k: 0 })
        ));
        assert!(canonical_form(&v, 0).is_ok());
        assert!(matches!(
            canonical_form(&v, 3),
            Err(QsoError::EllOutOfRange { ell: 3, m: 2 })
        ));
    }

    #[test]
    fn canonical_vertex_image_matches_diagonal() {
        // e_i with i < ell maps to a_ii on coordinate i
        let v = CubicMatrix::from_columns(3, |i, j| match (i, j) {
            (0, 0) => vec![0.3, 0.0, 0.7],
            (0, 1) => vec![0.5, 0.5, 0.0],
            (0, 2) => vec![0.2, 0.0, 0.8],
            (1, 1) => vec![0.0, 0.6, 0.4],
            (1, 2) => vec![0.0, 0.1, 0.9],
            _ => vec![0.0, 0.0, 1.0],
        })
        .unwrap();
        let cf = canonical_form(&v, 2).unwrap();
        for i in 0..2 {
            let img = apply_canonical(&cf, &SimplexPoint::vertex(3, i)).unwrap();
            assert!((img[i] - cf.coefficient(i, i)).abs() < 1e-15);
            assert!((img[i] - v.get(i, i, i)).abs() < 1e-15);
            let direct = v.apply(&SimplexPoint::vertex(3, i)).unwrap();
            assert!(img.distance(&direct) < 1e-15);
        }
    }
}
