//! Class membership, invariance predicates and the extremal structure of
//! the sets `V_ell`.
//!
//! An operator satisfies the Volterra condition at coordinate `k` when no
//! pair of parents outside `{k}` can produce offspring `k`. It lies in
//! `V_ell` when the condition holds for the first `ell` coordinates and
//! every later coordinate has a witness pair that breaks it.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::Rng;

use crate::error::{QsoError, Result};
use crate::qso::{canonical_form, CubicMatrix, SimplexPoint};
use crate::sample::{allowed_rows, supported_point, uniform_point};
use crate::POSITIVE_THRESHOLD;

/// Largest enumerable dimension.
pub const ENUMERATION_LIMIT: usize = 4;
/// Image coordinates of a face must stay below this.
pub const FACE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EllClassification {
    pub m: usize,
    pub ell: usize,
    /// Every coordinate at which the Volterra condition holds.
    pub volterra_coords: Vec<usize>,
    /// For each `k >= ell` that breaks the condition, the first pair
    /// `(i, j)`, `i <= j`, `k` not in `{i, j}`, with `P[i][j][k] > 0`.
    pub witnesses: BTreeMap<usize, (usize, usize)>,
    pub is_volterra: bool,
    /// Coordinates `k > ell` where the condition holds anyway. Non-empty
    /// means the operator has no witness for some later coordinate and so
    /// sits in no class `V_ell` in the strict sense.
    pub non_prefix_volterra_coords: Vec<usize>,
}

impl EllClassification {
    pub fn strictly_classified(&self) -> bool {
        self.non_prefix_volterra_coords.is_empty()
    }
}

/// Classifies `v` using the coordinate order as given; no relabelling is
/// attempted.
pub fn detect_ell(v: &CubicMatrix) -> EllClassification {
    let m = v.m();
    let per_coord: Vec<Option<(usize, usize)>> = (0..m).map(|k| v.outside_witness(k)).collect();
    let ell = per_coord.iter().take_while(|w| w.is_none()).count();
    let volterra_coords = (0..m).filter(|&k| per_coord[k].is_none()).collect();
    let witnesses = (ell..m)
        .filter_map(|k| per_coord[k].map(|w| (k, w)))
        .collect();
    let non_prefix_volterra_coords = (ell..m).filter(|&k| per_coord[k].is_none()).collect();
    EllClassification {
        m,
        ell,
        volterra_coords,
        witnesses,
        is_volterra: ell == m,
        non_prefix_volterra_coords,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceCheck {
    pub invariant: bool,
    /// Number of points mapped.
    pub tested: usize,
    pub counterexample: Option<SimplexPoint>,
    pub image: Option<SimplexPoint>,
}

impl InvarianceCheck {
    fn run(
        points: impl Iterator<Item = SimplexPoint>,
        v: &CubicMatrix,
        ok: impl Fn(&SimplexPoint) -> bool,
    ) -> Result<Self> {
        let mut tested = 0;
        for x in points {
            tested += 1;
            let y = v.apply(&x)?;
            if !ok(&y) {
                return Ok(InvarianceCheck {
                    invariant: false,
                    tested,
                    counterexample: Some(x),
                    image: Some(y),
                });
            }
        }
        Ok(InvarianceCheck {
            invariant: true,
            tested,
            counterexample: None,
            image: None,
        })
    }
}

fn check_indices(m: usize, set: &[usize]) -> Result<()> {
    match set.iter().find(|&&i| i >= m) {
        Some(&index) => Err(QsoError::IndexOutOfRange { index, m }),
        None => Ok(()),
    }
}

/// Tests whether the face `{x : x_i = 0 for i in face}` is mapped into
/// itself. The face's vertices are tried first, then `samples` uniform
/// points of its relative interior.
pub fn check_face_invariance<R: Rng + ?Sized>(
    v: &CubicMatrix,
    face: &[usize],
    samples: usize,
    rng: &mut R,
) -> Result<InvarianceCheck> {
    let m = v.m();
    check_indices(m, face)?;
    let support: Vec<usize> = (0..m).filter(|i| !face.contains(i)).collect();
    if support.is_empty() {
        return Ok(InvarianceCheck {
            invariant: true,
            tested: 0,
            counterexample: None,
            image: None,
        });
    }
    let vertices = support
        .clone()
        .into_iter()
        .map(|i| SimplexPoint::vertex(m, i));
    let random: Vec<SimplexPoint> = (0..samples)
        .map(|_| supported_point(m, &support, rng))
        .collect();
    InvarianceCheck::run(vertices.chain(random), v, |y| {
        face.iter().all(|&i| y[i] <= FACE_TOL)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivityCheck {
    pub check: InvarianceCheck,
    /// Indices `i < ell` in the tested set with `P[i][i][i] = 0`, for which
    /// invariance is not expected.
    pub outside_hypothesis: Vec<usize>,
}

/// Tests whether `{x : x_i > 0 for i in set}` is mapped into itself.
///
/// Probes the barycentre of `set`, then alternates uniform interior points
/// with points supported on `set` plus a random part of its complement.
pub fn check_positivity_invariance<R: Rng + ?Sized>(
    v: &CubicMatrix,
    set: &[usize],
    samples: usize,
    rng: &mut R,
) -> Result<PositivityCheck> {
    let m = v.m();
    check_indices(m, set)?;
    let ell = detect_ell(v).ell;
    let cf = canonical_form(v, ell)?;
    let admissible = cf.positive_diagonal_prefix();
    let outside_hypothesis = set
        .iter()
        .copied()
        .filter(|&i| i < ell && !admissible.contains(&i))
        .collect();

    let mut points = Vec::with_capacity(samples + 1);
    if !set.is_empty() {
        let mut bary = vec![0.0; m];
        for &i in set {
            bary[i] = 1.0 / set.len() as f64;
        }
        points.push(SimplexPoint::new(bary)?);
    }
    for n in 0..samples {
        if n % 2 == 0 || set.is_empty() {
            points.push(uniform_point(m, rng));
        } else {
            let mut support: Vec<usize> = set.to_vec();
            support.extend((0..m).filter(|i| !set.contains(i) && rng.random_bool(0.5)));
            support.sort_unstable();
            support.dedup();
            points.push(supported_point(m, &support, rng));
        }
    }
    let check = InvarianceCheck::run(points.into_iter(), v, |y| set.iter().all(|&i| y[i] > 0.0))?;
    Ok(PositivityCheck {
        check,
        outside_hypothesis,
    })
}

/// `lambda * V1 + (1 - lambda) * V2`, entrywise.
pub fn convex_combine(v1: &CubicMatrix, v2: &CubicMatrix, lambda: f64) -> Result<CubicMatrix> {
    if v1.m() != v2.m() {
        return Err(QsoError::DimensionMismatch {
            expected: v1.m(),
            got: v2.m(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(QsoError::BadWeight(lambda));
    }
    let mu = 1.0 - lambda;
    let entries = v1
        .entries()
        .iter()
        .zip(v2.entries())
        .map(|(&a, &b)| if a == b { a } else { lambda * a + mu * b })
        .collect();
    CubicMatrix::new(v1.m(), entries)
}

/// Which set of operators an extremal census refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremalClass {
    /// Operators satisfying the Volterra condition on the first `ell`
    /// coordinates.
    Ell(usize),
    /// All QSOs.
    All,
}

impl ExtremalClass {
    fn prefix(self) -> usize {
        match self {
            ExtremalClass::Ell(ell) => ell,
            ExtremalClass::All => 0,
        }
    }

    fn check(self, m: usize) -> Result<()> {
        if m < 2 {
            return Err(QsoError::TooSmall(m));
        }
        match self {
            ExtremalClass::Ell(ell) if ell > m => Err(QsoError::EllOutOfRange { ell, m }),
            _ => Ok(()),
        }
    }
}

fn pow(base: usize, exp: usize) -> BigUint {
    BigUint::from(base).pow(exp as u32)
}

/// Number of extremal (0/1) operators.
///
/// `2^{m(m-1)/2}` for `ell = m`; otherwise
/// `(m-ell)^{(m-ell)(m-ell+1)/2} (m-ell+1)^{(m-ell+1) ell} (m-ell+2)^{ell(ell-1)/2}`;
/// and `m^{m(m+1)/2}` for all QSOs.
pub fn extremal_count(m: usize, class: ExtremalClass) -> Result<BigUint> {
    class.check(m)?;
    Ok(match class {
        ExtremalClass::All => pow(m, m * (m + 1) / 2),
        ExtremalClass::Ell(ell) if ell == m => pow(2, m * (m - 1) / 2),
        ExtremalClass::Ell(ell) => {
            let h = m - ell;
            pow(h, h * (h + 1) / 2)
                * pow(h + 1, (h + 1) * ell)
                * pow(h + 2, ell * ell.saturating_sub(1) / 2)
        }
    })
}

/// Lazily walks every 0/1 operator of a class, columns `(i, j)`, `i <= j`,
/// in lexicographic order of their row choices.
#[derive(Debug, Clone)]
pub struct ExtremalIter {
    m: usize,
    columns: Vec<(usize, usize)>,
    choices: Vec<Vec<usize>>,
    odometer: Vec<usize>,
    done: bool,
}

impl ExtremalIter {
    pub fn new(m: usize, class: ExtremalClass) -> Result<Self> {
        class.check(m)?;
        let ell = class.prefix();
        let columns: Vec<(usize, usize)> =
            (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
        let choices: Vec<Vec<usize>> = columns
            .iter()
            .map(|&(i, j)| allowed_rows(m, ell, i, j))
            .collect();
        let done = choices.iter().any(|c| c.is_empty());
        Ok(ExtremalIter {
            m,
            odometer: vec![0; columns.len()],
            columns,
            choices,
            done,
        })
    }

    fn current(&self) -> CubicMatrix {
        let m = self.m;
        let mut entries = vec![0.0; m * m * m];
        for (c, &(i, j)) in self.columns.iter().enumerate() {
            let k = self.choices[c][self.odometer[c]];
            entries[(i * m + j) * m + k] = 1.0;
            entries[(j * m + i) * m + k] = 1.0;
        }
        CubicMatrix::new(m, entries).expect("0/1 columns with a single one are stochastic")
    }

    fn advance(&mut self) {
        for pos in (0..self.odometer.len()).rev() {
            self.odometer[pos] += 1;
            if self.odometer[pos] < self.choices[pos].len() {
                return;
            }
            self.odometer[pos] = 0;
        }
        self.done = true;
    }
}

impl Iterator for ExtremalIter {
    type Item = CubicMatrix;

    fn next(&mut self) -> Option<CubicMatrix> {
        if self.done {
            return None;
        }
        let out = self.current();
        self.advance();
        Some(out)
    }
}

/// Materializes every extremal operator; refused for `m > 4`.
pub fn enumerate_extremals(m: usize, class: ExtremalClass) -> Result<Vec<CubicMatrix>> {
    if m > ENUMERATION_LIMIT {
        return Err(QsoError::SizeGuardExceeded {
            m,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(ExtremalIter::new(m, class)?.collect())
}

#[derive(Debug, Clone)]
pub struct ExtremalCensus {
    pub m: usize,
    pub class: ExtremalClass,
    pub predicted_count: BigUint,
    pub enumerated: Option<Vec<CubicMatrix>>,
}

pub fn census(m: usize, class: ExtremalClass, enumerate: bool) -> Result<ExtremalCensus> {
    let predicted_count = extremal_count(m, class)?;
    let enumerated = if enumerate {
        Some(enumerate_extremals(m, class)?)
    } else {
        None
    };
    Ok(ExtremalCensus {
        m,
        class,
        predicted_count,
        enumerated,
    })
}

/// A fractional operator written as `alpha * first + (1 - alpha) * second`.
#[derive(Debug, Clone)]
pub struct Split {
    pub first: CubicMatrix,
    pub second: CubicMatrix,
    pub alpha: f64,
}

/// Splits `v` at a fractional entry `alpha = P[i0][j0][k0]`: `first` puts
/// column `(i0, j0)` entirely on `k0`, `second` removes `k0` from that
/// column and rescales the rest by `1 / (1 - alpha)`.
pub fn split_at_entry(v: &CubicMatrix, i0: usize, j0: usize, k0: usize) -> Result<Split> {
    let m = v.m();
    for index in [i0, j0, k0] {
        if index >= m {
            return Err(QsoError::IndexOutOfRange { index, m });
        }
    }
    let alpha = v.get(i0, j0, k0);
    if alpha <= 0.0 || alpha >= 1.0 {
        return Err(QsoError::EntryNotFractional {
            i: i0,
            j: j0,
            k: k0,
            value: alpha,
        });
    }
    let rest = 1.0 - alpha;
    let mut first = v.entries().to_vec();
    let mut second = v.entries().to_vec();
    for (a, b) in [(i0, j0), (j0, i0)] {
        for k in 0..m {
            let idx = (a * m + b) * m + k;
            if k == k0 {
                first[idx] = 1.0;
                second[idx] = 0.0;
            } else {
                first[idx] = 0.0;
                second[idx] = v.get(a, b, k) / rest;
            }
        }
    }
    Ok(Split {
        first: CubicMatrix::new(m, first)?,
        second: CubicMatrix::new(m, second)?,
        alpha,
    })
}

/// Whether `P[i][j][k] > 0` for some entry forced to zero by the Volterra
/// condition on `0..ell`.
pub fn breaks_prefix(v: &CubicMatrix, ell: usize) -> bool {
    (0..ell.min(v.m())).any(|k| !v.volterra_at(k))
}

/// Entries of `v` that are strictly between 0 and 1.
pub fn fractional_entries(v: &CubicMatrix) -> Vec<(usize, usize, usize)> {
    let m = v.m();
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let p = v.get(i, j, k);
                if p > POSITIVE_THRESHOLD && p < 1.0 {
                    out.push((i, j, k));
                }
            }
        }
    }
    out
}
