//! Random simplex points and random operators for sampling-based checks.
//!
//! Everything takes an explicit RNG so callers control seeding.

use rand::Rng;
use rand_distr::Exp1;

use crate::qso::{CubicMatrix, SimplexPoint};

/// Uniform weights on `n` atoms (a flat Dirichlet draw).
pub fn dirichlet_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Uniform point of `S^{m-1}`.
pub fn uniform_point<R: Rng + ?Sized>(m: usize, rng: &mut R) -> SimplexPoint {
    supported_point(m, &(0..m).collect::<Vec<_>>(), rng)
}

/// Uniform point whose support is exactly `support` (0-based).
pub fn supported_point<R: Rng + ?Sized>(m: usize, support: &[usize], rng: &mut R) -> SimplexPoint {
    let w = dirichlet_weights(support.len(), rng);
    let mut coords = vec![0.0; m];
    for (&i, wi) in support.iter().zip(w) {
        coords[i] = wi;
    }
    SimplexPoint::new(coords).expect("dirichlet weights lie on the simplex")
}

/// Rows where column `(i, j)` may carry mass if the Volterra condition is
/// imposed on coordinates `0..ell`.
pub fn allowed_rows(m: usize, ell: usize, i: usize, j: usize) -> Vec<usize> {
    (0..m).filter(|&k| k >= ell || k == i || k == j).collect()
}

/// A random operator satisfying the Volterra condition on `0..ell`.
///
/// Each column is, with probability `vertex_prob`, a single 1 in a random
/// allowed row, and otherwise a flat Dirichlet draw over the allowed rows.
/// `ell = 0` gives an unconstrained operator.
pub fn random_operator<R: Rng + ?Sized>(
    m: usize,
    ell: usize,
    vertex_prob: f64,
    rng: &mut R,
) -> CubicMatrix {
    CubicMatrix::from_columns(m, |i, j| {
        let rows = allowed_rows(m, ell, i, j);
        let mut col = vec![0.0; m];
        if rng.random_bool(vertex_prob) {
            col[rows[rng.random_range(0..rows.len())]] = 1.0;
        } else {
            for (&k, w) in rows.iter().zip(dirichlet_weights(rows.len(), rng)) {
                col[k] = w;
            }
        }
        col
    })
    .expect("columns are probability vectors")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_operators_respect_prefix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let v = random_operator(4, 2, 0.3, &mut rng);
            assert!(v.volterra_at(0) && v.volterra_at(1));
        }
    }

    #[test]
    fn supported_point_has_requested_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = supported_point(5, &[1, 3], &mut rng);
        assert_eq!(p[0], 0.0);
        assert_eq!(p[2], 0.0);
        assert_eq!(p[4], 0.0);
        assert!(p[1] > 0.0 && p[3] > 0.0);
    }
}
