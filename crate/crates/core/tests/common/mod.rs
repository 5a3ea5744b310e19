//! Reference computations written independently of the library: plain
//! loops over nested arrays, central differences and brute-force counting.
#![allow(dead_code)]

use ell_volterra::CubicMatrix;

/// `x'_k = sum_{i,j} P[i][j][k] x_i x_j` over the nested array.
pub fn naive_eval(p: &[Vec<Vec<f64>>], x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut out = vec![0.0; m];
    for (k, o) in out.iter_mut().enumerate() {
        for i in 0..m {
            for j in 0..m {
                *o += p[i][j][k] * x[i] * x[j];
            }
        }
    }
    out
}

pub const FD_STEP: f64 = 1e-6;

fn central_difference(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], rows: usize) -> Vec<Vec<f64>> {
    let mut jac = vec![vec![0.0; x.len()]; rows];
    for i in 0..x.len() {
        let mut hi = x.to_vec();
        let mut lo = x.to_vec();
        hi[i] += FD_STEP;
        lo[i] -= FD_STEP;
        let (fh, fl) = (f(&hi), f(&lo));
        for k in 0..rows {
            jac[k][i] = (fh[k] - fl[k]) / (2.0 * FD_STEP);
        }
    }
    jac
}

/// Finite-difference Jacobian of the map on all `m` coordinates.
pub fn fd_jacobian_full(v: &CubicMatrix, x: &[f64]) -> Vec<Vec<f64>> {
    let p = v.to_nested();
    central_difference(&|y| naive_eval(&p, y), x, x.len())
}

/// Finite-difference Jacobian in `(x_1, ..., x_{m-1})` with
/// `x_m = 1 - sum` substituted.
pub fn fd_jacobian_reduced(v: &CubicMatrix, x: &[f64]) -> Vec<Vec<f64>> {
    let p = v.to_nested();
    let m = x.len();
    let f = |y: &[f64]| {
        let mut full = y.to_vec();
        full.push(1.0 - y.iter().sum::<f64>());
        naive_eval(&p, &full)
    };
    central_difference(&f, &x[..m - 1], m - 1)
}

/// Eigenvalues of a real 2x2 matrix as `(re, im)` pairs.
pub fn eig2(j: &[Vec<f64>]) -> [(f64, f64); 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [(tr / 2.0 + s, 0.0), (tr / 2.0 - s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [(tr / 2.0, s), (tr / 2.0, -s)]
    }
}

/// "attracting", "repelling", "saddle" or "non-hyperbolic" from moduli.
pub fn hyperbolic_type(moduli: &[f64], margin: f64) -> &'static str {
    if moduli.iter().any(|r| (r - 1.0).abs() <= margin) {
        "non-hyperbolic"
    } else if moduli.iter().all(|&r| r < 1.0) {
        "attracting"
    } else if moduli.iter().all(|&r| r > 1.0) {
        "repelling"
    } else {
        "saddle"
    }
}

/// Counts 0/1 symmetric stochastic arrays satisfying the Volterra
/// condition on `0..ell` by trying every row for every column `i <= j`.
pub fn brute_force_extremal_count(m: usize, ell: usize) -> u64 {
    let columns: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let mut rows = vec![0usize; columns.len()];
    let mut count = 0u64;
    loop {
        let ok = columns
            .iter()
            .zip(&rows)
            .all(|(&(i, j), &k)| k >= ell || k == i || k == j);
        if ok {
            count += 1;
        }
        let mut pos = 0;
        loop {
            if pos == rows.len() {
                return count;
            }
            rows[pos] += 1;
            if rows[pos] < m {
                break;
            }
            rows[pos] = 0;
            pos += 1;
        }
    }
}

pub fn sup_norm_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
