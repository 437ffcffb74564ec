//! Symmetric tridiagonal eigensolver (implicit QL with Wilkinson shifts).

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition of a real symmetric tridiagonal matrix.
///
/// `values` are ascending; `vectors[i][k]` is component `i` of the
/// eigenvector belonging to `values[k]`.
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Diagonalize the symmetric tridiagonal matrix with main diagonal `diag`
/// and first off-diagonal `off` (`off.len() == diag.len() - 1`).
pub fn eigh_tridiagonal(diag: &[f64], off: &[f64]) -> Result<TridiagEigen> {
    let n = diag.len();
    if n == 0 {
        return Ok(TridiagEigen { values: vec![], vectors: vec![] });
    }
    assert_eq!(off.len() + 1, n, "off-diagonal must have n-1 entries");

    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    let mut z = vec![vec![0.0; n]; n];
    for (i, row) in z.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::NoConvergence { iterations: MAX_SWEEPS, index: l });
            }

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    let f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = (0..n)
        .map(|i| order.iter().map(|&k| z[i][k]).collect())
        .collect();
    Ok(TridiagEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let eig = eigh_tridiagonal(&[6.5, 6.5], &[0.25]).unwrap();
        assert!((eig.values[0] - 6.25).abs() < 1e-14);
        assert!((eig.values[1] - 6.75).abs() < 1e-14);
    }

    #[test]
    fn diagonal_input_is_untouched() {
        let eig = eigh_tridiagonal(&[3.0, 1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(eig.values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn reconstructs_matrix() {
        let diag = [1.0, -2.0, 0.5, 3.0, 0.0];
        let off = [0.3, -1.1, 0.7, 2.0];
        let eig = eigh_tridiagonal(&diag, &off).unwrap();
        let n = diag.len();
        for i in 0..n {
            for j in 0..n {
                let a: f64 = (0..n)
                    .map(|k| eig.vectors[i][k] * eig.values[k] * eig.vectors[j][k])
                    .sum();
                let want = if i == j {
                    diag[i]
                } else if i + 1 == j {
                    off[i]
                } else if j + 1 == i {
                    off[j]
                } else {
                    0.0
                };
                assert!((a - want).abs() < 1e-12, "({i},{j}) {a} vs {want}");
            }
        }
    }
}
