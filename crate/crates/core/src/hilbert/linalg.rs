//! Small dense helpers on top of nalgebra.

use nalgebra::DVector;
use num_complex::Complex64 as C64;

use super::CMat;
use crate::error::{Error, Result};

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_error(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitian_part(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vecs)
}

/// Rebuild `V diag(f(lambda)) V^dag`.
pub fn spectral_map(values: &[f64], vectors: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let d = DVector::from_iterator(values.len(), values.iter().map(|&l| C64::new(f(l), 0.0)));
    let scaled = CMat::from_fn(vectors.nrows(), vectors.ncols(), |i, j| vectors[(i, j)] * d[j]);
    scaled * vectors.adjoint()
}

/// Square root of a positive semidefinite matrix. Eigenvalues below `-tol`
/// are rejected; small negative ones are clipped.
pub fn sqrt_psd(m: &CMat, tol: f64) -> Result<CMat> {
    let (vals, vecs) = eigh(m);
    if let Some(&min) = vals.first() {
        if min < -tol {
            return Err(Error::NonPhysical(format!("negative eigenvalue {min:.3e}")));
        }
    }
    Ok(spectral_map(&vals, &vecs, |l| l.max(0.0).sqrt()))
}

/// `exp(-i 2 pi H t)` for Hermitian `H` in GHz and `t` in ns.
pub fn unitary_propagator(h: &CMat, t: f64) -> CMat {
    let (vals, vecs) = eigh(h);
    let d: Vec<C64> = vals.iter().map(|&e| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * e * t)).collect();
    let scaled = CMat::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * d[j]);
    scaled * vecs.adjoint()
}

/// Matrix exponential of a general complex matrix.
pub fn expm(m: &CMat) -> CMat {
    m.clone().exp()
}

/// Closest density matrix (PSD, unit trace) in Frobenius norm: eigenvalues
/// are projected onto the probability simplex.
pub fn project_to_density(m: &CMat) -> CMat {
    let (vals, vecs) = eigh(m);
    let p = project_simplex(&vals);
    let d = DVector::from_iterator(p.len(), p.iter().map(|&l| C64::new(l, 0.0)));
    let scaled = CMat::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * d[j]);
    scaled * vecs.adjoint()
}

/// Euclidean projection of `v` onto `{x >= 0, sum x = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Process fidelity `|Tr(U^dag V)|^2 / d^2` of two unitaries.
pub fn unitary_overlap(u: &CMat, v: &CMat) -> f64 {
    let d = u.nrows() as f64;
    (u.adjoint() * v).trace().norm_sqr() / (d * d)
}
